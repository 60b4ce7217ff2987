// Copyright 2026 The icontrol Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Two-level dynamics under piecewise-constant microwave drive.
//
// Basis order is (|down>, |up>). |down> sits on the -k pole of the Bloch
// sphere, |up> on the +k pole. Detuning is qubit minus drive frequency.
// Everything in this header works in angular units (rad/s); conversion
// from Hz happens at the edges of the library.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace icontrol {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Converts a frequency in Hz to angular frequency.
inline constexpr double hz_to_rad(double hz) { return kTwoPi * hz; }
inline constexpr double rad_to_hz(double rad_s) { return rad_s / kTwoPi; }

/// 2x2 complex matrix, row-major. Nominally unitary; the type does not
/// enforce it so that derivative matrices can share the arithmetic.
struct Unitary2 {
    std::array<cplx, 4> e{cplx{1.0}, cplx{0.0}, cplx{0.0}, cplx{1.0}};

    static Unitary2 identity() { return {}; }
    static Unitary2 zero() { return {{cplx{}, cplx{}, cplx{}, cplx{}}}; }

    const cplx& operator()(int r, int c) const { return e[2 * r + c]; }
    cplx& operator()(int r, int c) { return e[2 * r + c]; }

    Unitary2 adjoint() const {
        return {{std::conj(e[0]), std::conj(e[2]), std::conj(e[1]), std::conj(e[3])}};
    }
    cplx trace() const { return e[0] + e[3]; }
    cplx det() const { return e[0] * e[3] - e[1] * e[2]; }

    friend Unitary2 operator*(const Unitary2& a, const Unitary2& b) {
        return {{a.e[0] * b.e[0] + a.e[1] * b.e[2], a.e[0] * b.e[1] + a.e[1] * b.e[3],
                 a.e[2] * b.e[0] + a.e[3] * b.e[2], a.e[2] * b.e[1] + a.e[3] * b.e[3]}};
    }
    friend Unitary2 operator*(cplx s, const Unitary2& a) {
        return {{s * a.e[0], s * a.e[1], s * a.e[2], s * a.e[3]}};
    }
    friend Unitary2 operator+(const Unitary2& a, const Unitary2& b) {
        return {{a.e[0] + b.e[0], a.e[1] + b.e[1], a.e[2] + b.e[2], a.e[3] + b.e[3]}};
    }
    friend Unitary2 operator-(const Unitary2& a, const Unitary2& b) {
        return {{a.e[0] - b.e[0], a.e[1] - b.e[1], a.e[2] - b.e[2], a.e[3] - b.e[3]}};
    }
    friend bool operator==(const Unitary2&, const Unitary2&) = default;
};

/// Frobenius norm.
inline double frobenius_norm(const Unitary2& m) {
    double s = 0.0;
    for (const auto& z : m.e) s += std::norm(z);
    return std::sqrt(s);
}

/// Largest entrywise modulus of a - b.
inline double max_entry_diff(const Unitary2& a, const Unitary2& b) {
    double d = 0.0;
    for (int i = 0; i < 4; ++i) d = std::max(d, std::abs(a.e[i] - b.e[i]));
    return d;
}

/// ||U^dag U - I||_F
inline double unitarity_error(const Unitary2& u) {
    return frobenius_norm(u.adjoint() * u - Unitary2::identity());
}

// Pauli matrices in the (down, up) basis.
namespace pauli {
inline Unitary2 x() { return {{cplx{0}, cplx{1}, cplx{1}, cplx{0}}}; }
inline Unitary2 y() { return {{cplx{0}, cplx{0, 1}, cplx{0, -1}, cplx{0}}}; }
inline Unitary2 z() { return {{cplx{-1}, cplx{0}, cplx{0}, cplx{1}}}; }
}  // namespace pauli

/// exp(-i (angle/2) n.sigma) for a unit axis n = (nx, ny, nz).
inline Unitary2 rotation(double nx, double ny, double nz, double angle) {
    const double c = std::cos(0.5 * angle);
    const double s = std::sin(0.5 * angle);
    return {{cplx{c, s * nz}, cplx{s * ny, -s * nx}, cplx{-s * ny, -s * nx}, cplx{c, -s * nz}}};
}

struct SpinState {
    cplx down{1.0};
    cplx up{0.0};

    static SpinState spin_down() { return {cplx{1.0}, cplx{0.0}}; }
    static SpinState spin_up() { return {cplx{0.0}, cplx{1.0}}; }

    /// Pure state with Bloch polar angle theta (from +k) and azimuth phi.
    static SpinState from_bloch(double theta, double phi) {
        return {cplx{std::sin(0.5 * theta)}, std::polar(std::cos(0.5 * theta), phi)};
    }

    double norm2() const { return std::norm(down) + std::norm(up); }
    double p_up() const { return std::norm(up); }
    double p_down() const { return std::norm(down); }

    std::array<double, 3> bloch() const {
        const cplx c = std::conj(up) * down;
        return {2.0 * c.real(), 2.0 * c.imag(), std::norm(up) - std::norm(down)};
    }
};

/// <a|b>
inline cplx inner(const SpinState& a, const SpinState& b) {
    return std::conj(a.down) * b.down + std::conj(a.up) * b.up;
}

inline SpinState apply(const Unitary2& u, const SpinState& s) {
    return {u.e[0] * s.down + u.e[1] * s.up, u.e[2] * s.down + u.e[3] * s.up};
}

/// Wraps an angle into [0, 2pi).
inline double wrap_phase(double phi) {
    double r = std::fmod(phi, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

/// Square pulse: constant Rabi rate and phase for a fixed duration.
///
/// The Rabi rate is held as a frequency in Hz so that the text exchange
/// format round-trips exactly; rabi() reports it in rad/s.
class PulseSegment {
public:
    /// rabi is the on-resonance Rabi rate in rad/s.
    PulseSegment(double duration_s, double rabi, double phase)
        : PulseSegment(duration_s, rabi / kTwoPi, phase, HzTag{}) {}

    static PulseSegment from_hz(double duration_s, double rabi_hz, double phase) {
        return PulseSegment(duration_s, rabi_hz, phase, HzTag{});
    }

    double duration() const { return duration_; }
    double rabi() const { return kTwoPi * rabi_hz_; }
    double rabi_hz() const { return rabi_hz_; }
    double phase() const { return phase_; }

    friend bool operator==(const PulseSegment&, const PulseSegment&) = default;

private:
    struct HzTag {};
    PulseSegment(double duration_s, double rabi_hz, double phase, HzTag)
        : duration_(duration_s), rabi_hz_(rabi_hz), phase_(phase) {
        if (!std::isfinite(duration_s) || !std::isfinite(rabi_hz) || !std::isfinite(phase))
            throw std::invalid_argument("PulseSegment: non-finite field");
        if (duration_s <= 0.0) throw std::invalid_argument("PulseSegment: duration must be > 0");
        if (rabi_hz < 0.0) throw std::invalid_argument("PulseSegment: rabi must be >= 0");
        phase_ = wrap_phase(phase);
    }

    double duration_;
    double rabi_hz_;
    double phase_;
};

/// Ordered segments; the first element acts first in time.
class PulseTrain {
public:
    PulseTrain() = default;
    explicit PulseTrain(std::vector<PulseSegment> segments, std::string label = {})
        : segments_(std::move(segments)), label_(std::move(label)) {}

    const std::vector<PulseSegment>& segments() const { return segments_; }
    const std::string& label() const { return label_; }
    void set_label(std::string label) { label_ = std::move(label); }
    std::size_t size() const { return segments_.size(); }
    bool empty() const { return segments_.empty(); }

    double total_duration() const {
        double t = 0.0;
        for (const auto& s : segments_) t += s.duration();
        return t;
    }

    /// Sum of Rabi rate times duration (the resonant pulse area).
    double area() const {
        double a = 0.0;
        for (const auto& s : segments_) a += s.rabi() * s.duration();
        return a;
    }

    friend bool operator==(const PulseTrain&, const PulseTrain&) = default;

private:
    std::vector<PulseSegment> segments_;
    std::string label_;
};

/// Concatenation: `first` acts before `second`.
inline PulseTrain concatenate(const PulseTrain& first, const PulseTrain& second,
                              std::string label = {}) {
    std::vector<PulseSegment> segs = first.segments();
    segs.insert(segs.end(), second.segments().begin(), second.segments().end());
    return PulseTrain(std::move(segs), std::move(label));
}

/// Propagator of one square pulse at the given detuning (rad/s).
///
/// Rotation by theta = Omega*T about q = (Omega0 cos phi, Omega0 sin phi, delta)/Omega
/// with Omega = sqrt(Omega0^2 + delta^2). Returns the identity when Omega == 0.
inline Unitary2 segment_propagator(const PulseSegment& seg, double detuning) {
    if (!std::isfinite(detuning))
        throw std::invalid_argument("segment_propagator: non-finite detuning");
    const double rabi = seg.rabi();
    const double omega = std::sqrt(rabi * rabi + detuning * detuning);
    if (omega == 0.0) return Unitary2::identity();
    const double half = 0.5 * omega * seg.duration();
    const double c = std::cos(half);
    const double s = std::sin(half);
    const double sr = s * rabi / omega;
    const double phase = seg.phase();
    const double sx = phase == 0.0 ? sr : sr * std::cos(phase);
    const double sy = phase == 0.0 ? 0.0 : sr * std::sin(phase);
    const double sz = s * detuning / omega;
    return {{cplx{c, sz}, cplx{sy, -sx}, cplx{-sy, -sx}, cplx{c, -sz}}};
}

/// Time-ordered product U_N ... U_2 U_1.
inline Unitary2 train_propagator(const PulseTrain& train, double detuning) {
    if (train.empty()) throw std::invalid_argument("train_propagator: empty train");
    Unitary2 u = Unitary2::identity();
    for (const auto& seg : train.segments()) u = segment_propagator(seg, detuning) * u;
    return u;
}

/// sqrt(Tr[(W-U)^dag (W-U)]); sensitive to global phase.
inline double hs_cost_distance(const Unitary2& u, const Unitary2& w) {
    return frobenius_norm(w - u);
}

/// |Tr(U^dag W)| / 2; insensitive to global phase.
inline double fidelity_phase_insensitive(const Unitary2& u, const Unitary2& w) {
    return std::abs((u.adjoint() * w).trace()) / 2.0;
}

/// Multiplies Rabi rates by kappa and divides durations by kappa.
inline PulseTrain rescale_train(const PulseTrain& train, double kappa) {
    if (!(kappa > 0.0) || !std::isfinite(kappa))
        throw std::invalid_argument("rescale_train: kappa must be a finite positive number");
    std::vector<PulseSegment> segs;
    segs.reserve(train.size());
    for (const auto& s : train.segments())
        segs.push_back(PulseSegment::from_hz(s.duration() / kappa, s.rabi_hz() * kappa, s.phase()));
    return PulseTrain(std::move(segs), train.label());
}

/// Adds phi to every segment phase. Rotates the implemented gate about k by phi.
inline PulseTrain shift_global_phase(const PulseTrain& train, double phi) {
    std::vector<PulseSegment> segs;
    segs.reserve(train.size());
    for (const auto& s : train.segments())
        segs.push_back(PulseSegment::from_hz(s.duration(), s.rabi_hz(), s.phase() + phi));
    return PulseTrain(std::move(segs), train.label());
}

/// Reverses segment order and adds pi to every phase. The result evaluated
/// at detuning -delta is the inverse of the original at +delta.
inline PulseTrain time_reversed(const PulseTrain& train) {
    std::vector<PulseSegment> segs;
    segs.reserve(train.size());
    for (auto it = train.segments().rbegin(); it != train.segments().rend(); ++it)
        segs.push_back(PulseSegment::from_hz(it->duration(), it->rabi_hz(), it->phase() + std::numbers::pi));
    return PulseTrain(std::move(segs), train.label());
}

}  // namespace icontrol
