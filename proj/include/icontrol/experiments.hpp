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

// Two-pulse Ramsey interference with fringe fits, and randomized
// benchmarking with alternating computational and Pauli gates.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "icontrol/imaging.hpp"
#include "icontrol/lattice.hpp"
#include "icontrol/least_squares.hpp"
#include "icontrol/parallel.hpp"
#include "icontrol/rng.hpp"
#include "icontrol/su2.hpp"

namespace icontrol {

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Wraps an angle in degrees to (-180, 180].
inline double wrap_deg(double deg) {
    double w = std::fmod(deg, 360.0);
    if (w <= -180.0) w += 360.0;
    if (w > 180.0) w -= 360.0;
    return w;
}

// ---------------------------------------------------------------- Ramsey

struct FringeSample {
    double phase_deg = 0.0;
    int band = 0;
    double p_down = 0.0;
    double std_err = 0.0;
};

struct FringeCurve {
    std::vector<FringeSample> samples;
    std::vector<std::string> band_names;
    std::vector<double> band_centers_hz;

    std::vector<FringeSample> band(int b) const {
        std::vector<FringeSample> out;
        for (const auto& s : samples)
            if (s.band == b) out.push_back(s);
        return out;
    }
};

/// 0, 15, ..., 345 degrees.
inline std::vector<double> default_phase_grid(int steps = 24) {
    if (steps < 1) throw std::invalid_argument("default_phase_grid: steps must be >= 1");
    std::vector<double> g;
    for (int i = 0; i < steps; ++i) g.push_back(360.0 * i / steps);
    return g;
}

struct RamseyOptions {
    std::vector<double> phase_grid_deg = default_phase_grid();
    std::vector<double> band_centers_hz{0.0};
    std::vector<std::string> band_names;
    // Lattice mode: atoms are prepared by `imaging.prep` at each of
    // `imaging.prep_translations_nm`, and each survivor is assigned to the
    // band whose center lies within band_half_width_hz of its detuning.
    bool lattice = false;
    LatticeScene scene;
    ImagingProtocol imaging;
    double band_half_width_hz = 300.0;
};

namespace detail {

inline std::vector<std::string> band_labels(const RamseyOptions& o) {
    std::vector<std::string> names = o.band_names;
    for (std::size_t b = names.size(); b < o.band_centers_hz.size(); ++b) names.push_back("band" + std::to_string(b));
    names.resize(o.band_centers_hz.size());
    return names;
}

}  // namespace detail

/// Applies `first`, then `second` with every phase advanced by phi, to atoms
/// starting in |down>, and records the population left in |down>.
///
/// Band-center mode evaluates the exact probability at each band center.
/// Lattice mode runs the full preselection and counts atoms per band.
inline FringeCurve ramsey_scan(const PulseTrain& first, const PulseTrain& second, const RamseyOptions& opt) {
    if (opt.phase_grid_deg.empty()) throw std::invalid_argument("ramsey_scan: empty phase grid");
    if (opt.band_centers_hz.empty()) throw std::invalid_argument("ramsey_scan: no bands");
    FringeCurve curve;
    curve.band_names = detail::band_labels(opt);
    curve.band_centers_hz = opt.band_centers_hz;
    const std::size_t nb = opt.band_centers_hz.size();

    if (!opt.lattice) {
        std::vector<Unitary2> u1;
        for (double d : opt.band_centers_hz) u1.push_back(train_propagator(first, hz_to_rad(d)));
        for (double ph : opt.phase_grid_deg) {
            const PulseTrain second_phi = shift_global_phase(second, deg_to_rad(ph));
            for (std::size_t b = 0; b < nb; ++b) {
                const Unitary2 u = train_propagator(second_phi, hz_to_rad(opt.band_centers_hz[b])) * u1[b];
                curve.samples.push_back({ph, static_cast<int>(b), apply(u, SpinState::spin_down()).p_down(), 0.0});
            }
        }
        return curve;
    }

    const ImagingProtocol& ip = opt.imaging;
    if (ip.runs_per_point < 1) throw std::invalid_argument("ramsey_scan: runs_per_point must be >= 1");
    opt.scene.validate();
    const std::size_t runs = static_cast<std::size_t>(ip.runs_per_point);
    const std::size_t np = opt.phase_grid_deg.size();
    std::vector<std::vector<Counts>> tallies(np * runs, std::vector<Counts>(nb));
    parallel_for(np * runs, ip.jobs, [&](std::size_t job) {
        const std::size_t k = job / runs;
        const std::size_t r = job % runs;
        Rng rng(derive_seed(ip.seed, k, r));
        LatticeScene base = opt.scene;
        base.addr_offset_nm += rng.uniform() * base.addr_period_nm();
        AtomEnsemble ens = sample_ensemble(base, ip.atoms_per_run, rng.next());
        for (double t : ip.prep_translations_nm) {
            ens.scene = translate_addressing(base, t, &rng);
            ens = apply_pulse(std::move(ens), ip.prep);
        }
        ens = measure_and_remove_up(std::move(ens), rng.next());
        ens.scene = base;
        ens = apply_pulse(std::move(ens), first);
        ens = apply_pulse(std::move(ens), shift_global_phase(second, deg_to_rad(opt.phase_grid_deg[k])));
        Rng readout(rng.next());
        for (const auto& a : ens.atoms) {
            if (!a.alive) continue;
            const double d = ens.detuning_hz(a);
            for (std::size_t b = 0; b < nb; ++b) {
                if (std::abs(d - opt.band_centers_hz[b]) > opt.band_half_width_hz) continue;
                bool up = readout.uniform() < a.spin.p_up();
                if (readout.uniform() < opt.scene.readout_error) up = !up;
                (up ? tallies[job][b].up : tallies[job][b].down) += 1;
                break;
            }
        }
    });
    for (std::size_t k = 0; k < np; ++k) {
        for (std::size_t b = 0; b < nb; ++b) {
            double up = 0.0, down = 0.0;
            for (std::size_t r = 0; r < runs; ++r) {
                up += static_cast<double>(tallies[k * runs + r][b].up);
                down += static_cast<double>(tallies[k * runs + r][b].down);
            }
            const double n = up + down;
            const double p = n > 0.0 ? down / n : std::numeric_limits<double>::quiet_NaN();
            const double se = n > 0.0 ? std::sqrt(std::max(p * (1.0 - p), 0.25 / n) / n)
                                      : std::numeric_limits<double>::quiet_NaN();
            curve.samples.push_back({opt.phase_grid_deg[k], static_cast<int>(b), p, se});
        }
    }
    return curve;
}

struct FringeFit {
    double offset = 0.0;
    double amplitude = 0.0;  // >= 0
    double phase0_deg = 0.0; // S(phi) = offset + amplitude cos(phi - phase0)
    double s_min = 0.0;
    double s_max = 0.0;
    double offset_err = 0.0;
    double amplitude_err = 0.0;
    double phase0_err_deg = 0.0;
    double residual_rms = 0.0;
    bool phase_defined = false;  // false when the amplitude is indistinguishable from zero

    double contrast() const { return s_max + s_min > 0.0 ? (s_max - s_min) / (s_max + s_min) : 0.0; }
};

/// Linear least squares for offset + b cos(phi) + c sin(phi).
inline FringeFit fringe_fit(const std::vector<FringeSample>& samples) {
    std::vector<const FringeSample*> use;
    for (const auto& s : samples)
        if (std::isfinite(s.p_down)) use.push_back(&s);
    if (use.size() < 3) throw std::invalid_argument("fringe_fit: need >= 3 finite samples");
    const Eigen::Index n = static_cast<Eigen::Index>(use.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ph = deg_to_rad(use[static_cast<std::size_t>(i)]->phase_deg);
        a(i, 0) = 1.0;
        a(i, 1) = std::cos(ph);
        a(i, 2) = std::sin(ph);
        y(i) = use[static_cast<std::size_t>(i)]->p_down;
    }
    const Eigen::Matrix3d ata = a.transpose() * a;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
    if (!lu.isInvertible()) throw std::invalid_argument("fringe_fit: phase grid does not determine a cosine");
    const Eigen::Vector3d c = lu.solve(a.transpose() * y);
    FringeFit f;
    f.offset = c(0);
    f.amplitude = std::hypot(c(1), c(2));
    f.phase0_deg = f.amplitude > 0.0 ? rad_to_deg(std::atan2(c(2), c(1))) : 0.0;
    f.s_min = f.offset - f.amplitude;
    f.s_max = f.offset + f.amplitude;
    const double rss = (a * c - y).squaredNorm();
    f.residual_rms = std::sqrt(rss / static_cast<double>(n));
    if (n > 3) {
        const Eigen::Matrix3d cov = lu.inverse() * (rss / static_cast<double>(n - 3));
        f.offset_err = std::sqrt(cov(0, 0));
        if (f.amplitude > 0.0) {
            const double cb = c(1) / f.amplitude, sb = c(2) / f.amplitude;
            const double var_a = cb * cb * cov(1, 1) + sb * sb * cov(2, 2) + 2.0 * cb * sb * cov(1, 2);
            const double var_p = (sb * sb * cov(1, 1) + cb * cb * cov(2, 2) - 2.0 * cb * sb * cov(1, 2)) /
                                 (f.amplitude * f.amplitude);
            f.amplitude_err = std::sqrt(std::max(0.0, var_a));
            f.phase0_err_deg = rad_to_deg(std::sqrt(std::max(0.0, var_p)));
        } else {
            f.amplitude_err = std::sqrt(0.5 * (cov(1, 1) + cov(2, 2)));
        }
    }
    f.phase_defined = f.amplitude > 1e-12 && f.amplitude > 3.0 * f.amplitude_err;
    return f;
}

/// Gate fidelity from fringe extrema: sqrt(S_max / (S_min + S_max)).
inline double fringe_fidelity(double s_min, double s_max) {
    if (!(s_max > 0.0)) throw std::invalid_argument("fringe_fidelity: S_max must be > 0");
    if (!(s_min >= 0.0)) throw std::invalid_argument("fringe_fidelity: S_min must be >= 0");
    return std::sqrt(s_max / (s_min + s_max));
}

/// fringe_fidelity of a fitted fringe, with S_min clipped at zero.
inline double fringe_fidelity(const FringeFit& f) { return fringe_fidelity(std::max(0.0, f.s_min), f.s_max); }

// -------------------------------------------------- Randomized benchmarking

enum class RbGate : int { kX90 = 0, kXm90, kY90, kYm90, kI, kX, kY, kZ };

inline constexpr std::array<RbGate, 4> kComputationalGates{RbGate::kX90, RbGate::kXm90, RbGate::kY90,
                                                           RbGate::kYm90};
inline constexpr std::array<RbGate, 4> kPauliGates{RbGate::kI, RbGate::kX, RbGate::kY, RbGate::kZ};
inline constexpr std::size_t kNumRbGates = 8;

inline std::string_view gate_name(RbGate g) {
    static constexpr std::array<std::string_view, kNumRbGates> names{"X90", "-X90", "Y90", "-Y90",
                                                                     "I",   "X",    "Y",   "Z"};
    return names[static_cast<std::size_t>(g)];
}

inline bool is_computational(RbGate g) { return static_cast<int>(g) < 4; }

inline Unitary2 ideal_gate(RbGate g) {
    constexpr double h = std::numbers::pi / 2;
    constexpr double p = std::numbers::pi;
    switch (g) {
        case RbGate::kX90: return rotation(1, 0, 0, h);
        case RbGate::kXm90: return rotation(-1, 0, 0, h);
        case RbGate::kY90: return rotation(0, 1, 0, h);
        case RbGate::kYm90: return rotation(0, -1, 0, h);
        case RbGate::kI: return Unitary2::identity();
        case RbGate::kX: return rotation(1, 0, 0, p);
        case RbGate::kY: return rotation(0, 1, 0, p);
        case RbGate::kZ: return rotation(0, 0, 1, p);
    }
    throw std::invalid_argument("ideal_gate: unknown label");
}

struct RbSequence {
    std::vector<RbGate> gates;  // in time order
    bool expect_up = false;     // ideal final pole
};

/// l random (CG, PG) pairs. When the ideal state ends on the equator a
/// closing CG, drawn uniformly from those that reach a pole, is appended.
inline RbSequence rb_sequence(int l, std::uint64_t seed) {
    if (l < 0) throw std::invalid_argument("rb_sequence: length must be >= 0");
    RbSequence seq;
    Rng rng(seed);
    SpinState s = SpinState::spin_down();
    for (int i = 0; i < l; ++i) {
        const RbGate cg = kComputationalGates[rng.below(4)];
        const RbGate pg = kPauliGates[rng.below(4)];
        seq.gates.push_back(cg);
        seq.gates.push_back(pg);
        s = apply(ideal_gate(pg), apply(ideal_gate(cg), s));
    }
    const double z = s.p_up() - s.p_down();
    if (std::abs(z) < 0.5) {
        std::vector<RbGate> closing;
        for (RbGate g : kComputationalGates) {
            const SpinState t = apply(ideal_gate(g), s);
            if (std::abs(t.p_up() - t.p_down()) > 0.5) closing.push_back(g);
        }
        const RbGate g = closing[rng.below(closing.size())];
        seq.gates.push_back(g);
        s = apply(ideal_gate(g), s);
    }
    seq.expect_up = s.p_up() > 0.5;
    return seq;
}

/// Pulse-train realization of every benchmarking gate. The center band
/// receives the labelled gates; side bands should see identities throughout.
struct GateLibrary {
    std::array<PulseTrain, kNumRbGates> trains;
    double center_hz = 0.0;
    std::vector<double> side_hz;

    const PulseTrain& operator[](RbGate g) const { return trains[static_cast<std::size_t>(g)]; }

    /// Lowest phase-insensitive fidelity over the labels at the center band.
    double min_center_fidelity() const {
        double worst = 1.0;
        for (std::size_t i = 0; i < kNumRbGates; ++i) {
            const auto g = static_cast<RbGate>(i);
            if (trains[i].empty()) return 0.0;
            worst = std::min(worst, fidelity_phase_insensitive(train_propagator(trains[i], hz_to_rad(center_hz)),
                                                               ideal_gate(g)));
        }
        return worst;
    }

    void validate(double min_fidelity = 0.999) const {
        for (std::size_t i = 0; i < kNumRbGates; ++i)
            if (trains[i].empty())
                throw std::invalid_argument("GateLibrary: no train for " +
                                            std::string(gate_name(static_cast<RbGate>(i))));
        const double f = min_center_fidelity();
        if (!(f >= min_fidelity))
            throw std::invalid_argument("GateLibrary: center-band fidelity " + std::to_string(f) + " below " +
                                        std::to_string(min_fidelity));
    }
};

/// Builds the library from a pi/2-about-x train and a pi-about-x train.
/// Axis changes are phase shifts; Z is X then Y and I is X then -X.
inline GateLibrary gate_library_from(const PulseTrain& cg_x90, const PulseTrain& pg_x180, double center_hz = 0.0,
                                     std::vector<double> side_hz = {}) {
    constexpr double h = std::numbers::pi / 2;
    constexpr double p = std::numbers::pi;
    GateLibrary lib;
    lib.center_hz = center_hz;
    lib.side_hz = std::move(side_hz);
    auto set = [&](RbGate g, PulseTrain t) {
        t.set_label(std::string(gate_name(g)));
        lib.trains[static_cast<std::size_t>(g)] = std::move(t);
    };
    set(RbGate::kX90, cg_x90);
    set(RbGate::kXm90, shift_global_phase(cg_x90, p));
    set(RbGate::kY90, shift_global_phase(cg_x90, h));
    set(RbGate::kYm90, shift_global_phase(cg_x90, -h));
    const PulseTrain y180 = shift_global_phase(pg_x180, h);
    set(RbGate::kX, pg_x180);
    set(RbGate::kY, y180);
    set(RbGate::kZ, concatenate(pg_x180, y180));
    set(RbGate::kI, concatenate(pg_x180, shift_global_phase(pg_x180, p)));
    return lib;
}

/// Single square pulses resonant at zero detuning; I is a zero-amplitude
/// pulse of pi-pulse length.
inline GateLibrary ideal_gate_library(double rabi_hz = 2500.0) {
    if (!(rabi_hz > 0.0)) throw std::invalid_argument("ideal_gate_library: rabi_hz must be > 0");
    const double t_pi = 0.5 / rabi_hz;
    GateLibrary lib = gate_library_from(PulseTrain({PulseSegment::from_hz(0.5 * t_pi, rabi_hz, 0.0)}),
                                        PulseTrain({PulseSegment::from_hz(t_pi, rabi_hz, 0.0)}));
    PulseTrain idle({PulseSegment::from_hz(t_pi, 0.0, 0.0)}, "I");
    lib.trains[static_cast<std::size_t>(RbGate::kI)] = idle;
    return lib;
}

struct ErrorModel {
    enum class Kind { kNone, kDetuningOffset, kDepolarizing, kRabiScale };
    Kind kind = Kind::kNone;
    double value = 0.0;  // Hz offset, probability per CG, or fractional amplitude error

    static ErrorModel none() { return {}; }
    static ErrorModel detuning_offset(double hz) { return {Kind::kDetuningOffset, hz}; }
    static ErrorModel depolarizing(double p) { return {Kind::kDepolarizing, p}; }
    static ErrorModel rabi_scale(double fractional) { return {Kind::kRabiScale, fractional}; }

    void validate() const {
        if (!std::isfinite(value)) throw std::invalid_argument("ErrorModel: non-finite value");
        if (kind == Kind::kDepolarizing && !(value >= 0.0 && value <= 1.0))
            throw std::invalid_argument("ErrorModel: depolarizing probability must be in [0, 1]");
        if (kind == Kind::kRabiScale && !(value > -1.0))
            throw std::invalid_argument("ErrorModel: rabi scale error must be > -1");
    }
};

inline std::string_view error_model_name(ErrorModel::Kind k) {
    switch (k) {
        case ErrorModel::Kind::kNone: return "none";
        case ErrorModel::Kind::kDetuningOffset: return "detuning";
        case ErrorModel::Kind::kDepolarizing: return "depolarizing";
        case ErrorModel::Kind::kRabiScale: return "rabi_scale";
    }
    return "unknown";
}

/// Multiplies every Rabi rate by `factor`.
inline PulseTrain scale_amplitude(const PulseTrain& train, double factor) {
    if (!(factor >= 0.0)) throw std::invalid_argument("scale_amplitude: factor must be >= 0");
    std::vector<PulseSegment> segs;
    segs.reserve(train.size());
    for (const auto& s : train.segments())
        segs.push_back(PulseSegment::from_hz(s.duration(), s.rabi_hz() * factor, s.phase()));
    return PulseTrain(std::move(segs), train.label());
}

struct RbFit {
    double eps0 = std::numeric_limits<double>::quiet_NaN();
    double eps = std::numeric_limits<double>::quiet_NaN();
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Constant(std::numeric_limits<double>::quiet_NaN());
    double rss = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
};

/// F(l) = [1 + (1 - eps0)(1 - 2 eps)^l] / 2.
inline double rb_model(double eps0, double eps, double l) {
    return 0.5 * (1.0 + (1.0 - eps0) * std::pow(1.0 - 2.0 * eps, l));
}

/// Least squares in (eps0, eps) started from a log-linear fit of 2F - 1.
/// Never throws on bad data; `converged` is false instead.
inline RbFit fit_rb(const std::vector<double>& lengths, const std::vector<double>& fidelity) {
    RbFit fit;
    if (lengths.size() != fidelity.size() || lengths.size() < 2) return fit;
    for (std::size_t i = 0; i < lengths.size(); ++i)
        if (!std::isfinite(lengths[i]) || !std::isfinite(fidelity[i])) return fit;

    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        const double y = 2.0 * fidelity[i] - 1.0;
        if (y > 0.0) {
            lx.push_back(lengths[i]);
            ly.push_back(std::log(std::min(y, 1.0)));
        }
    }
    double e0 = 0.0, e = 0.0;
    if (lx.size() >= 2) {
        try {
            const LineFit line = fit_line(lx, ly);
            e0 = 1.0 - std::exp(line.intercept);
            e = 0.5 * (1.0 - std::exp(line.slope));
        } catch (const std::invalid_argument&) {
        }
    }
    const Eigen::Index m = static_cast<Eigen::Index>(lengths.size());
    auto residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
        r.resize(m);
        j.resize(m, 2);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double l = lengths[static_cast<std::size_t>(i)];
            const double base = 1.0 - 2.0 * p(1);
            const double pw = std::pow(base, l);
            r(i) = 0.5 * (1.0 + (1.0 - p(0)) * pw) - fidelity[static_cast<std::size_t>(i)];
            j(i, 0) = -0.5 * pw;
            j(i, 1) = l == 0.0 ? 0.0 : -(1.0 - p(0)) * l * std::pow(base, l - 1.0);
        }
    };
    Eigen::VectorXd p0(2);
    p0 << e0, std::clamp(e, 0.0, 0.49);
    LmResult lm = levenberg_marquardt(residuals, p0);
    if (lm.params(1) < 0.0) {
        // Growth is not a gate error: pin eps to zero and refit eps0 alone.
        double acc = 0.0;
        for (std::size_t i = 0; i < lengths.size(); ++i) acc += 2.0 * fidelity[i] - 1.0;
        lm.params(0) = 1.0 - acc / static_cast<double>(lengths.size());
        lm.params(1) = 0.0;
        Eigen::VectorXd r;
        Eigen::MatrixXd j;
        residuals(lm.params, r, j);
        lm.rss = r.squaredNorm();
        Eigen::MatrixXd jj = j.col(0);
        const double dof = static_cast<double>(std::max<Eigen::Index>(1, m - 1));
        lm.covariance = Eigen::MatrixXd::Zero(2, 2);
        lm.covariance(0, 0) = lm.rss / dof / jj.squaredNorm();
    }
    fit.eps0 = lm.params(0);
    fit.eps = lm.params(1);
    fit.covariance = lm.covariance;
    fit.rss = lm.rss;

    // Garbage guard: the decay must be monotone to within 0.05.
    std::vector<std::size_t> order(lengths.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
    bool monotone = true;
    for (std::size_t i = 1; i < order.size(); ++i)
        monotone = monotone && fidelity[order[i]] <= fidelity[order[i - 1]] + 0.05;
    fit.converged = lm.converged && monotone && std::isfinite(fit.eps0) && std::isfinite(fit.eps) &&
                    fit.eps >= 0.0 && fit.eps < 0.5;
    return fit;
}

struct RbOptions {
    std::vector<int> lengths{1, 2, 4, 8, 16};
    int sequences_per_length = 20;
    // Atoms read out per sequence and band; 0 gives exact probabilities.
    std::size_t atoms = 500;
    double kappa = 4.0;  // trains are shortened by kappa, band detunings stretched by kappa
    double readout_error = 0.0;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

struct RbRecord {
    int length = 0;
    int sequence = 0;
    int band = 0;  // 0 center, then side bands in library order
    double fidelity = 0.0;
};

struct RbBandResult {
    std::string name;
    double detuning_hz = 0.0;  // after kappa scaling
    std::vector<double> mean_fidelity;
    std::vector<double> std_err;
    RbFit fit;
};

struct RbResult {
    std::vector<int> lengths;
    std::vector<RbBandResult> bands;  // bands[0] is the center
    std::vector<RbRecord> records;
    ErrorModel error;

    const RbBandResult& center() const { return bands.at(0); }
};

namespace detail {

// Density-matrix step for the stochastic Pauli channel: with probability p
// a uniformly random Pauli (including I) is applied.
inline Eigen::Matrix2cd to_eigen(const Unitary2& u) {
    Eigen::Matrix2cd m;
    m << u(0, 0), u(0, 1), u(1, 0), u(1, 1);
    return m;
}

inline double sequence_fidelity(const std::array<Unitary2, kNumRbGates>& props, const RbSequence& seq,
                                bool identity_band, const ErrorModel& err, std::size_t atoms, double readout,
                                Rng& rng) {
    const bool depol = err.kind == ErrorModel::Kind::kDepolarizing && err.value > 0.0;
    const bool target_up = identity_band ? false : seq.expect_up;
    auto observe = [&](double p_target) {
        if (atoms == 0) return p_target * (1.0 - readout) + (1.0 - p_target) * readout;
        std::size_t ok = 0;
        for (std::size_t a = 0; a < atoms; ++a) {
            bool hit = rng.uniform() < p_target;
            if (rng.uniform() < readout) hit = !hit;
            ok += hit ? 1 : 0;
        }
        return static_cast<double>(ok) / static_cast<double>(atoms);
    };
    auto target_prob = [&](const SpinState& s) { return target_up ? s.p_up() : s.p_down(); };

    if (!depol) {
        SpinState s = SpinState::spin_down();
        for (RbGate g : seq.gates) s = apply(props[static_cast<std::size_t>(g)], s);
        return observe(target_prob(s));
    }
    const double p = err.value;
    const std::array<Unitary2, 4> paulis{Unitary2::identity(), pauli::x(), pauli::y(), pauli::z()};
    if (atoms == 0) {
        Eigen::Matrix2cd rho = Eigen::Matrix2cd::Zero();
        rho(0, 0) = 1.0;
        for (RbGate g : seq.gates) {
            const Eigen::Matrix2cd u = to_eigen(props[static_cast<std::size_t>(g)]);
            rho = u * rho * u.adjoint();
            if (is_computational(g)) rho = (1.0 - p) * rho + p * 0.5 * Eigen::Matrix2cd::Identity();
        }
        const double pt = target_up ? rho(1, 1).real() : rho(0, 0).real();
        return pt * (1.0 - readout) + (1.0 - pt) * readout;
    }
    std::size_t ok = 0;
    for (std::size_t a = 0; a < atoms; ++a) {
        SpinState s = SpinState::spin_down();
        for (RbGate g : seq.gates) {
            s = apply(props[static_cast<std::size_t>(g)], s);
            if (is_computational(g) && rng.uniform() < p) s = apply(paulis[rng.below(4)], s);
        }
        bool hit = rng.uniform() < target_prob(s);
        if (rng.uniform() < readout) hit = !hit;
        ok += hit ? 1 : 0;
    }
    return static_cast<double>(ok) / static_cast<double>(atoms);
}

}  // namespace detail

/// Band-center benchmarking: every gate is evaluated at the center detuning
/// (labelled gates) and at each side detuning (identity survival), after
/// rescaling the trains by kappa. Depolarizing noise acts after each CG.
inline RbResult run_benchmarking(const GateLibrary& library, const ErrorModel& err, const RbOptions& opt) {
    library.validate();
    err.validate();
    if (opt.lengths.empty()) throw std::invalid_argument("run_benchmarking: no lengths");
    for (int l : opt.lengths)
        if (l < 0) throw std::invalid_argument("run_benchmarking: lengths must be >= 0");
    if (opt.sequences_per_length < 1) throw std::invalid_argument("run_benchmarking: sequences_per_length must be >= 1");
    if (!(opt.kappa > 0.0)) throw std::invalid_argument("run_benchmarking: kappa must be > 0");
    if (!(opt.readout_error >= 0.0 && opt.readout_error <= 1.0))
        throw std::invalid_argument("run_benchmarking: readout_error must be in [0, 1]");

    std::vector<double> deltas{library.center_hz};
    for (double d : library.side_hz) deltas.push_back(d);
    const std::size_t nb = deltas.size();

    std::vector<std::array<Unitary2, kNumRbGates>> props(nb);
    for (std::size_t i = 0; i < kNumRbGates; ++i) {
        PulseTrain t = rescale_train(library.trains[i], opt.kappa);
        if (err.kind == ErrorModel::Kind::kRabiScale) t = scale_amplitude(t, 1.0 + err.value);
        for (std::size_t b = 0; b < nb; ++b) {
            double d = opt.kappa * deltas[b];
            if (err.kind == ErrorModel::Kind::kDetuningOffset) d += err.value;
            props[b][i] = train_propagator(t, hz_to_rad(d));
        }
    }

    const std::size_t nl = opt.lengths.size();
    const std::size_t ns = static_cast<std::size_t>(opt.sequences_per_length);
    std::vector<double> fid(nl * ns * nb);
    parallel_for(nl * ns, opt.jobs, [&](std::size_t job) {
        const std::size_t li = job / ns;
        const std::size_t si = job % ns;
        const RbSequence seq = rb_sequence(opt.lengths[li], derive_seed(opt.seed, li, si, 0));
        for (std::size_t b = 0; b < nb; ++b) {
            Rng rng(derive_seed(opt.seed, li, si, b + 1));
            fid[job * nb + b] = detail::sequence_fidelity(props[b], seq, b > 0, err, opt.atoms, opt.readout_error, rng);
        }
    });

    RbResult res;
    res.lengths = opt.lengths;
    res.error = err;
    std::vector<double> lx(opt.lengths.begin(), opt.lengths.end());
    for (std::size_t b = 0; b < nb; ++b) {
        RbBandResult band;
        band.name = b == 0 ? "center" : "side" + std::to_string(b);
        band.detuning_hz = opt.kappa * deltas[b];
        for (std::size_t li = 0; li < nl; ++li) {
            double sum = 0.0, sum2 = 0.0;
            for (std::size_t si = 0; si < ns; ++si) {
                const double f = fid[(li * ns + si) * nb + b];
                sum += f;
                sum2 += f * f;
                res.records.push_back({opt.lengths[li], static_cast<int>(si), static_cast<int>(b), f});
            }
            const double mean = sum / static_cast<double>(ns);
            const double var = ns > 1 ? std::max(0.0, (sum2 - sum * mean) / static_cast<double>(ns - 1)) : 0.0;
            band.mean_fidelity.push_back(mean);
            band.std_err.push_back(std::sqrt(var / static_cast<double>(ns)));
        }
        band.fit = fit_rb(lx, band.mean_fidelity);
        res.bands.push_back(std::move(band));
    }
    return res;
}

}  // namespace icontrol
