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

// Composite-pulse design: band-averaged cost functionals over a target
// profile, their analytic phase gradients, and a multistart quasi-Newton
// search over segment phases at fixed amplitude and segment duration.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "icontrol/bfgs.hpp"
#include "icontrol/parallel.hpp"
#include "icontrol/rng.hpp"
#include "icontrol/su2.hpp"
#include "icontrol/targets.hpp"

namespace icontrol {

enum class GateMetric {
    kInfidelity,      // 1 - |Tr(U^dag W)|/2
    kHilbertSchmidt,  // sqrt(Tr[(W-U)^dag (W-U)])
};

struct DesignSpec {
    int n_segments = 40;
    double segment_duration_s = 1e-4;
    double rabi_hz = 2500.0;  // Omega0 / 2pi, common to all segments
    double rabi_cap_hz = 40e3;
    int samples_per_band = 33;
    int n_restarts = 20;
    std::uint64_t rng_seed = 0;
    int max_iterations = 2000;
    double convergence_tol = 1e-8;
    GateMetric metric = GateMetric::kInfidelity;
    unsigned jobs = 1;

    double total_duration() const { return n_segments * segment_duration_s; }

    void validate() const {
        if (n_segments < 1) throw std::invalid_argument("DesignSpec: n_segments must be >= 1");
        if (!(segment_duration_s > 0.0))
            throw std::invalid_argument("DesignSpec: segment duration must be > 0");
        if (!(rabi_hz >= 0.0)) throw std::invalid_argument("DesignSpec: rabi must be >= 0");
        if (rabi_hz > rabi_cap_hz)
            throw std::invalid_argument("DesignSpec: rabi " + std::to_string(rabi_hz) +
                                        " Hz exceeds cap " + std::to_string(rabi_cap_hz) + " Hz");
        if (samples_per_band < 1)
            throw std::invalid_argument("DesignSpec: samples_per_band must be >= 1");
        if (n_restarts < 1) throw std::invalid_argument("DesignSpec: n_restarts must be >= 1");
        if (max_iterations < 0) throw std::invalid_argument("DesignSpec: max_iterations < 0");
    }
};

/// Square-pulse train with the DesignSpec's common amplitude and duration.
inline PulseTrain phases_to_train(std::span<const double> phases, const DesignSpec& spec,
                                  std::string label = {}) {
    std::vector<PulseSegment> segs;
    segs.reserve(phases.size());
    for (double p : phases)
        segs.push_back(PulseSegment::from_hz(spec.segment_duration_s, spec.rabi_hz, p));
    return PulseTrain(std::move(segs), std::move(label));
}

namespace detail {

// One quadrature point. `overlap` is the matrix M with tau = Tr(M U): W^dag for
// gate bands, |in><target| for state bands.
struct CostPoint {
    double delta_hz;
    int band;
    bool state;
    Unitary2 overlap;
    Unitary2 target;  // W, gate bands only
};

inline std::vector<CostPoint> cost_points(const TargetProfile& profile, int samples_per_band) {
    std::vector<CostPoint> pts;
    for (std::size_t b = 0; b < profile.bands().size(); ++b) {
        const Band& band = profile.bands()[b];
        if (band.is_dont_care()) continue;
        Unitary2 overlap = Unitary2::zero();
        Unitary2 target = Unitary2::zero();
        const bool state = band.is_state();
        if (state) {
            const auto& st = std::get<StateTarget>(band.goal);
            // Tr(|in><psi| U) = <psi|U|in>
            overlap(0, 0) = st.input.down * std::conj(st.target.down);
            overlap(0, 1) = st.input.down * std::conj(st.target.up);
            overlap(1, 0) = st.input.up * std::conj(st.target.down);
            overlap(1, 1) = st.input.up * std::conj(st.target.up);
        } else {
            target = std::get<GateTarget>(band.goal).matrix();
            overlap = target.adjoint();
        }
        for (double d : band_grid(band, samples_per_band))
            pts.push_back({d, static_cast<int>(b), state, overlap, target});
    }
    return pts;
}

inline double point_cost(const CostPoint& p, const Unitary2& u, GateMetric metric) {
    if (p.state) return 1.0 - std::norm((p.overlap * u).trace());
    if (metric == GateMetric::kHilbertSchmidt) return hs_cost_distance(u, p.target);
    return 1.0 - std::abs((p.overlap * u).trace()) / 2.0;
}

inline double point_fidelity(const CostPoint& p, const Unitary2& u) {
    if (p.state) return std::norm((p.overlap * u).trace());
    return std::abs((p.overlap * u).trace()) / 2.0;
}

}  // namespace detail

struct SampleScore {
    double delta_hz;
    int band;
    double fidelity;
    double cost;
};

struct TrainEvaluation {
    double cost = 0.0;                 // mean over all non-DontCare samples
    std::vector<double> per_band_cost;  // NaN for DontCare bands
    std::vector<double> per_band_fidelity;
    std::vector<SampleScore> samples;
};

/// Band-averaged cost of an arbitrary train against a profile.
inline TrainEvaluation evaluate_train(const PulseTrain& train, const TargetProfile& profile,
                                      int samples_per_band,
                                      GateMetric metric = GateMetric::kInfidelity) {
    const auto pts = detail::cost_points(profile, samples_per_band);
    TrainEvaluation ev;
    const std::size_t nb = profile.bands().size();
    ev.per_band_cost.assign(nb, 0.0);
    ev.per_band_fidelity.assign(nb, 0.0);
    std::vector<int> counts(nb, 0);
    double total = 0.0;
    for (const auto& p : pts) {
        const Unitary2 u = train_propagator(train, hz_to_rad(p.delta_hz));
        const double c = detail::point_cost(p, u, metric);
        const double f = detail::point_fidelity(p, u);
        total += c;
        ev.per_band_cost[static_cast<std::size_t>(p.band)] += c;
        ev.per_band_fidelity[static_cast<std::size_t>(p.band)] += f;
        ++counts[static_cast<std::size_t>(p.band)];
        ev.samples.push_back({p.delta_hz, p.band, f, c});
    }
    for (std::size_t b = 0; b < nb; ++b) {
        if (counts[b] == 0) {
            ev.per_band_cost[b] = std::numeric_limits<double>::quiet_NaN();
            ev.per_band_fidelity[b] = std::numeric_limits<double>::quiet_NaN();
        } else {
            ev.per_band_cost[b] /= counts[b];
            ev.per_band_fidelity[b] /= counts[b];
        }
    }
    ev.cost = total / static_cast<double>(pts.size());
    return ev;
}

/// Cost and analytic gradient with respect to segment phases, for trains of
/// N equal square segments. Precomputes the phase-independent part of every
/// segment propagator per quadrature point.
class PhaseCost {
public:
    PhaseCost(const DesignSpec& spec, const TargetProfile& profile)
        : spec_(spec), points_(detail::cost_points(profile, spec.samples_per_band)) {
        spec.validate();
        const double rabi = hz_to_rad(spec.rabi_hz);
        coeffs_.reserve(points_.size());
        for (const auto& p : points_) {
            const double delta = hz_to_rad(p.delta_hz);
            const double omega = std::hypot(rabi, delta);
            Coeff k{1.0, 0.0, 0.0};
            if (omega > 0.0) {
                const double half = 0.5 * omega * spec.segment_duration_s;
                const double s = std::sin(half);
                k = {std::cos(half), s * delta / omega, s * rabi / omega};
            }
            coeffs_.push_back(k);
        }
    }

    std::size_t n_points() const { return points_.size(); }

    double value(std::span<const double> phases) const { return eval(phases, nullptr); }

    /// Writes d(cost)/d(phase_j) into grad.
    double value_and_gradient(std::span<const double> phases, std::span<double> grad) const {
        return eval(phases, &grad);
    }

private:
    struct Coeff {
        double c, sz, sr;  // cos(theta/2), sin(theta/2) * (delta, Omega0) / Omega
    };

    double eval(std::span<const double> phases, std::span<double>* grad) const {
        const std::size_t n = static_cast<std::size_t>(spec_.n_segments);
        if (phases.size() != n)
            throw std::invalid_argument("PhaseCost: expected " + std::to_string(n) +
                                        " phases, got " + std::to_string(phases.size()));
        if (grad && grad->size() != n) throw std::invalid_argument("PhaseCost: gradient size");

        std::vector<cplx> eip(n);
        for (std::size_t j = 0; j < n; ++j) eip[j] = std::polar(1.0, phases[j]);
        if (grad) std::fill(grad->begin(), grad->end(), 0.0);

        std::vector<Unitary2> segs(n), prefix(n + 1);
        std::vector<cplx> dtau(n);
        double total = 0.0;
        for (std::size_t i = 0; i < points_.size(); ++i) {
            const auto& p = points_[i];
            const Coeff& k = coeffs_[i];
            const cplx diag{k.c, k.sz};
            prefix[0] = Unitary2::identity();
            for (std::size_t j = 0; j < n; ++j) {
                const cplx off = cplx{0.0, -k.sr} * eip[j];
                segs[j] = {{diag, off, -std::conj(off), std::conj(diag)}};
                prefix[j + 1] = segs[j] * prefix[j];
            }
            const Unitary2& u = prefix[n];
            const cplx tau = (p.overlap * u).trace();
            const double c = cost_of(p, u, tau);
            total += c;
            if (!grad) continue;

            // dtau_j = Tr(P_{j-1} M Q_j dS_j) with Q_j = S_N ... S_{j+1}.
            Unitary2 mq = p.overlap;
            for (std::size_t jj = n; jj-- > 0;) {
                const Unitary2 a = prefix[jj] * mq;
                // dS/dphi = [[0, sr e^{i phi}], [-sr e^{-i phi}, 0]]
                const cplx d01 = k.sr * eip[jj];
                const cplx d10 = -k.sr * std::conj(eip[jj]);
                dtau[jj] = a(0, 1) * d10 + a(1, 0) * d01;
                mq = mq * segs[jj];
            }
            const double scale = dcost_dtau_scale(p, u, tau, c);
            for (std::size_t j = 0; j < n; ++j) (*grad)[j] += dcost(p, tau, dtau[j], scale);
        }
        const double inv = 1.0 / static_cast<double>(points_.size());
        if (grad)
            for (auto& g : *grad) g *= inv;
        return total * inv;
    }

    double cost_of(const detail::CostPoint& p, const Unitary2& u, cplx tau) const {
        if (p.state) return 1.0 - std::norm(tau);
        if (spec_.metric == GateMetric::kHilbertSchmidt) return hs_cost_distance(u, p.target);
        return 1.0 - std::abs(tau) / 2.0;
    }

    double dcost_dtau_scale(const detail::CostPoint& p, const Unitary2&, cplx tau, double c) const {
        if (p.state) return -2.0;
        if (spec_.metric == GateMetric::kHilbertSchmidt) return c > 0.0 ? -1.0 / c : 0.0;
        const double a = std::abs(tau);
        return a > 0.0 ? -0.5 / a : 0.0;
    }

    // For tau = Tr(M U):
    //   state:        d(1 - |tau|^2)   = -2 Re(conj(tau) dtau)
    //   infidelity:   d(1 - |tau|/2)   = -Re(conj(tau) dtau) / (2|tau|)
    //   HS distance:  d sqrt(4 - 2 Re tau) = -Re(dtau) / d
    double dcost(const detail::CostPoint& p, cplx tau, cplx dtau, double scale) const {
        if (!p.state && spec_.metric == GateMetric::kHilbertSchmidt) return scale * dtau.real();
        return scale * (std::conj(tau) * dtau).real();
    }

    DesignSpec spec_;
    std::vector<detail::CostPoint> points_;
    std::vector<Coeff> coeffs_;
};

/// Band-averaged gate cost with the DesignSpec's metric. Non-gate bands in the
/// profile are scored by their own kind.
inline double gate_cost(std::span<const double> phases, const DesignSpec& spec,
                        const TargetProfile& profile) {
    if (!profile.has_gate_bands()) throw std::invalid_argument("gate_cost: profile has no gate band");
    return PhaseCost(spec, profile).value(phases);
}

/// Band-averaged state infidelity 1 - |<psi|U|in>|^2.
inline double state_cost(std::span<const double> phases, const DesignSpec& spec,
                         const TargetProfile& profile) {
    if (!profile.has_state_bands())
        throw std::invalid_argument("state_cost: profile has no state band");
    return PhaseCost(spec, profile).value(phases);
}

struct DesignResult {
    PulseTrain train;
    std::vector<double> phases;
    double cost = 0.0;
    std::vector<double> per_band_cost;
    std::vector<double> per_band_fidelity;
    std::vector<SampleScore> per_delta_fidelity;
    bool converged = false;
    int restarts_used = 0;
    int best_restart = -1;
    int iterations = 0;
    double gradient_norm = 0.0;
};

/// Multistart phase optimisation. Restart r starts from phases drawn
/// uniformly in [0, 2pi) with a stream derived from (rng_seed, r); the lowest
/// final cost wins, ties going to the lower restart index.
inline DesignResult optimize_phases(const DesignSpec& spec, const TargetProfile& profile) {
    const PhaseCost cost(spec, profile);
    const auto n = static_cast<Eigen::Index>(spec.n_segments);

    BfgsOptions opt;
    opt.max_iterations = spec.max_iterations;
    opt.gradient_tol = spec.convergence_tol;

    const Objective objective = [&cost, n](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g.resize(n);
        return cost.value_and_gradient(std::span<const double>(x.data(), static_cast<std::size_t>(n)),
                                       std::span<double>(g.data(), static_cast<std::size_t>(n)));
    };

    std::vector<BfgsResult> runs(static_cast<std::size_t>(spec.n_restarts));
    parallel_for(runs.size(), spec.jobs, [&](std::size_t r) {
        Rng rng(derive_seed(spec.rng_seed, r));
        Eigen::VectorXd x0(n);
        for (Eigen::Index j = 0; j < n; ++j) x0[j] = rng.uniform(0.0, kTwoPi);
        runs[r] = minimize_bfgs(objective, std::move(x0), opt);
    });

    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].value < runs[best].value) best = r;

    DesignResult out;
    const auto& b = runs[best];
    for (Eigen::Index j = 0; j < n; ++j) out.phases.push_back(wrap_phase(b.x[j]));
    out.train = phases_to_train(out.phases, spec, profile.description());
    const auto ev = evaluate_train(out.train, profile, spec.samples_per_band, spec.metric);
    out.cost = ev.cost;
    out.per_band_cost = ev.per_band_cost;
    out.per_band_fidelity = ev.per_band_fidelity;
    out.per_delta_fidelity = ev.samples;
    out.converged = b.converged;
    out.restarts_used = spec.n_restarts;
    out.best_restart = static_cast<int>(best);
    out.iterations = b.iterations;
    out.gradient_norm = b.gradient_norm;
    return out;
}

}  // namespace icontrol
