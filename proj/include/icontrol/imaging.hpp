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

// Resonance imaging (prep pulse, removal, translation, image pulse, count),
// multi-Gaussian peak fitting, and the EOM and Zeeman-gradient calibrations.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "icontrol/lattice.hpp"
#include "icontrol/least_squares.hpp"
#include "icontrol/parallel.hpp"
#include "icontrol/rng.hpp"
#include "icontrol/su2.hpp"

namespace icontrol {

struct ImageSample {
    double translation_nm = 0.0;
    double eom_volts = 0.0;
    double count_up = 0.0;  // integral in sampled mode, an expectation otherwise
    double atoms = 0.0;     // atoms interrogated by the image pulse
    int n_runs = 0;
};

struct ImageCurve {
    std::vector<ImageSample> samples;
};

enum class ImagingMode {
    kSampled,   // random offsets, sampled atoms and projective counts
    kExpected,  // stratified offsets, one atom per site, probabilities summed
};

enum class GridAxis { kNanometers, kVolts };

struct ImagingProtocol {
    PulseTrain prep;
    PulseTrain image;
    // Addressing-lattice positions (relative to the run offset) at which the
    // prep pulse is applied, before a single removal step.
    std::vector<double> prep_translations_nm{0.0};
    double post_prep_shift_nm = 0.0;
    double image_extra_detuning_hz = 0.0;  // Zeeman shift during imaging
    double atom_displacement_nm = 0.0;     // transport of the prepared atoms
    int runs_per_point = 100;
    std::size_t atoms_per_run = 1000;
    ImagingMode mode = ImagingMode::kSampled;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

namespace detail {

struct RunTally {
    double up = 0.0;
    double atoms = 0.0;
};

inline RunTally sampled_run(const ImagingProtocol& p, const LatticeScene& scene, double translation_nm,
                            std::uint64_t run_seed) {
    Rng rng(run_seed);
    LatticeScene base = scene;
    base.addr_offset_nm += rng.uniform() * scene.addr_period_nm();
    AtomEnsemble ens = sample_ensemble(base, p.atoms_per_run, rng.next());
    for (double t : p.prep_translations_nm) {
        ens.scene = translate_addressing(base, t, &rng);
        ens = apply_pulse(std::move(ens), p.prep);
    }
    ens = measure_and_remove_up(std::move(ens), rng.next());
    ens.transport_nm += p.atom_displacement_nm;
    ens.scene = translate_addressing(base, p.post_prep_shift_nm + translation_nm, &rng);
    ens = apply_pulse(std::move(ens), p.image, p.image_extra_detuning_hz);
    const Counts c = count_up(ens, scene.readout_error, rng.next());
    return {static_cast<double>(c.up), static_cast<double>(c.up + c.down)};
}

inline LatticeScene expected_base(const ImagingProtocol& p, const LatticeScene& scene, int run) {
    LatticeScene base = scene;
    base.addr_offset_nm += (run + 0.5) / p.runs_per_point * scene.addr_period_nm();
    return base;
}

/// Per-site probability of surviving removal for stratified run `run`.
inline std::vector<double> expected_survival(const ImagingProtocol& p, const LatticeScene& scene, int run) {
    const LatticeScene base = expected_base(p, scene, run);
    const long nx = scene.window_sites();
    std::vector<double> survive(static_cast<std::size_t>(nx));
    for (long i = 0; i < nx; ++i) {
        const double x = static_cast<double>(i) * scene.trap_period_nm;
        SpinState s = SpinState::spin_up();
        for (double tr : p.prep_translations_nm) {
            const LatticeScene sc = translate_addressing(base, tr);
            s = apply(train_propagator(p.prep, hz_to_rad(site_detuning(sc, x) - sc.carrier_hz)), s);
        }
        survive[static_cast<std::size_t>(i)] = s.p_down();
    }
    return survive;
}

inline RunTally expected_run(const ImagingProtocol& p, const LatticeScene& scene, double translation_nm,
                             int run, const std::vector<double>& survive) {
    const LatticeScene base = expected_base(p, scene, run);
    const long nx = scene.window_sites();
    const double weight = static_cast<double>(p.atoms_per_run) / static_cast<double>(nx);
    const double e = scene.readout_error;
    const LatticeScene sc = translate_addressing(base, p.post_prep_shift_nm + translation_nm);
    RunTally t;
    for (long i = 0; i < nx; ++i) {
        const double x = static_cast<double>(i) * scene.trap_period_nm;
        const double w = weight * survive[static_cast<std::size_t>(i)];
        const double d = site_detuning(sc, x + p.atom_displacement_nm) + p.image_extra_detuning_hz - sc.carrier_hz;
        const double q = apply(train_propagator(p.image, hz_to_rad(d)), SpinState::spin_down()).p_up();
        t.up += w * (q * (1.0 - e) + (1.0 - q) * e);
        t.atoms += w;
    }
    return t;
}

}  // namespace detail

/// Resonance image over `grid` (nm or EOM volts). Every (point, run) pair
/// uses its own seeded stream and a fresh uniform addressing offset.
inline ImageCurve resonance_image(const ImagingProtocol& p, const std::vector<double>& grid,
                                  const LatticeScene& scene, GridAxis axis = GridAxis::kNanometers) {
    scene.validate();
    if (grid.empty()) throw std::invalid_argument("resonance_image: empty translation grid");
    if (p.runs_per_point < 1) throw std::invalid_argument("resonance_image: runs_per_point must be >= 1");
    if (p.prep_translations_nm.empty())
        throw std::invalid_argument("resonance_image: at least one prep position is required");
    const std::size_t runs = static_cast<std::size_t>(p.runs_per_point);
    std::vector<std::vector<double>> survival;
    if (p.mode == ImagingMode::kExpected) {
        survival.resize(runs);
        parallel_for(runs, p.jobs, [&](std::size_t r) {
            survival[r] = detail::expected_survival(p, scene, static_cast<int>(r));
        });
    }
    std::vector<detail::RunTally> tallies(grid.size() * runs);
    parallel_for(tallies.size(), p.jobs, [&](std::size_t job) {
        const std::size_t k = job / runs;
        const std::size_t r = job % runs;
        const double t = axis == GridAxis::kVolts ? eom_translation(scene, grid[k]) : grid[k];
        tallies[job] = p.mode == ImagingMode::kSampled
                           ? detail::sampled_run(p, scene, t, derive_seed(p.seed, k, r))
                           : detail::expected_run(p, scene, t, static_cast<int>(r), survival[r]);
    });
    ImageCurve curve;
    curve.samples.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        ImageSample s;
        if (axis == GridAxis::kVolts) {
            s.eom_volts = grid[k];
            s.translation_nm = eom_translation(scene, grid[k]);
        } else {
            s.translation_nm = grid[k];
            s.eom_volts = grid[k] / scene.trap_period_nm * scene.eom_volts_per_period;
        }
        for (std::size_t r = 0; r < runs; ++r) {
            s.count_up += tallies[k * runs + r].up;
            s.atoms += tallies[k * runs + r].atoms;
        }
        s.n_runs = p.runs_per_point;
        curve.samples.push_back(s);
    }
    return curve;
}

struct GaussianPeak {
    double center = 0.0;
    double sigma = 0.0;
    double area = 0.0;
    double center_err = 0.0;
    double sigma_err = 0.0;
    double area_err = 0.0;
};

struct GaussianFit {
    std::vector<GaussianPeak> peaks;  // sorted by center
    double offset = 0.0;
    double offset_err = 0.0;
    double rss = 0.0;
    int dof = 0;
    bool converged = false;
};

/// Initial guess for one peak: center, sigma, amplitude.
struct PeakGuess {
    double center;
    double sigma;
    double amplitude;
};

namespace detail {

inline std::vector<double> smooth5(const std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= 2 ? i - 2 : 0;
        const std::size_t hi = std::min(n - 1, i + 2);
        double acc = 0.0;
        for (std::size_t k = lo; k <= hi; ++k) acc += y[k];
        s[i] = acc / static_cast<double>(hi - lo + 1);
    }
    return s;
}

}  // namespace detail

/// Local maxima of the smoothed curve rising at least 20% of the full range
/// above its minimum, strongest first. A maximum inside the half-maximum
/// span of a stronger one is dropped.
inline std::vector<PeakGuess> pick_peaks(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<PeakGuess> out;
    if (n < 3) return out;
    const auto s = detail::smooth5(y);
    const double lo = *std::min_element(s.begin(), s.end());
    const double hi = *std::max_element(s.begin(), s.end());
    const double range = hi - lo;
    if (!(range > 0.0)) return out;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) {
        const bool left = i == 0 || s[i] > s[i - 1];
        const bool right = i + 1 == n || s[i] >= s[i + 1];
        if (left && right && s[i] - lo >= 0.2 * range) idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    const double step = std::abs(x.back() - x.front()) / static_cast<double>(n - 1);
    std::vector<std::pair<double, double>> taken;  // (lo, hi) of accepted half-maximum spans
    for (std::size_t i : idx) {
        bool shadowed = false;
        for (const auto& [a, b] : taken) shadowed = shadowed || (x[i] >= std::min(a, b) && x[i] <= std::max(a, b));
        if (shadowed) continue;
        const double half = lo + 0.5 * (s[i] - lo);
        std::size_t l = i, r = i;
        while (l > 0 && s[l] > half) --l;
        while (r + 1 < n && s[r] > half) ++r;
        taken.emplace_back(x[l], x[r]);
        const double fwhm = std::abs(x[r] - x[l]);
        out.push_back({x[i], std::max(step, fwhm / 2.3548), s[i] - lo});
    }
    return out;
}

/// Least-squares fit of `guesses.size()` Gaussians plus a flat offset.
inline GaussianFit fit_gaussians(const std::vector<double>& x, const std::vector<double>& y,
                                 const std::vector<PeakGuess>& guesses) {
    const std::size_t n = guesses.size();
    if (n == 0) throw std::invalid_argument("fit_gaussians: no peaks requested");
    if (x.size() != y.size()) throw std::invalid_argument("fit_gaussians: x and y differ in length");
    if (x.size() < 3 * n + 2)
        throw std::invalid_argument("fit_gaussians: too few samples for " + std::to_string(n) + " peaks");
    const Eigen::Index m = static_cast<Eigen::Index>(x.size());
    const Eigen::Index np = static_cast<Eigen::Index>(3 * n + 1);
    Eigen::VectorXd p0(np);
    p0(0) = *std::min_element(y.begin(), y.end());
    for (std::size_t k = 0; k < n; ++k) {
        p0(static_cast<Eigen::Index>(1 + 3 * k)) = guesses[k].amplitude;
        p0(static_cast<Eigen::Index>(2 + 3 * k)) = guesses[k].center;
        p0(static_cast<Eigen::Index>(3 + 3 * k)) = guesses[k].sigma;
    }
    auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
        r.resize(m);
        j.setZero(m, np);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double xi = x[static_cast<std::size_t>(i)];
            double f = p(0);
            j(i, 0) = 1.0;
            for (std::size_t k = 0; k < n; ++k) {
                const auto b = static_cast<Eigen::Index>(1 + 3 * k);
                const double a = p(b), c = p(b + 1), s = p(b + 2);
                const double u = (xi - c) / s;
                const double e = std::exp(-0.5 * u * u);
                f += a * e;
                j(i, b) = e;
                j(i, b + 1) = a * e * u / s;
                j(i, b + 2) = a * e * u * u / s;
            }
            r(i) = f - y[static_cast<std::size_t>(i)];
        }
    };
    const LmResult lm = levenberg_marquardt(model, p0);
    GaussianFit fit;
    fit.offset = lm.params(0);
    fit.offset_err = std::sqrt(lm.covariance(0, 0));
    fit.rss = lm.rss;
    fit.dof = lm.dof;
    fit.converged = lm.converged;
    const double root2pi = std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t k = 0; k < n; ++k) {
        const auto b = static_cast<Eigen::Index>(1 + 3 * k);
        const double a = lm.params(b), s = std::abs(lm.params(b + 2));
        GaussianPeak pk;
        pk.center = lm.params(b + 1);
        pk.sigma = s;
        pk.area = a * s * root2pi;
        pk.center_err = std::sqrt(lm.covariance(b + 1, b + 1));
        pk.sigma_err = std::sqrt(lm.covariance(b + 2, b + 2));
        // area = a s sqrt(2 pi): first-order propagation with the a-s covariance.
        const double var = s * s * lm.covariance(b, b) + a * a * lm.covariance(b + 2, b + 2) +
                           2.0 * a * s * lm.covariance(b, b + 2);
        pk.area_err = root2pi * std::sqrt(std::max(0.0, var));
        fit.peaks.push_back(pk);
    }
    std::sort(fit.peaks.begin(), fit.peaks.end(),
              [](const GaussianPeak& l, const GaussianPeak& r) { return l.center < r.center; });
    return fit;
}

/// Fits `n_peaks` Gaussians initialized from the strongest local maxima.
inline GaussianFit fit_gaussians(const std::vector<double>& x, const std::vector<double>& y, int n_peaks) {
    if (n_peaks < 1) throw std::invalid_argument("fit_gaussians: n_peaks must be >= 1");
    auto found = pick_peaks(x, y);
    if (found.size() < static_cast<std::size_t>(n_peaks))
        throw std::runtime_error("fit_gaussians: detected " + std::to_string(found.size()) +
                                 " maxima, need " + std::to_string(n_peaks));
    found.resize(static_cast<std::size_t>(n_peaks));
    return fit_gaussians(x, y, found);
}

inline std::vector<double> curve_axis(const ImageCurve& c, GridAxis axis) {
    std::vector<double> v;
    v.reserve(c.samples.size());
    for (const auto& s : c.samples) v.push_back(axis == GridAxis::kVolts ? s.eom_volts : s.translation_nm);
    return v;
}

inline std::vector<double> curve_counts(const ImageCurve& c) {
    std::vector<double> v;
    v.reserve(c.samples.size());
    for (const auto& s : c.samples) v.push_back(s.count_up);
    return v;
}

inline GaussianFit fit_gaussians(const ImageCurve& curve, int n_peaks, GridAxis axis = GridAxis::kNanometers) {
    return fit_gaussians(curve_axis(curve, axis), curve_counts(curve), n_peaks);
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_err = 0.0;
    double intercept_err = 0.0;
};

/// Least-squares line, optionally weighted by 1/sigma^2. Standard errors
/// are scaled by the residual scatter.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<double>& sigma = {}) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need >= 2 paired points");
    if (!sigma.empty() && sigma.size() != x.size()) throw std::invalid_argument("fit_line: sigma length mismatch");
    const Eigen::Index n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd a(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double w = sigma.empty() ? 1.0 : 1.0 / sigma[k];
        if (!std::isfinite(w) || !(w > 0.0)) throw std::invalid_argument("fit_line: sigma must be finite and > 0");
        a(i, 0) = w * x[k];
        a(i, 1) = w;
        b(i) = w * y[k];
    }
    const Eigen::Matrix2d ata = a.transpose() * a;
    if (std::abs(ata.determinant()) <= 1e-300) throw std::invalid_argument("fit_line: degenerate abscissae");
    const Eigen::Vector2d coef = ata.ldlt().solve(a.transpose() * b);
    LineFit f;
    f.slope = coef(0);
    f.intercept = coef(1);
    if (n > 2) {
        const double s2 = (a * coef - b).squaredNorm() / static_cast<double>(n - 2);
        const Eigen::Matrix2d cov = ata.inverse() * s2;
        f.slope_err = std::sqrt(cov(0, 0));
        f.intercept_err = std::sqrt(cov(1, 1));
    }
    return f;
}

struct EomCalibration {
    double volts_per_period = 0.0;
    double volts_per_period_err = 0.0;
    std::vector<double> displacements_nm;
    std::vector<double> centers_volts;
    std::vector<ImageCurve> images;
};

/// Images prepared atoms after each known displacement on an EOM voltage
/// grid and fits the image-center voltage against displacement / Λ.
inline EomCalibration calibrate_eom(const ImagingProtocol& proto, const LatticeScene& scene,
                                    const std::vector<double>& voltage_grid,
                                    const std::vector<double>& displacements_nm) {
    if (voltage_grid.empty()) throw std::invalid_argument("calibrate_eom: empty voltage grid");
    if (displacements_nm.size() < 2) throw std::invalid_argument("calibrate_eom: need >= 2 displacements");
    EomCalibration cal;
    std::vector<double> periods;
    for (std::size_t i = 0; i < displacements_nm.size(); ++i) {
        ImagingProtocol p = proto;
        p.atom_displacement_nm = displacements_nm[i];
        p.seed = derive_seed(proto.seed, 0xE0u, i);
        ImageCurve c = resonance_image(p, voltage_grid, scene, GridAxis::kVolts);
        const GaussianFit fit = fit_gaussians(c, 1, GridAxis::kVolts);
        cal.displacements_nm.push_back(displacements_nm[i]);
        cal.centers_volts.push_back(fit.peaks[0].center);
        cal.images.push_back(std::move(c));
        periods.push_back(displacements_nm[i] / scene.trap_period_nm);
    }
    const LineFit line = fit_line(periods, cal.centers_volts);
    cal.volts_per_period = line.slope;
    cal.volts_per_period_err = line.slope_err;
    return cal;
}

struct ZeemanCalibration {
    double gradient_hz_per_um = 0.0;
    double gradient_err = 0.0;
    double reference_sigma_nm = 0.0;  // single-peak width at zero shift
    std::vector<double> delta_omega_hz;
    std::vector<double> separation_nm;
    std::vector<double> separation_err_nm;
    std::vector<ImageCurve> images;  // images[0] is the zero-shift reference
};

/// Images atoms prepared at the zero crossing under Zeeman shifts Δω.
/// Each image splits into two peaks at +-Δω/g; the slope of separation
/// against Δω is 2/g.
inline ZeemanCalibration zeeman_gradient_scan(const ImagingProtocol& proto, const LatticeScene& scene,
                                              const std::vector<double>& delta_omega_hz,
                                              const std::vector<double>& translation_grid_nm) {
    std::vector<double> shifts;
    for (double d : delta_omega_hz)
        if (d != 0.0) shifts.push_back(d);
    if (shifts.size() < 2) throw std::invalid_argument("zeeman_gradient_scan: need >= 2 nonzero shifts");
    ZeemanCalibration cal;
    ImagingProtocol p = proto;
    p.image_extra_detuning_hz = 0.0;
    p.seed = derive_seed(proto.seed, 0x2Eu, 0);
    cal.images.push_back(resonance_image(p, translation_grid_nm, scene));
    const GaussianFit ref = fit_gaussians(cal.images[0], 1);
    cal.reference_sigma_nm = ref.peaks[0].sigma;

    for (std::size_t i = 0; i < shifts.size(); ++i) {
        p.image_extra_detuning_hz = shifts[i];
        p.seed = derive_seed(proto.seed, 0x2Eu, i + 1);
        ImageCurve c = resonance_image(p, translation_grid_nm, scene);
        const auto x = curve_axis(c, GridAxis::kNanometers);
        const auto y = curve_counts(c);
        auto found = pick_peaks(x, y);
        std::vector<PeakGuess> guess;
        if (found.size() >= 2) {
            found.resize(2);
            guess = found;
        } else {
            // Merged peaks: split symmetrically using the excess second moment
            // of the region around the maximum that stands above background.
            const auto sm = detail::smooth5(y);
            std::vector<double> sorted = y;
            std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
            const double base = sorted[sorted.size() / 2];
            const auto top = static_cast<std::size_t>(std::max_element(sm.begin(), sm.end()) - sm.begin());
            const double floor = base + 0.1 * (sm[top] - base);
            std::size_t l = top, r = top;
            while (l > 0 && sm[l - 1] > floor) --l;
            while (r + 1 < sm.size() && sm[r + 1] > floor) ++r;
            double w = 0.0, m1 = 0.0, m2 = 0.0;
            for (std::size_t k = l; k <= r; ++k) {
                const double v = std::max(0.0, y[k] - base);
                w += v;
                m1 += v * x[k];
                m2 += v * x[k] * x[k];
            }
            if (!(w > 0.0)) throw std::runtime_error("zeeman_gradient_scan: empty image");
            const double mean = m1 / w;
            const double var = m2 / w - mean * mean;
            const double s0 = ref.peaks[0].sigma;
            const double half = std::sqrt(std::max(var - s0 * s0, 0.25 * s0 * s0));
            const double amp = 0.5 * (sm[top] - base);
            guess = {{mean - half, ref.peaks[0].sigma, amp}, {mean + half, ref.peaks[0].sigma, amp}};
        }
        const GaussianFit fit = fit_gaussians(x, y, guess);
        cal.delta_omega_hz.push_back(shifts[i]);
        cal.separation_nm.push_back(std::abs(fit.peaks[1].center - fit.peaks[0].center));
        cal.separation_err_nm.push_back(std::hypot(fit.peaks[0].center_err, fit.peaks[1].center_err));
        cal.images.push_back(std::move(c));
    }
    std::vector<double> abs_shift;
    for (double d : cal.delta_omega_hz) abs_shift.push_back(std::abs(d));
    std::vector<double> weights_sigma = cal.separation_err_nm;
    for (double& e : weights_sigma)
        if (!std::isfinite(e) || !(e > 0.0)) e = 1.0;
    const LineFit line = fit_line(abs_shift, cal.separation_nm, weights_sigma);
    if (!(line.slope > 0.0)) throw std::runtime_error("zeeman_gradient_scan: separation does not grow with shift");
    // slope in nm/Hz; g = 2 / slope in Hz/nm, times 1e3 for Hz/um.
    cal.gradient_hz_per_um = 2.0 / line.slope * 1e3;
    cal.gradient_err = cal.gradient_hz_per_um * line.slope_err / line.slope;
    return cal;
}

}  // namespace icontrol
