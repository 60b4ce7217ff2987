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

#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "icontrol/design.hpp"
#include "icontrol/su2.hpp"
#include "icontrol/targets.hpp"

namespace icontrol {

/// Amplitude-modulated pulse with Gaussian envelope exp(-t^2 / 2 sigma_t^2),
/// cut at +-truncation_sigmas * sigma_t and sampled at segment midpoints.
/// The peak Rabi rate is set so the resonant area equals `pulse_area` (rad).
/// Phases are all zero.
inline PulseTrain gaussian_pulse(double sigma_t, double pulse_area, double truncation_sigmas = 4.0,
                                 double segment_dt = 0.0) {
    if (segment_dt == 0.0) segment_dt = sigma_t / 50.0;
    if (!(sigma_t > 0.0) || !(segment_dt > 0.0) || !(truncation_sigmas > 0.0))
        throw std::invalid_argument("gaussian_pulse: sigma_t, segment_dt, truncation must be > 0");
    if (!(pulse_area >= 0.0) || !std::isfinite(pulse_area))
        throw std::invalid_argument("gaussian_pulse: pulse_area must be finite and >= 0");
    if (segment_dt >= sigma_t)
        throw std::invalid_argument("gaussian_pulse: segment_dt must be < sigma_t");

    const double span = 2.0 * truncation_sigmas * sigma_t;
    const auto n = std::max<long long>(1, std::llround(span / segment_dt));
    const double dt = span / static_cast<double>(n);
    std::vector<double> env(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (long long i = 0; i < n; ++i) {
        const double t = -0.5 * span + (static_cast<double>(i) + 0.5) * dt;
        env[static_cast<std::size_t>(i)] = std::exp(-t * t / (2.0 * sigma_t * sigma_t));
        sum += env[static_cast<std::size_t>(i)] * dt;
    }
    const double peak = pulse_area / sum;  // rad/s
    std::vector<PulseSegment> segs;
    segs.reserve(env.size());
    for (double e : env) segs.emplace_back(dt, peak * e, 0.0);
    return PulseTrain(std::move(segs), "gaussian");
}

/// rms width (Hz) of the weak-excitation power spectrum of a Gaussian
/// envelope with rms duration sigma_t: 1 / (2 sqrt(2) pi sigma_t).
inline double gaussian_spectral_rms_hz(double sigma_t) {
    return 1.0 / (2.0 * std::sqrt(2.0) * std::numbers::pi * sigma_t);
}

struct ResponsePoint {
    double delta_hz;
    double p_flip;    // |<up|U|input>|^2
    double fidelity;  // against the profile band at delta, NaN outside target bands
};

/// Pointwise flip probability, plus fidelity against `profile` when given.
inline std::vector<ResponsePoint> response_profile(const PulseTrain& train,
                                                   const std::vector<double>& delta_grid_hz,
                                                   const SpinState& input = SpinState::spin_down(),
                                                   const TargetProfile* profile = nullptr) {
    std::vector<ResponsePoint> out;
    out.reserve(delta_grid_hz.size());
    for (double d : delta_grid_hz) {
        const Unitary2 u = train_propagator(train, hz_to_rad(d));
        const SpinState s = apply(u, input);
        double fid = std::numeric_limits<double>::quiet_NaN();
        if (profile) {
            const int b = profile->band_at(d);
            if (b >= 0) {
                const Band& band = profile->bands()[static_cast<std::size_t>(b)];
                if (const auto* g = std::get_if<GateTarget>(&band.goal)) {
                    fid = fidelity_phase_insensitive(u, g->matrix());
                } else if (const auto* st = std::get_if<StateTarget>(&band.goal)) {
                    fid = std::norm(inner(st->target, apply(u, st->input)));
                }
            }
        }
        out.push_back({d, s.p_up(), fid});
    }
    return out;
}

/// Evenly spaced grid with n points on [lo, hi].
inline std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) throw std::invalid_argument("linspace: n must be >= 1");
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        v[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / static_cast<double>(n - 1);
    return v;
}

}  // namespace icontrol
