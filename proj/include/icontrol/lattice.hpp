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

// Virtual addressing experiment: atoms on a 1D trap lattice whose qubit
// frequency is shifted by a long-period sinusoidal light shift, driven by
// microwave pulse trains and read out projectively.
//
// Units: positions in nm, frequencies in Hz. Atoms carry multiplicity along
// the y-z plane by repetition at identical x.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "icontrol/rng.hpp"
#include "icontrol/su2.hpp"

namespace icontrol {

struct LatticeScene {
    double trap_period_nm = 426.0;
    double addr_period_um = 65.9 * 0.426;  // 28.07 um
    double peak_shift_hz = 4.35e3 * (65.9 * 0.426) / (2.0 * std::numbers::pi);
    double addr_offset_nm = 0.0;
    double jitter_sigma_nm = 15.0;
    bool jitter_enabled = false;
    double cloud_diameter_addr_periods = 35.0;
    double window_addr_periods = 1.0;  // extent of simulated sites along x
    long plane_sites = 100000;         // y-z sites per x plane
    double occupancy = 0.01;
    double carrier_hz = 0.0;           // microwave offset from the unshifted line
    double eom_volts_per_period = 164.0;
    double readout_error = 0.01;

    double addr_period_nm() const { return addr_period_um * 1e3; }

    /// Slope of the light shift at its zero crossings, Hz per um.
    double gradient_hz_per_um() const { return kTwoPi * peak_shift_hz / addr_period_um; }

    /// Peak shift giving the requested zero-crossing gradient.
    void set_gradient(double hz_per_um) { peak_shift_hz = hz_per_um * addr_period_um / kTwoPi; }

    long window_sites() const {
        const double periods = std::min(window_addr_periods, cloud_diameter_addr_periods);
        return std::max<long>(1, static_cast<long>(std::floor(periods * addr_period_nm() / trap_period_nm)));
    }

    void validate() const {
        auto positive = [](double v, const char* what) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw std::invalid_argument(std::string("LatticeScene: ") + what + " must be > 0");
        };
        positive(trap_period_nm, "trap_period_nm");
        positive(addr_period_um, "addr_period_um");
        positive(peak_shift_hz, "peak_shift_hz");
        positive(cloud_diameter_addr_periods, "cloud_diameter_addr_periods");
        positive(window_addr_periods, "window_addr_periods");
        positive(eom_volts_per_period, "eom_volts_per_period");
        if (!(jitter_sigma_nm >= 0.0)) throw std::invalid_argument("LatticeScene: jitter_sigma_nm < 0");
        if (plane_sites < 1) throw std::invalid_argument("LatticeScene: plane_sites must be >= 1");
        if (!(occupancy > 0.0 && occupancy <= 1.0))
            throw std::invalid_argument("LatticeScene: occupancy must be in (0, 1]");
        if (!(readout_error >= 0.0 && readout_error <= 1.0))
            throw std::invalid_argument("LatticeScene: readout_error must be in [0, 1]");
        if (!std::isfinite(addr_offset_nm) || !std::isfinite(carrier_hz))
            throw std::invalid_argument("LatticeScene: non-finite offset or carrier");
    }
};

/// Light-shift detuning (Hz) of a site at x (nm).
inline double site_detuning(const LatticeScene& scene, double x_nm) {
    return scene.peak_shift_hz *
           std::sin(kTwoPi * (x_nm - scene.addr_offset_nm) / scene.addr_period_nm());
}

struct Atom {
    long site_index = 0;
    double x_nm = 0.0;
    SpinState spin = SpinState::spin_up();
    bool alive = true;
};

struct AtomEnsemble {
    std::vector<Atom> atoms;
    LatticeScene scene;
    std::uint64_t rng_seed = 0;
    // Collective displacement of all atoms along x (spin-dependent transport).
    double transport_nm = 0.0;

    std::size_t alive_count() const {
        std::size_t n = 0;
        for (const auto& a : atoms) n += a.alive ? 1 : 0;
        return n;
    }

    /// Detuning seen by `a` relative to the microwave carrier, Hz.
    double detuning_hz(const Atom& a, double extra_hz = 0.0) const {
        return site_detuning(scene, a.x_nm + transport_nm) + extra_hz - scene.carrier_hz;
    }
};

/// Fills sites of the simulated window independently with probability
/// `occupancy`, one y-z layer of the window after another, until `n_atoms`
/// are placed. All atoms start in |up>.
inline AtomEnsemble sample_ensemble(const LatticeScene& scene, std::size_t n_atoms, std::uint64_t seed) {
    scene.validate();
    const long nx = scene.window_sites();
    const double capacity = static_cast<double>(nx) * static_cast<double>(scene.plane_sites);
    if (static_cast<double>(n_atoms) > capacity)
        throw std::invalid_argument("sample_ensemble: window holds " +
                                    std::to_string(static_cast<long long>(capacity)) +
                                    " sites, cannot place " + std::to_string(n_atoms) + " atoms");
    AtomEnsemble ens;
    ens.scene = scene;
    ens.rng_seed = seed;
    ens.atoms.reserve(n_atoms);
    // Geometric gaps between occupied sites, scanning layer by layer.
    Rng rng(seed);
    const auto total = static_cast<std::uint64_t>(nx) * static_cast<std::uint64_t>(scene.plane_sites);
    std::uint64_t j = 0;
    while (ens.atoms.size() < n_atoms) {
        j += rng.geometric(scene.occupancy);
        if (j >= total) break;
        const long i = static_cast<long>(j % static_cast<std::uint64_t>(nx));
        ens.atoms.push_back({i, static_cast<double>(i) * scene.trap_period_nm, SpinState::spin_up(), true});
        ++j;
    }
    if (ens.atoms.size() < n_atoms)
        throw std::runtime_error("sample_ensemble: window exhausted after " +
                                 std::to_string(ens.atoms.size()) + " atoms");
    return ens;
}

/// Applies `train` to every live atom at its local detuning plus
/// `extra_detuning_hz` (e.g. a Zeeman shift). Propagators are shared per site.
inline AtomEnsemble apply_pulse(AtomEnsemble ensemble, const PulseTrain& train,
                                double extra_detuning_hz = 0.0) {
    std::unordered_map<long, Unitary2> cache;
    for (auto& a : ensemble.atoms) {
        if (!a.alive) continue;
        auto it = cache.find(a.site_index);
        if (it == cache.end()) {
            const double d = hz_to_rad(ensemble.detuning_hz(a, extra_detuning_hz));
            it = cache.emplace(a.site_index, train_propagator(train, d)).first;
        }
        a.spin = apply(it->second, a.spin);
    }
    return ensemble;
}

/// Projective measurement; atoms found in |up> are removed, the rest are
/// left in |down>.
inline AtomEnsemble measure_and_remove_up(AtomEnsemble ensemble, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& a : ensemble.atoms) {
        if (!a.alive) continue;
        if (rng.uniform() < a.spin.p_up()) {
            a.alive = false;
        } else {
            a.spin = SpinState::spin_down();
        }
    }
    return ensemble;
}

struct Counts {
    std::size_t up = 0;
    std::size_t down = 0;
};

/// Projective readout of every live atom; each outcome is flipped with
/// probability `readout_error`. The ensemble is not modified.
inline Counts count_up(const AtomEnsemble& ensemble, double readout_error, std::uint64_t seed) {
    if (!(readout_error >= 0.0 && readout_error <= 1.0))
        throw std::invalid_argument("count_up: readout_error must be in [0, 1]");
    Rng rng(seed);
    Counts c;
    for (const auto& a : ensemble.atoms) {
        if (!a.alive) continue;
        bool up = rng.uniform() < a.spin.p_up();
        if (rng.uniform() < readout_error) up = !up;
        (up ? c.up : c.down) += 1;
    }
    return c;
}

/// Moves the addressing lattice by dx (nm). With jitter enabled and a
/// generator supplied, adds Gaussian position noise of jitter_sigma_nm.
inline LatticeScene translate_addressing(LatticeScene scene, double dx_nm, Rng* rng = nullptr) {
    scene.addr_offset_nm += dx_nm;
    if (scene.jitter_enabled && rng && scene.jitter_sigma_nm > 0.0)
        scene.addr_offset_nm += rng->normal(0.0, scene.jitter_sigma_nm);
    return scene;
}

/// EOM voltage to addressing-lattice displacement, linear.
inline double eom_translation(double voltage, double volts_per_period = 164.0,
                              double trap_period_nm = 426.0) {
    return voltage / volts_per_period * trap_period_nm;
}

inline double eom_translation(const LatticeScene& scene, double voltage) {
    return eom_translation(voltage, scene.eom_volts_per_period, scene.trap_period_nm);
}

}  // namespace icontrol
