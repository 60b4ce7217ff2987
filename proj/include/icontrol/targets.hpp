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

// Frequency-dependent control targets: a profile is a set of detuning bands,
// each asking for a gate, a state transfer, or nothing in particular.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "icontrol/su2.hpp"

namespace icontrol {

/// Rotation by `angle` about a unit axis, times an optional global phase
/// e^{i global_phase}. The phase is irrelevant to the phase-insensitive
/// metric but not to the Hilbert-Schmidt distance.
struct GateTarget {
    std::array<double, 3> axis{1.0, 0.0, 0.0};
    double angle = 0.0;
    double global_phase = 0.0;

    static GateTarget about(std::array<double, 3> axis, double angle, double global_phase = 0.0) {
        const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
        if (!(n > 0.0) || !std::isfinite(n) || !std::isfinite(angle) || !std::isfinite(global_phase))
            throw std::invalid_argument("GateTarget: axis must be a finite nonzero vector");
        return {{axis[0] / n, axis[1] / n, axis[2] / n}, angle, global_phase};
    }
    static GateTarget identity() { return about({1, 0, 0}, 0.0); }
    static GateTarget flip_x() { return about({1, 0, 0}, std::numbers::pi); }
    static GateTarget half_x() { return about({1, 0, 0}, std::numbers::pi / 2); }
    static GateTarget hadamard() { return about({1, 0, 1}, std::numbers::pi); }

    Unitary2 matrix() const {
        return std::polar(1.0, global_phase) * rotation(axis[0], axis[1], axis[2], angle);
    }
};

/// Map a fixed input state onto a target state.
struct StateTarget {
    SpinState input = SpinState::spin_down();
    SpinState target = SpinState::spin_up();
};

struct DontCare {};

using BandGoal = std::variant<GateTarget, StateTarget, DontCare>;

/// A detuning interval [lo_hz, hi_hz] and what should happen inside it.
struct Band {
    double lo_hz = 0.0;
    double hi_hz = 0.0;
    BandGoal goal = DontCare{};
    std::string name;

    double width_hz() const { return hi_hz - lo_hz; }
    double center_hz() const { return 0.5 * (lo_hz + hi_hz); }
    bool is_gate() const { return std::holds_alternative<GateTarget>(goal); }
    bool is_state() const { return std::holds_alternative<StateTarget>(goal); }
    bool is_dont_care() const { return std::holds_alternative<DontCare>(goal); }
    bool contains(double hz) const { return hz >= lo_hz && hz <= hi_hz; }
};

class TargetProfile {
public:
    TargetProfile() = default;
    TargetProfile(std::vector<Band> bands, std::string description = {})
        : bands_(std::move(bands)), description_(std::move(description)) {
        validate();
    }

    const std::vector<Band>& bands() const { return bands_; }
    const std::string& description() const { return description_; }

    bool has_gate_bands() const {
        return std::any_of(bands_.begin(), bands_.end(), [](const Band& b) { return b.is_gate(); });
    }
    bool has_state_bands() const {
        return std::any_of(bands_.begin(), bands_.end(), [](const Band& b) { return b.is_state(); });
    }

    /// Index of the band containing `hz`, or -1.
    int band_at(double hz) const {
        for (std::size_t i = 0; i < bands_.size(); ++i)
            if (bands_[i].contains(hz)) return static_cast<int>(i);
        return -1;
    }

private:
    void validate() const {
        bool any_target = false;
        for (const auto& b : bands_) {
            if (!std::isfinite(b.lo_hz) || !std::isfinite(b.hi_hz) || !(b.lo_hz < b.hi_hz))
                throw std::invalid_argument("TargetProfile: band needs finite lo < hi");
            any_target = any_target || !b.is_dont_care();
        }
        if (!any_target) throw std::invalid_argument("TargetProfile: no gate or state band");
        std::vector<std::pair<double, double>> spans;
        for (const auto& b : bands_) spans.emplace_back(b.lo_hz, b.hi_hz);
        std::sort(spans.begin(), spans.end());
        for (std::size_t i = 1; i < spans.size(); ++i)
            if (spans[i].first < spans[i - 1].second)
                throw std::invalid_argument("TargetProfile: bands overlap");
    }

    std::vector<Band> bands_;
    std::string description_;
};

/// Multiplies every band edge by kappa (the frequency stretch that goes with
/// rescale_train).
inline TargetProfile scale_profile(const TargetProfile& profile, double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("scale_profile: kappa must be > 0");
    std::vector<Band> bands = profile.bands();
    for (auto& b : bands) {
        b.lo_hz *= kappa;
        b.hi_hz *= kappa;
    }
    return TargetProfile(std::move(bands), profile.description());
}

/// Uniform grid of n points spanning [lo, hi]; a single point sits at the centre.
inline std::vector<double> band_grid(const Band& band, int n) {
    if (n < 1) throw std::invalid_argument("band_grid: need at least one sample");
    std::vector<double> grid(static_cast<std::size_t>(n));
    if (n == 1) {
        grid[0] = band.center_hz();
        return grid;
    }
    for (int k = 0; k < n; ++k)
        grid[static_cast<std::size_t>(k)] =
            band.lo_hz + band.width_hz() * static_cast<double>(k) / static_cast<double>(n - 1);
    return grid;
}

}  // namespace icontrol
