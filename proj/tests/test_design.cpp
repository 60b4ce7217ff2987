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


#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "icontrol/design.hpp"
#include "icontrol/response.hpp"

namespace {

using namespace icontrol;
constexpr double kPi = std::numbers::pi;

StateTarget stay_down() { return {SpinState::spin_down(), SpinState::spin_down()}; }
StateTarget flip_up() { return {SpinState::spin_down(), SpinState::spin_up()}; }

TargetProfile top_hat() {
    return TargetProfile({{-3000, -1200, stay_down(), "stop-"},
                          {-1200, -600, DontCare{}, "edge-"},
                          {-600, 600, flip_up(), "pass"},
                          {600, 1200, DontCare{}, "edge+"},
                          {1200, 3000, stay_down(), "stop+"}});
}

TargetProfile three_band(const GateTarget& center) {
    const double sep = 4.35 * 426.0;
    return TargetProfile({{-sep - 300, -sep + 300, GateTarget::half_x(), "left"},
                          {-300, 300, center, "center"},
                          {sep - 300, sep + 300, GateTarget::half_x(), "right"}});
}

// Single-sample band centred on `hz`.
Band point_band(double hz, BandGoal goal) { return {hz - 1.0, hz + 1.0, std::move(goal), ""}; }

DesignSpec single_segment(double rabi_hz) {
    DesignSpec s;
    s.n_segments = 1;
    s.rabi_hz = rabi_hz;
    s.segment_duration_s = 0.5 / rabi_hz;  // pi area
    s.samples_per_band = 1;
    return s;
}

TEST(Targets, NamedGatesHaveUnitAxes) {
    for (const auto& g : {GateTarget::identity(), GateTarget::flip_x(), GateTarget::half_x(), GateTarget::hadamard()}) {
        const double n = std::sqrt(g.axis[0] * g.axis[0] + g.axis[1] * g.axis[1] + g.axis[2] * g.axis[2]);
        EXPECT_NEAR(n, 1.0, 1e-12);
        EXPECT_LE(unitarity_error(g.matrix()), 1e-12);
    }
    EXPECT_THROW(GateTarget::about({0, 0, 0}, 1.0), std::invalid_argument);
}

TEST(Targets, ProfileValidation) {
    EXPECT_THROW(TargetProfile({{0, 100, DontCare{}, ""}}), std::invalid_argument);
    EXPECT_THROW(TargetProfile({{100, 0, flip_up(), ""}}), std::invalid_argument);
    EXPECT_THROW(TargetProfile({{0, 100, flip_up(), ""}, {50, 150, stay_down(), ""}}), std::invalid_argument);
    EXPECT_NO_THROW(TargetProfile({{0, 100, flip_up(), ""}, {100, 150, stay_down(), ""}}));
}

TEST(GateCost, FullTurnIsIdentityUpToPhase) {
    DesignSpec s = single_segment(1000.0);
    s.n_segments = 2;  // two pi pulses about a common axis
    const TargetProfile p({point_band(0.0, GateTarget::identity())});
    const std::vector<double> phases{1.3, 1.3};
    EXPECT_NEAR(gate_cost(phases, s, p), 0.0, 1e-15);
}

TEST(GateCost, ResonantFlip) {
    const DesignSpec s = single_segment(1000.0);
    const TargetProfile p({point_band(0.0, GateTarget::flip_x())});
    EXPECT_NEAR(gate_cost(std::vector<double>{0.0}, s, p), 0.0, 1e-15);
}

TEST(GateCost, HilbertSchmidtSeesGlobalPhase) {
    // The pulse gives -i sigma_x; the target sigma_x = e^{i pi/2} (-i sigma_x).
    DesignSpec s = single_segment(1000.0);
    s.metric = GateMetric::kHilbertSchmidt;
    const TargetProfile p({point_band(0.0, GateTarget::about({1, 0, 0}, kPi, kPi / 2))});
    EXPECT_NEAR(gate_cost(std::vector<double>{0.0}, s, p), 2.0, 1e-12);
    s.metric = GateMetric::kInfidelity;
    EXPECT_NEAR(gate_cost(std::vector<double>{0.0}, s, p), 0.0, 1e-15);
}

TEST(GateCost, WrongPhaseCountThrows) {
    const DesignSpec s = single_segment(1000.0);
    const TargetProfile p({point_band(0.0, GateTarget::flip_x())});
    EXPECT_THROW(gate_cost(std::vector<double>{0.0, 1.0}, s, p), std::invalid_argument);
    const TargetProfile st({point_band(0.0, flip_up())});
    EXPECT_THROW(gate_cost(std::vector<double>{0.0}, s, st), std::invalid_argument);
}

TEST(StateCost, Examples) {
    DesignSpec zero = single_segment(1000.0);
    zero.rabi_hz = 0.0;
    const TargetProfile down({point_band(0.0, stay_down())});
    EXPECT_NEAR(state_cost(std::vector<double>{0.4}, zero, down), 0.0, 1e-15);

    const DesignSpec s = single_segment(1000.0);
    EXPECT_NEAR(state_cost(std::vector<double>{0.0}, s, TargetProfile({point_band(0.0, flip_up())})), 0.0, 1e-15);

    // Detuned by the Rabi rate: closed-form Rabi flopping.
    const double rabi = hz_to_rad(1000.0);
    const double omega = std::sqrt(2.0) * rabi;
    const double p = 0.5 * std::pow(std::sin(omega * s.segment_duration_s / 2), 2);
    EXPECT_NEAR(state_cost(std::vector<double>{0.0}, s, TargetProfile({point_band(1000.0, flip_up())})), 1.0 - p,
                1e-12);
}

TEST(PhaseCostProperties, DontCareBandsAreInert) {
    DesignSpec s;
    s.n_segments = 12;
    s.samples_per_band = 9;
    const TargetProfile a({{-600, 600, flip_up(), "pass"}, {1200, 3000, stay_down(), "stop"}});
    const TargetProfile b({{-600, 600, flip_up(), "renamed"},
                           {600, 1200, DontCare{}, "x"},
                           {1200, 3000, stay_down(), "stop"},
                           {5000, 6000, DontCare{}, "y"}});
    Rng rng(1);
    std::vector<double> ph(12);
    for (auto& v : ph) v = rng.uniform(0, 2 * kPi);
    EXPECT_EQ(state_cost(ph, s, a), state_cost(ph, s, b));
}

TEST(PhaseCostProperties, InfidelityIgnoresTargetPhase) {
    DesignSpec s;
    s.n_segments = 10;
    s.samples_per_band = 7;
    Rng rng(2);
    std::vector<double> ph(10);
    for (auto& v : ph) v = rng.uniform(0, 2 * kPi);
    const TargetProfile plain = three_band(GateTarget::hadamard());
    std::vector<Band> bands = plain.bands();
    bands[1].goal = GateTarget::about({1, 0, 1}, kPi, 0.77);
    bands[2].goal = GateTarget::about({1, 0, 0}, kPi / 2, -2.1);
    EXPECT_NEAR(gate_cost(ph, s, plain), gate_cost(ph, s, TargetProfile(bands)), 1e-14);
}

TEST(PhaseCostProperties, GradientMatchesCentralDifferences) {
    Rng rng(3);
    for (GateMetric m : {GateMetric::kInfidelity, GateMetric::kHilbertSchmidt}) {
        for (int trial = 0; trial < 3; ++trial) {
            DesignSpec s;
            s.n_segments = 16;
            s.samples_per_band = 7;
            s.metric = m;
            const PhaseCost cost(s, trial == 2 ? top_hat() : three_band(GateTarget::hadamard()));
            std::vector<double> ph(16), g(16);
            for (auto& v : ph) v = rng.uniform(0, 2 * kPi);
            cost.value_and_gradient(ph, g);
            for (std::size_t j = 0; j < ph.size(); ++j) {
                auto hi = ph, lo = ph;
                hi[j] += 1e-6;
                lo[j] -= 1e-6;
                const double fd = (cost.value(hi) - cost.value(lo)) / 2e-6;
                EXPECT_LE(std::abs(fd - g[j]), 1e-5 * std::max(std::abs(g[j]), 1e-3)) << "segment " << j;
            }
        }
    }
}

TEST(Optimize, NarrowFlipWithOneSegment) {
    DesignSpec s = single_segment(2500.0);
    s.samples_per_band = 5;
    s.n_restarts = 3;
    const DesignResult r = optimize_phases(s, TargetProfile({{-50, 50, GateTarget::flip_x(), ""}}));
    EXPECT_LT(r.cost, 1e-4);
}

TEST(Optimize, ReproducibleAndCostConsistent) {
    DesignSpec s;
    s.n_segments = 20;
    s.samples_per_band = 9;
    s.n_restarts = 3;
    s.max_iterations = 150;
    s.rng_seed = 77;
    const TargetProfile p = three_band(GateTarget::hadamard());
    const DesignResult a = optimize_phases(s, p);
    const DesignResult b = optimize_phases(s, p);
    EXPECT_EQ(a.phases, b.phases);
    EXPECT_EQ(a.cost, b.cost);
    EXPECT_NEAR(a.cost, PhaseCost(s, p).value(a.phases), 1e-10);
    EXPECT_NEAR(a.cost, evaluate_train(a.train, p, s.samples_per_band).cost, 1e-10);

    DesignSpec threaded = s;
    threaded.jobs = 3;
    EXPECT_EQ(optimize_phases(threaded, p).phases, a.phases);
}

TEST(Optimize, RescaledTrainKeepsCostOnStretchedBands) {
    DesignSpec s;
    s.n_segments = 20;
    s.samples_per_band = 9;
    s.n_restarts = 2;
    s.max_iterations = 100;
    const TargetProfile p = three_band(GateTarget::hadamard());
    const DesignResult r = optimize_phases(s, p);
    for (double k : {0.25, 4.0}) {
        const double c = evaluate_train(rescale_train(r.train, k), scale_profile(p, k), s.samples_per_band).cost;
        EXPECT_NEAR(c, r.cost, 1e-10);
    }
}

TEST(Optimize, TopHatMeetsTargetsOnFinerGrid) {
    DesignSpec s;
    s.n_restarts = 4;
    const TargetProfile p = top_hat();
    const DesignResult r = optimize_phases(s, p);
    const TrainEvaluation fine = evaluate_train(r.train, p, 10 * s.samples_per_band);
    for (std::size_t b : {0u, 2u, 4u}) EXPECT_LE(fine.per_band_cost[b], 1e-2) << "band " << b;
    EXPECT_LE(r.train.total_duration(), 4e-3 + 1e-12);
}

TEST(Optimize, ThreeBandHadamardDesign) {
    DesignSpec s;
    s.n_restarts = 3;
    const TargetProfile p = three_band(GateTarget::hadamard());
    const DesignResult r = optimize_phases(s, p);
    const TrainEvaluation fine = evaluate_train(r.train, p, 10 * s.samples_per_band);
    for (double c : fine.per_band_cost) EXPECT_LE(c, 2e-2);
}

TEST(Optimize, ExhaustedBudgetIsNotAnError) {
    DesignSpec s;
    s.n_segments = 20;
    s.n_restarts = 1;
    s.max_iterations = 1;
    const DesignResult r = optimize_phases(s, top_hat());
    EXPECT_FALSE(r.converged);
    EXPECT_TRUE(std::isfinite(r.cost));
}

TEST(DesignSpecValidation, RabiCap) {
    DesignSpec s;
    s.rabi_hz = 50e3;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s.rabi_cap_hz = 60e3;
    EXPECT_NO_THROW(s.validate());
}

TEST(GaussianPulse, ResonantPiFlip) {
    const PulseTrain g = gaussian_pulse(0.5e-3, kPi, 4.0, 10e-6);
    EXPECT_EQ(g.size(), 400u);
    EXPECT_NEAR(g.area(), kPi, 1e-12);
    EXPECT_GE(apply(train_propagator(g, 0.0), SpinState::spin_down()).p_up(), 0.999);
    EXPECT_THROW(gaussian_pulse(0.5e-3, kPi, 4.0, 0.5e-3), std::invalid_argument);
    EXPECT_THROW(gaussian_pulse(0.0, kPi), std::invalid_argument);
}

// rms width of P(delta) for a weak pulse, by direct scan.
double scanned_rms_hz(double sigma_t) {
    const PulseTrain g = gaussian_pulse(sigma_t, 1e-3);
    const double span = 12.0 * gaussian_spectral_rms_hz(sigma_t);
    double w = 0.0, w2 = 0.0;
    for (const auto& pt : response_profile(g, linspace(-span, span, 2401))) {
        w += pt.p_flip;
        w2 += pt.p_flip * pt.delta_hz * pt.delta_hz;
    }
    return std::sqrt(w2 / w);
}

TEST(GaussianPulse, SpectralWidth) {
    EXPECT_NEAR(gaussian_spectral_rms_hz(0.5e-3), 225.0, 0.5);
    const double rms = scanned_rms_hz(0.5e-3);
    EXPECT_NEAR(rms, 225.0, 2.25);
    const double half = scanned_rms_hz(0.25e-3);
    EXPECT_NEAR(half / rms, 2.0, 0.02);
    EXPECT_NEAR(gaussian_pulse(0.25e-3, kPi).total_duration(), 0.5 * gaussian_pulse(0.5e-3, kPi).total_duration(),
                1e-15);
}

TEST(ResponseProfile, IdentityAndRabiLineshape) {
    const PulseTrain idle({PulseSegment(1e-3, 0.0, 0.0)});
    for (const auto& pt : response_profile(idle, linspace(-1000, 1000, 11))) EXPECT_EQ(pt.p_flip, 0.0);

    const double rabi = hz_to_rad(1000.0);
    const double t = kPi / rabi;
    const PulseTrain pi({PulseSegment(t, rabi, 0.0)});
    for (const auto& pt : response_profile(pi, linspace(-5000, 5000, 41))) {
        const double d = hz_to_rad(pt.delta_hz);
        const double w = std::sqrt(rabi * rabi + d * d);
        EXPECT_NEAR(pt.p_flip, rabi * rabi / (w * w) * std::pow(std::sin(w * t / 2), 2), 1e-12);
    }
}

TEST(ResponseProfile, FidelityAgainstProfile) {
    const double rabi = hz_to_rad(1000.0);
    const PulseTrain pi({PulseSegment(kPi / rabi, rabi, 0.0)});
    const TargetProfile p({{-10, 10, GateTarget::flip_x(), ""}});
    const auto pts = response_profile(pi, {0.0, 500.0}, SpinState::spin_down(), &p);
    EXPECT_NEAR(pts[0].fidelity, 1.0, 1e-15);
    EXPECT_TRUE(std::isnan(pts[1].fidelity));
}

}  // namespace
