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
#include <random>
#include <vector>

#include "icontrol/pulse_csv.hpp"
#include "icontrol/rng.hpp"
#include "icontrol/su2.hpp"
#include "oracle/expm_oracle.hpp"

namespace {

using namespace icontrol;
constexpr double kPi = std::numbers::pi;

double max_diff(const Unitary2& u, const oracle::Mat& m) {
    double d = 0.0;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) d = std::max(d, std::abs(u(r, c) - m(r, c)));
    return d;
}

PulseTrain random_train(Rng& rng, int n, double max_rabi_hz = 20e3) {
    std::vector<PulseSegment> segs;
    for (int i = 0; i < n; ++i)
        segs.push_back(PulseSegment::from_hz(rng.uniform(1e-6, 2e-4), rng.uniform(0.0, max_rabi_hz),
                                             rng.uniform(-10.0, 10.0)));
    return PulseTrain(std::move(segs));
}

std::vector<oracle::Seg> to_oracle(const PulseTrain& t) {
    std::vector<oracle::Seg> v;
    for (const auto& s : t.segments()) v.push_back({s.duration(), s.rabi(), s.phase()});
    return v;
}

TEST(SegmentPropagator, ResonantPiPulseFlips) {
    const double rabi = hz_to_rad(1000.0);
    const PulseSegment seg(kPi / rabi, rabi, 0.0);
    const SpinState s = apply(segment_propagator(seg, 0.0), SpinState::spin_down());
    EXPECT_NEAR(s.p_up(), 1.0, 1e-15);
}

TEST(SegmentPropagator, FreePrecessionKeepsPopulations) {
    const double delta = hz_to_rad(500.0);
    const PulseSegment seg(kPi / delta, 0.0, 0.3);
    const Unitary2 u = segment_propagator(seg, delta);
    EXPECT_NEAR(std::norm(u(0, 0)), 1.0, 1e-15);
    // Rotation about k by pi: diag(e^{i pi/2}, e^{-i pi/2}) in the (down, up) basis.
    EXPECT_NEAR(std::abs(u(0, 0) - cplx(0, 1)), 0.0, 1e-15);
}

TEST(SegmentPropagator, ZeroFieldIsExactIdentity) {
    const PulseSegment seg(1e-3, 0.0, 1.0);
    EXPECT_EQ(segment_propagator(seg, 0.0), Unitary2::identity());
}

TEST(SegmentPropagator, DetunedPulseMatchesOracle) {
    const double rabi = hz_to_rad(2000.0);
    const double t = kPi / rabi;
    const PulseSegment seg(t, rabi, 0.0);
    EXPECT_LE(max_diff(segment_propagator(seg, rabi), oracle::segment(t, rabi, 0.0, rabi)), 1e-10);
}

TEST(SegmentPropagator, RejectsNonFiniteInput) {
    const PulseSegment seg(1e-4, 1.0, 0.0);
    EXPECT_THROW(segment_propagator(seg, std::nan("")), std::invalid_argument);
    EXPECT_THROW(segment_propagator(seg, INFINITY), std::invalid_argument);
    EXPECT_THROW(PulseSegment(1e-4, std::nan(""), 0.0), std::invalid_argument);
    EXPECT_THROW(PulseSegment(0.0, 1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(PulseSegment(1e-4, -1.0, 0.0), std::invalid_argument);
}

TEST(SegmentPropagator, MatchesOracleOnRandomCases) {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const PulseSegment seg = PulseSegment::from_hz(rng.uniform(1e-6, 1e-3), rng.uniform(0, 40e3),
                                                       rng.uniform(0, 2 * kPi));
        const double d = hz_to_rad(rng.uniform(-20e3, 20e3));
        const Unitary2 u = segment_propagator(seg, d);
        EXPECT_LE(max_diff(u, oracle::segment(seg.duration(), seg.rabi(), seg.phase(), d)), 1e-10);
        EXPECT_LE(unitarity_error(u), 1e-12);
        EXPECT_NEAR(std::abs(u.det()), 1.0, 1e-12);
    }
}

TEST(TrainPropagator, TwoHalfPulsesMakeAFlip) {
    const double rabi = hz_to_rad(1000.0);
    const double t = 0.5 * kPi / rabi;
    const PulseTrain two({PulseSegment(t, rabi, 0.0), PulseSegment(t, rabi, 0.0)});
    const PulseTrain one({PulseSegment(2 * t, rabi, 0.0)});
    EXPECT_LE(max_entry_diff(train_propagator(two, 0.0), train_propagator(one, 0.0)), 1e-15);
}

TEST(TrainPropagator, ZeroPhasesAddRotationAngles) {
    Rng rng(3);
    std::vector<PulseSegment> segs;
    double angle = 0.0;
    for (int i = 0; i < 7; ++i) {
        segs.push_back(PulseSegment::from_hz(rng.uniform(1e-5, 1e-4), rng.uniform(100, 5000), 0.0));
        angle += segs.back().rabi() * segs.back().duration();
    }
    EXPECT_LE(max_entry_diff(train_propagator(PulseTrain(segs), 0.0), rotation(1, 0, 0, angle)), 1e-12);
}

TEST(TrainPropagator, FirstSegmentActsFirst) {
    const double rabi = hz_to_rad(1000.0);
    const double t = 0.5 * kPi / rabi;
    const PulseSegment x(t, rabi, 0.0), y(t, rabi, kPi / 2);
    const Unitary2 u = train_propagator(PulseTrain({x, y}), 0.0);
    EXPECT_LE(max_entry_diff(u, segment_propagator(y, 0.0) * segment_propagator(x, 0.0)), 1e-15);
}

TEST(TrainPropagator, RandomTrainMatchesSequentialOracle) {
    Rng rng(5);
    const PulseTrain train = random_train(rng, 5);
    const double d = hz_to_rad(1000.0);
    EXPECT_LE(max_diff(train_propagator(train, d), oracle::train(to_oracle(train), d)), 1e-10);
}

TEST(TrainPropagator, EmptyTrainThrows) {
    EXPECT_THROW(train_propagator(PulseTrain{}, 0.0), std::invalid_argument);
}

TEST(TrainPropagator, UnitaryForLongRandomTrains) {
    Rng rng(8);
    for (int i = 0; i < 50; ++i) {
        const PulseTrain train = random_train(rng, 60);
        EXPECT_LE(unitarity_error(train_propagator(train, hz_to_rad(rng.uniform(-2e4, 2e4)))), 1e-12);
    }
}

TEST(Apply, IdentityAndFlip) {
    const SpinState s = SpinState::from_bloch(0.7, 1.9);
    const SpinState t = apply(Unitary2::identity(), s);
    EXPECT_EQ(t.down, s.down);
    EXPECT_EQ(t.up, s.up);
    EXPECT_NEAR(apply(rotation(1, 0, 0, kPi), SpinState::spin_down()).p_up(), 1.0, 1e-15);
}

TEST(Apply, HadamardGivesEqualPopulations) {
    const double r = 1.0 / std::sqrt(2.0);
    const SpinState s = apply(rotation(r, 0, r, kPi), SpinState::spin_down());
    EXPECT_NEAR(s.p_up(), 0.5, 1e-15);
    EXPECT_NEAR(s.p_down(), 0.5, 1e-15);
}

TEST(Apply, PreservesNorm) {
    Rng rng(21);
    for (int i = 0; i < 100; ++i) {
        const SpinState s = SpinState::from_bloch(rng.uniform(0, kPi), rng.uniform(0, 2 * kPi));
        const Unitary2 u = train_propagator(random_train(rng, 4), hz_to_rad(rng.uniform(-1e4, 1e4)));
        EXPECT_NEAR(apply(u, s).norm2(), 1.0, 1e-12);
    }
}

TEST(Metrics, HilbertSchmidtExamples) {
    const Unitary2 w = rotation(0.3, 0.4, std::sqrt(0.75), 1.1);
    EXPECT_EQ(hs_cost_distance(w, w), 0.0);
    EXPECT_NEAR(hs_cost_distance(cplx(-1.0) * w, w), 2.0 * std::sqrt(2.0), 1e-15);
    const Unitary2 i_sigma_x = cplx(0, 1) * pauli::x();
    EXPECT_NEAR(hs_cost_distance(Unitary2::identity(), i_sigma_x), 2.0, 1e-15);
}

TEST(Metrics, PhaseInsensitiveFidelityExamples) {
    const Unitary2 w = rotation(0.0, 0.6, 0.8, 2.0);
    EXPECT_NEAR(fidelity_phase_insensitive(w, w), 1.0, 1e-15);
    for (double g : {0.1, 1.0, 2.5, -3.0}) {
        EXPECT_NEAR(fidelity_phase_insensitive(std::polar(1.0, g) * w, w), 1.0, 1e-15);
        // The Hilbert-Schmidt distance does see the phase.
        EXPECT_GT(hs_cost_distance(std::polar(1.0, g) * w, w), 0.09);
    }
    EXPECT_NEAR(fidelity_phase_insensitive(Unitary2::identity(), rotation(1, 0, 0, kPi)), 0.0, 1e-15);
}

TEST(Rescale, IdentityAndDuration) {
    Rng rng(4);
    const PulseTrain t = random_train(rng, 9);
    EXPECT_EQ(rescale_train(t, 1.0), t);
    std::vector<PulseSegment> segs(40, PulseSegment::from_hz(1e-4, 2500.0, 0.0));
    EXPECT_NEAR(rescale_train(PulseTrain(segs), 4.0).total_duration(), 1e-3, 1e-15);
    EXPECT_THROW(rescale_train(t, 0.0), std::invalid_argument);
    EXPECT_THROW(rescale_train(t, -2.0), std::invalid_argument);
}

TEST(Rescale, PropagatorIdentity) {
    Rng rng(6);
    for (int i = 0; i < 40; ++i) {
        const PulseTrain t = random_train(rng, 1 + static_cast<int>(rng.below(60)));
        const double d = hz_to_rad(rng.uniform(-20e3, 20e3));
        for (double k : {0.25, 1.0, 4.0})
            EXPECT_LE(max_entry_diff(train_propagator(rescale_train(t, k), k * d), train_propagator(t, d)), 1e-12);
    }
}

TEST(ShiftGlobalPhase, RotatesAxis) {
    const double rabi = hz_to_rad(1000.0);
    const PulseTrain x90({PulseSegment(0.5 * kPi / rabi, rabi, 0.0)});
    EXPECT_EQ(shift_global_phase(x90, 0.0), x90);
    const Unitary2 y90 = train_propagator(shift_global_phase(x90, kPi / 2), 0.0);
    EXPECT_LE(max_entry_diff(y90, rotation(0, 1, 0, kPi / 2)), 1e-15);
    Rng rng(9);
    const PulseTrain t = random_train(rng, 6);
    for (double d : {-3e4, 0.0, 1234.5})
        EXPECT_LE(max_entry_diff(train_propagator(shift_global_phase(t, 2 * kPi), d), train_propagator(t, d)),
                  1e-12);
}

TEST(TimeReversal, ReversedTrainAtOppositeDetuningInverts) {
    Rng rng(13);
    for (int i = 0; i < 20; ++i) {
        const PulseTrain t = random_train(rng, 8);
        const double d = hz_to_rad(rng.uniform(-5e3, 5e3));
        const Unitary2 prod = train_propagator(time_reversed(t), -d) * train_propagator(t, d);
        EXPECT_LE(max_entry_diff(prod, Unitary2::identity()), 1e-12);
    }
}

TEST(PulseCsv, RoundTripIsBitExact) {
    Rng rng(17);
    const PulseTrain t = random_train(rng, 25);
    const std::string text = write_pulse_csv(t);
    EXPECT_EQ(text.substr(0, kPulseCsvHeader.size()), kPulseCsvHeader);
    const PulseTrain back = read_pulse_csv(text);
    ASSERT_EQ(back.size(), t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_EQ(back.segments()[i].duration(), t.segments()[i].duration());
        EXPECT_EQ(back.segments()[i].rabi_hz(), t.segments()[i].rabi_hz());
        EXPECT_EQ(back.segments()[i].phase(), t.segments()[i].phase());
    }
}

TEST(PulseCsv, ReportsLineOfBadRow) {
    const std::string text = "duration_s,rabi_hz,phase_rad\n1e-4,100,0\n1e-4,abc,0\n";
    try {
        read_pulse_csv(text);
        FAIL() << "expected a parse error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(read_pulse_csv("wrong,header\n1,2,3\n"), std::invalid_argument);
    EXPECT_THROW(read_pulse_csv("duration_s,rabi_hz,phase_rad\n"), std::invalid_argument);
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        EXPECT_EQ(x, b.next());
        differs = differs || x != c.next();
    }
    EXPECT_TRUE(differs);
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
    EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
}

TEST(Rng, UniformAndNormalMoments) {
    Rng rng(99);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        su += rng.uniform();
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
    }
    // 5-sigma bands.
    EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
    EXPECT_NEAR(sn / n, 0.0, 5 / std::sqrt(n));
    EXPECT_NEAR(sn2 / n, 1.0, 5 * std::sqrt(2.0 / n));
}

TEST(Rng, GeometricMean) {
    Rng rng(7);
    const double p = 0.01;
    const int n = 100000;
    double s = 0;
    for (int i = 0; i < n; ++i) s += static_cast<double>(rng.geometric(p));
    const double mean = (1 - p) / p;
    const double sd = std::sqrt((1 - p) / (p * p));
    EXPECT_NEAR(s / n, mean, 5 * sd / std::sqrt(n));
}

}  // namespace
