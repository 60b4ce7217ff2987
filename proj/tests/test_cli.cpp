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

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli_app.hpp"

namespace {

namespace fs = std::filesystem;
using icontrol::cli::run_cli;
using nlohmann::json;

struct Result {
    int code;
    std::string out;
    std::string err;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::path(::testing::TempDir()) /
               ("icontrol_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path(name)) << text;
        return path(name);
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::ostringstream ss;
        ss << f.rdbuf();
        return ss.str();
    }

    static json load_json(const fs::path& p) { return json::parse(slurp(p)); }

    Result run(std::vector<std::string> args) {
        args.insert(args.begin(), "icontrol");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        auto env = [this](const std::string& name) -> std::optional<std::string> {
            if (auto it = env_.find(name); it != env_.end()) return it->second;
            return std::nullopt;
        };
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err, env);
        return {code, out.str(), err.str()};
    }

    fs::path dir_;
    std::map<std::string, std::string> env_;
};

const char* kSmallBench = R"(
[bench]
lengths = 1, 2
sequences = 2
atoms = 10
error = depolarizing
error_value = 0.05
)";

TEST_F(Cli, MalformedConfigReportsLine) {
    const auto cfg = write("bad.ini", "[bench]\nlengths = 1,2\nthis line has no equals\n");
    const Result r = run({"bench", "--config", cfg.string(), "--out", path("o").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("bad.ini:3:"), std::string::npos) << r.err;
}

TEST_F(Cli, UnknownKeyReportsLine) {
    const auto cfg = write("typo.ini", "[image]\nruns_per_pont = 3\n");
    const Result r = run({"image", "--config", cfg.string(), "--out", path("o").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("typo.ini:2: unknown key 'runs_per_pont'"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(path("o") / "manifest.json"));
}

TEST_F(Cli, BadValueAndBadFlag) {
    const auto cfg = write("v.ini", "[bench]\natoms = many\n");
    const Result r = run({"bench", "--config", cfg.string(), "--out", path("o").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("v.ini:2"), std::string::npos) << r.err;
    EXPECT_EQ(run({"bench", "--no-such-flag"}).code, 2);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"calibrate"}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(Cli, ZeroRunsIsUsageError) {
    const Result r = run({"image", "--set", "image.runs_per_point=0", "--out", path("o").string()});
    EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, DegenerateFitIsRuntimeFailure) {
    const Result r = run({"image", "--set", "pulse.image.type=none", "--set", "image.runs_per_point=1", "--set",
                          "image.points=9", "--set", "scene.readout_error=0", "--out", path("o").string()});
    EXPECT_EQ(r.code, 3) << r.err;
    EXPECT_TRUE(fs::exists(path("o") / "image.csv"));
}

TEST_F(Cli, DesignExhaustedBudgetWarns) {
    const auto cfg = write("d.ini", R"(
[design]
n_segments = 6
restarts = 1
max_iterations = 1
samples_per_band = 3

[band]
lo_hz = -300
hi_hz = 300
gate = flip_x
)");
    const Result r = run({"design", "--config", cfg.string(), "--out", path("o").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    EXPECT_FALSE(load_json(path("o") / "design.json")["converged"].get<bool>());
    for (const char* f : {"design.json", "pulse.csv", "profile.csv", "profile.svg", "manifest.json",
                          "effective_config.ini"})
        EXPECT_TRUE(fs::exists(path("o") / f)) << f;
    EXPECT_EQ(icontrol::read_pulse_csv(slurp(path("o") / "pulse.csv"), "pulse").size(), 6u);
}

TEST_F(Cli, DesignTopHatArtifacts) {
    const auto cfg = write("tophat.ini", R"(
[design]
n_segments = 40
total_duration_s = 4e-3
restarts = 2

[band]
name = stop-
lo_hz = -3000
hi_hz = -1200
goal = state
input = down
target = down

[band]
lo_hz = -1200
hi_hz = -600
goal = dont_care

[band]
name = pass
lo_hz = -600
hi_hz = 600
goal = state
target = up

[band]
lo_hz = 600
hi_hz = 1200
goal = dont_care

[band]
name = stop+
lo_hz = 1200
hi_hz = 3000
goal = state
target = down
)");
    const Result r = run({"design", "--config", cfg.string(), "--out", path("o").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json d = load_json(path("o") / "design.json");
    EXPECT_EQ(d["bands"].size(), 5u);
    EXPECT_LT(d["cost"].get<double>(), 1e-2);
    EXPECT_EQ(slurp(path("o") / "profile.csv").substr(0, 24), "delta_hz,p_flip,fidelity");
    // Bands are echoed into the effective config.
    const std::string eff = slurp(path("o") / "effective_config.ini");
    EXPECT_NE(eff.find("[band]\nname = pass"), std::string::npos) << eff;
}

TEST_F(Cli, ProfileOfPulseFile) {
    const auto pulse = write("pi.csv", "duration_s,rabi_hz,phase_rad\n2e-4,2500,0\n");
    const Result r = run({"profile", "--pulse", pulse.string(), "--lo", "-1000", "--hi", "1000", "--points", "5",
                          "--out", path("o").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream csv(slurp(path("o") / "profile.csv"));
    std::string line;
    std::getline(csv, line);
    int rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        if (line.rfind("0,", 0) == 0) {
            EXPECT_EQ(line, "0,1,nan");
        }
    }
    EXPECT_EQ(rows, 5);
}

TEST_F(Cli, BenchNoErrorReportsSmallEps) {
    const Result r = run({"bench", "--set", "bench.error=none", "--out", path("o").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = load_json(path("o") / "rb.json");
    EXPECT_LE(j["bands"][0]["eps"].get<double>(), 1e-3);
    EXPECT_EQ(j["lengths"], json({1, 2, 4, 8, 16}));
}

TEST_F(Cli, SeedPrecedence) {
    const auto cfg = write("b.ini", std::string(kSmallBench) + "\n[run]\nseed = 5\n");
    auto seed_of = [&](std::vector<std::string> extra) {
        std::vector<std::string> args{"bench", "--config", cfg.string(), "--out", path("o").string()};
        args.insert(args.end(), extra.begin(), extra.end());
        const Result r = run(args);
        EXPECT_EQ(r.code, 0) << r.err;
        return load_json(path("o") / "manifest.json")["seed"].get<std::uint64_t>();
    };
    EXPECT_EQ(seed_of({}), 5u);
    env_["ICONTROL_RUN_SEED"] = "6";
    EXPECT_EQ(seed_of({}), 6u);
    EXPECT_EQ(seed_of({"--seed", "7"}), 7u);
    EXPECT_EQ(seed_of({"--seed", "7", "--set", "run.seed=8"}), 7u);
    env_.clear();
    EXPECT_EQ(seed_of({"--set", "run.seed=8"}), 8u);
}

TEST_F(Cli, EnvironmentOverridesFileValue) {
    const auto cfg = write("b.ini", kSmallBench);
    env_["ICONTROL_BENCH_SEQUENCES"] = "3";
    ASSERT_EQ(run({"bench", "--config", cfg.string(), "--out", path("a").string()}).code, 0);
    EXPECT_NE(slurp(path("a") / "effective_config.ini").find("sequences = 3"), std::string::npos);
    ASSERT_EQ(run({"bench", "--config", cfg.string(), "--out", path("b").string(), "--set", "bench.sequences=4"}).code,
              0);
    EXPECT_NE(slurp(path("b") / "effective_config.ini").find("sequences = 4"), std::string::npos);
}

TEST_F(Cli, RerunFromManifestIsByteIdentical) {
    const auto cfg = write("b.ini", kSmallBench);
    ASSERT_EQ(run({"bench", "--config", cfg.string(), "--seed", "11", "--jobs", "1", "--out", path("a").string()}).code,
              0);
    const json m = load_json(path("a") / "manifest.json");
    const std::string eff = (path("a") / m["effective_config"].get<std::string>()).string();
    ASSERT_EQ(run({"bench", "--config", eff, "--jobs", "3", "--out", path("b").string()}).code, 0);
    for (const char* f : {"rb.json", "rb_sequences.csv", "rb.svg"})
        EXPECT_EQ(slurp(path("a") / f), slurp(path("b") / f)) << f;

    const std::vector<std::string> img{"image", "--set", "image.runs_per_point=3", "--set", "image.points=15",
                                       "--set", "image.atoms_per_run=200"};
    auto with_out = [&](const std::string& o, const std::string& jobs) {
        auto a = img;
        a.insert(a.end(), {"--out", path(o).string(), "--jobs", jobs});
        return run(a).code;
    };
    ASSERT_EQ(with_out("i1", "1"), 0);
    ASSERT_EQ(with_out("i2", "4"), 0);
    EXPECT_EQ(slurp(path("i1") / "image.csv"), slurp(path("i2") / "image.csv"));
    EXPECT_EQ(slurp(path("i1") / "fit.json"), slurp(path("i2") / "fit.json"));
}

TEST_F(Cli, RamseyHadamardCenterShiftsQuarterTurn) {
    const char* bands = R"(
[band]
name = left
lo_hz = -2153
hi_hz = -1553
gate = half_x

[band]
name = center
lo_hz = -300
hi_hz = 300
gate = %s

[band]
name = right
lo_hz = 1553
hi_hz = 2153
gate = half_x
)";
    auto design = [&](const std::string& center, const std::string& name) {
        char buf[512];
        std::snprintf(buf, sizeof buf, bands, center.c_str());
        const auto cfg = write(name + ".ini", "[design]\nrestarts = 3\n" + std::string(buf));
        const Result r = run({"design", "--config", cfg.string(), "--out", path(name).string()});
        EXPECT_EQ(r.code, 0) << r.err;
        return path(name) / "pulse.csv";
    };
    const auto first = design("hadamard", "h");
    const auto second = design("half_x", "x");
    const auto cfg = write("ramsey.ini", "[pulse.first]\ntype = csv\nfile = " + first.string() +
                                             "\n\n[pulse.second]\ntype = csv\nfile = " + second.string() +
                                             "\n\n[ramsey]\nband_centers_hz = -1853, 0, 1853\n"
                                             "band_names = left, center, right\nreference_band = 0\n");
    const Result r = run({"ramsey", "--config", cfg.string(), "--out", path("r").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = load_json(path("r") / "ramsey.json");
    EXPECT_NEAR(std::abs(j["bands"][1]["phase_shift_deg"].get<double>()), 90.0, 5.0);
    EXPECT_NEAR(j["bands"][2]["phase_shift_deg"].get<double>(), 0.0, 5.0);
    for (const auto& b : j["bands"]) EXPECT_GE(b["contrast"].get<double>(), 0.95);
}

TEST_F(Cli, CalibrationSubcommandsWriteArtifacts) {
    const std::vector<std::string> common{"--set", "image.runs_per_point=4", "--set", "image.mode=expected"};
    auto args = [&](std::vector<std::string> a) {
        a.insert(a.end(), common.begin(), common.end());
        return a;
    };
    Result r = run(args({"calibrate", "eom", "--set", "eom.points=25", "--out", path("e").string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(load_json(path("e") / "eom.json")["volts_per_period"].get<double>(), 164.0, 5.0);
    r = run(args({"calibrate", "zeeman", "--set", "zeeman.points=41", "--set", "zeeman.shifts_hz=0,1000,2000,3000",
                  "--out", path("z").string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(load_json(path("z") / "zeeman.json")["gradient_hz_per_um"].get<double>(), 4350.0, 130.0);
    EXPECT_EQ(run(args({"calibrate", "eom", "--set", "eom.displacements_periods=1", "--out", path("f").string()})).code,
              2);
}

}  // namespace
