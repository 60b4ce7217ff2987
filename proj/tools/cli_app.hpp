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


// Command-line front end. Kept in a header so tests can drive run_cli()
// without spawning processes.

#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "icontrol/icontrol.hpp"

namespace icontrol::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

struct Context {
    std::string command;
    Settings settings;
    std::vector<std::string> config_paths;
    fs::path out;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::ostream* log = &std::cout;
    std::ostream* err = &std::cerr;
    std::vector<std::string> outputs;
    std::vector<std::string> repeated_sections;

    void write(const std::string& name, const std::string& content) {
        std::ofstream f(out / name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + (out / name).string());
        f << content;
        if (!f) throw std::runtime_error("failed writing " + (out / name).string());
        outputs.push_back(name);
    }
    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
};

// ---------------------------------------------------------------------------
// Reading configuration

inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline PulseTrain read_pulse(Settings& s, const std::string& name, const std::string& def_type,
                             double def_area_pi) {
    const std::string sec = "pulse." + name;
    const std::string type = s.get_choice(sec, "type", def_type, {"csv", "gaussian", "square", "none"});
    PulseTrain train;
    if (type == "csv") {
        const fs::path p = s.get_path(sec, "file");
        try {
            train = load_pulse_csv(p.string());
        } catch (const std::exception& e) {
            throw ConfigError(std::string("[") + sec + "] " + e.what());
        }
    } else if (type == "gaussian") {
        const double sigma = s.get_double(sec, "sigma_t_s", 0.5e-3);
        const double area = s.get_double(sec, "area_pi", def_area_pi) * std::numbers::pi;
        const double trunc = s.get_double(sec, "truncation_sigmas", 4.0);
        const double dt = s.get_double(sec, "dt_s", 10e-6);
        train = gaussian_pulse(sigma, area, trunc, dt);
    } else if (type == "square") {
        const double rabi = s.get_double(sec, "rabi_hz", 2500.0);
        const double area = s.get_double(sec, "area_pi", def_area_pi) * std::numbers::pi;
        const double phase = deg_to_rad(s.get_double(sec, "phase_deg", 0.0));
        if (!(rabi > 0.0)) throw ConfigError(sec + ".rabi_hz must be > 0");
        train = PulseTrain({PulseSegment(area / hz_to_rad(rabi), hz_to_rad(rabi), phase)});
    } else {
        train = PulseTrain({PulseSegment(s.get_double(sec, "duration_s", 1e-3), 0.0, 0.0)});
    }
    const double shift = s.get_double(sec, "phase_offset_deg", 0.0);
    if (shift != 0.0) train = shift_global_phase(train, deg_to_rad(shift));
    train.set_label(name);
    return train;
}

inline LatticeScene read_scene(Settings& s) {
    LatticeScene sc;
    const std::string k = "scene";
    sc.trap_period_nm = s.get_double(k, "trap_period_nm", sc.trap_period_nm);
    sc.addr_period_um = s.get_double(k, "addr_period_um", sc.addr_period_um);
    if (s.has(k, "gradient_hz_per_um")) {
        if (s.has(k, "peak_shift_hz")) throw ConfigError("[scene] set peak_shift_hz or gradient_hz_per_um, not both");
        sc.set_gradient(s.get_double(k, "gradient_hz_per_um", 4350.0));
    } else {
        sc.peak_shift_hz = s.get_double(k, "peak_shift_hz", 4350.0 * sc.addr_period_um / kTwoPi);
    }
    sc.addr_offset_nm = s.get_double(k, "addr_offset_nm", sc.addr_offset_nm);
    sc.jitter_sigma_nm = s.get_double(k, "jitter_sigma_nm", sc.jitter_sigma_nm);
    sc.jitter_enabled = s.get_bool(k, "jitter_enabled", sc.jitter_enabled);
    sc.cloud_diameter_addr_periods = s.get_double(k, "cloud_diameter_addr_periods", sc.cloud_diameter_addr_periods);
    sc.window_addr_periods = s.get_double(k, "window_addr_periods", sc.window_addr_periods);
    sc.plane_sites = s.get_int(k, "plane_sites", sc.plane_sites);
    sc.occupancy = s.get_double(k, "occupancy", sc.occupancy);
    sc.carrier_hz = s.get_double(k, "carrier_hz", sc.carrier_hz);
    sc.eom_volts_per_period = s.get_double(k, "eom_volts_per_period", sc.eom_volts_per_period);
    sc.readout_error = s.get_double(k, "readout_error", sc.readout_error);
    try {
        sc.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return sc;
}

inline ImagingProtocol read_imaging(Context& ctx) {
    Settings& s = ctx.settings;
    ImagingProtocol p;
    p.prep = read_pulse(s, "prep", "gaussian", 1.0);
    p.image = read_pulse(s, "image", "gaussian", 1.0);
    p.runs_per_point = static_cast<int>(s.get_int("image", "runs_per_point", 100));
    const long atoms = s.get_int("image", "atoms_per_run", 1000);
    if (atoms < 0) throw ConfigError("image.atoms_per_run must be >= 0");
    p.atoms_per_run = static_cast<std::size_t>(atoms);
    p.mode = s.get_choice("image", "mode", "sampled", {"sampled", "expected"}) == "expected" ? ImagingMode::kExpected
                                                                                            : ImagingMode::kSampled;
    p.prep_translations_nm = s.get_list("image", "prep_translations_nm", {0.0});
    p.post_prep_shift_nm = s.get_double("image", "post_prep_shift_nm", 0.0);
    p.image_extra_detuning_hz = s.get_double("image", "zeeman_hz", 0.0);
    p.atom_displacement_nm = s.get_double("image", "atom_displacement_nm", 0.0);
    p.seed = ctx.seed;
    p.jobs = ctx.jobs;
    return p;
}

namespace detail {

// Reads one [band] section, marking its keys as used.
class BandReader {
public:
    BandReader(Config& cfg, ConfigSection& sec) : cfg_(cfg), sec_(sec) {}

    std::optional<std::string> raw(const std::string& key) {
        if (ConfigEntry* e = sec_.find(key)) {
            e->used = true;
            line_ = e->line;
            return e->value;
        }
        line_ = sec_.line;
        return std::nullopt;
    }
    double number(const std::string& key, std::optional<double> def = std::nullopt) {
        const auto v = raw(key);
        if (!v) {
            if (def) return *def;
            cfg_.fail(sec_.line, "[band] needs " + key);
        }
        try {
            return parse_double(*v, key);
        } catch (const std::invalid_argument&) {
            cfg_.fail(line_, "[band] " + key + " expects a number, got '" + *v + "'");
        }
    }
    std::vector<double> numbers(const std::string& key) {
        const auto v = raw(key);
        std::vector<double> out;
        if (!v) return out;
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                out.push_back(parse_double(item, key));
            } catch (const std::invalid_argument&) {
                cfg_.fail(line_, "[band] " + key + " expects numbers, got '" + *v + "'");
            }
        }
        return out;
    }
    [[noreturn]] void fail(const std::string& what) { cfg_.fail(line_, what); }

private:
    Config& cfg_;
    ConfigSection& sec_;
    int line_ = 0;
};

inline SpinState parse_state(BandReader& r, const std::string& key, const std::string& def) {
    const std::string v = icontrol::detail::lower(r.raw(key).value_or(def));
    const double h = std::sqrt(0.5);
    if (v == "down") return SpinState::spin_down();
    if (v == "up") return SpinState::spin_up();
    if (v == "+x") return {cplx{h}, cplx{h}};
    if (v == "-x") return {cplx{h}, cplx{-h}};
    if (v == "+y") return {cplx{h}, cplx{0.0, h}};
    if (v == "-y") return {cplx{h}, cplx{0.0, -h}};
    r.fail("[band] " + key + " must be down|up|+x|-x|+y|-y, got '" + v + "'");
}

}  // namespace detail

/// Bands from repeated [band] sections.
inline TargetProfile read_profile(Context& ctx, bool required) {
    Config& cfg = ctx.settings.config();
    std::vector<Band> bands;
    for (ConfigSection* sec : cfg.all("band")) {
        detail::BandReader r(cfg, *sec);
        Band b;
        b.lo_hz = r.number("lo_hz");
        b.hi_hz = r.number("hi_hz");
        b.name = r.raw("name").value_or("band" + std::to_string(bands.size()));
        const std::string goal = icontrol::detail::lower(
            r.raw("goal").value_or(sec->find("gate") ? "gate" : (sec->find("target") ? "state" : "")));
        if (goal == "gate") {
            const std::string g = icontrol::detail::lower(r.raw("gate").value_or("custom"));
            const double gp = deg_to_rad(r.number("global_phase_deg", 0.0));
            GateTarget t;
            if (g == "identity") t = GateTarget::identity();
            else if (g == "flip_x") t = GateTarget::flip_x();
            else if (g == "half_x") t = GateTarget::half_x();
            else if (g == "hadamard") t = GateTarget::hadamard();
            else if (g == "custom") {
                const auto axis = r.numbers("axis");
                if (axis.size() != 3) r.fail("[band] custom gate needs axis = x,y,z");
                try {
                    t = GateTarget::about({axis[0], axis[1], axis[2]}, deg_to_rad(r.number("angle_deg")));
                } catch (const std::invalid_argument& e) {
                    r.fail(e.what());
                }
            } else {
                r.fail("[band] gate must be identity|flip_x|half_x|hadamard|custom, got '" + g + "'");
            }
            t.global_phase = gp;
            b.goal = t;
        } else if (goal == "state") {
            b.goal = StateTarget{detail::parse_state(r, "input", "down"), detail::parse_state(r, "target", "up")};
        } else if (goal == "dont_care") {
            b.goal = DontCare{};
        } else {
            r.fail("[band] goal must be gate|state|dont_care");
        }
        bands.push_back(std::move(b));
    }
    ctx.repeated_sections = {"band"};
    if (bands.empty()) {
        if (required) throw ConfigError("no [band] sections in config");
        return {};
    }
    try {
        return TargetProfile(std::move(bands), ctx.settings.get_string("design", "description", ""));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(cfg.source() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Outputs shared by several commands

inline std::string csv_row(std::initializer_list<double> v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : ",") + format_double(x);
    return s + "\n";
}

inline void write_profile(Context& ctx, const PulseTrain& train, const TargetProfile* profile,
                          const std::vector<double>& grid, const SpinState& input) {
    const auto pts = response_profile(train, grid, input, profile);
    std::string csv = "delta_hz,p_flip,fidelity\n";
    svg::Series flip{{}, {}, "P_flip", svg::palette(0)}, fid{{}, {}, "fidelity (target bands)", svg::palette(1)};
    fid.line = false;
    fid.markers = true;
    for (const auto& p : pts) {
        csv += csv_row({p.delta_hz, p.p_flip, p.fidelity});
        flip.x.push_back(p.delta_hz);
        flip.y.push_back(p.p_flip);
        fid.x.push_back(p.delta_hz);
        fid.y.push_back(p.fidelity);
    }
    ctx.write("profile.csv", csv);
    svg::Plot plot{"Flip probability vs detuning", "detuning (Hz)", "probability", 720, 440, {flip}};
    if (profile) plot.series.push_back(fid);
    ctx.write("profile.svg", svg::render(plot));
}

inline std::vector<double> profile_grid(Context& ctx, const TargetProfile* profile) {
    double lo = -5000.0, hi = 5000.0;
    if (profile && !profile->bands().empty()) {
        lo = profile->bands().front().lo_hz;
        hi = lo;
        for (const auto& b : profile->bands()) {
            lo = std::min(lo, b.lo_hz);
            hi = std::max(hi, b.hi_hz);
        }
        const double margin = 0.2 * (hi - lo);
        lo -= margin;
        hi += margin;
    }
    lo = ctx.settings.get_double("profile", "lo_hz", lo);
    hi = ctx.settings.get_double("profile", "hi_hz", hi);
    const long n = ctx.settings.get_int("profile", "points", 801);
    if (n < 2 || !(hi > lo)) throw ConfigError("[profile] needs lo_hz < hi_hz and points >= 2");
    return linspace(lo, hi, static_cast<int>(n));
}

inline std::string goal_name(const BandGoal& g) {
    if (std::holds_alternative<GateTarget>(g)) return "gate";
    if (std::holds_alternative<StateTarget>(g)) return "state";
    return "dont_care";
}

inline json fit_json(const GaussianFit& f) {
    json peaks = json::array();
    for (const auto& p : f.peaks)
        peaks.push_back({{"center", p.center}, {"center_err", p.center_err}, {"sigma", p.sigma},
                         {"sigma_err", p.sigma_err}, {"area", p.area}, {"area_err", p.area_err}});
    return {{"peaks", peaks}, {"offset", f.offset}, {"offset_err", f.offset_err}, {"rss", f.rss},
            {"dof", f.dof}, {"converged", f.converged}};
}

inline std::string image_rows(const ImageCurve& c, const std::string& prefix = {}) {
    std::string s;
    for (const auto& p : c.samples)
        s += prefix + csv_row({p.translation_nm, p.eom_volts, p.count_up, static_cast<double>(p.n_runs)});
    return s;
}

// ---------------------------------------------------------------------------
// Commands. Each reads all of its configuration, rejects unknown keys, then
// runs.

inline void finish_setup(Context& ctx) {
    ctx.settings.config().check_all_used();
    fs::create_directories(ctx.out);
    ctx.write("effective_config.ini", ctx.settings.effective_ini(ctx.repeated_sections));
    json manifest = {{"tool", "icontrol"},
                     {"version", ICONTROL_VERSION},
                     {"command", ctx.command},
                     {"config_paths", ctx.config_paths},
                     {"seed", ctx.seed},
                     {"jobs", ctx.jobs},
                     {"output_dir", fs::absolute(ctx.out).lexically_normal().string()},
                     {"timestamp", utc_timestamp()},
                     {"effective_config", "effective_config.ini"},
                     {"reproduce", "icontrol " + ctx.command + " --config " +
                                       (fs::absolute(ctx.out) / "effective_config.ini").lexically_normal().string()}};
    std::ofstream(ctx.out / "manifest.json") << manifest.dump(2) << "\n";
}

inline int cmd_design(Context& ctx) {
    Settings& s = ctx.settings;
    DesignSpec spec;
    spec.n_segments = static_cast<int>(s.get_int("design", "n_segments", spec.n_segments));
    if (s.has("design", "total_duration_s") && s.has("design", "segment_duration_s"))
        throw ConfigError("[design] set total_duration_s or segment_duration_s, not both");
    if (s.has("design", "total_duration_s")) {
        if (spec.n_segments < 1) throw ConfigError("design.n_segments must be >= 1");
        spec.segment_duration_s = s.get_double("design", "total_duration_s", 4e-3) / spec.n_segments;
    } else {
        spec.segment_duration_s = s.get_double("design", "segment_duration_s", spec.segment_duration_s);
    }
    spec.rabi_hz = s.get_double("design", "rabi_hz", spec.rabi_hz);
    spec.rabi_cap_hz = s.get_double("design", "rabi_cap_hz", spec.rabi_cap_hz);
    spec.samples_per_band = static_cast<int>(s.get_int("design", "samples_per_band", spec.samples_per_band));
    spec.n_restarts = static_cast<int>(s.get_int("design", "restarts", spec.n_restarts));
    spec.max_iterations = static_cast<int>(s.get_int("design", "max_iterations", spec.max_iterations));
    spec.convergence_tol = s.get_double("design", "convergence_tol", spec.convergence_tol);
    spec.metric = s.get_choice("design", "metric", "infidelity", {"infidelity", "hilbert_schmidt"}) == "infidelity"
                      ? GateMetric::kInfidelity
                      : GateMetric::kHilbertSchmidt;
    spec.rng_seed = ctx.seed;
    spec.jobs = ctx.jobs;
    const TargetProfile profile = read_profile(ctx, true);
    const auto grid = profile_grid(ctx, &profile);
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    finish_setup(ctx);

    const DesignResult r = optimize_phases(spec, profile);
    json bands = json::array();
    for (std::size_t b = 0; b < profile.bands().size(); ++b) {
        const Band& band = profile.bands()[b];
        bands.push_back({{"name", band.name}, {"lo_hz", band.lo_hz}, {"hi_hz", band.hi_hz},
                         {"goal", goal_name(band.goal)}, {"cost", r.per_band_cost[b]},
                         {"fidelity", r.per_band_fidelity[b]}});
    }
    ctx.write_json("design.json", {{"phases_rad", r.phases},
                                   {"cost", r.cost},
                                   {"converged", r.converged},
                                   {"restarts_used", r.restarts_used},
                                   {"best_restart", r.best_restart},
                                   {"iterations", r.iterations},
                                   {"gradient_norm", r.gradient_norm},
                                   {"n_segments", spec.n_segments},
                                   {"segment_duration_s", spec.segment_duration_s},
                                   {"total_duration_s", spec.total_duration()},
                                   {"rabi_hz", spec.rabi_hz},
                                   {"metric", spec.metric == GateMetric::kInfidelity ? "infidelity" : "hilbert_schmidt"},
                                   {"bands", bands}});
    ctx.write("pulse.csv", write_pulse_csv(r.train));
    write_profile(ctx, r.train, &profile, grid, SpinState::spin_down());
    *ctx.log << "design: cost " << r.cost << " after " << r.restarts_used << " restarts\n";
    if (!r.converged)
        *ctx.err << "warning: design did not converge within " << spec.max_iterations
                 << " iterations; results written with converged=false\n";
    return kExitOk;
}

inline int cmd_profile(Context& ctx) {
    const PulseTrain train = read_pulse(ctx.settings, "main", "csv", 1.0);
    const TargetProfile profile = read_profile(ctx, false);
    const TargetProfile* pp = profile.bands().empty() ? nullptr : &profile;
    const auto grid = profile_grid(ctx, pp);
    const std::string in = ctx.settings.get_choice("profile", "input", "down", {"down", "up"});
    finish_setup(ctx);
    write_profile(ctx, train, pp, grid, in == "down" ? SpinState::spin_down() : SpinState::spin_up());
    json summary = {{"segments", train.size()}, {"total_duration_s", train.total_duration()}};
    if (pp) {
        const TrainEvaluation ev = evaluate_train(train, profile, 33);
        json bands = json::array();
        for (std::size_t b = 0; b < profile.bands().size(); ++b)
            bands.push_back({{"name", profile.bands()[b].name}, {"cost", ev.per_band_cost[b]},
                             {"fidelity", ev.per_band_fidelity[b]}});
        summary["cost"] = ev.cost;
        summary["bands"] = bands;
    }
    ctx.write_json("profile.json", summary);
    return kExitOk;
}

inline double prep_response_sigma_nm(const PulseTrain& prep, const LatticeScene& scene) {
    const auto x = linspace(-600, 600, 241);
    std::vector<double> y;
    for (double xi : x) y.push_back(response_profile(prep, {site_detuning(scene, xi)})[0].p_flip);
    return fit_gaussians(x, y, 1).peaks.at(0).sigma;
}

inline int cmd_image(Context& ctx) {
    Settings& s = ctx.settings;
    const LatticeScene scene = read_scene(s);
    const ImagingProtocol p = read_imaging(ctx);
    const bool volts = s.get_choice("image", "axis", "nm", {"nm", "volts"}) == "volts";
    const double lo = s.get_double("image", "grid_lo", -300.0);
    const double hi = s.get_double("image", "grid_hi", 300.0);
    const long points = s.get_int("image", "points", 41);
    const long peaks = s.get_int("image", "peaks", 1);
    if (points < 1) throw ConfigError("image.points must be >= 1");
    finish_setup(ctx);

    const GridAxis axis = volts ? GridAxis::kVolts : GridAxis::kNanometers;
    const ImageCurve c = resonance_image(p, linspace(lo, hi, static_cast<int>(points)), scene, axis);
    ctx.write("image.csv", "translation_nm,eom_volts,count_up,n_runs\n" + image_rows(c));
    svg::Series data{curve_axis(c, axis), curve_counts(c), "counts", svg::palette(0), true, true};
    ctx.write("image.svg", svg::render({"Resonance image", volts ? "EOM voltage (V)" : "translation (nm)",
                                        "atoms in |up>", 720, 440, {data}}));
    const GaussianFit fit = fit_gaussians(c, static_cast<int>(peaks), axis);
    json j = fit_json(fit);
    j["axis"] = volts ? "volts" : "nm";
    j["prep_response_sigma_nm"] = prep_response_sigma_nm(p.prep, scene);
    ctx.write_json("fit.json", j);
    *ctx.log << "image: " << fit.peaks.size() << " peak(s); first sigma " << fit.peaks[0].sigma << "\n";
    return kExitOk;
}

inline int cmd_ramsey(Context& ctx) {
    Settings& s = ctx.settings;
    const PulseTrain first = read_pulse(s, "first", "square", 0.5);
    const PulseTrain second = s.config().has_section("pulse.second") ? read_pulse(s, "second", "square", 0.5) : first;
    RamseyOptions opt;
    const long steps = s.get_int("ramsey", "phase_steps", 24);
    if (steps < 3) throw ConfigError("ramsey.phase_steps must be >= 3");
    opt.phase_grid_deg = default_phase_grid(static_cast<int>(steps));
    opt.band_centers_hz = s.get_list("ramsey", "band_centers_hz", {0.0});
    opt.band_names = s.get_words("ramsey", "band_names");
    const long ref = s.get_int("ramsey", "reference_band", 0);
    if (opt.band_centers_hz.empty()) throw ConfigError("ramsey.band_centers_hz is empty");
    if (ref < 0 || ref >= static_cast<long>(opt.band_centers_hz.size()))
        throw ConfigError("ramsey.reference_band out of range");
    opt.lattice = s.get_bool("ramsey", "lattice", false);
    opt.band_half_width_hz = s.get_double("ramsey", "band_half_width_hz", opt.band_half_width_hz);
    if (opt.lattice) {
        opt.scene = read_scene(s);
        opt.imaging = read_imaging(ctx);
    }
    finish_setup(ctx);

    const FringeCurve c = ramsey_scan(first, second, opt);
    std::string csv = "phase_deg,band_id,p_down,stderr\n";
    for (const auto& smp : c.samples)
        csv += format_double(smp.phase_deg) + "," + std::to_string(smp.band) + "," + format_double(smp.p_down) + "," +
               format_double(smp.std_err) + "\n";
    ctx.write("fringe.csv", csv);

    const std::size_t nb = opt.band_centers_hz.size();
    std::vector<FringeFit> fits;
    std::vector<svg::Series> series;
    for (std::size_t b = 0; b < nb; ++b) {
        std::vector<FringeSample> band;
        svg::Series sr{{}, {}, c.band_names[b], svg::palette(b), true, true};
        for (const auto& smp : c.samples)
            if (smp.band == static_cast<int>(b)) {
                band.push_back(smp);
                sr.x.push_back(smp.phase_deg);
                sr.y.push_back(smp.p_down);
            }
        fits.push_back(fringe_fit(band));
        series.push_back(sr);
    }
    json bands = json::array();
    for (std::size_t b = 0; b < nb; ++b) {
        const FringeFit& f = fits[b];
        json jb = {{"name", c.band_names[b]},    {"center_hz", opt.band_centers_hz[b]},
                   {"offset", f.offset},         {"amplitude", f.amplitude},
                   {"phase0_deg", f.phase0_deg}, {"phase0_err_deg", f.phase0_err_deg},
                   {"s_min", f.s_min},           {"s_max", f.s_max},
                   {"contrast", f.contrast()},   {"phase_defined", f.phase_defined}};
        jb["fidelity"] = f.s_max > 0.0 ? json(fringe_fidelity(f)) : json(nullptr);
        const FringeFit& r = fits[static_cast<std::size_t>(ref)];
        jb["phase_shift_deg"] =
            f.phase_defined && r.phase_defined ? json(wrap_deg(f.phase0_deg - r.phase0_deg)) : json(nullptr);
        bands.push_back(jb);
    }
    ctx.write_json("ramsey.json", {{"reference_band", ref}, {"lattice", opt.lattice}, {"bands", bands}});
    ctx.write("ramsey.svg", svg::render({"Ramsey fringes", "relative phase (deg)", "P(down)", 720, 440, series}));
    return kExitOk;
}

inline int cmd_bench(Context& ctx) {
    Settings& s = ctx.settings;
    const std::string kind = s.get_choice("bench", "library", "ideal", {"ideal", "pulses"});
    GateLibrary lib;
    if (kind == "ideal") {
        lib = ideal_gate_library(s.get_double("bench", "ideal_rabi_hz", 2500.0));
    } else {
        const PulseTrain cg = read_pulse(s, "cg", "csv", 0.5);
        const PulseTrain pg = read_pulse(s, "pg", "csv", 1.0);
        lib = gate_library_from(cg, pg);
    }
    lib.center_hz = s.get_double("bench", "center_hz", 0.0);
    lib.side_hz = s.get_list("bench", "side_hz", {});
    RbOptions opt;
    opt.lengths.clear();
    for (double l : s.get_list("bench", "lengths", {1, 2, 4, 8, 16})) {
        if (l < 0 || l != std::floor(l)) throw ConfigError("bench.lengths must be non-negative integers");
        opt.lengths.push_back(static_cast<int>(l));
    }
    opt.sequences_per_length = static_cast<int>(s.get_int("bench", "sequences", 20));
    const long atoms = s.get_int("bench", "atoms", 500);
    if (atoms < 0) throw ConfigError("bench.atoms must be >= 0");
    opt.atoms = static_cast<std::size_t>(atoms);
    opt.kappa = s.get_double("bench", "kappa", 4.0);
    opt.readout_error = s.get_double("bench", "readout_error", 0.0);
    opt.seed = ctx.seed;
    opt.jobs = ctx.jobs;
    const std::string ek =
        s.get_choice("bench", "error", "none", {"none", "detuning", "depolarizing", "rabi_scale"});
    const double ev = s.get_double("bench", "error_value", 0.0);
    ErrorModel err = ek == "none"           ? ErrorModel::none()
                     : ek == "detuning"     ? ErrorModel::detuning_offset(ev)
                     : ek == "depolarizing" ? ErrorModel::depolarizing(ev)
                                            : ErrorModel::rabi_scale(ev);
    finish_setup(ctx);

    const RbResult r = run_benchmarking(lib, err, opt);
    std::string csv = "length,sequence,band,fidelity\n";
    for (const auto& rec : r.records)
        csv += std::to_string(rec.length) + "," + std::to_string(rec.sequence) + "," + std::to_string(rec.band) +
               "," + format_double(rec.fidelity) + "\n";
    ctx.write("rb_sequences.csv", csv);
    json bands = json::array();
    std::vector<svg::Series> series;
    std::vector<double> lx(r.lengths.begin(), r.lengths.end());
    for (std::size_t b = 0; b < r.bands.size(); ++b) {
        const auto& band = r.bands[b];
        const auto& f = band.fit;
        bands.push_back({{"name", band.name},
                         {"detuning_hz", band.detuning_hz},
                         {"mean_fidelity", band.mean_fidelity},
                         {"stderr", band.std_err},
                         {"eps0", f.eps0},
                         {"eps", f.eps},
                         {"fidelity_per_gate", 1.0 - f.eps},
                         {"covariance", {{f.covariance(0, 0), f.covariance(0, 1)}, {f.covariance(1, 0), f.covariance(1, 1)}}},
                         {"converged", f.converged}});
        series.push_back({lx, band.mean_fidelity, band.name, svg::palette(b), true, true});
    }
    ctx.write_json("rb.json", {{"lengths", r.lengths},
                               {"error_model", std::string(error_model_name(err.kind))},
                               {"error_value", err.value},
                               {"kappa", opt.kappa},
                               {"atoms", opt.atoms},
                               {"bands", bands}});
    ctx.write("rb.svg", svg::render({"Randomized benchmarking", "sequence length l", "fidelity", 720, 440, series}));
    *ctx.log << "bench: center eps " << r.center().fit.eps << "\n";
    return kExitOk;
}

inline int cmd_calibrate_eom(Context& ctx) {
    Settings& s = ctx.settings;
    const LatticeScene scene = read_scene(s);
    ImagingProtocol p = read_imaging(ctx);
    const double lo = s.get_double("eom", "volts_lo", -330.0);
    const double hi = s.get_double("eom", "volts_hi", 330.0);
    const long points = s.get_int("eom", "points", 41);
    const auto periods = s.get_list("eom", "displacements_periods", {-1.0, -0.5, 0.0, 0.5, 1.0});
    if (points < 1) throw ConfigError("eom.points must be >= 1");
    finish_setup(ctx);

    std::vector<double> disp;
    for (double k : periods) disp.push_back(k * scene.trap_period_nm);
    const EomCalibration cal = calibrate_eom(p, scene, linspace(lo, hi, static_cast<int>(points)), disp);
    std::string csv = "displacement_nm,translation_nm,eom_volts,count_up,n_runs\n";
    std::vector<svg::Series> series;
    for (std::size_t i = 0; i < cal.images.size(); ++i) {
        csv += image_rows(cal.images[i], format_double(cal.displacements_nm[i]) + ",");
        series.push_back({curve_axis(cal.images[i], GridAxis::kVolts), curve_counts(cal.images[i]),
                          "dx = " + svg::detail::num(periods[i]) + " periods", svg::palette(i), true, true});
    }
    ctx.write("eom_images.csv", csv);
    ctx.write_json("eom.json", {{"volts_per_period", cal.volts_per_period},
                                {"volts_per_period_err", cal.volts_per_period_err},
                                {"configured_volts_per_period", scene.eom_volts_per_period},
                                {"displacements_nm", cal.displacements_nm},
                                {"centers_volts", cal.centers_volts}});
    ctx.write("eom.svg", svg::render({"EOM calibration", "EOM voltage (V)", "atoms in |up>", 720, 440, series}));
    *ctx.log << "calibrate eom: " << cal.volts_per_period << " +- " << cal.volts_per_period_err << " V per period\n";
    return kExitOk;
}

inline int cmd_calibrate_zeeman(Context& ctx) {
    Settings& s = ctx.settings;
    const LatticeScene scene = read_scene(s);
    ImagingProtocol p = read_imaging(ctx);
    const auto shifts = s.get_list("zeeman", "shifts_hz", {0, 500, 1000, 2000, 3000, 4000});
    const double lo = s.get_double("zeeman", "grid_lo_nm", -1200.0);
    const double hi = s.get_double("zeeman", "grid_hi_nm", 1200.0);
    const long points = s.get_int("zeeman", "points", 81);
    if (points < 1) throw ConfigError("zeeman.points must be >= 1");
    finish_setup(ctx);

    const ZeemanCalibration cal = zeeman_gradient_scan(p, scene, shifts, linspace(lo, hi, static_cast<int>(points)));
    std::string csv = "delta_omega_hz,translation_nm,eom_volts,count_up,n_runs\n";
    csv += image_rows(cal.images[0], "0,");
    for (std::size_t i = 0; i < cal.delta_omega_hz.size(); ++i)
        csv += image_rows(cal.images[i + 1], format_double(cal.delta_omega_hz[i]) + ",");
    ctx.write("zeeman_images.csv", csv);
    ctx.write_json("zeeman.json", {{"gradient_hz_per_um", cal.gradient_hz_per_um},
                                   {"gradient_err", cal.gradient_err},
                                   {"configured_gradient_hz_per_um", scene.gradient_hz_per_um()},
                                   {"reference_sigma_nm", cal.reference_sigma_nm},
                                   {"delta_omega_hz", cal.delta_omega_hz},
                                   {"separation_nm", cal.separation_nm},
                                   {"separation_err_nm", cal.separation_err_nm}});
    std::vector<double> line_y;
    for (double d : cal.delta_omega_hz) line_y.push_back(2.0 * d / cal.gradient_hz_per_um * 1e3);
    ctx.write("zeeman.svg",
              svg::render({"Zeeman peak separation", "Zeeman shift (Hz)", "separation (nm)", 720, 440,
                           {{cal.delta_omega_hz, cal.separation_nm, "fitted separation", svg::palette(0), false, true},
                            {cal.delta_omega_hz, line_y, "2 dw / g", svg::palette(1), true, false}}}));
    *ctx.log << "calibrate zeeman: " << cal.gradient_hz_per_um << " +- " << cal.gradient_err << " Hz/um\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr,
                   EnvLookup env = process_env) {
    CLI::App app{"icontrol: frequency-selective qubit control pulses and virtual lattice experiments", "icontrol"};
    app.set_version_flag("--version", std::string(ICONTROL_VERSION));
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::optional<std::string> out_dir;
    std::vector<std::string> sets;
    app.add_option("-c,--config", config_path, "INI configuration file");
    app.add_option("--seed", seed, "master seed (config: [run] seed)");
    app.add_option("--jobs", jobs, "worker threads (config: [run] jobs)");
    app.add_option("--out", out_dir, "output directory (config: [run] out)");
    app.add_option("--set", sets, "override section.key=value (repeatable)");

    auto* design = app.add_subcommand("design", "optimize a composite pulse for a band profile");
    auto* profile = app.add_subcommand("profile", "evaluate a pulse's response over detuning");
    std::string pulse_path;
    std::optional<double> lo, hi;
    std::optional<long> points;
    profile->add_option("--pulse", pulse_path, "pulse CSV (config: [pulse.main] file)");
    profile->add_option("--lo", lo, "lowest detuning, Hz (config: [profile] lo_hz)");
    profile->add_option("--hi", hi, "highest detuning, Hz (config: [profile] hi_hz)");
    profile->add_option("--points", points, "grid points (config: [profile] points)");
    auto* image = app.add_subcommand("image", "simulate a resonance image and fit peaks");
    auto* ramsey = app.add_subcommand("ramsey", "two-pulse phase scan and fringe fits");
    auto* bench = app.add_subcommand("bench", "randomized benchmarking");
    auto* calibrate = app.add_subcommand("calibrate", "EOM or Zeeman-gradient calibration");
    calibrate->require_subcommand(1);
    auto* eom = calibrate->add_subcommand("eom", "EOM voltage per trap period");
    auto* zeeman = calibrate->add_subcommand("zeeman", "light-shift gradient from Zeeman splitting");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    Context ctx;
    ctx.log = &out;
    ctx.err = &err;
    try {
        Config cfg;
        fs::path base;
        if (!config_path.empty()) {
            cfg = Config::load(config_path);
            base = fs::absolute(config_path).parent_path();
            ctx.config_paths.push_back(fs::absolute(config_path).lexically_normal().string());
        }
        ctx.settings = Settings(std::move(cfg), env, base);
        Settings& s = ctx.settings;
        for (const auto& a : sets) s.add_override(a);
        if (seed) s.set_override("run", "seed", std::to_string(*seed));
        if (jobs) s.set_override("run", "jobs", std::to_string(*jobs));
        if (out_dir) s.set_override("run", "out", *out_dir);
        if (!pulse_path.empty()) {
            s.set_override("pulse.main", "type", "csv");
            s.set_override("pulse.main", "file", fs::absolute(pulse_path).string());
        }
        if (lo) s.set_override("profile", "lo_hz", format_double(*lo));
        if (hi) s.set_override("profile", "hi_hz", format_double(*hi));
        if (points) s.set_override("profile", "points", std::to_string(*points));

        const long sd = s.get_int("run", "seed", 0);
        if (sd < 0) throw ConfigError("run.seed must be >= 0");
        ctx.seed = static_cast<std::uint64_t>(sd);
        const long jb = s.get_int("run", "jobs", std::max(1u, std::thread::hardware_concurrency()));
        if (jb < 1) throw ConfigError("run.jobs must be >= 1");
        ctx.jobs = static_cast<unsigned>(jb);
        ctx.out = s.get_string("run", "out", "icontrol_out");

        if (design->parsed()) ctx.command = "design";
        else if (profile->parsed()) ctx.command = "profile";
        else if (image->parsed()) ctx.command = "image";
        else if (ramsey->parsed()) ctx.command = "ramsey";
        else if (bench->parsed()) ctx.command = "bench";
        else if (eom->parsed()) ctx.command = "calibrate eom";
        else if (zeeman->parsed()) ctx.command = "calibrate zeeman";

        if (ctx.command == "design") return cmd_design(ctx);
        if (ctx.command == "profile") return cmd_profile(ctx);
        if (ctx.command == "image") return cmd_image(ctx);
        if (ctx.command == "ramsey") return cmd_ramsey(ctx);
        if (ctx.command == "bench") return cmd_bench(ctx);
        if (ctx.command == "calibrate eom") return cmd_calibrate_eom(ctx);
        if (ctx.command == "calibrate zeeman") return cmd_calibrate_zeeman(ctx);
        err << "error: no command\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace icontrol::cli
