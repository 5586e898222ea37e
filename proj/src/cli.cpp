#include "brillouin/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "brillouin/constants.hpp"
#include "brillouin/errors.hpp"
#include "brillouin/fit.hpp"
#include "brillouin/io.hpp"
#include "brillouin/noise.hpp"
#include "brillouin/serialize.hpp"
#include "brillouin/spectra.hpp"
#include "brillouin/thermometry.hpp"
#include "json.hpp"

namespace brillouin {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::string out = ".";
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string format = "csv";
};

using Schema = std::map<std::string, std::set<std::string>>;

const std::set<std::string> kOpticalKeys{"freq_hz", "kappa_ext1_hz", "kappa_ext2_hz", "kappa_int_hz"};

const Schema kSystemSchema{
    {"optical", kOpticalKeys},
    {"optical_blue", kOpticalKeys},
    {"system", {"delta_21_hz"}},
    {"mech*", {"freq_hz", "gamma_hz", "g0_hz", "n_th"}},
    {"pump", {"side", "power_w", "detuning_hz"}},
    {"detection", {"gain_v_per_w", "split_t", "eta", "p_lo_w", "delta_lo_hz", "rbw_hz", "load_ohm"}},
};

Schema merged(Schema a, const Schema& b) {
    a.insert(b.begin(), b.end());
    return a;
}

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

Config load_config(const Common& c) {
    if (c.config.empty()) throw ConfigError("--config is required for this command");
    return Config::load(c.config);
}

fs::path out_dir(const Common& c) {
    fs::path d = c.out;
    fs::create_directories(d);
    return d;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Tabular output as `<stem>.csv` or `<stem>.json` ({"columns": {name: [...]}}).
fs::path write_table(const fs::path& dir, const std::string& stem, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& columns, const std::string& format) {
    if (format == "json") {
        json cols = json::object();
        for (std::size_t i = 0; i < header.size(); ++i) {
            json a = json::array();
            for (double v : columns[i]) a.push_back(num(v));
            cols[header[i]] = a;
        }
        const fs::path p = dir / (stem + ".json");
        write_json(p, {{"columns", cols}, {"order", header}});
        return p;
    }
    const fs::path p = dir / (stem + ".csv");
    write_csv(p, header, columns);
    return p;
}

OpticalMode optical_from(const Config& cfg, const std::string& section, double default_freq_hz) {
    OpticalMode m;
    m.omega = hz_to_angular(cfg.number(section, "freq_hz", default_freq_hz));
    m.kappa_ext1 = hz_to_angular(cfg.number(section, "kappa_ext1_hz"));
    m.kappa_ext2 = hz_to_angular(cfg.number(section, "kappa_ext2_hz"));
    m.kappa_int = hz_to_angular(cfg.number(section, "kappa_int_hz"));
    return m;
}

// Rate parameters carry a `_hz` suffix and are divided by 2 pi, with the
// covariance scaled to match.
FitResult fit_in_hz(const FitResult& f) {
    static const std::set<std::string> angular{"delta_21", "kappa", "omega_m", "gamma_m", "g",
                                               "s_prime_kappa_ext", "omega0", "gamma_eff"};
    FitResult r = f;
    std::vector<double> scale(f.names.size(), 1.0);
    for (std::size_t i = 0; i < f.names.size(); ++i) {
        if (angular.count(f.names[i])) {
            scale[i] = 1.0 / kTwoPi;
            r.names[i] = f.names[i] + "_hz";
            r.values[i] = f.values[i] / kTwoPi;
        }
    }
    for (Eigen::Index a = 0; a < r.covariance.rows(); ++a)
        for (Eigen::Index b = 0; b < r.covariance.cols(); ++b)
            r.covariance(a, b) *= scale[static_cast<std::size_t>(a)] * scale[static_cast<std::size_t>(b)];
    r.derived.clear();
    for (const auto& [k, v] : f.derived) {
        if (angular.count(k))
            r.derived[k + "_hz"] = {v.value / kTwoPi, v.sigma / kTwoPi};
        else
            r.derived[k] = v;
    }
    return r;
}

json fit_json(const FitResult& f) { return json::parse(to_json(fit_in_hz(f))); }

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Common& c, std::ostream& out) {
    const Config cfg = load_config(c);
    cfg.check(merged(kSystemSchema, {{"simulate",
                                      {"traces", "points", "omit_half_span_hz", "omit_a0", "omit_noise",
                                       "esa_center_hz", "esa_half_span_hz", "esa_noise", "n_averages"}}}));
    const SystemParams p = system_params_from_config(cfg);
    const fs::path dir = out_dir(c);

    std::vector<std::string> traces{"omit", "esa"};
    if (cfg.has("simulate", "traces")) traces = cfg.list("simulate", "traces");
    if (traces.empty()) throw ConfigError("[simulate] traces is empty");
    const int n = cfg.integer("simulate", "points", 4001);
    if (n < 3) throw ConfigError("[simulate] points must be >= 3");
    const int navg = cfg.integer("simulate", "n_averages", 1);
    if (navg < 1) throw ConfigError("[simulate] n_averages must be >= 1");

    auto axis = [n](double center, double half) {
        std::vector<double> w(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = center + half * (-1.0 + 2.0 * i / (n - 1));
        return w;
    };
    auto emit = [&](SpectrumTrace clean, const std::string& stem, double noise_level, std::uint64_t seed) {
        clean.meta.n_averages = navg;
        if (noise_level > 0.0) {
            write_trace(dir / (stem + "_clean.csv"), clean);
            const SpectrumTrace noisy = synthesize_trace(clean, {noise_level, {}, seed});
            write_trace(dir / (stem + ".csv"), noisy);
            out << "wrote " << (dir / (stem + ".csv")).string() << " and " << (dir / (stem + "_clean.csv")).string()
                << "\n";
        } else {
            write_trace(dir / (stem + ".csv"), clean);
            out << "wrote " << (dir / (stem + ".csv")).string() << "\n";
        }
    };

    for (const auto& kind : traces) {
        if (kind == "omit") {
            const double half = hz_to_angular(cfg.number("simulate", "omit_half_span_hz",
                                                         3.0 * angular_to_hz(p.signal_mode().kappa())));
            if (!(half > 0.0)) throw ConfigError("[simulate] omit_half_span_hz must be > 0");
            const double a0 = cfg.number("simulate", "omit_a0", 1.0);
            const double noise = cfg.number("simulate", "omit_noise", 0.0);
            if (noise < 0.0) throw ConfigError("[simulate] omit_noise must be >= 0");
            emit(omit_omia_transmission(p, axis(p.delta_21, half), a0), "omit", noise, c.seed);
        } else if (kind == "esa") {
            const double center = cfg.has("simulate", "esa_center_hz")
                                      ? hz_to_angular(cfg.number("simulate", "esa_center_hz"))
                                      : p.mechanics.front().omega_m - p.detection.delta_lo;
            const double half = hz_to_angular(cfg.number("simulate", "esa_half_span_hz",
                                                         60.0 * angular_to_hz(p.mechanics.front().gamma_m)));
            if (!(half > 0.0)) throw ConfigError("[simulate] esa_half_span_hz must be > 0");
            const double noise = cfg.flag("simulate", "esa_noise", false) ? esa_baseline(p) : 0.0;
            emit(esa_power_spectrum(p, axis(center, half)), "esa", noise, c.seed + 1);
        } else {
            throw ConfigError("[simulate] unknown trace kind '" + kind + "' (omit, esa)");
        }
    }

    json mech = json::array();
    for (std::size_t m = 0; m < p.mechanics.size(); ++m) {
        const auto& mm = p.mechanics[m];
        const double g = coupling_rate(p, m);
        mech.push_back({{"freq_hz", angular_to_hz(mm.omega_m)},
                        {"gamma_hz", angular_to_hz(mm.gamma_m)},
                        {"g0_hz", angular_to_hz(mm.g0)},
                        {"n_th", mm.n_th},
                        {"g_hz", angular_to_hz(g)},
                        {"cooperativity", cooperativity(g, p.signal_mode().kappa(), mm.gamma_m)}});
    }
    const auto mode = [](const OpticalMode& o) {
        return json{{"freq_hz", angular_to_hz(o.omega)},
                    {"kappa_ext1_hz", angular_to_hz(o.kappa_ext1)},
                    {"kappa_ext2_hz", angular_to_hz(o.kappa_ext2)},
                    {"kappa_int_hz", angular_to_hz(o.kappa_int)},
                    {"kappa_hz", angular_to_hz(o.kappa())}};
    };
    write_json(dir / "params.json", {{"delta_21_hz", angular_to_hz(p.delta_21)},
                                     {"optical_red", mode(p.mode_red)},
                                     {"optical_blue", mode(p.mode_blue)},
                                     {"mechanics", mech},
                                     {"pump",
                                      {{"side", to_string(p.pump.side)},
                                       {"power_w", p.pump.power_in},
                                       {"detuning_hz", angular_to_hz(p.pump.detuning)}}},
                                     {"seed", c.seed}});
    return kExitOk;
}

// ---------------------------------------------------------------- fit

int cmd_fit(const Common& c, const std::string& trace_path, const std::string& stage,
            const std::string& side_flag, std::ostream& out) {
    double window_factor = 10.0;
    if (!c.config.empty()) {
        const Config cfg = load_config(c);
        cfg.check({{"fit", {"window_factor"}}});
        window_factor = cfg.number("fit", "window_factor", window_factor);
    }
    const SpectrumTrace trace = read_trace(trace_path);
    const fs::path dir = out_dir(c);
    json j;
    j["stage"] = stage;
    j["trace"] = trace_path;
    if (stage == "fano") {
        j["fano"] = fit_json(fit_fano_reflection(trace));
    } else if (stage == "optical") {
        j["optical"] = fit_json(fit_optical_lorentzian(trace));
    } else if (stage == "staged") {
        PumpSide side;
        if (!side_flag.empty())
            side = pump_side_from_string(side_flag);
        else if (trace.meta.pump_side)
            side = *trace.meta.pump_side;
        else
            throw ConfigError("fit: pump side unknown; pass --side or add pump_side to the sidecar");
        const StagedFit st = staged_fit(trace, side, window_factor);
        j["side"] = to_string(side);
        j["optical"] = fit_json(st.optical);
        json mech = json::array();
        for (const auto& m : st.mechanical) mech.push_back(fit_json(m));
        j["mechanical"] = mech;
    } else {
        throw ConfigError("fit: unknown stage '" + stage + "' (staged, optical, fano)");
    }
    write_json(dir / "fit.json", j);
    out << "wrote " << (dir / "fit.json").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- thermometry

int cmd_thermometry(const Common& c, const std::string& red, const std::string& blue, const std::string& corr,
                    std::ostream& out) {
    ThermometryOptions opt;
    if (!c.config.empty()) {
        const Config cfg = load_config(c);
        cfg.check({{"thermometry",
                    {"center_red_hz", "center_blue_hz", "half_width_hz", "window_correction", "baseline_order"}}});
        opt.center_r_hz = cfg.maybe_number("thermometry", "center_red_hz");
        opt.center_b_hz = cfg.maybe_number("thermometry", "center_blue_hz");
        opt.half_width_hz = cfg.maybe_number("thermometry", "half_width_hz");
        opt.window_correction = cfg.flag("thermometry", "window_correction", true);
        opt.baseline_order = cfg.integer("thermometry", "baseline_order", 2);
    }
    const SpectrumTrace tr = read_trace(red);
    const SpectrumTrace tb = read_trace(blue);
    if (tr.meta.pump_side && *tr.meta.pump_side != PumpSide::Red)
        throw ConfigError("thermometry: --red trace is tagged as blue");
    if (tb.meta.pump_side && *tb.meta.pump_side != PumpSide::Blue)
        throw ConfigError("thermometry: --blue trace is tagged as red");
    const auto [cr, cb] = correction_pair_from_json(read_text(corr));
    const OccupancyReport rep = thermometry_from_traces(tr, tb, cr, cb, opt);
    const fs::path dir = out_dir(c);
    write_text(dir / "report.json", to_json(rep) + "\n");
    out << "n_th = " << rep.n_th << " [" << rep.bound_lo << ", " << rep.bound_hi << "]\n";
    if (!rep.physical) {
        out << "unphysical asymmetry (I_b <= I_r); report written with physical = false\n";
        return kExitUnphysical;
    }
    return kExitOk;
}

// ---------------------------------------------------------------- thermal

int cmd_thermal(const Common& c, std::ostream& out) {
    const Config cfg = load_config(c);
    cfg.check({{"thermal", {"r0", "r1", "r2", "b_sc", "b_mc"}},
               {"warmup", {"file"}},
               {"scan", {"r0", "r1", "r2", "b_sc", "b_mc"}},
               {"plateau", {"plateau_k", "plateau_tol", "track_tol"}}});
    const ThermalParams p = thermal_params_from_config(cfg);
    const WarmupSeries series = read_warmup_series(cfg.path("warmup", "file"));
    series.validate();
    if (series.size() == 0) throw ConfigError("[warmup] file has no rows");
    PlateauCriterion crit;
    crit.plateau_k = cfg.number("plateau", "plateau_k", crit.plateau_k);
    crit.plateau_tol = cfg.number("plateau", "plateau_tol", crit.plateau_tol);
    crit.track_tol = cfg.number("plateau", "track_tol", crit.track_tol);

    const std::vector<double> vc = warmup_sweep(series, p, c.jobs);
    const fs::path dir = out_dir(c);
    write_table(dir, "crystal_temp", {"time_s", "v_mount_k", "v_still_k", "v_crystal_k"},
                {series.times, series.v_m, series.v_s, vc}, c.format);
    const RegimeReport single = scan_regimes(series, {p}, crit, 1);
    const RegimePoint& pt = single.points.front();
    json j{{"regime", to_string(pt.regime)},
           {"rms_to_mount_k", pt.rms_to_mount},
           {"rms_to_still_k", pt.rms_to_still},
           {"reproduces_plateau", pt.reproduces_plateau}};

    if (cfg.has_section("scan")) {
        const auto axis = [&](const char* key, double fallback) {
            return cfg.has("scan", key) ? cfg.numbers("scan", key) : std::vector<double>{fallback};
        };
        const auto grid = thermal_grid(axis("r0", p.r0), axis("r1", p.r1), axis("r2", p.r2), axis("b_sc", p.b_sc),
                                       axis("b_mc", p.b_mc));
        if (grid.empty()) throw ConfigError("[scan] produced no valid parameter sets");
        const RegimeReport rep = scan_regimes(series, grid, crit, c.jobs);
        j["scan"] = {{"points", rep.points.size()},
                     {"mount_tracking", rep.mount_tracking},
                     {"still_tracking", rep.still_tracking},
                     {"intermediate", rep.intermediate},
                     {"plateau_matches", rep.plateau_matches}};
    }
    write_json(dir / "thermal.json", j);
    out << "regime: " << to_string(pt.regime) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- cavity

int cmd_cavity(const Common& c, std::ostream& out) {
    const Config cfg = load_config(c);
    cfg.check({{"cavity",
                {"stack", "front_gap_m", "crystal_m", "back_gap_m", "n_crystal", "reflectivity", "wavelength_m",
                 "n_in", "n_out"}},
               {"sweep", {"delta_min_m", "delta_max_m", "points", "n_pairs", "target_hz"}},
               {"tune", {"enabled", "tolerance_hz", "coarse_step_m", "max_offset_m", "window_m"}}});
    const LayerStack stack = cavity_stack_from_config(cfg);
    const double lo = cfg.number("sweep", "delta_min_m", -1.5e-6);
    const double hi = cfg.number("sweep", "delta_max_m", 1.5e-6);
    const int n = cfg.integer("sweep", "points", 301);
    const int pairs = cfg.integer("sweep", "n_pairs", 5);
    const double target = cfg.number("sweep", "target_hz", 12.65e9);
    if (n < 3) throw ConfigError("[sweep] points must be >= 3");
    if (!(hi > lo)) throw ConfigError("[sweep] delta_max_m must exceed delta_min_m");
    if (pairs < 1) throw ConfigError("[sweep] n_pairs must be >= 1");
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);

    const auto curves = mode_spacing_vs_length(stack, grid, pairs, c.jobs);
    const fs::path dir = out_dir(c);
    json jp = json::array();
    for (std::size_t k = 0; k < curves.size(); ++k) {
        const auto& cv = curves[k];
        write_table(dir, "spacing_pair" + std::to_string(k), {"delta_l_m", "spacing_hz"}, {cv.delta_l, cv.spacing},
                    c.format);
        const auto grad = spacing_gradient(cv);
        double gmax = 0.0;
        for (double g : grad) gmax = std::max(gmax, std::abs(g));
        json e{{"pair", k},
               {"min_spacing_hz", *std::min_element(cv.spacing.begin(), cv.spacing.end())},
               {"max_spacing_hz", *std::max_element(cv.spacing.begin(), cv.spacing.end())},
               {"max_gradient_hz_per_m", gmax}};
        try {
            const InsensitivePoint ip = find_displacement_insensitive_point(cv, target);
            e["insensitive_point"] = {{"delta_l_m", ip.delta_l_star},
                                      {"spacing_hz", ip.spacing_at_star},
                                      {"gradient_residual_hz_per_m", ip.gradient_residual}};
        } catch (const NoFeatureError& err) {
            e["insensitive_point"] = nullptr;
            e["warning"] = err.what();
        }
        jp.push_back(e);
    }
    json j{{"pairs", jp}, {"fsr_estimate_hz", stack.fsr_estimate()}, {"target_hz", target}};
    if (cfg.flag("tune", "enabled", false)) {
        const LengthTuning t = tune_back_gap_to_target(
            stack, target, pairs, cfg.number("tune", "tolerance_hz", 0.5e6), cfg.number("tune", "coarse_step_m", 20e-6),
            cfg.number("tune", "max_offset_m", 1e-3), cfg.number("tune", "window_m", 1e-6), c.jobs);
        j["tuning"] = {{"back_gap_offset_m", t.back_gap_offset},
                       {"spacing_hz", t.point.spacing_at_star},
                       {"gradient_residual_hz_per_m", t.point.gradient_residual},
                       {"evaluations", t.evaluations}};
    }
    write_json(dir / "cavity.json", j);
    out << "wrote " << curves.size() << " spacing curves to " << dir.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- align

int cmd_align(const Common& c, std::ostream& out) {
    const Config cfg = load_config(c);
    cfg.check({{"alignment",
                {"a", "b", "c", "d", "e", "theta0_deg", "r_max", "t_max", "opt_theta_in_deg", "opt_phi_in_deg",
                 "opt_theta_bm_deg", "opt_phi_bm_deg", "opt_theta_tr_deg", "opt_phi_tr_deg"}},
               {"align", {"observations", "fits"}}});
    const AlignmentModel model = alignment_model_from_config(cfg);
    const auto obs = read_alignment_observations(cfg.path("align", "observations"));
    std::vector<AlignmentFitKind> kinds;
    if (cfg.has("align", "fits")) {
        for (const auto& s : cfg.list("align", "fits")) kinds.push_back(alignment_fit_kind_from_string(s));
    } else {
        for (const auto& o : obs)
            if (std::find(kinds.begin(), kinds.end(), o.which) == kinds.end()) kinds.push_back(o.which);
    }
    if (kinds.empty()) throw ConfigError("align: no fits requested and no observations");
    json fits = json::array();
    for (AlignmentFitKind k : kinds) {
        const AlignmentFit f = fit_alignment_gaussian(obs, k, model);
        fits.push_back({{"which", to_string(k)},
                        {"center_theta_deg", f.center_theta},
                        {"center_phi_deg", f.center_phi},
                        {"shift_theta_deg", f.shift_theta},
                        {"shift_phi_deg", f.shift_phi},
                        {"amplitude", f.amplitude},
                        {"fit", json::parse(to_json(f.fit))}});
        out << to_string(k) << ": shift (" << f.shift_theta << ", " << f.shift_phi << ") deg\n";
    }
    const fs::path dir = out_dir(c);
    write_json(dir / "align.json", {{"fits", fits}});
    return kExitOk;
}

// ---------------------------------------------------------------- noise

int cmd_noise(const Common& c, std::ostream& out) {
    const Config cfg = load_config(c);
    cfg.check({{"eom", {"p1_over_p0"}},
               {"calibration", {"psd", "tone_hz", "beta", "integrate_half_width_hz", "search_half_width_hz"}},
               {"laser_noise", {"total", "shot", "dark", "conversion", "dark_in_shot", "band_center_hz",
                                "band_span_hz"}},
               {"phase_noise", {"s_ww", "omega_m_hz", "photon_flux", "cooperativity", "gamma_m_hz", "gamma_eff_hz",
                                "kappa_ext2_over_kappa", "kappa_hz", "delta_21_hz", "kappa_1_hz", "kappa_2_hz"}},
               {"occupancy", {"n_inferred", "n_phi_photon", "kappa_ext_over_kappa", "cooperativity"}},
               {"sweep_dip", {"dips", "sweep_rate_hz_per_s", "linewidth_hz", "dip_fwhm_s"}}});
    static const std::vector<std::string> known{"eom", "calibration", "laser_noise", "phase_noise", "occupancy",
                                                "sweep_dip"};
    if (std::none_of(known.begin(), known.end(), [&](const std::string& s) { return cfg.has_section(s); }))
        throw ConfigError("noise: config has none of [eom], [calibration], [laser_noise], [phase_noise], "
                          "[occupancy], [sweep_dip]");
    const fs::path dir = out_dir(c);
    json j = json::object();

    std::optional<double> beta;
    if (cfg.has_section("eom")) {
        beta = eom_beta_from_sideband_ratio(cfg.number("eom", "p1_over_p0"));
        j["eom"] = {{"beta_rad", *beta}};
    }
    std::optional<double> conversion;
    if (cfg.has_section("calibration")) {
        const double b = cfg.has("calibration", "beta") ? cfg.number("calibration", "beta") : beta.value_or(0.0);
        if (!(b > 0.0)) throw ConfigError("[calibration] needs beta or an [eom] section");
        ToneOptions topt;
        topt.integrate_half_width = cfg.number("calibration", "integrate_half_width_hz", 0.0);
        topt.search_half_width = cfg.number("calibration", "search_half_width_hz", 0.0);
        const auto cal = calibrate_conversion(read_psd(cfg.path("calibration", "psd")),
                                              cfg.number("calibration", "tone_hz"), b, topt);
        conversion = cal.conversion;
        j["calibration"] = {{"conversion", cal.conversion},
                            {"tone_freq_hz", cal.tone_freq},
                            {"tone_power", cal.tone_power},
                            {"expected_tone_rad2_hz", cal.expected_tone},
                            {"background", cal.background},
                            {"beta_rad", b}};
    }
    std::vector<std::pair<std::string, double>> s_values;
    if (cfg.has_section("laser_noise")) {
        const double a =
            cfg.has("laser_noise", "conversion") ? cfg.number("laser_noise", "conversion") : conversion.value_or(0.0);
        if (!(a > 0.0)) throw ConfigError("[laser_noise] needs conversion or a [calibration] section");
        LaserNoiseOptions lopt;
        lopt.dark_in_shot = cfg.flag("laser_noise", "dark_in_shot", false);
        lopt.band_center = cfg.maybe_number("laser_noise", "band_center_hz");
        lopt.band_span = cfg.number("laser_noise", "band_span_hz", lopt.band_span);
        const PsdTrace dark = lopt.dark_in_shot ? PsdTrace{} : read_psd(cfg.path("laser_noise", "dark"));
        const auto r = laser_frequency_noise(read_psd(cfg.path("laser_noise", "total")),
                                             read_psd(cfg.path("laser_noise", "shot")), dark, a, lopt);
        write_table(dir, "laser_noise", {"freq_hz", "psd"}, {r.freq, r.s_ww}, c.format);
        json e{{"n_floored", r.n_floored}, {"warnings", r.warnings}};
        if (r.band) {
            e["band"] = {{"center_hz", r.band->center}, {"span_hz", r.band->span},   {"avg", r.band->avg},
                         {"std", r.band->std},          {"avg_plus_std", r.band->avg_plus_std},
                         {"n_points", r.band->n_points}};
            s_values = {{"avg", r.band->avg}, {"avg_plus_std", r.band->avg_plus_std}};
        }
        j["laser_noise"] = e;
    }
    std::vector<std::pair<std::string, double>> n_photons;
    double phase_c = 0.0;
    if (cfg.has_section("phase_noise")) {
        if (cfg.has("phase_noise", "s_ww")) s_values = {{"s_ww", cfg.number("phase_noise", "s_ww")}};
        if (s_values.empty()) throw ConfigError("[phase_noise] needs s_ww or a [laser_noise] band");
        PhaseNoiseInputs in;
        in.omega_m = hz_to_angular(cfg.number("phase_noise", "omega_m_hz"));
        in.photon_flux = cfg.number("phase_noise", "photon_flux");
        in.cooperativity = cfg.number("phase_noise", "cooperativity");
        phase_c = in.cooperativity;
        in.gamma_m = hz_to_angular(cfg.number("phase_noise", "gamma_m_hz", 0.0));
        in.gamma_eff = hz_to_angular(cfg.number("phase_noise", "gamma_eff_hz", 0.0));
        in.kappa_ext2_over_kappa = cfg.number("phase_noise", "kappa_ext2_over_kappa", in.kappa_ext2_over_kappa);
        in.kappa = hz_to_angular(cfg.number("phase_noise", "kappa_hz", 0.0));
        in.delta_21 = hz_to_angular(cfg.number("phase_noise", "delta_21_hz", 0.0));
        in.kappa_1 = hz_to_angular(cfg.number("phase_noise", "kappa_1_hz", 0.0));
        in.kappa_2 = hz_to_angular(cfg.number("phase_noise", "kappa_2_hz", 0.0));
        json arr = json::array();
        for (const auto& [label, s] : s_values) {
            in.s_ww = s;
            const auto r = phase_noise_phonons(in);
            n_photons.emplace_back(label, r.n_photon);
            arr.push_back({{"label", label},
                           {"s_ww", s},
                           {"n_photon", r.n_photon},
                           {"n_phonon", r.n_phonon},
                           {"warnings", r.warnings}});
        }
        j["phase_noise"] = arr;
    }
    if (cfg.has_section("occupancy")) {
        if (cfg.has("occupancy", "n_phi_photon")) n_photons = {{"n_phi_photon", cfg.number("occupancy", "n_phi_photon")}};
        if (n_photons.empty()) throw ConfigError("[occupancy] needs n_phi_photon or a [phase_noise] section");
        const double n_inf = cfg.number("occupancy", "n_inferred");
        const double ratio = cfg.number("occupancy", "kappa_ext_over_kappa", 0.5);
        const double cc = cfg.number("occupancy", "cooperativity", phase_c);
        json arr = json::array();
        for (const auto& [label, nphi] : n_photons)
            arr.push_back({{"label", label},
                           {"n_phi_photon", nphi},
                           {"n_inferred", n_inf},
                           {"n_th", true_occupancy_from_inferred(n_inf, nphi, ratio, cc)}});
        j["occupancy"] = arr;
    }
    if (cfg.has_section("sweep_dip")) {
        DipRecord rec;
        rec.dip_times = read_dip_times(cfg.path("sweep_dip", "dips"));
        rec.sweep_rate = cfg.number("sweep_dip", "sweep_rate_hz_per_s", 0.0);
        rec.cavity_linewidth = cfg.number("sweep_dip", "linewidth_hz", 0.0);
        rec.dip_fwhm = cfg.number("sweep_dip", "dip_fwhm_s", 0.0);
        const auto r = sweep_dip_noise_spectrum(rec);
        write_table(dir, "sweep_dip_psd", {"freq_hz", "psd"}, {r.freq, r.s_ww}, c.format);
        j["sweep_dip"] = {{"integrated_rms_hz", r.integrated_rms},
                          {"sample_rate_hz", 2.0 * r.freq.back()},
                          {"n_bins", r.freq.size()}};
    }
    write_json(dir / "noise.json", j);
    out << "wrote " << (dir / "noise.json").string() << "\n";
    return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------- config readers

SystemParams system_params_from_config(const Config& cfg) {
    SystemParams p;
    p.delta_21 = hz_to_angular(cfg.number("system", "delta_21_hz"));
    p.mode_red = optical_from(cfg, "optical", 193.4e12);
    p.mode_blue = cfg.has_section("optical_blue")
                      ? optical_from(cfg, "optical_blue", angular_to_hz(p.mode_red.omega + p.delta_21))
                      : p.mode_red;
    if (!cfg.has_section("optical_blue")) p.mode_blue.omega = p.mode_red.omega + p.delta_21;
    for (const auto& s : cfg.sections()) {
        if (s.rfind("mech", 0) != 0) continue;
        MechanicalMode m;
        m.omega_m = hz_to_angular(cfg.number(s, "freq_hz"));
        m.gamma_m = hz_to_angular(cfg.number(s, "gamma_hz"));
        m.g0 = hz_to_angular(cfg.number(s, "g0_hz"));
        m.n_th = cfg.number(s, "n_th", 0.0);
        p.mechanics.push_back(m);
    }
    if (p.mechanics.empty()) throw ConfigError("config: at least one [mech...] section is required");
    p.pump.side = pump_side_from_string(cfg.text("pump", "side"));
    p.pump.power_in = cfg.number("pump", "power_w");
    p.pump.detuning = hz_to_angular(cfg.number("pump", "detuning_hz", 0.0));
    DetectionChain& d = p.detection;
    d.gain_G = cfg.number("detection", "gain_v_per_w", d.gain_G);
    d.split_T = cfg.number("detection", "split_t", d.split_T);
    d.eta = cfg.number("detection", "eta", d.eta);
    d.p_lo = cfg.number("detection", "p_lo_w", d.p_lo);
    d.delta_lo = hz_to_angular(cfg.number("detection", "delta_lo_hz", angular_to_hz(d.delta_lo)));
    d.rbw = cfg.number("detection", "rbw_hz", d.rbw);
    d.load_R = cfg.number("detection", "load_ohm", d.load_R);
    p.validate();
    return p;
}

LayerStack cavity_stack_from_config(const Config& cfg) {
    if (!cfg.has("cavity", "stack")) {
        CavityGeometry g;
        g.front_gap = cfg.number("cavity", "front_gap_m", g.front_gap);
        g.crystal = cfg.number("cavity", "crystal_m", g.crystal);
        g.back_gap = cfg.number("cavity", "back_gap_m", g.back_gap);
        g.n_crystal = cfg.number("cavity", "n_crystal", g.n_crystal);
        g.reflectivity = cfg.number("cavity", "reflectivity", g.reflectivity);
        g.wavelength_center = cfg.number("cavity", "wavelength_m", g.wavelength_center);
        return mirror_crystal_stack(g);
    }
    LayerStack s;
    s.wavelength_center = cfg.number("cavity", "wavelength_m", s.wavelength_center);
    s.n_in = cfg.number("cavity", "n_in", 1.0);
    s.n_out = cfg.number("cavity", "n_out", 1.0);
    std::vector<std::pair<std::size_t, double>> mirrors;
    for (const auto& item : cfg.list("cavity", "stack")) {
        std::istringstream in(item);
        std::string kind;
        in >> kind;
        std::vector<double> args;
        std::string tok;
        while (in >> tok) {
            try {
                std::size_t used = 0;
                args.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ConfigError("[cavity] stack: bad number '" + tok + "' in '" + item + "'");
            }
        }
        if (kind == "mirror" && args.size() == 1) {
            mirrors.emplace_back(s.layers.size(), args[0]);
        } else if (kind == "gap" && args.size() == 1) {
            s.layers.push_back({args[0], 1.0});
        } else if ((kind == "crystal" || kind == "layer") && args.size() == 2) {
            s.layers.push_back({args[0], args[1]});
        } else {
            throw ConfigError("[cavity] stack: expected 'mirror R', 'gap d' or 'crystal d n', got '" + item + "'");
        }
    }
    // The reflection phase is pi towards the stack interior.
    for (const auto& [pos, r] : mirrors) s.mirrors.push_back(hard_mirror(pos, r, pos < s.layers.size()));
    s.validate();
    return s;
}

ThermalParams thermal_params_from_config(const Config& cfg) {
    ThermalParams p;
    const std::string r0 = cfg.text("thermal", "r0", "0");
    p.r0 = (r0 == "inf") ? std::numeric_limits<double>::infinity() : cfg.number("thermal", "r0", 0.0);
    p.r1 = cfg.number("thermal", "r1", 0.0);
    p.r2 = cfg.number("thermal", "r2", 0.0);
    p.b_sc = cfg.number("thermal", "b_sc", 0.0);
    p.b_mc = cfg.number("thermal", "b_mc", 0.0);
    p.validate();
    return p;
}

AlignmentModel alignment_model_from_config(const Config& cfg) {
    AlignmentModel m;
    m.a = cfg.number("alignment", "a", m.a);
    m.b = cfg.maybe_number("alignment", "b");
    m.c = cfg.maybe_number("alignment", "c");
    m.d = cfg.number("alignment", "d", m.d);
    m.e = cfg.maybe_number("alignment", "e");
    m.theta0 = cfg.number("alignment", "theta0_deg", m.theta0);
    m.r_max = cfg.number("alignment", "r_max", m.r_max);
    m.t_max = cfg.number("alignment", "t_max", m.t_max);
    m.optima.theta_in = cfg.number("alignment", "opt_theta_in_deg", 0.0);
    m.optima.phi_in = cfg.number("alignment", "opt_phi_in_deg", 0.0);
    m.optima.theta_bm = cfg.number("alignment", "opt_theta_bm_deg", 0.0);
    m.optima.phi_bm = cfg.number("alignment", "opt_phi_bm_deg", 0.0);
    m.optima.theta_tr = cfg.number("alignment", "opt_theta_tr_deg", 0.0);
    m.optima.phi_tr = cfg.number("alignment", "opt_phi_tr_deg", 0.0);
    m.validate();
    return m;
}

// ---------------------------------------------------------------- entry point

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Brillouin cavity optomechanics toolkit"};
    app.require_subcommand(1);
    Common c;
    auto add_common = [&c](CLI::App* sub) {
        sub->add_option("--config", c.config, "INI configuration file");
        sub->add_option("--out", c.out, "output directory")->capture_default_str();
        sub->add_option("--seed", c.seed, "noise seed")->capture_default_str();
        sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::Range(1, 1024))->capture_default_str();
        sub->add_option("--format", c.format, "table format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    };
    auto* simulate = app.add_subcommand("simulate", "write OMIT/OMIA and ESA traces");
    auto* fit = app.add_subcommand("fit", "fit a trace");
    auto* thermo = app.add_subcommand("thermometry", "occupancy from a red/blue ESA pair");
    auto* thermal = app.add_subcommand("thermal", "steady-state crystal temperature over a warmup");
    auto* cavity = app.add_subcommand("cavity", "transfer-matrix mode spacing vs back-gap length");
    auto* align = app.add_subcommand("align", "Gaussian tilt fits");
    auto* noise = app.add_subcommand("noise", "laser noise calibration and sweep-dip spectra");
    for (auto* s : {simulate, fit, thermo, thermal, cavity, align, noise}) add_common(s);

    std::string trace, stage = "staged", side;
    fit->add_option("--trace", trace, "trace CSV")->required();
    fit->add_option("--stage", stage, "staged, optical or fano")->capture_default_str();
    fit->add_option("--side", side, "red or blue (default: from the sidecar)");
    std::string red, blue, corr;
    thermo->add_option("--red", red, "red-pump ESA trace")->required();
    thermo->add_option("--blue", blue, "blue-pump ESA trace")->required();
    thermo->add_option("--corrections", corr, "corrections JSON")->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*simulate) return cmd_simulate(c, out);
        if (*fit) return cmd_fit(c, trace, stage, side, out);
        if (*thermo) return cmd_thermometry(c, red, blue, corr, out);
        if (*thermal) return cmd_thermal(c, out);
        if (*cavity) return cmd_cavity(c, out);
        if (*align) return cmd_align(c, out);
        if (*noise) return cmd_noise(c, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InsufficientDataError& e) {
        err << "insufficient data: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InstabilityError& e) {
        err << "physics error: " << e.what() << "\n";
        return kExitPhysics;
    } catch (const NoAdmissibleRootError& e) {
        err << "physics error: " << e.what() << "\n";
        return kExitPhysics;
    } catch (const TrackingError& e) {
        err << "physics error: " << e.what() << "\n";
        return kExitPhysics;
    } catch (const FitError& e) {
        err << "fit error: " << e.what() << "\n";
        return kExitConvergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}

}  // namespace brillouin
