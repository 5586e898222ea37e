#include <filesystem>
#include <sstream>

#include "brillouin/cli.hpp"
#include "brillouin/io.hpp"
#include "brillouin/noise.hpp"
#include "brillouin/serialize.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"

using namespace brillouin;
using namespace fixtures;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream o, e;
    const int code = run_cli(args, o, e);
    return {code, o.str(), e.str()};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("brillouin_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

json read_json(const fs::path& p) { return json::parse(read_text(p)); }

const char* kSystem = R"(
[optical]
freq_hz = 193.4e12
kappa_ext1_hz = 0.72e6
kappa_ext2_hz = 0.72e6
kappa_int_hz = 0.96e6

[system]
delta_21_hz = 12.6553e9

[mech0]
freq_hz = 12.6553e9
gamma_hz = 54.5e3
g0_hz = 8.39
n_th = 0.44

[pump]
side = red
power_w = 2e-4
)";

}  // namespace

TEST_CASE("simulate: minimal config, determinism and seeds") {
    const fs::path d = fresh_dir("simulate");
    write_text(d / "sim.ini", kSystem);
    REQUIRE(run({"simulate", "--config", (d / "sim.ini").string(), "--out", (d / "a").string()}).code == 0);
    CHECK(fs::exists(d / "a" / "omit.csv"));
    CHECK(fs::exists(d / "a" / "esa.csv"));
    REQUIRE(run({"simulate", "--config", (d / "sim.ini").string(), "--out", (d / "b").string()}).code == 0);
    CHECK(read_text(d / "a" / "omit.csv") == read_text(d / "b" / "omit.csv"));
    CHECK(read_text(d / "a" / "esa.csv") == read_text(d / "b" / "esa.csv"));

    write_text(d / "noisy.ini", std::string(kSystem) + "\n[simulate]\nomit_noise = 1e-3\nesa_noise = true\n");
    const auto cfg = (d / "noisy.ini").string();
    REQUIRE(run({"simulate", "--config", cfg, "--out", (d / "s1").string(), "--seed", "1"}).code == 0);
    REQUIRE(run({"simulate", "--config", cfg, "--out", (d / "s1b").string(), "--seed", "1"}).code == 0);
    REQUIRE(run({"simulate", "--config", cfg, "--out", (d / "s2").string(), "--seed", "2"}).code == 0);
    for (const char* f : {"omit_clean.csv", "esa_clean.csv"})
        CHECK(read_text(d / "s1" / f) == read_text(d / "s2" / f));
    for (const char* f : {"omit.csv", "esa.csv"}) {
        CHECK(read_text(d / "s1" / f) == read_text(d / "s1b" / f));
        CHECK(read_text(d / "s1" / f) != read_text(d / "s2" / f));
    }
    const auto clean = read_trace(d / "s1" / "omit_clean.csv");
    const auto noisy = read_trace(d / "s2" / "omit.csv");
    CHECK(clean.freq == noisy.freq);
}

TEST_CASE("simulate -> fit preserves Hz values") {
    const fs::path d = fresh_dir("roundtrip");
    write_text(d / "sim.ini", std::string(kSystem) + "\n[simulate]\ntraces = omit\npoints = 6001\n");
    REQUIRE(run({"simulate", "--config", (d / "sim.ini").string(), "--out", d.string()}).code == 0);
    const json params = read_json(d / "params.json");
    CHECK(params["delta_21_hz"].get<double>() == doctest::Approx(12.6553e9).epsilon(1e-12));
    CHECK(params["mechanics"][0]["gamma_hz"].get<double>() == doctest::Approx(54.5e3).epsilon(1e-12));

    REQUIRE(run({"fit", "--trace", (d / "omit.csv").string(), "--out", d.string()}).code == 0);
    const json fit = read_json(d / "fit.json");
    const auto& opt = fit["optical"]["parameters"];
    CHECK(opt["delta_21_hz"]["value"].get<double>() == doctest::Approx(12.6553e9).epsilon(1e-9));
    CHECK(opt["kappa_hz"]["value"].get<double>() == doctest::Approx(2.4e6).epsilon(1e-9));
    REQUIRE(fit["mechanical"].size() == 1);
    const auto& mech = fit["mechanical"][0]["parameters"];
    CHECK(mech["omega_m_hz"]["value"].get<double>() == doctest::Approx(12.6553e9).epsilon(1e-9));
    CHECK(mech["gamma_m_hz"]["value"].get<double>() == doctest::Approx(54.5e3).epsilon(1e-9));
    CHECK(mech["g_hz"]["value"].get<double>() ==
          doctest::Approx(params["mechanics"][0]["g_hz"].get<double>()).epsilon(1e-9));
}

TEST_CASE("exit codes for bad input") {
    const fs::path d = fresh_dir("errors");
    write_text(d / "sim.ini", kSystem);

    SUBCASE("malformed and empty traces") {
        write_text(d / "bad.csv", "freq_hz,power_w,sigma_w\n1,2\n");
        CHECK(run({"fit", "--trace", (d / "bad.csv").string(), "--side", "red", "--out", d.string()}).code == 2);
        write_text(d / "empty.csv", "freq_hz,power_w,sigma_w\n");
        CHECK(run({"fit", "--trace", (d / "empty.csv").string(), "--side", "red", "--out", d.string()}).code == 2);
        CHECK(run({"fit", "--out", d.string()}).code == 2);
    }
    SUBCASE("config errors") {
        write_text(d / "typo.ini", std::string(kSystem) + "\n[simulate]\npointz = 10\n");
        CHECK(run({"simulate", "--config", (d / "typo.ini").string(), "--out", d.string()}).code == 2);
        write_text(d / "nodelta.ini", "[optical]\nkappa_ext1_hz = 1\nkappa_ext2_hz = 1\nkappa_int_hz = 1\n");
        CHECK(run({"simulate", "--config", (d / "nodelta.ini").string(), "--out", d.string()}).code == 2);
        write_text(d / "zero.ini", std::string(kSystem) + "\n[simulate]\npoints = 0\n");
        CHECK(run({"simulate", "--config", (d / "zero.ini").string(), "--out", d.string()}).code == 2);
        CHECK(run({"simulate", "--out", d.string()}).code == 2);
        CHECK(run({"simulate", "--config", (d / "missing.ini").string()}).code == 2);
        CHECK(run({"bogus"}).code == 2);
        CHECK(run({"simulate", "--config", (d / "sim.ini").string(), "--format", "xml"}).code == 2);
    }
    SUBCASE("unstable OMIA is a physics error") {
        std::string cfg = kSystem;
        cfg.replace(cfg.find("side = red"), 10, "side = blue");
        cfg.replace(cfg.find("power_w = 2e-4"), 14, "power_w = 2e-2");
        write_text(d / "omia.ini", cfg);
        CHECK(run({"simulate", "--config", (d / "omia.ini").string(), "--out", d.string()}).code == 3);
    }
    CHECK(run({"--help"}).code == 0);
}

namespace {

void write_pair(const fs::path& d, const EsaPair& e) {
    write_trace(d / "red.csv", e.trace_r);
    write_trace(d / "blue.csv", e.trace_b);
    write_text(d / "corr.json", "{\"red\": " + to_json(e.corr_r) + ", \"blue\": " + to_json(e.corr_b) + "}");
}

}  // namespace

TEST_CASE("thermometry command") {
    const fs::path d = fresh_dir("thermometry");
    EsaPair e = thermometry_pair(0.44);
    e.trace_r.meta.pump_side = PumpSide::Red;
    e.trace_b.meta.pump_side = PumpSide::Blue;
    write_pair(d, e);
    const std::vector<std::string> args{"thermometry",  "--red",          (d / "red.csv").string(),
                                        "--blue",       (d / "blue.csv").string(), "--corrections",
                                        (d / "corr.json").string(), "--out", d.string()};
    REQUIRE(run(args).code == 0);
    const json rep = read_json(d / "report.json");
    CHECK(rep["n_th"].get<double>() == doctest::Approx(0.44).epsilon(0.01));
    CHECK(rep["physical"].get<bool>());

    SUBCASE("identical traces are unphysical") {
        write_trace(d / "blue.csv", [&] {
            SpectrumTrace t = e.trace_r;
            t.meta.pump_side = PumpSide::Blue;
            return t;
        }());
        // Same corrections on both sides, with equal coupling ratios so the
        // side-dependent prefactors coincide.
        CorrectionSet c = e.corr_r;
        c.kappa_ratio_ext1 = c.kappa_ratio_ext2 = {1.0, 0.0};
        write_text(d / "corr.json", "{\"red\": " + to_json(c) + ", \"blue\": " + to_json(c) + "}");
        fs::remove(d / "report.json");
        CHECK(run(args).code == 5);
        REQUIRE(fs::exists(d / "report.json"));
        CHECK_FALSE(read_json(d / "report.json")["physical"].get<bool>());
    }
    SUBCASE("missing correction field") {
        json c = json::parse("{\"red\": " + to_json(e.corr_r) + ", \"blue\": " + to_json(e.corr_b) + "}");
        c["blue"].erase("gamma_eff");
        write_text(d / "corr.json", c.dump());
        CHECK(run(args).code == 2);
    }
    SUBCASE("swapped side tags") {
        std::vector<std::string> swapped = args;
        std::swap(swapped[2], swapped[4]);
        CHECK(run(swapped).code == 2);
    }
}

TEST_CASE("thermal command") {
    const fs::path d = fresh_dir("thermal");
    const WarmupSeries w = measured_like_warmup(41);
    write_csv(d / "warmup.csv", {"time_s", "v_mount_k", "v_still_k"}, {w.times, w.v_m, w.v_s});
    write_text(d / "thermal.ini",
               "[thermal]\nr0 = 1e5\nr1 = 0\nr2 = 0\nb_sc = 1e-6\nb_mc = 1e-7\n\n[warmup]\nfile = warmup.csv\n\n"
               "[scan]\nr0 = 1e3, 1e5, 1e7\nb_sc = 1e-8, 1e-6\n");
    REQUIRE(run({"thermal", "--config", (d / "thermal.ini").string(), "--out", d.string(), "--jobs", "2"}).code == 0);
    const CsvTable t = read_csv(d / "crystal_temp.csv");
    const auto direct = warmup_sweep(w, {1e5, 0, 0, 1e-6, 1e-7});
    REQUIRE(t.column("v_crystal_k").size() == direct.size());
    for (std::size_t i = 0; i < direct.size(); ++i)
        CHECK(t.column("v_crystal_k")[i] == doctest::Approx(direct[i]).epsilon(1e-12));
    const json j = read_json(d / "thermal.json");
    CHECK(j["scan"]["points"].get<int>() == 6);
    CHECK(j["scan"]["plateau_matches"].get<int>() == 0);

    write_csv(d / "empty.csv", {"time_s", "v_mount_k", "v_still_k"}, {{}, {}, {}});
    write_text(d / "empty.ini", "[thermal]\nr0 = 1e5\n\n[warmup]\nfile = empty.csv\n");
    CHECK(run({"thermal", "--config", (d / "empty.ini").string(), "--out", d.string()}).code == 2);
}

TEST_CASE("cavity command") {
    const fs::path d = fresh_dir("cavity");
    write_text(d / "cavity.ini",
               "[cavity]\nstack = mirror 0.999, gap 0.2e-3, crystal 5e-3 1.5346, gap 5.2e-3, mirror 0.999\n\n"
               "[sweep]\ndelta_min_m = -0.3e-6\ndelta_max_m = 0.3e-6\npoints = 31\nn_pairs = 2\n");
    const auto cfg = (d / "cavity.ini").string();
    REQUIRE(run({"cavity", "--config", cfg, "--out", (d / "j1").string()}).code == 0);
    REQUIRE(run({"cavity", "--config", cfg, "--out", (d / "j4").string(), "--jobs", "4"}).code == 0);
    for (const char* f : {"spacing_pair0.csv", "spacing_pair1.csv", "cavity.json"})
        CHECK(read_text(d / "j1" / f) == read_text(d / "j4" / f));

    // Same stack through the geometry shorthand and the library directly.
    const LayerStack stack = cavity_stack_from_config(Config::load(cfg));
    const LayerStack ref = mirror_crystal_stack();
    REQUIRE(stack.layers.size() == ref.layers.size());
    REQUIRE(stack.mirrors.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(stack.mirrors[i].position == ref.mirrors[i].position);
        CHECK(stack.mirrors[i].r == ref.mirrors[i].r);
    }
    std::vector<double> grid;
    for (int i = 0; i < 31; ++i) grid.push_back(-0.3e-6 + 0.6e-6 * i / 30);
    const auto curves = mode_spacing_vs_length(ref, grid, 2);
    const auto back = read_spacing_curve(d / "j1" / "spacing_pair1.csv");
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK(back.spacing[i] == doctest::Approx(curves[1].spacing[i]).epsilon(1e-12));

    REQUIRE(run({"cavity", "--config", cfg, "--out", (d / "js").string(), "--format", "json"}).code == 0);
    const json t = read_json(d / "js" / "spacing_pair0.json");
    CHECK(t["columns"]["spacing_hz"].size() == 31);

    write_text(d / "empty.ini", "[sweep]\npoints = 0\n");
    CHECK(run({"cavity", "--config", (d / "empty.ini").string(), "--out", d.string()}).code == 2);
    write_text(d / "nomirror.ini", "[cavity]\nstack = gap 1e-3, crystal 5e-3 1.5\n\n[sweep]\npoints = 5\n");
    CHECK(run({"cavity", "--config", (d / "nomirror.ini").string(), "--out", d.string()}).code == 3);
}

TEST_CASE("align command recovers cold shifts") {
    const fs::path d = fresh_dir("align");
    AlignmentModel warm;
    warm.a = 1.15;
    warm.d = 0.85;
    AlignmentModel cold = warm;
    cold.optima.theta_in = -15;
    cold.optima.phi_in = 23;
    cold.optima.theta_tr = 15;
    cold.optima.phi_tr = -11;
    std::vector<AlignmentObservation> obs;
    for (auto [a, b] : {std::pair{0.0, 0.0}, {30.0, 0.0}, {-30.0, 0.0}, {0.0, 30.0}, {0.0, -30.0}}) {
        const TiltState in{a, b, 0, 0, 0, 0};
        obs.push_back({in, reflection_vs_input_tilt(in, cold), AlignmentFitKind::ColdOptimumInput});
        const TiltState tr{0, 0, 0, 0, a, b};
        obs.push_back({tr, transmission_vs_transmission_tilt(tr, cold), AlignmentFitKind::ColdOptimumTransmission});
    }
    write_alignment_observations(d / "obs.csv", obs);
    write_text(d / "align.ini", "[alignment]\na = 1.15\nd = 0.85\n\n[align]\nobservations = obs.csv\n");
    REQUIRE(run({"align", "--config", (d / "align.ini").string(), "--out", d.string()}).code == 0);
    const json j = read_json(d / "align.json");
    REQUIRE(j["fits"].size() == 2);
    for (const auto& f : j["fits"]) {
        const bool input = f["which"] == "cold_input";
        CHECK(f["shift_theta_deg"].get<double>() == doctest::Approx(input ? -15.0 : 15.0).epsilon(1e-6));
        CHECK(f["shift_phi_deg"].get<double>() == doctest::Approx(input ? 23.0 : -11.0).epsilon(1e-6));
    }
    write_text(d / "few.ini", "[align]\nobservations = obs.csv\nfits = input_a\n");
    CHECK(run({"align", "--config", (d / "few.ini").string(), "--out", d.string()}).code == 2);
}

TEST_CASE("noise command") {
    const fs::path d = fresh_dir("noise");
    std::vector<double> t;
    for (int k = 0; k < 1024; ++k) {
        const double up = k * 0.5e-3 + 0.1e-3;
        t.push_back(up + 1e4 * std::sin(kTwoPi * 50.0 * up) / 4e11);
        t.push_back(k * 0.5e-3 + 0.37e-3);
    }
    write_dip_times(d / "dips.csv", t);
    write_text(d / "noise.ini",
               "[phase_noise]\ns_ww = 3.7e4\nomega_m_hz = 12.66e9\nphoton_flux = 6.4e14\ncooperativity = 0.15\n\n"
               "[occupancy]\nn_inferred = 0.4\nkappa_ext_over_kappa = 0.5\n\n"
               "[eom]\np1_over_p0 = 0.25\n\n"
               "[sweep_dip]\ndips = dips.csv\nsweep_rate_hz_per_s = 4e11\n");
    REQUIRE(run({"noise", "--config", (d / "noise.ini").string(), "--out", d.string()}).code == 0);
    const json j = read_json(d / "noise.json");
    CHECK(j["phase_noise"][0]["n_phonon"].get<double>() == doctest::Approx(2.5e-4).epsilon(0.05));
    CHECK(std::abs(j["occupancy"][0]["n_th"].get<double>() - 0.407) < 1e-3);
    CHECK(j["eom"]["beta_rad"].get<double>() == doctest::Approx(eom_beta_from_sideband_ratio(0.25)));
    CHECK(j["sweep_dip"]["integrated_rms_hz"].get<double>() == doctest::Approx(1e4 / std::sqrt(2.0)).epsilon(0.05));
    CHECK(fs::exists(d / "sweep_dip_psd.csv"));

    write_text(d / "none.ini", "[other]\nx = 1\n");
    CHECK(run({"noise", "--config", (d / "none.ini").string(), "--out", d.string()}).code == 2);
    write_text(d / "gap.ini", "[sweep_dip]\ndips = gap.csv\nsweep_rate_hz_per_s = 4e11\n");
    t.erase(t.begin() + 500);
    write_dip_times(d / "gap.csv", t);
    CHECK(run({"noise", "--config", (d / "gap.ini").string(), "--out", d.string()}).code == 2);
}
