#include <cmath>
#include <filesystem>
#include <random>

#include "brillouin/alignment.hpp"
#include "brillouin/errors.hpp"
#include "brillouin/io.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace brillouin;
using namespace fixtures;

namespace {

std::complex<double> random_phasor(std::mt19937_64& rng, double lo, double hi) {
    return std::polar(uniform(rng, lo, hi), uniform(rng, -3.14159, 3.14159));
}

TiltState input_tilt(double th, double ph) { return {th, ph, 0, 0, 0, 0}; }
TiltState transmission_tilt(double th, double ph) { return {0, 0, 0, 0, th, ph}; }

std::vector<AlignmentObservation> sample(const std::vector<TiltState>& tilts, const AlignmentModel& truth,
                                         AlignmentFitKind which, double noise, std::mt19937_64* rng) {
    const bool input = which == AlignmentFitKind::InputA || which == AlignmentFitKind::ColdOptimumInput;
    std::normal_distribution<double> n01;
    std::vector<AlignmentObservation> out;
    for (const auto& t : tilts) {
        double v = input ? reflection_vs_input_tilt(t, truth) : transmission_vs_transmission_tilt(t, truth);
        if (rng) v *= 1.0 + noise * n01(*rng);
        out.push_back({t, v, which});
    }
    return out;
}

std::vector<TiltState> cross(bool input, double c_th, double c_ph, double step) {
    std::vector<TiltState> out;
    for (auto [a, b] : {std::pair{0.0, 0.0}, {step, 0.0}, {-step, 0.0}, {0.0, step}, {0.0, -step}})
        out.push_back(input ? input_tilt(c_th + a, c_ph + b) : transmission_tilt(c_th + a, c_ph + b));
    return out;
}

}  // namespace

TEST_CASE("cavity reflection and transmission limits") {
    const CouplingRates k{2.0e7, 1.0e7, 0.6e7};
    const PortScattering ideal;
    // Critical coupling with perfect mode matching.
    CHECK(cavity_reflection_transmission(0.0, k, ideal, ideal).r < 1e-30);
    CHECK(cavity_reflection_transmission(0.0, k, ideal, ideal).t ==
          doctest::Approx(4 * k.kappa_ext1 * k.kappa_ext2 / (k.kappa * k.kappa)));
    std::mt19937_64 rng(3);
    const PortScattering p{random_phasor(rng, 0.1, 0.3), random_phasor(rng, 0.5, 1.0), random_phasor(rng, 0.5, 1.0)};
    const auto far = cavity_reflection_transmission(1e6 * k.kappa, k, p, ideal);
    CHECK(far.r == doctest::Approx(std::norm(p.s12 * p.s21 + p.s11)).epsilon(1e-6));
    CHECK(far.t < 1e-12);
}

TEST_CASE("scattering reflection equals the Fano parameterization") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const double kappa = uniform(rng, 1e6, 1e8);
        const CouplingRates k{kappa, uniform(rng, 0.05, 0.6) * kappa, uniform(rng, 0.05, 0.3) * kappa};
        const PortScattering p{random_phasor(rng, 0.0, 0.4), random_phasor(rng, 0.4, 1.0), random_phasor(rng, 0.4, 1.0)};
        const double omega0 = uniform(rng, -1e8, 1e8);
        const FanoParams f = fano_params_from_scattering(k, p, omega0);
        for (int i = 0; i < 10; ++i) {
            const double delta = (i - 4.5) * 0.7 * kappa;
            const double direct = cavity_reflection_transmission(delta, k, p, {}).r;
            CHECK(fano_reflection(omega0 + delta, f) == doctest::Approx(direct).epsilon(1e-10));
        }
    }
}

TEST_CASE("tilt laws") {
    AlignmentModel m;
    m.a = 1.3;
    m.d = 0.8;
    m.b = 1.1;
    m.c = 0.7;
    m.e = 0.4;
    m.r_max = 0.95;
    m.t_max = 0.6;
    m.optima = {3, -2, 1, 4, -5, 6};

    CHECK(reflection_vs_input_tilt(m.optima, m) == doctest::Approx(0.95));
    CHECK(transmission_vs_tilts(m.optima, m) == doctest::Approx(0.6));

    TiltState a = m.optima, b = m.optima;
    a.theta_in += 17;
    b.phi_in += 17;
    CHECK(reflection_vs_input_tilt(a, m) == doctest::Approx(reflection_vs_input_tilt(b, m)));

    TiltState e2 = m.optima;
    e2.theta_in += 2 * m.theta0 / m.a;
    CHECK(reflection_vs_input_tilt(e2, m) == doctest::Approx(0.95 * std::exp(-2.0)));

    // Compensation: dth_in = (C / B) dth_bm zeroes the first term.
    TiltState comp = m.optima;
    comp.theta_bm += 20;
    comp.theta_in += *m.c / *m.b * 20;
    const double x2 = *m.e * 20;
    CHECK(transmission_vs_tilts(comp, m) == doctest::Approx(0.6 * std::exp(-x2 * x2 / (m.theta0 * m.theta0))));

    // Reduced law equals the full law with input and back mirror at optimum,
    // which needs neither B, C nor E.
    AlignmentModel reduced = m;
    reduced.b.reset();
    reduced.c.reset();
    reduced.e.reset();
    TiltState tr = m.optima;
    tr.theta_tr += 12;
    tr.phi_tr -= 30;
    CHECK(transmission_vs_tilts(tr, reduced) == doctest::Approx(transmission_vs_transmission_tilt(tr, m)));
    CHECK_THROWS_AS(transmission_vs_tilts(a, reduced), ConfigError);

    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        const TiltState d{uniform(rng, -60, 60), uniform(rng, -60, 60), uniform(rng, -60, 60),
                          uniform(rng, -60, 60), uniform(rng, -60, 60), uniform(rng, -60, 60)};
        AlignmentModel z = m;
        z.optima = {};
        const TiltState neg{-d.theta_in, -d.phi_in, -d.theta_bm, -d.phi_bm, -d.theta_tr, -d.phi_tr};
        CHECK(reflection_vs_input_tilt(d, z) == doctest::Approx(reflection_vs_input_tilt(neg, z)).epsilon(1e-14));
        CHECK(transmission_vs_tilts(d, z) == doctest::Approx(transmission_vs_tilts(neg, z)).epsilon(1e-14));
        // Maximum sits at the optima for any amplitude.
        AlignmentModel s = m;
        s.r_max *= 3.7;
        s.t_max *= 0.2;
        const TiltState off{m.optima.theta_in + d.theta_in, m.optima.phi_in + d.phi_in, m.optima.theta_bm + d.theta_bm,
                            m.optima.phi_bm + d.phi_bm,     m.optima.theta_tr + d.theta_tr, m.optima.phi_tr + d.phi_tr};
        CHECK(reflection_vs_input_tilt(off, s) <= reflection_vs_input_tilt(m.optima, s));
        CHECK(transmission_vs_tilts(off, s) <= transmission_vs_tilts(m.optima, s));
    }
}

TEST_CASE("Gaussian overlap factor") {
    CHECK(gaussian_overlap_factor(0, 0, 77e-6) == 1.0);
    CHECK(gaussian_overlap_factor(77e-6, 0, 77e-6) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
    CHECK_THROWS_AS(gaussian_overlap_factor(0, 0, 0), ConfigError);

    // Trapezoid quadrature of the normalized overlap integral; spectrally
    // accurate for Gaussians on a wide grid.
    auto overlap = [](double dx, double dy, double w) {
        const double h = w / 25.0, lim = 9.0 * w;
        double num = 0.0, den = 0.0;
        for (double x = -lim; x <= lim; x += h)
            for (double y = -lim; y <= lim; y += h) {
                const double ea = std::exp(-(x * x + y * y) / (w * w));
                const double eb = std::exp(-((x - dx) * (x - dx) + (y - dy) * (y - dy)) / (w * w));
                num += ea * eb;
                den += ea * ea;
            }
        return num / den;
    };
    std::mt19937_64 rng(9);
    for (int i = 0; i < 5; ++i) {
        const double w = uniform(rng, 50e-6, 100e-6);
        const double dx = uniform(rng, -1.5, 1.5) * w, dy = uniform(rng, -1.5, 1.5) * w;
        CHECK(gaussian_overlap_factor(dx, dy, w) == doctest::Approx(overlap(dx, dy, w)).epsilon(1e-8));
    }

    // The transmission law is the product of squared input and output overlaps
    // with displacements B d dth, C d dth_bm, ... and waist d theta0.
    AlignmentModel m;
    m.b = 1.1;
    m.c = 0.7;
    m.d = 0.8;
    m.e = 0.4;
    const TiltState t{10, -20, 5, 8, -15, 25};
    const double dil = 22e-3 * screw_to_rad(1.0);
    const double w = dil * m.theta0;
    const double s21 = gaussian_overlap_factor(dil * (*m.b * t.theta_in - *m.c * t.theta_bm),
                                               dil * (*m.b * t.phi_in - *m.c * t.phi_bm), w);
    const double s12 = gaussian_overlap_factor(dil * (m.d * t.theta_tr - *m.e * t.theta_bm),
                                               dil * (m.d * t.phi_tr - *m.e * t.phi_bm), w);
    CHECK(transmission_vs_tilts(t, m) == doctest::Approx(s21 * s21 * s12 * s12).epsilon(1e-12));
    CHECK(screw_to_rad(10.0) == doctest::Approx(32e-6));
}

TEST_CASE("noiseless cross recovers the center exactly") {
    AlignmentModel truth;
    truth.a = 1.2;
    truth.r_max = 0.97;
    truth.optima = input_tilt(7.5, -3.25);
    const auto obs = sample(cross(true, 7.5, -3.25, 25), truth, AlignmentFitKind::InputA, 0, nullptr);
    AlignmentModel start;
    const AlignmentFit f = fit_alignment_gaussian(obs, AlignmentFitKind::InputA, start);
    CHECK(f.center_theta == doctest::Approx(7.5).epsilon(1e-9));
    CHECK(f.center_phi == doctest::Approx(-3.25).epsilon(1e-9));
    CHECK(f.model.a == doctest::Approx(1.2).epsilon(1e-9));
    CHECK(f.model.r_max == doctest::Approx(0.97).epsilon(1e-9));
}

TEST_CASE("calibration of A and D at room temperature") {
    std::mt19937_64 rng(21);
    AlignmentModel truth;
    truth.a = 1.15;
    truth.d = 0.85;
    std::vector<TiltState> grid_in, grid_tr;
    for (double a : {-40.0, -20.0, 0.0, 20.0, 40.0})
        for (double b : {-40.0, 0.0, 40.0}) {
            grid_in.push_back(input_tilt(a, b));
            grid_tr.push_back(transmission_tilt(a, b));
        }
    auto obs = sample(grid_in, truth, AlignmentFitKind::InputA, 0.005, &rng);
    const auto tr = sample(grid_tr, truth, AlignmentFitKind::TransmissionD, 0.005, &rng);
    obs.insert(obs.end(), tr.begin(), tr.end());
    const AlignmentFit fa = fit_alignment_gaussian(obs, AlignmentFitKind::InputA, {});
    const AlignmentFit fd = fit_alignment_gaussian(obs, AlignmentFitKind::TransmissionD, {});
    CHECK(fa.model.a == doctest::Approx(1.15).epsilon(0.02));
    CHECK(fd.model.d == doctest::Approx(0.85).epsilon(0.02));
    CHECK(std::abs(fa.center_theta) < 1.0);
    CHECK(std::abs(fd.center_phi) < 1.0);
}

TEST_CASE("cold optima shifts are recovered within one degree") {
    AlignmentModel warm;
    warm.a = 1.15;
    warm.d = 0.85;
    AlignmentModel cold = warm;
    cold.optima = {-15, 23, 0, 0, 15, -11};
    cold.r_max = 1.02;
    cold.t_max = 0.9;

    const auto clean_in = sample(cross(true, 0, 0, 30), cold, AlignmentFitKind::ColdOptimumInput, 0, nullptr);
    const AlignmentFit exact = fit_alignment_gaussian(clean_in, AlignmentFitKind::ColdOptimumInput, warm);
    CHECK(exact.shift_theta == doctest::Approx(-15).epsilon(1e-8));
    CHECK(exact.shift_phi == doctest::Approx(23).epsilon(1e-8));
    CHECK(exact.model.a == warm.a);

    std::mt19937_64 rng(1234);
    double worst = 0.0;
    for (int seed = 0; seed < 50; ++seed) {
        const auto obs_in = sample(cross(true, 0, 0, 30), cold, AlignmentFitKind::ColdOptimumInput, 0.005, &rng);
        const AlignmentFit fi = fit_alignment_gaussian(obs_in, AlignmentFitKind::ColdOptimumInput, warm);
        worst = std::max({worst, std::abs(fi.shift_theta + 15), std::abs(fi.shift_phi - 23)});
        // Second stage: input lens at its cold optimum, transmission lens scanned.
        const auto obs_tr =
            sample(cross(false, 0, 0, 30), cold, AlignmentFitKind::ColdOptimumTransmission, 0.005, &rng);
        const AlignmentFit ft = fit_alignment_gaussian(obs_tr, AlignmentFitKind::ColdOptimumTransmission, fi.model);
        worst = std::max({worst, std::abs(ft.shift_theta - 15), std::abs(ft.shift_phi + 11)});
        CHECK(ft.model.optima.theta_in == fi.model.optima.theta_in);
    }
    CHECK(worst < 1.0);
}

TEST_CASE("cold-optimum fit needs three non-collinear points") {
    AlignmentModel warm;
    warm.a = 1.0;
    AlignmentModel cold = warm;
    cold.optima = input_tilt(-15, 23);
    const std::vector<TiltState> three{input_tilt(0, 0), input_tilt(30, 0), input_tilt(0, 30)};
    const auto obs = sample(three, cold, AlignmentFitKind::ColdOptimumInput, 0, nullptr);
    const AlignmentFit f = fit_alignment_gaussian(obs, AlignmentFitKind::ColdOptimumInput, warm);
    CHECK(f.shift_theta == doctest::Approx(-15).epsilon(1e-8));
    CHECK(f.shift_phi == doctest::Approx(23).epsilon(1e-8));

    const std::vector<AlignmentObservation> two(obs.begin(), obs.begin() + 2);
    CHECK_THROWS_AS(fit_alignment_gaussian(two, AlignmentFitKind::ColdOptimumInput, warm), InsufficientDataError);
    const std::vector<TiltState> line{input_tilt(0, 0), input_tilt(10, 10), input_tilt(20, 20), input_tilt(-5, -5)};
    CHECK_THROWS_AS(fit_alignment_gaussian(sample(line, cold, AlignmentFitKind::ColdOptimumInput, 0, nullptr),
                                           AlignmentFitKind::ColdOptimumInput, warm),
                    InsufficientDataError);
    CHECK_THROWS_AS(fit_alignment_gaussian(obs, AlignmentFitKind::InputA, warm), InsufficientDataError);
}

TEST_CASE("cold-optimum center is translation covariant") {
    std::mt19937_64 rng(5);
    AlignmentModel warm;
    warm.d = 0.9;
    AlignmentModel cold = warm;
    cold.optima = transmission_tilt(15, -11);
    const auto obs = sample(cross(false, 2, -4, 25), cold, AlignmentFitKind::ColdOptimumTransmission, 0.01, &rng);
    const AlignmentFit f = fit_alignment_gaussian(obs, AlignmentFitKind::ColdOptimumTransmission, warm);
    for (double shift : {-100.0, 3.5, 250.0}) {
        auto moved = obs;
        for (auto& o : moved) {
            o.tilts.theta_tr += shift;
            o.tilts.phi_tr += shift;
        }
        const AlignmentFit g = fit_alignment_gaussian(moved, AlignmentFitKind::ColdOptimumTransmission, warm);
        CHECK(g.center_theta - f.center_theta == doctest::Approx(shift).epsilon(1e-8));
        CHECK(g.center_phi - f.center_phi == doctest::Approx(shift).epsilon(1e-8));
        CHECK(g.amplitude == doctest::Approx(f.amplitude).epsilon(1e-8));
    }
}

TEST_CASE("observation CSV round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "brillouin_test_alignment";
    std::filesystem::create_directories(dir);
    const std::vector<AlignmentObservation> obs{{{1, 2, 3, 4, 5, 6}, 0.5, AlignmentFitKind::ColdOptimumInput},
                                                {{-1, 0, 0, 0, 2.5, -3}, 0.25, AlignmentFitKind::TransmissionD}};
    write_alignment_observations(dir / "o.csv", obs);
    const auto back = read_alignment_observations(dir / "o.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[0].tilts.phi_bm == 4);
    CHECK(back[1].tilts.phi_tr == -3);
    CHECK(back[0].which == AlignmentFitKind::ColdOptimumInput);
    CHECK(back[1].which == AlignmentFitKind::TransmissionD);
    CHECK(back[1].value == 0.25);
    write_text(dir / "bad.csv", "theta_in_deg,phi_in_deg,theta_bm_deg,phi_bm_deg,theta_tr_deg,phi_tr_deg,value,which\n"
                                "0,0,0,0,0,0,1,sideways\n");
    CHECK_THROWS_AS(read_alignment_observations(dir / "bad.csv"), ConfigError);
    std::filesystem::remove_all(dir);
}
