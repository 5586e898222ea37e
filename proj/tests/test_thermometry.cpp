#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <random>

#include "brillouin/errors.hpp"
#include "brillouin/serialize.hpp"
#include "brillouin/thermometry.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace brillouin;
using namespace fixtures;
using boost::math::quadrature::gauss_kronrod;

namespace {

SpectrumTrace sampled(const std::function<double(double)>& f, double lo, double hi, std::size_t n, double sigma = 0.0) {
    SpectrumTrace t;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        t.freq.push_back(x);
        t.power.push_back(f(x));
        t.sigma.push_back(sigma);
    }
    return t;
}

CorrectionSet generic_corrections() {
    CorrectionSet c;
    c.pump_power = {2.1e-4, 0.05e-4};
    c.p_lo = {1.1e-3, 0.02e-3};
    c.kappa_signal = {2.3 * kMHz, 0.04 * kMHz};
    c.delta_detune = {0.07 * kMHz, 0.02 * kMHz};
    c.gamma_eff = {66 * kkHz, 1.5 * kkHz};
    c.kappa_ratio_ext1 = {1.2, 0.03};
    c.kappa_ratio_ext2 = {0.8, 0.02};
    c.kappa_pump = {2.5 * kMHz, 0.05 * kMHz};
    return c;
}

}  // namespace

TEST_CASE("integrate_peak on closed forms") {
    const auto zero = sampled([](double) { return 0.0; }, -1.0, 1.0, 101, 0.2);
    const Uncertain z = integrate_peak(zero, 0.0, 0.5);
    CHECK(z.value == 0.0);
    // 51 interior points with weights 0.02, two edge points with 0.01.
    CHECK(z.sigma == doctest::Approx(0.2 * std::sqrt(49 * 0.0004 + 2 * 0.0001)).epsilon(1e-12));

    // Unit-area Lorentzian of FWHM gamma: (2/pi) atan(2 delta / gamma) inside +/- delta.
    const double gamma = 1.0;
    auto lor = [&](double x) { return (gamma / (2 * kPi)) / (x * x + 0.25 * gamma * gamma); };
    const auto t = sampled(lor, -50.0, 50.0, 200001);
    CHECK(integrate_peak(t, 0.0, 20 * gamma).value == doctest::Approx(2 / kPi * std::atan(40.0)).epsilon(1e-6));
    CHECK(integrate_peak(t, 0.0, 10 * gamma).value == doctest::Approx(2 / kPi * std::atan(20.0)).epsilon(1e-6));
    CHECK(2 / kPi * std::atan(20.0) == doctest::Approx(0.968).epsilon(1e-3));

    // Window edges between samples are interpolated.
    const auto lin = sampled([](double x) { return 3.0 + x; }, 0.0, 10.0, 11);
    CHECK(integrate_peak(lin, 5.25, 2.3).value == doctest::Approx(2 * 2.3 * 8.25).epsilon(1e-14));

    CHECK_THROWS_AS(integrate_peak(lin, 9.0, 2.0), InsufficientDataError);
    std::vector<std::string> warn;
    integrate_peak(t, 0.0, 2.0, 1.0, 100.0, &warn);
    CHECK(warn.size() == 1);
    warn.clear();
    integrate_peak(t, 0.0, 20.0, 1.0, 100.0, &warn);
    CHECK(warn.size() == 1);
    warn.clear();
    integrate_peak(t, 0.0, 8.0, 1.0, 100.0, &warn);
    CHECK(warn.empty());
}

TEST_CASE("integrate_peak on a synthetic ESA line matches quadrature") {
    SystemParams p = single_mode_params(PumpSide::Blue);
    const double base = esa_baseline(p);
    const CorrectionSet c = exact_corrections(p);
    const double center = p.delta_21 + c.delta_detune.value - p.detection.delta_lo;
    const double gamma = c.gamma_eff.value;
    std::vector<double> w;
    for (int i = 0; i <= 6000; ++i) w.push_back(center + gamma * (-30.0 + 60.0 * i / 6000.0));
    auto tr = esa_power_spectrum(p, w);
    for (auto& v : tr.power) v -= base;
    const double delta = default_half_width(gamma, c.kappa_signal.value);
    const double area = integrate_peak(tr, angular_to_hz(center), angular_to_hz(delta)).value;
    const double quad = gauss_kronrod<double, 61>::integrate(
        [&](double f) { return esa_power_spectrum(p, {hz_to_angular(f)}).power[0] - base; },
        angular_to_hz(center - delta), angular_to_hz(center + delta), 15, 1e-12);
    CHECK(area == doctest::Approx(quad).epsilon(5e-3));
}

TEST_CASE("window_fraction equals quadrature of the Lorentzian product") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 30; ++k) {
        CorrectionSet c = generic_corrections();
        c.gamma_eff.value = uniform(rng, 20, 150) * kkHz;
        c.kappa_signal.value = uniform(rng, 1.0, 4.0) * kMHz;
        c.delta_detune.value = uniform(rng, -0.5, 0.5) * kMHz;
        const double delta = uniform(rng, 2.0, 30.0) * c.gamma_eff.value;
        const double a = 0.5 * c.gamma_eff.value, b = 0.5 * c.kappa_signal.value, d = c.delta_detune.value;
        const double q = gauss_kronrod<double, 61>::integrate(
            [&](double x) { return 1.0 / ((x * x + a * a) * ((x + d) * (x + d) + b * b)); }, -delta, delta, 20, 1e-13);
        CHECK(window_fraction(delta, c) == doctest::Approx(q * (b * b + d * d) / (kPi / a)).epsilon(1e-9));
    }
    // Narrow line, wide window: the narrow-line area is exact.
    CorrectionSet c = generic_corrections();
    c.gamma_eff.value = 1e-6 * c.kappa_signal.value;
    CHECK(window_fraction(1e-2 * c.kappa_signal.value, c) == doctest::Approx(1.0).epsilon(1e-3));
    // Coincident poles are handled continuously.
    c.delta_detune.value = 0.0;
    c.gamma_eff.value = c.kappa_signal.value;
    const double at = window_fraction(c.kappa_signal.value, c);
    c.gamma_eff.value *= 1 + 1e-6;
    CHECK(window_fraction(c.kappa_signal.value, c) == doctest::Approx(at).epsilon(1e-5));
}

TEST_CASE("corrected_integral") {
    const CorrectionSet c = generic_corrections();
    const Uncertain area{3.0, 0.1};
    const Uncertain r = corrected_integral(area, c, PumpSide::Red);
    const Uncertain b = corrected_integral(area * 1.7, c, PumpSide::Blue);
    // Identical conditions apart from the coupling ratio bookkeeping.
    CorrectionSet same = c;
    same.kappa_ratio_ext2 = same.kappa_ratio_ext1;
    CHECK(corrected_integral(area * 1.7, same, PumpSide::Blue).value / r.value == doctest::Approx(1.7));
    CHECK(b.value / r.value == doctest::Approx(1.7 * 1.2 / 0.8));

    CorrectionSet twice = c;
    twice.gamma_eff.value *= 2;
    CHECK(corrected_integral(area, twice, PumpSide::Red).value == doctest::Approx(2 * r.value));

    CorrectionSet bad = c;
    bad.p_lo.value = 0.0;
    CHECK_THROWS_AS(corrected_integral(area, bad, PumpSide::Red), ConfigError);
    bad = c;
    bad.delta_detune.value = -0.1 * kMHz;  // signed detuning is allowed
    CHECK_NOTHROW(corrected_integral(area, bad, PumpSide::Red));
}

TEST_CASE("corrected asymmetry equals the hand-composed factor chain") {
    // Absolute coupling rates, from which only ratios reach the corrections.
    const double k1e1 = 0.35, k1e2 = 0.25, k2e1 = 0.28, k2e2 = 0.33;
    CorrectionSet r = generic_corrections(), b = generic_corrections();
    r.kappa_ratio_ext1 = b.kappa_ratio_ext1 = {k1e1 / k2e1, 0.0};
    r.kappa_ratio_ext2 = b.kappa_ratio_ext2 = {k1e2 / k2e2, 0.0};
    b.pump_power.value = 1.6e-4;
    b.p_lo.value = 1.4e-3;
    b.kappa_signal.value = 2.5 * kMHz;
    b.kappa_pump.value = 2.3 * kMHz;
    b.delta_detune.value = -0.03 * kMHz;
    b.gamma_eff.value = 41 * kkHz;
    const double ir = 5.0, ib = 9.0;

    // I^r ~ P P_LO k1e1 k2e2 / (D Gamma kappa_1^2), I^b ~ P P_LO k2e1 k1e2 / (D Gamma kappa_2^2)
    auto raw_pref = [](const CorrectionSet& c, double ke1_pump, double ke2_sig) {
        const double d = std::pow(c.kappa_signal.value / 2, 2) + std::pow(c.delta_detune.value, 2);
        return c.pump_power.value * c.p_lo.value * ke1_pump * ke2_sig /
               (d * c.gamma_eff.value * std::pow(c.kappa_pump.value, 2));
    };
    const double expected = (ib / raw_pref(b, k2e1, k1e2)) / (ir / raw_pref(r, k1e1, k2e2));
    const double got = corrected_integral({ib, 0}, b, PumpSide::Blue).value /
                       corrected_integral({ir, 0}, r, PumpSide::Red).value;
    CHECK(got == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("prefactor sigma matches numerical linear propagation") {
    const CorrectionSet c = generic_corrections();
    for (PumpSide side : {PumpSide::Red, PumpSide::Blue}) {
        const Uncertain pref = correction_prefactor(c, side);
        Uncertain CorrectionSet::*fields[] = {&CorrectionSet::pump_power,   &CorrectionSet::p_lo,
                                               &CorrectionSet::kappa_signal, &CorrectionSet::delta_detune,
                                               &CorrectionSet::gamma_eff,    &CorrectionSet::kappa_ratio_ext1,
                                               &CorrectionSet::kappa_ratio_ext2, &CorrectionSet::kappa_pump};
        double var = 0.0;
        for (auto f : fields) {
            CorrectionSet hi = c, lo = c;
            const double h = 1e-6 * std::abs((c.*f).value);
            (hi.*f).value += h;
            (lo.*f).value -= h;
            const double d = (correction_prefactor(hi, side).value - correction_prefactor(lo, side).value) / (2 * h);
            var += std::pow(d * (c.*f).sigma, 2);
        }
        CHECK(pref.sigma == doctest::Approx(std::sqrt(var)).epsilon(1e-6));
    }
}

TEST_CASE("occupancy_from_pair") {
    CHECK(occupancy_from_pair({1.0, 0.0}, {2.0, 0.0}).n_th == doctest::Approx(1.0));
    CHECK(occupancy_from_pair({1.0, 0.0}, {1e9, 0.0}).n_th < 1e-8);
    CHECK(occupancy_from_pair({1.0, 0.0}, {1.0 + 1.0 / 0.44, 0.0}).n_th == doctest::Approx(0.44).epsilon(1e-12));
    CHECK_THROWS_AS(occupancy_from_pair({0.0, 0.1}, {1.0, 0.1}), ConfigError);

    // Endpoint mapping, against the inverse law evaluated directly.
    const Uncertain ir{2.0, 0.05}, ib{6.5, 0.2};
    const auto rep = occupancy_from_pair(ir, ib);
    const double a = 6.5 / 2.0;
    const double sa = a * std::hypot(0.05 / 2.0, 0.2 / 6.5);
    CHECK(rep.asymmetry.value == doctest::Approx(a));
    CHECK(rep.asymmetry.sigma == doctest::Approx(sa));
    CHECK(rep.bound_lo == doctest::Approx(1 / (a + sa - 1)));
    CHECK(rep.bound_hi == doctest::Approx(1 / (a - sa - 1)));
    CHECK(rep.bound_lo <= rep.n_th);
    CHECK(rep.n_th <= rep.bound_hi);
    CHECK(rep.physical);
}

TEST_CASE("measured-scale asymmetric bars for mode 1") {
    // An asymmetry of 3.27 gives n = 0.44; sigma_a = 0.377 spans the quoted 0.15 total.
    const auto rep = occupancy_from_pair({1.0, 0.0}, {3.27, 0.377});
    CHECK(rep.n_th == doctest::Approx(0.4405).epsilon(1e-3));
    CHECK(rep.bound_hi - rep.bound_lo == doctest::Approx(0.15).epsilon(0.01));
    CHECK(rep.bound_hi - rep.n_th == doctest::Approx(0.088).epsilon(0.02));
    CHECK(rep.n_th - rep.bound_lo == doctest::Approx(0.063).epsilon(0.02));
    // Convexity: the upper excursion is always the larger one.
    for (double s : {0.05, 0.2, 0.5, 1.0}) {
        const auto q = occupancy_from_pair({1.0, 0.0}, {3.27, s});
        CHECK(q.bound_hi - q.n_th > q.n_th - q.bound_lo);
    }
}

TEST_CASE("occupancy properties") {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 200; ++k) {
        const Uncertain r{uniform(rng, 0.1, 5.0), uniform(rng, 0.0, 0.05)};
        const Uncertain b{r.value * uniform(rng, 1.01, 20.0), uniform(rng, 0.0, 0.1)};
        const double s = std::exp(uniform(rng, -20.0, 20.0));
        const auto x = occupancy_from_pair(r, b);
        const auto y = occupancy_from_pair(r * s, b * s);
        CHECK(y.n_th == doctest::Approx(x.n_th).epsilon(1e-12));
        CHECK(y.bound_lo == doctest::Approx(x.bound_lo).epsilon(1e-12));
        CHECK(y.bound_hi == doctest::Approx(x.bound_hi).epsilon(1e-12));
        CHECK(x.bound_lo <= x.n_th);
        CHECK(x.n_th <= x.bound_hi);
    }
    // Large occupation: small asymmetry sigma gives nearly symmetric bars.
    const double a = 1.0 + 1.0 / 100.0;
    const auto big = occupancy_from_pair({1.0, 0.0}, {a, 1e-5});
    CHECK(big.n_th == doctest::Approx(100.0));
    const double q = (big.bound_hi - big.n_th) / (big.n_th - big.bound_lo);
    CHECK(q >= 0.95);
    CHECK(q <= 1.05);
}

TEST_CASE("unphysical asymmetry is flagged, not clipped") {
    const auto rep = occupancy_from_pair({2.0, 0.1}, {1.8, 0.1});
    CHECK_FALSE(rep.physical);
    CHECK(rep.n_th < 0.0);
    CHECK(rep.n_th == doctest::Approx(1.0 / (0.9 - 1.0)));
    CHECK(rep.bound_lo <= rep.n_th);
    CHECK(rep.bound_hi == std::numeric_limits<double>::infinity());
    CHECK_FALSE(rep.warnings.empty());
}

TEST_CASE("coupling ratios from Fano fits") {
    auto fano_trace = [](double ske, double kappa, double phi) {
        FanoParams fp{0.8, ske, phi, kappa, 0.0};
        SpectrumTrace t;
        for (int i = 0; i <= 4000; ++i) {
            const double w = kappa * (-8.0 + 16.0 * i / 4000.0);
            t.freq.push_back(angular_to_hz(w));
            t.power.push_back(fano_reflection(w, fp));
            t.sigma.push_back(1e-4);
        }
        return t;
    };
    const double k = 2.4 * kMHz;
    const auto red1 = fit_fano_reflection(fano_trace(1.3 * 0.2 * k, k, 0.2));
    const auto blue1 = fit_fano_reflection(fano_trace(0.2 * k, k, 0.25));
    const auto red2 = fit_fano_reflection(fano_trace(0.7 * 0.3 * k, k, -0.1));
    const auto blue2 = fit_fano_reflection(fano_trace(0.3 * k, k, 0.05));
    const auto [e1, e2] = coupling_ratio_from_fano(red1, blue1, red2, blue2);
    CHECK(e1.value == doctest::Approx(1.3).epsilon(5e-3));
    CHECK(e2.value == doctest::Approx(0.7).epsilon(5e-3));
    CHECK(e1.sigma > 0.0);

    const auto [s1, s2] = coupling_ratio_from_fano(blue1, red1, blue2, red2);
    CHECK(s1.value == doctest::Approx(1.0 / e1.value).epsilon(1e-12));
    CHECK(s2.value == doctest::Approx(1.0 / e2.value).epsilon(1e-12));
    const auto [i1, i2] = coupling_ratio_from_fano(blue1, blue1, red2, red2);
    CHECK(i1.value == 1.0);
    CHECK(i2.value == 1.0);

    FitResult bad = red1;
    bad.converged = false;
    CHECK_THROWS_AS(coupling_ratio_from_fano(bad, blue1, red2, blue2), ConfigError);
}

TEST_CASE("warmup interpolation laws") {
    OccupancyReport ref = occupancy_from_pair({1.0, 0.0}, {3.5, 0.0});
    CHECK(ref.n_th == doctest::Approx(0.4));
    for (PumpSide side : {PumpSide::Red, PumpSide::Blue}) {
        const auto same = warmup_occupancy(ref, {2.0, 0.0}, {2.0, 0.0}, side);
        CHECK(same.n_th == doctest::Approx(0.4));
    }
    CHECK(warmup_occupancy(ref, {2.0, 0.0}, {4.0, 0.0}, PumpSide::Red).n_th == doctest::Approx(0.8));
    const auto blue = warmup_occupancy(ref, {2.0, 0.0}, {4.0, 0.0}, PumpSide::Blue);
    CHECK(blue.n_th == doctest::Approx(1.8));
    CHECK(blue.method == OccupancyMethod::WarmupBlue);
    const auto neg = warmup_occupancy(ref, {2.0, 0.0}, {1.0, 0.0}, PumpSide::Blue);
    CHECK_FALSE(neg.physical);
}

TEST_CASE("warmup red and blue agree on prescribed warmup data") {
    // Reference pair at n = 0.44, then a prescribed n(t); both single-sided
    // estimates must agree within their combined errors.
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double beta = 7.3;
    const double rel = 0.02;
    auto measure = [&](double v) { return Uncertain{v * (1 + rel * noise(rng)), v * rel}; };
    const Uncertain ref_r = measure(beta * 0.44), ref_b = measure(beta * 1.44);
    const auto ref = occupancy_from_pair(ref_r, ref_b);
    int agree = 0;
    const int n = 60;
    for (int i = 0; i < n; ++i) {
        const double nt = 0.44 + 0.1 * i;
        const auto r = warmup_occupancy(ref, ref_r, measure(beta * nt), PumpSide::Red);
        const auto b = warmup_occupancy(ref, ref_b, measure(beta * (nt + 1)), PumpSide::Blue);
        const double sr = 0.5 * (r.bound_hi - r.bound_lo), sb = 0.5 * (b.bound_hi - b.bound_lo);
        if (std::abs(r.n_th - b.n_th) <= 2.0 * std::hypot(sr, sb)) ++agree;
    }
    CHECK(agree >= 0.9 * n);
}

TEST_CASE("normalize_for_display") {
    const EsaPair e = thermometry_pair(0.44, 2001);
    // Baselines normalized to 1 with the analytic shot-noise level.
    SpectrumTrace r = e.trace_r, b = e.trace_b;
    for (auto& v : r.power) v /= esa_baseline(e.red);
    for (auto& v : b.power) v /= esa_baseline(e.blue);

    const auto ident = normalize_for_display(r, r, e.corr_r, [&] {
        CorrectionSet c = e.corr_r;
        c.kappa_ratio_ext2 = c.kappa_ratio_ext1;
        return c;
    }());
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(ident.power[i] == doctest::Approx(r.power[i]).epsilon(1e-14));

    CorrectionSet dbl = e.corr_r;
    dbl.kappa_ratio_ext2.value = 2 * dbl.kappa_ratio_ext1.value;
    const auto twice = normalize_for_display(r, r, e.corr_r, dbl);
    for (std::size_t i = 0; i < r.size(); ++i)
        CHECK(twice.power[i] - 1.0 == doctest::Approx(2 * (r.power[i] - 1.0)).epsilon(1e-12));

    const auto disp = normalize_for_display(r, b, e.corr_r, e.corr_b);
    auto area = [](const SpectrumTrace& t) {
        double s = 0.0;
        for (std::size_t i = 1; i < t.size(); ++i)
            s += 0.5 * (t.power[i] + t.power[i - 1] - 2.0) * (t.freq[i] - t.freq[i - 1]);
        return s;
    };
    const double corrected = (area(b) / correction_prefactor(e.corr_b, PumpSide::Blue).value) /
                             (area(r) / correction_prefactor(e.corr_r, PumpSide::Red).value);
    CHECK(area(b) / area(disp) == doctest::Approx(corrected).epsilon(1e-12));
    for (std::size_t i : {std::size_t{0}, r.size() - 1}) CHECK(disp.power[i] - 1.0 == doctest::Approx(0.0).scale(1.0).epsilon(1e-3));
}

TEST_CASE("thermometry round trip, noiseless") {
    for (double n : {0.1, 0.44, 7.0}) {
        const EsaPair e = thermometry_pair(n);
        const auto rep = thermometry_from_traces(e.trace_r, e.trace_b, e.corr_r, e.corr_b);
        CHECK(rep.n_th == doctest::Approx(n).epsilon(0.01));
        CHECK(rep.physical);
        CHECK(rep.timestamp_r == e.trace_r.meta.timestamp_start);
    }
}

TEST_CASE("thermometry bands cover the truth at measured-like SNR") {
    for (double n : {0.1, 0.44, 7.0}) {
        CAPTURE(n);
        const Coverage c = thermometry_coverage(n, 4.0, 200);
        CHECK(c.covered >= 120);
        CHECK(c.median_n == doctest::Approx(n).epsilon(0.1));
    }
}

TEST_CASE("report JSON carries the provenance") {
    const EsaPair e = thermometry_pair(0.44);
    const auto rep = thermometry_from_traces(e.trace_r, e.trace_b, e.corr_r, e.corr_b);
    const std::string js = to_json(rep);
    CHECK(js.find("\"prefactor\"") != std::string::npos);
    CHECK(js.find("\"kappa_ratio_ext2\"") != std::string::npos);
    CHECK(js.find("\"window_fraction_b\"") != std::string::npos);

    const std::string corr = R"({"red": )" + to_json(e.corr_r) + R"(, "blue": {"pump_power": 1e-4, "p_lo": {"value": 1e-3, "sigma": 1e-5},
        "kappa_signal_hz": 2.4e6, "delta_detune_hz": -5e4, "gamma_eff_hz": 4.5e4, "kappa_ratio_ext1": 1.1,
        "kappa_ratio_ext2": 0.9, "kappa_pump_hz": 2.2e6}})";
    const auto [r, b] = correction_pair_from_json(corr);
    CHECK(r.gamma_eff.value == e.corr_r.gamma_eff.value);
    CHECK(b.gamma_eff.value == doctest::Approx(kTwoPi * 4.5e4));
    CHECK(b.p_lo.sigma == 1e-5);
    CHECK_THROWS_AS(correction_pair_from_json(R"({"red": {}})"), ConfigError);
    CHECK_THROWS_AS(correction_set_from_json("{not json"), ConfigError);
}
