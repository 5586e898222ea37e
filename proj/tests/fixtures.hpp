#pragma once

// Shared parameter sets and small helpers for the test binaries.

#include <algorithm>
#include <cmath>
#include <random>

#include "brillouin/model.hpp"
#include "brillouin/spectra.hpp"
#include "brillouin/thermal.hpp"
#include "brillouin/thermometry.hpp"

namespace fixtures {

using namespace brillouin;

inline constexpr double kMHz = kTwoPi * 1e6;
inline constexpr double kkHz = kTwoPi * 1e3;
inline constexpr double kGHz = kTwoPi * 1e9;

// Three-mode system loosely matching the measured device: optical linewidth
// 2.4 MHz, mechanical lines near 12.655 GHz with 54.5 kHz intrinsic width.
inline SystemParams device_params(PumpSide side = PumpSide::Red) {
    SystemParams p;
    const double kappa = 2.4 * kMHz;
    OpticalMode m;
    m.omega = kTwoPi * 193.4e12;
    m.kappa_ext1 = 0.3 * kappa;
    m.kappa_ext2 = 0.3 * kappa;
    m.kappa_int = 0.4 * kappa;
    p.mode_red = m;
    p.mode_blue = m;
    p.mode_blue.omega = m.omega + 12.6553 * kGHz;
    p.delta_21 = 12.6553 * kGHz;
    p.mechanics = {
        {12.6553 * kGHz - 0.9 * kMHz, 54.5 * kkHz, kTwoPi * 8.0, 0.3},
        {12.6553 * kGHz, 54.5 * kkHz, kTwoPi * 8.39, 0.44},
        {12.6553 * kGHz + 0.9 * kMHz, 54.5 * kkHz, kTwoPi * 8.1, 0.38},
    };
    p.pump.side = side;
    p.pump.power_in = 2e-4;  // C of roughly 0.25 on each line
    p.pump.detuning = 0.0;
    return p;
}

// Single mechanical mode with Delta_21 = Omega_m.
inline SystemParams single_mode_params(PumpSide side = PumpSide::Red) {
    SystemParams p = device_params(side);
    p.mechanics = {p.mechanics[1]};
    p.delta_21 = p.mechanics[0].omega_m;
    p.mode_blue.omega = p.mode_red.omega + p.delta_21;
    return p;
}

// Sets the pump power so that mechanical mode `m` sees coupling g.
inline void set_coupling(SystemParams& p, double g, std::size_t m = 0) {
    const auto& pm = p.pump_mode();
    const double n = (g / p.mechanics[m].g0) * (g / p.mechanics[m].g0);
    const double k = pm.kappa();
    p.pump.power_in = n * p.detection.hbar * pm.omega *
                      (0.25 * k * k + p.pump.detuning * p.pump.detuning) / pm.kappa_ext1;
}

inline void set_cooperativity(SystemParams& p, double c, std::size_t m = 0) {
    const double k = p.signal_mode().kappa();
    set_coupling(p, std::sqrt(c * k * p.mechanics[m].gamma_m / 4.0), m);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Warmup shaped like the measured one: the still (0.8 -> 4 K) rises fastest
// early on, the mount (20 mK -> 3 K) fastest near the end.
inline WarmupSeries measured_like_warmup(std::size_t n = 101) {
    WarmupSeries w;
    const double t_end = 100.0 * 60.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(n - 1);
        w.times.push_back(u * t_end);
        w.v_s.push_back(0.8 + 3.2 * (1.0 - std::exp(-u / 0.3)) / (1.0 - std::exp(-1.0 / 0.3)));
        w.v_m.push_back(0.02 + 2.98 * u * u * u);
    }
    return w;
}

// Red/blue ESA pair for one mechanical mode under deliberately different
// conditions (pump powers, LO powers, coupling rates, detuning), with the
// CorrectionSets that describe them exactly.
struct EsaPair {
    SystemParams red;
    SystemParams blue;
    SpectrumTrace trace_r;
    SpectrumTrace trace_b;
    CorrectionSet corr_r;
    CorrectionSet corr_b;
};

inline CorrectionSet exact_corrections(const SystemParams& p) {
    const auto& sig = p.signal_mode();
    const auto& mech = p.mechanics[0];
    const Backaction ba = backaction(coupling_rate(p, 0), sig.kappa(), p.delta_21, mech.omega_m, mech, p.pump.side);
    CorrectionSet c;
    c.pump_power = {p.pump.power_in, 0.0};
    c.p_lo = {p.detection.p_lo, 0.0};
    c.kappa_signal = {sig.kappa(), 0.0};
    c.delta_detune = {ba.omega_eff - p.delta_21, 0.0};
    c.gamma_eff = {ba.gamma_eff, 0.0};
    c.kappa_ratio_ext1 = {p.mode_red.kappa_ext1 / p.mode_blue.kappa_ext1, 0.0};
    c.kappa_ratio_ext2 = {p.mode_red.kappa_ext2 / p.mode_blue.kappa_ext2, 0.0};
    c.kappa_pump = {p.pump_mode().kappa(), 0.0};
    return c;
}

inline EsaPair thermometry_pair(double n_th, std::size_t n_points = 4001, double span_gamma = 60.0) {
    EsaPair e;
    for (PumpSide side : {PumpSide::Red, PumpSide::Blue}) {
        SystemParams p = single_mode_params(side);
        const double kr = 2.4 * kMHz;
        const double kb = 2.2 * kMHz;
        p.mode_red.kappa_ext1 = 0.35 * kr;
        p.mode_red.kappa_ext2 = 0.25 * kr;
        p.mode_red.kappa_int = 0.40 * kr;
        p.mode_blue.kappa_ext1 = 0.28 * kb;
        p.mode_blue.kappa_ext2 = 0.33 * kb;
        p.mode_blue.kappa_int = 0.39 * kb;
        p.delta_21 = p.mechanics[0].omega_m + 0.05 * kMHz;
        p.mechanics[0].n_th = n_th;
        set_cooperativity(p, side == PumpSide::Red ? 0.3 : 0.2);
        p.detection.p_lo = side == PumpSide::Red ? 1e-3 : 1.3e-3;
        (side == PumpSide::Red ? e.red : e.blue) = p;
    }
    for (PumpSide side : {PumpSide::Red, PumpSide::Blue}) {
        const SystemParams& p = side == PumpSide::Red ? e.red : e.blue;
        const CorrectionSet c = exact_corrections(p);
        const double center = c.delta_detune.value + p.delta_21 - p.detection.delta_lo;
        const double half = span_gamma * p.mechanics[0].gamma_m;
        std::vector<double> w(n_points);
        for (std::size_t i = 0; i < n_points; ++i)
            w[i] = center + half * (-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n_points - 1));
        SpectrumTrace t = esa_power_spectrum(p, w);
        t.meta.timestamp_start = side == PumpSide::Red ? "2024-03-01T10:00:00Z" : "2024-03-01T11:00:00Z";
        (side == PumpSide::Red ? e.trace_r : e.trace_b) = t;
        (side == PumpSide::Red ? e.corr_r : e.corr_b) = c;
    }
    return e;
}

// Peak height above the baseline, relative to the baseline.
inline double peak_over_baseline(const SpectrumTrace& t) {
    const double base = std::min(t.power.front(), t.power.back());
    return (*std::max_element(t.power.begin(), t.power.end()) - base) / base;
}

// Fraction of seeds whose report bounds contain the true occupation when
// Gaussian noise is added with the red peak at `snr` times the per-point
// noise sigma (same number of averages for both sides).
struct Coverage {
    int covered = 0;
    int total = 0;
    double median_n = 0.0;  // from the median asymmetry; n(a) wraps through infinity at a = 1
};

inline Coverage thermometry_coverage(double n_th, double snr, int seeds, std::uint64_t seed0 = 0) {
    const EsaPair e = thermometry_pair(n_th);
    const double base_r = esa_baseline(e.red);
    const double base_b = esa_baseline(e.blue);
    const double peak_r = peak_over_baseline(e.trace_r) * base_r;
    const int navg = static_cast<int>(std::ceil(std::pow(snr * base_r / peak_r, 2)));
    Coverage c;
    std::vector<double> ns;
    for (int s = 0; s < seeds; ++s) {
        SpectrumTrace tr = e.trace_r, tb = e.trace_b;
        tr.meta.n_averages = tb.meta.n_averages = navg;
        tr = synthesize_trace(tr, {base_r, {}, seed0 + 2 * static_cast<std::uint64_t>(s)});
        tb = synthesize_trace(tb, {base_b, {}, seed0 + 2 * static_cast<std::uint64_t>(s) + 1});
        const auto rep = thermometry_from_traces(tr, tb, e.corr_r, e.corr_b);
        if (rep.bound_lo <= n_th && n_th <= rep.bound_hi) ++c.covered;
        ns.push_back(rep.asymmetry.value);
        ++c.total;
    }
    std::nth_element(ns.begin(), ns.begin() + static_cast<long>(ns.size() / 2), ns.end());
    c.median_n = 1.0 / (ns[ns.size() / 2] - 1.0);
    return c;
}

}  // namespace fixtures
