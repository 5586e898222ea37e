#include "brillouin/thermometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>

#include "brillouin/constants.hpp"
#include "brillouin/errors.hpp"

namespace brillouin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive(const Uncertain& u, const char* name) {
    if (!(u.value > 0.0) || !std::isfinite(u.value) || u.sigma < 0.0)
        throw ConfigError(std::string("CorrectionSet.") + name + " must be positive and finite");
}

// Index of the maximum of a running mean over 2h+1 points.
std::size_t smoothed_argmax(const std::vector<double>& y, std::size_t h) {
    std::size_t best = 0;
    double best_v = -kInf;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const std::size_t lo = i >= h ? i - h : 0;
        const std::size_t hi = std::min(y.size() - 1, i + h);
        double s = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) s += y[j];
        s /= static_cast<double>(hi - lo + 1);
        if (s > best_v) {
            best_v = s;
            best = i;
        }
    }
    return best;
}

}  // namespace

void CorrectionSet::validate() const {
    require_positive(pump_power, "pump_power");
    require_positive(p_lo, "p_lo");
    require_positive(kappa_signal, "kappa_signal");
    require_positive(gamma_eff, "gamma_eff");
    require_positive(kappa_ratio_ext1, "kappa_ratio_ext1");
    require_positive(kappa_ratio_ext2, "kappa_ratio_ext2");
    require_positive(kappa_pump, "kappa_pump");
    if (!std::isfinite(delta_detune.value) || delta_detune.sigma < 0.0)
        throw ConfigError("CorrectionSet.delta_detune must be finite");
}

std::string to_string(OccupancyMethod m) {
    switch (m) {
        case OccupancyMethod::Pair: return "pair";
        case OccupancyMethod::WarmupRed: return "warmup_red";
        case OccupancyMethod::WarmupBlue: return "warmup_blue";
    }
    return "pair";
}

double default_half_width(double gamma_eff, double kappa) { return std::min(20.0 * gamma_eff, kappa / 10.0); }

Uncertain integrate_peak(const SpectrumTrace& trace, double center_hz, double half_width_hz,
                         double gamma_eff_hz, double kappa_hz, std::vector<std::string>* warnings) {
    trace.validate();
    if (!(half_width_hz > 0.0)) throw ConfigError("integrate_peak: half_width must be positive");
    const double a = center_hz - half_width_hz;
    const double b = center_hz + half_width_hz;
    if (trace.size() < 2 || a < trace.freq.front() || b > trace.freq.back())
        throw InsufficientDataError("integrate_peak: window exceeds the trace span");
    if (warnings && gamma_eff_hz > 0.0 && half_width_hz < 5.0 * gamma_eff_hz)
        warnings->push_back("integration half-width below 5 Gamma_eff");
    if (warnings && kappa_hz > 0.0 && half_width_hz > kappa_hz / 10.0 * (1.0 + 1e-12))
        warnings->push_back("integration half-width above kappa / 10");

    std::vector<double> w(trace.size(), 0.0);
    for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
        const double f0 = trace.freq[i];
        const double f1 = trace.freq[i + 1];
        const double u = std::max(a, f0);
        const double v = std::min(b, f1);
        if (v <= u) continue;
        const double h = f1 - f0;
        const double tu = (u - f0) / h;
        const double tv = (v - f0) / h;
        w[i] += 0.5 * (v - u) * ((1.0 - tu) + (1.0 - tv));
        w[i + 1] += 0.5 * (v - u) * (tu + tv);
    }
    double area = 0.0, var = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        area += w[i] * trace.power[i];
        var += std::pow(w[i] * trace.sigma[i], 2);
    }
    return {area, std::sqrt(var)};
}

Uncertain correction_prefactor(const CorrectionSet& c, PumpSide side) {
    c.validate();
    const Uncertain& kext = side == PumpSide::Red ? c.kappa_ratio_ext1 : c.kappa_ratio_ext2;
    const double hk = 0.5 * c.kappa_signal.value;
    const double d = c.delta_detune.value;
    const double den = hk * hk + d * d;
    const double v = c.pump_power.value * c.p_lo.value * kext.value /
                     (den * c.gamma_eff.value * c.kappa_pump.value * c.kappa_pump.value);
    // Relative variance; the optical denominator couples kappa_signal and detune.
    const double rel2 = std::pow(c.pump_power.relative(), 2) + std::pow(c.p_lo.relative(), 2) +
                        std::pow(kext.relative(), 2) + std::pow(c.gamma_eff.relative(), 2) +
                        std::pow(2.0 * c.kappa_pump.relative(), 2) +
                        std::pow(hk / den * c.kappa_signal.sigma, 2) + std::pow(2.0 * d / den * c.delta_detune.sigma, 2);
    return {v, v * std::sqrt(rel2)};
}

Uncertain corrected_integral(Uncertain area, const CorrectionSet& corr, PumpSide side) {
    const Uncertain pref = correction_prefactor(corr, side);
    if (!(pref.value > 0.0) || !std::isfinite(pref.value)) throw ConfigError("corrected_integral: zero divisor");
    return area / pref;
}

double window_fraction(double half_width, const CorrectionSet& corr) {
    using cd = std::complex<double>;
    const double a = 0.5 * corr.gamma_eff.value;
    const double b = 0.5 * corr.kappa_signal.value;
    const double d = corr.delta_detune.value;
    const double norm = 2.0 * kPi / corr.gamma_eff.value / (b * b + d * d);
    double integral = 0.0;
    if (std::abs(a - b) < 1e-9 * b && std::abs(d) < 1e-9 * b) {
        // Double pole: integral of 1 / (x^2 + a^2)^2.
        const double x = half_width;
        integral = 2.0 * (x / (2 * a * a * (x * x + a * a)) + std::atan(x / a) / (2 * a * a * a));
    } else {
        // 1 / ((x^2 + a^2)((x + d)^2 + b^2)) = sum_k c_k / (x - z_k)
        const std::array<cd, 4> z{cd(0, a), cd(0, -a), cd(-d, b), cd(-d, -b)};
        cd sum = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            cd c = 1.0;
            for (std::size_t j = 0; j < 4; ++j)
                if (j != k) c /= (z[k] - z[j]);
            sum += c * (std::log(half_width - z[k]) - std::log(-half_width - z[k]));
        }
        integral = sum.real();
    }
    return integral / norm;
}

OccupancyReport occupancy_from_pair(Uncertain corr_r, Uncertain corr_b) {
    if (!(corr_r.value > 0.0)) throw ConfigError("occupancy_from_pair: red corrected integral must be positive");
    OccupancyReport r;
    r.corrected_r = corr_r;
    r.corrected_b = corr_b;
    r.asymmetry = corr_b / corr_r;
    const double a = r.asymmetry.value;
    const double s = r.asymmetry.sigma;
    r.n_th = 1.0 / (a - 1.0);
    r.physical = a > 1.0;
    r.bound_lo = a + s > 1.0 ? 1.0 / (a + s - 1.0) : kInf;
    r.bound_hi = a - s > 1.0 ? 1.0 / (a - s - 1.0) : kInf;
    if (!r.physical) {
        r.warnings.push_back("asymmetry <= 1: unphysical occupation");
        r.bound_lo = std::min(r.bound_lo, r.n_th);
    }
    return r;
}

std::pair<Uncertain, Uncertain> coupling_ratio_from_fano(const FitResult& red_port1, const FitResult& blue_port1,
                                                         const FitResult& red_port2, const FitResult& blue_port2) {
    for (const FitResult* f : {&red_port1, &blue_port1, &red_port2, &blue_port2})
        if (!f->converged) throw ConfigError("coupling_ratio_from_fano: all four fits must be converged");
    const char* k = "s_prime_kappa_ext";
    return {red_port1.get(k) / blue_port1.get(k), red_port2.get(k) / blue_port2.get(k)};
}

OccupancyReport warmup_occupancy(const OccupancyReport& ref, Uncertain ref_corrected, Uncertain new_corrected,
                                 PumpSide side) {
    if (!(ref_corrected.value > 0.0)) throw ConfigError("warmup_occupancy: reference integral must be positive");
    OccupancyReport r;
    r.method = side == PumpSide::Red ? OccupancyMethod::WarmupRed : OccupancyMethod::WarmupBlue;
    const double span = ref.bound_hi - ref.bound_lo;
    const Uncertain n_ref{ref.n_th, std::isfinite(span) ? 0.5 * span : 0.0};
    if (!std::isfinite(span)) r.warnings.push_back("reference bounds unbounded; reference sigma ignored");
    const Uncertain ratio = new_corrected / ref_corrected;
    Uncertain n;
    if (side == PumpSide::Red) {
        n = n_ref * ratio;
        r.corrected_r = new_corrected;
    } else {
        n = (n_ref + Uncertain{1.0, 0.0}) * ratio - Uncertain{1.0, 0.0};
        r.corrected_b = new_corrected;
    }
    r.n_th = n.value;
    r.bound_lo = n.value - n.sigma;
    r.bound_hi = n.value + n.sigma;
    r.physical = n.value >= 0.0;
    if (!r.physical) r.warnings.push_back("negative warmup occupation");
    r.timestamp_r = ref.timestamp_r;
    r.timestamp_b = ref.timestamp_b;
    return r;
}

SpectrumTrace normalize_for_display(const SpectrumTrace& trace_r, const SpectrumTrace& trace_b,
                                    const CorrectionSet& corr_r, const CorrectionSet& corr_b) {
    trace_r.validate();
    trace_b.validate();
    const double k = correction_prefactor(corr_b, PumpSide::Blue).value /
                     correction_prefactor(corr_r, PumpSide::Red).value;
    SpectrumTrace out = trace_r;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.power[i] = 1.0 + (trace_r.power[i] - 1.0) * k;
        out.sigma[i] = trace_r.sigma[i] * k;
    }
    return out;
}

OccupancyReport thermometry_from_traces(const SpectrumTrace& trace_r, const SpectrumTrace& trace_b,
                                        const CorrectionSet& corr_r, const CorrectionSet& corr_b,
                                        const ThermometryOptions& opt) {
    corr_r.validate();
    corr_b.validate();
    std::vector<std::string> warnings;

    struct Side {
        Uncertain raw;
        Uncertain corrected;
        double half_width;
        double fraction;
    };
    auto process = [&](const SpectrumTrace& t, const CorrectionSet& c, PumpSide side,
                       const std::optional<double>& center_opt) {
        t.validate();
        const double gamma_hz = angular_to_hz(c.gamma_eff.value);
        const double kappa_hz = angular_to_hz(c.kappa_signal.value);
        const double delta = opt.half_width_hz.value_or(default_half_width(gamma_hz, kappa_hz));
        double center = 0.0;
        if (center_opt) {
            center = *center_opt;
        } else {
            const double df = (t.freq.back() - t.freq.front()) / static_cast<double>(t.size() - 1);
            const auto h = static_cast<std::size_t>(std::max(0.0, std::floor(0.25 * gamma_hz / df)));
            center = t.freq[smoothed_argmax(t.power, h)];
        }
        double excl = std::max(2.0 * delta, 10.0 * gamma_hz);
        const double room = std::min(center - t.freq.front(), t.freq.back() - center);
        if (excl > 0.8 * room) excl = std::max(1.05 * delta, 0.8 * room);
        auto [sub, base] = subtract_baseline(t, {{center - excl, center + excl}}, opt.baseline_order);
        Side s;
        s.half_width = delta;
        s.raw = integrate_peak(sub, center, delta, gamma_hz, kappa_hz, &warnings);
        // The subtracted baseline is common to every point in the window.
        s.raw.sigma = std::hypot(s.raw.sigma, base.integral(center - delta, center + delta).sigma);
        s.fraction = opt.window_correction ? window_fraction(hz_to_angular(delta), c) : 1.0;
        s.corrected = corrected_integral(s.raw * (1.0 / s.fraction), c, side);
        return s;
    };

    const Side r = process(trace_r, corr_r, PumpSide::Red, opt.center_r_hz);
    const Side b = process(trace_b, corr_b, PumpSide::Blue, opt.center_b_hz);
    if (!(r.corrected.value > 0.0))
        throw NoFeatureError("thermometry: red peak area is not positive");
    OccupancyReport rep = occupancy_from_pair(r.corrected, b.corrected);
    rep.integral_r = r.raw;
    rep.integral_b = b.raw;
    rep.corrections_r = corr_r;
    rep.corrections_b = corr_b;
    rep.half_width_r_hz = r.half_width;
    rep.half_width_b_hz = b.half_width;
    rep.window_fraction_r = r.fraction;
    rep.window_fraction_b = b.fraction;
    rep.timestamp_r = trace_r.meta.timestamp_start;
    rep.timestamp_b = trace_b.meta.timestamp_start;
    rep.warnings.insert(rep.warnings.end(), warnings.begin(), warnings.end());
    return rep;
}

}  // namespace brillouin
