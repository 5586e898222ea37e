#include "brillouin/noise.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>
#include <unsupported/Eigen/FFT>

#include "brillouin/constants.hpp"
#include "brillouin/errors.hpp"
#include "brillouin/io.hpp"

namespace brillouin {

namespace {

// First zero of J0.
constexpr double kJ0Zero = 2.404825557695773;

double median(std::vector<double> v) {
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
    if (v.size() % 2 == 1) return v[m];
    const double hi = v[m];
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
    return 0.5 * (lo + hi);
}

// Width of sample i for sum-based integration on a possibly non-uniform grid.
double cell_width(const std::vector<double>& f, std::size_t i) {
    const std::size_t n = f.size();
    if (n < 2) return 0.0;
    if (i == 0) return f[1] - f[0];
    if (i == n - 1) return f[n - 1] - f[n - 2];
    return 0.5 * (f[i + 1] - f[i - 1]);
}

void check_same_grid(const PsdTrace& a, const PsdTrace& b, const char* name) {
    if (a.size() != b.size()) throw ConfigError(std::string("laser_frequency_noise: ") + name + " grid size differs");
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a.freq[i]), std::abs(b.freq[i]), 1.0});
        if (std::abs(a.freq[i] - b.freq[i]) > 1e-9 * scale)
            throw ConfigError(std::string("laser_frequency_noise: ") + name + " grid differs at row " +
                              std::to_string(i));
    }
}

}  // namespace

void PsdTrace::validate() const {
    if (freq.size() != psd.size()) throw ConfigError("PsdTrace: freq and psd sizes differ");
    if (freq.size() < 2) throw InsufficientDataError("PsdTrace: fewer than two points");
    for (std::size_t i = 0; i < freq.size(); ++i) {
        if (!std::isfinite(freq[i]) || !std::isfinite(psd[i])) throw ConfigError("PsdTrace: non-finite value");
        if (i > 0 && !(freq[i] > freq[i - 1])) throw ConfigError("PsdTrace: frequencies must increase");
    }
}

BandStats band_stats(const std::vector<double>& freq, const std::vector<double>& values, double center, double span) {
    if (freq.size() != values.size()) throw ConfigError("band_stats: size mismatch");
    if (!(span > 0.0)) throw ConfigError("band_stats: span must be > 0");
    BandStats s;
    s.center = center;
    s.span = span;
    double sum = 0.0;
    std::vector<double> in;
    for (std::size_t i = 0; i < freq.size(); ++i) {
        if (std::abs(freq[i] - center) <= 0.5 * span) {
            in.push_back(values[i]);
            sum += values[i];
        }
    }
    if (in.size() < 2) throw InsufficientDataError("band_stats: fewer than two samples in the band");
    s.n_points = in.size();
    s.avg = sum / static_cast<double>(in.size());
    double ss = 0.0;
    for (double v : in) ss += (v - s.avg) * (v - s.avg);
    s.std = std::sqrt(ss / static_cast<double>(in.size() - 1));
    s.avg_plus_std = s.avg + s.std;
    return s;
}

double bessel_j_series(int n, double x) {
    if (n < 0) throw ConfigError("bessel_j_series: order must be >= 0");
    const double h = 0.5 * x;
    double term = 1.0;
    for (int k = 1; k <= n; ++k) term *= h / k;
    double sum = term;
    for (int k = 1; k < 200; ++k) {
        term *= -h * h / (static_cast<double>(k) * static_cast<double>(k + n));
        sum += term;
        if (std::abs(term) < 1e-17 * std::max(std::abs(sum), 1e-300) || term == 0.0) break;
    }
    return sum;
}

double eom_beta_from_sideband_ratio(double p1_over_p0) {
    if (!std::isfinite(p1_over_p0) || p1_over_p0 < 0.0)
        throw ConfigError("eom_beta_from_sideband_ratio: ratio must be finite and >= 0");
    if (p1_over_p0 == 0.0) return 0.0;
    // J1 / J0 rises monotonically on [0, j0,1) and J0 > 0 there, so the sign
    // of J1 - s J0 locates the root.
    const double s = std::sqrt(p1_over_p0);
    double lo = 0.0;
    double hi = kJ0Zero;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (bessel_j_series(1, mid) - s * bessel_j_series(0, mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

ToneCalibration calibrate_conversion(const PsdTrace& trace, double tone_freq, double beta, const ToneOptions& opt) {
    trace.validate();
    if (!(tone_freq > 0.0)) throw ConfigError("calibrate_conversion: tone frequency must be > 0");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("calibrate_conversion: beta must be > 0");
    std::vector<double> steps(trace.size() - 1);
    for (std::size_t i = 0; i + 1 < trace.size(); ++i) steps[i] = trace.freq[i + 1] - trace.freq[i];
    const double df = median(steps);
    const double search = opt.search_half_width > 0.0 ? opt.search_half_width : 20.0 * df;
    const double integ = opt.integrate_half_width > 0.0 ? opt.integrate_half_width : 5.0 * df;

    std::size_t peak = trace.size();
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (std::abs(trace.freq[i] - tone_freq) > search) continue;
        if (peak == trace.size() || trace.psd[i] > trace.psd[peak]) peak = i;
    }
    if (peak == trace.size()) throw NoFeatureError("calibrate_conversion: no samples near the tone frequency");
    const double fpk = trace.freq[peak];

    const double flank_inner = 2.0 * integ;
    const double flank_outer = flank_inner + std::max(20.0 * df, 2.0 * integ);
    std::vector<double> flank;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double d = std::abs(trace.freq[i] - fpk);
        if (d > flank_inner && d <= flank_outer) flank.push_back(trace.psd[i]);
    }
    if (flank.size() < 4) throw InsufficientDataError("calibrate_conversion: too few samples around the tone");
    const double bg = median(flank);
    for (double& v : flank) v = std::abs(v - bg);
    const double sigma = 1.4826 * median(flank);
    const double excess = trace.psd[peak] - bg;
    if (!(excess > 0.0) || excess < opt.min_snr * sigma)
        throw NoFeatureError("calibrate_conversion: calibration tone not resolved above the noise");

    double power = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i)
        if (std::abs(trace.freq[i] - fpk) <= integ) power += (trace.psd[i] - bg) * cell_width(trace.freq, i);
    if (!(power > 0.0)) throw NoFeatureError("calibrate_conversion: integrated tone power is not positive");

    const double omega = hz_to_angular(tone_freq);
    ToneCalibration c;
    c.tone_freq = fpk;
    c.tone_power = power;
    c.background = bg;
    c.expected_tone = kPi * omega * omega * beta * beta / 2.0;
    c.conversion = c.expected_tone / power;
    return c;
}

FrequencyNoisePSD laser_frequency_noise(const PsdTrace& total, const PsdTrace& shot, const PsdTrace& dark,
                                        double conversion, const LaserNoiseOptions& opt) {
    total.validate();
    check_same_grid(total, shot, "shot");
    if (!opt.dark_in_shot) check_same_grid(total, dark, "dark");
    if (!(conversion > 0.0) || !std::isfinite(conversion))
        throw ConfigError("laser_frequency_noise: conversion factor must be > 0");
    FrequencyNoisePSD out;
    out.freq = total.freq;
    out.s_ww.resize(total.size());
    for (std::size_t i = 0; i < total.size(); ++i) {
        double excess = total.psd[i] - shot.psd[i];
        if (!opt.dark_in_shot) excess -= dark.psd[i];
        if (excess < 0.0) {
            excess = 0.0;
            ++out.n_floored;
        }
        out.s_ww[i] = conversion * excess;
    }
    if (out.n_floored > 0) {
        std::ostringstream w;
        w << out.n_floored << " of " << total.size() << " points floored at zero excess noise";
        out.warnings.push_back(w.str());
    }
    if (opt.band_center) out.band = band_stats(out.freq, out.s_ww, *opt.band_center, opt.band_span);
    return out;
}

PhaseNoiseResult phase_noise_phonons(const PhaseNoiseInputs& in) {
    if (!(in.s_ww >= 0.0) || !std::isfinite(in.s_ww)) throw ConfigError("phase_noise_phonons: S_ww must be >= 0");
    if (!(in.omega_m > 0.0)) throw ConfigError("phase_noise_phonons: omega_m must be > 0");
    if (!(in.photon_flux >= 0.0) || !std::isfinite(in.photon_flux))
        throw ConfigError("phase_noise_phonons: photon flux must be >= 0");
    if (!(in.kappa_ext2_over_kappa >= 0.0 && in.kappa_ext2_over_kappa <= 1.0))
        throw ConfigError("phase_noise_phonons: kappa_ext2 / kappa must lie in [0, 1]");
    if (!(in.cooperativity >= 0.0)) throw ConfigError("phase_noise_phonons: C must be >= 0");

    PhaseNoiseResult r;
    double gamma_m = in.gamma_m;
    double gamma_eff = in.gamma_eff;
    double factor = 0.0;
    if (gamma_m == 0.0 && gamma_eff == 0.0) {
        factor = in.cooperativity / (1.0 + in.cooperativity);
        gamma_eff = 1.0 + in.cooperativity;  // in units of gamma_m, for the checks below
        gamma_m = 1.0;
    } else {
        if (!(gamma_m > 0.0) || !(gamma_eff > 0.0))
            throw ConfigError("phase_noise_phonons: gamma_m and gamma_eff must both be > 0");
        factor = (gamma_eff - gamma_m) / gamma_eff;
        const double c_implied = gamma_eff / gamma_m - 1.0;
        if (std::abs(c_implied - in.cooperativity) > 0.01 * (1.0 + in.cooperativity)) {
            std::ostringstream w;
            w << "gamma_eff / gamma_m - 1 = " << c_implied << " differs from C = " << in.cooperativity;
            r.warnings.push_back(w.str());
        }
    }
    r.n_photon = in.s_ww * in.photon_flux / (in.omega_m * in.omega_m);
    r.n_phonon = factor * in.kappa_ext2_over_kappa * r.n_photon;

    if (in.kappa > 0.0) {
        if (in.omega_m < 10.0 * in.kappa) r.warnings.push_back("resolved-sideband assumption weak: omega_m < 10 kappa");
        if (in.gamma_eff > 0.0 && in.kappa < 10.0 * in.gamma_eff)
            r.warnings.push_back("weak-coupling assumption weak: kappa < 10 gamma_eff");
    }
    if (in.delta_21 > 0.0) {
        const double tol = in.kappa > 0.0 ? 0.1 * in.kappa : 1e-3 * in.omega_m;
        if (std::abs(in.delta_21 - in.omega_m) > tol)
            r.warnings.push_back("formula assumes delta_21 = omega_m; the given mode splitting differs");
    }
    if (in.kappa_1 > 0.0 && in.kappa_2 > 0.0 &&
        std::abs(in.kappa_1 - in.kappa_2) > 0.1 * std::max(in.kappa_1, in.kappa_2))
        r.warnings.push_back("formula assumes kappa_1 = kappa_2; the given linewidths differ by more than 10%");
    return r;
}

namespace {

void check_occupancy_inputs(double n_phi, double ratio, double c, const char* who) {
    if (!(n_phi >= 0.0) || !std::isfinite(n_phi)) throw ConfigError(std::string(who) + ": n_phi must be >= 0");
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError(std::string(who) + ": kappa_ext / kappa must lie in [0, 1]");
    if (!(c >= 0.0 && c < 1.0)) throw ConfigError(std::string(who) + ": C must lie in [0, 1)");
}

}  // namespace

double inferred_occupancy(double n_th, double n_phi, double ratio, double c) {
    check_occupancy_inputs(n_phi, ratio, c, "inferred_occupancy");
    const double a = 2.0 * ratio;
    const double p = a * (1.0 - c / 2.0) * n_phi;
    const double q = a * (1.0 + c / 2.0) * n_phi;
    const double den = n_th - q;
    if (!(den > 0.0)) throw ConfigError("inferred_occupancy: denominator n - a (1 + C/2) n_phi is not positive");
    // (n + 1 + p) / (n - q) - 1 = (1 + p + q) / (n - q)
    return den / (1.0 + p + q);
}

double true_occupancy_from_inferred(double n_inf, double n_phi, double ratio, double c) {
    check_occupancy_inputs(n_phi, ratio, c, "true_occupancy_from_inferred");
    if (!(n_inf > 0.0) || !std::isfinite(n_inf))
        throw ConfigError("true_occupancy_from_inferred: inferred occupancy must be > 0");
    const double a = 2.0 * ratio;
    const double p = a * (1.0 - c / 2.0) * n_phi;
    const double q = a * (1.0 + c / 2.0) * n_phi;
    return n_inf * (1.0 + p + q) + q;
}

double DipRecord::effective_rate() const {
    if (sweep_rate > 0.0) return sweep_rate;
    if (cavity_linewidth > 0.0 && dip_fwhm > 0.0) return cavity_linewidth / dip_fwhm;
    throw ConfigError("DipRecord: need sweep_rate or cavity_linewidth with dip_fwhm");
}

void DipRecord::validate() const {
    if (!std::isfinite(sweep_rate) || sweep_rate < 0.0) throw ConfigError("DipRecord: sweep_rate must be >= 0");
    effective_rate();
    for (std::size_t i = 0; i < dip_times.size(); ++i) {
        if (!std::isfinite(dip_times[i])) throw ConfigError("DipRecord: non-finite dip time");
        if (i > 0 && !(dip_times[i] > dip_times[i - 1])) throw ConfigError("DipRecord: dip times must increase");
    }
}

FrequencyNoisePSD sweep_dip_noise_spectrum(const DipRecord& rec) {
    rec.validate();
    const std::vector<double>& t = rec.dip_times;
    if (t.size() < 18) throw InsufficientDataError("sweep_dip_noise_spectrum: need at least 18 dips");

    // Consecutive gaps alternate between the up- and down-sweep values; a
    // missing dip breaks the repetition of every second gap.
    std::vector<double> gaps(t.size() - 1);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) gaps[i] = t[i + 1] - t[i];
    std::vector<double> periods;
    for (std::size_t i = 0; i + 2 < t.size(); i += 2) periods.push_back(t[i + 2] - t[i]);
    const double t_med = median(periods);
    for (std::size_t k = 2; k < gaps.size(); ++k) {
        if (std::abs(gaps[k] - gaps[k - 2]) > 0.25 * t_med) {
            std::ostringstream m;
            m << "sweep_dip_noise_spectrum: dip missing or spurious near t = " << t[k] << " s";
            throw InsufficientDataError(m.str());
        }
    }

    // Even dips sit at t0 + j T + df_j / rate. Removing the least-squares
    // line leaves the cavity frequency up to an offset and a linear drift.
    std::vector<double> even;
    for (std::size_t i = 0; i < t.size(); i += 2) even.push_back(t[i]);
    const std::size_t n = even.size();
    const double jm = 0.5 * static_cast<double>(n - 1);
    const double tm = std::accumulate(even.begin(), even.end(), 0.0) / static_cast<double>(n);
    double sjt = 0.0;
    double sjj = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double dj = static_cast<double>(j) - jm;
        sjt += dj * (even[j] - tm);
        sjj += dj * dj;
    }
    const double period = sjt / sjj;
    const double rate = rec.effective_rate();
    const double fs = 1.0 / period;
    std::vector<double> y(n);
    for (std::size_t j = 0; j < n; ++j) y[j] = rate * (even[j] - tm - period * (static_cast<double>(j) - jm));

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> x;
    fft.fwd(x, y);

    FrequencyNoisePSD out;
    const double norm = fs * static_cast<double>(n);
    double integral = 0.0;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        const bool nyquist = (n % 2 == 0) && (k == n / 2);
        const double p = (nyquist ? 1.0 : 2.0) * std::norm(x[k]) / norm;
        out.freq.push_back(static_cast<double>(k) * fs / static_cast<double>(n));
        out.s_ww.push_back(p);
        integral += p * fs / static_cast<double>(n);
    }
    out.integrated_rms = std::sqrt(integral);
    return out;
}

double spectral_line_amplitude(const FrequencyNoisePSD& psd, double freq, double half_width) {
    if (psd.freq.size() != psd.s_ww.size() || psd.freq.size() < 2)
        throw ConfigError("spectral_line_amplitude: malformed spectrum");
    double power = 0.0;
    for (std::size_t i = 0; i < psd.freq.size(); ++i)
        if (std::abs(psd.freq[i] - freq) <= half_width) power += psd.s_ww[i] * cell_width(psd.freq, i);
    return std::sqrt(2.0 * power);
}

PsdTrace read_psd(const std::filesystem::path& csv) {
    const CsvTable t = read_csv(csv);
    PsdTrace p{t.column("freq_hz"), t.column("psd")};
    p.validate();
    return p;
}

void write_psd(const std::filesystem::path& csv, const std::vector<double>& freq, const std::vector<double>& psd) {
    if (freq.size() != psd.size()) throw ConfigError("write_psd: size mismatch");
    write_csv(csv, {"freq_hz", "psd"}, {freq, psd});
}

std::vector<double> read_dip_times(const std::filesystem::path& csv) { return read_csv(csv).column("dip_time_s"); }

void write_dip_times(const std::filesystem::path& csv, const std::vector<double>& dip_times) {
    write_csv(csv, {"dip_time_s"}, {dip_times});
}

}  // namespace brillouin
