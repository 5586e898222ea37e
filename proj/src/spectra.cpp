#include "brillouin/spectra.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>

#include "brillouin/errors.hpp"

namespace brillouin {

void SpectrumTrace::validate() const {
    if (freq.size() != power.size() || freq.size() != sigma.size()) {
        throw ConfigError("trace arrays differ in length");
    }
    for (std::size_t i = 0; i < freq.size(); ++i) {
        if (!std::isfinite(freq[i]) || !std::isfinite(power[i])) {
            throw ConfigError("trace contains non-finite values at row " + std::to_string(i));
        }
        if (!(sigma[i] >= 0.0)) throw ConfigError("trace sigma must be >= 0");
        if (i > 0 && !(freq[i] > freq[i - 1])) {
            throw ConfigError("trace frequencies must be strictly increasing");
        }
    }
}

double transmission_model(double omega, double a0, double kappa, double delta_21,
                          const std::vector<TransmissionTerm>& terms, PumpSide side) {
    using cd = std::complex<double>;
    const cd I(0.0, 1.0);
    cd sum = 0.0;
    for (const auto& t : terms) sum += t.g * t.g / (0.5 * t.gamma_m - I * (omega - t.omega_m));
    const double s = side == PumpSide::Red ? 1.0 : -1.0;
    const cd amp = a0 * 0.5 * kappa / (0.5 * kappa - I * (omega - delta_21) + s * sum);
    return std::norm(amp);
}

SpectrumTrace omit_omia_transmission(const SystemParams& params,
                                     const std::vector<double>& probe_offsets, double a0) {
    const double kappa = params.signal_mode().kappa();
    std::vector<TransmissionTerm> terms;
    for (std::size_t m = 0; m < params.mechanics.size(); ++m) {
        const auto& mech = params.mechanics[m];
        const double g = coupling_rate(params, m);
        if (params.pump.side == PumpSide::Blue && cooperativity(g, kappa, mech.gamma_m) >= 1.0) {
            throw InstabilityError("OMIA above threshold: cooperativity >= 1 for mode " +
                                       std::to_string(m),
                                   mech.gamma_m * (1.0 - cooperativity(g, kappa, mech.gamma_m)));
        }
        terms.push_back({mech.omega_m, mech.gamma_m, g});
    }
    SpectrumTrace tr;
    tr.meta.pump_side = params.pump.side;
    tr.meta.kind = params.pump.side == PumpSide::Red ? "omit" : "omia";
    tr.freq.reserve(probe_offsets.size());
    for (double w : probe_offsets) {
        tr.freq.push_back(angular_to_hz(w));
        tr.power.push_back(transmission_model(w, a0, kappa, params.delta_21, terms, params.pump.side));
        tr.sigma.push_back(0.0);
    }
    return tr;
}

double esa_baseline(const SystemParams& params) {
    const auto& d = params.detection;
    return d.beta() * d.hbar * params.signal_mode().omega * d.p_lo;
}

SpectrumTrace esa_power_spectrum(const SystemParams& params, const std::vector<double>& omega_grid) {
    const auto& sig = params.signal_mode();
    const double kappa = sig.kappa();
    const double base = esa_baseline(params);
    const double dlo = params.detection.delta_lo;
    const bool blue = params.pump.side == PumpSide::Blue;

    struct Line {
        double amp;  // g^2 kappa_ext2 Gamma_m N
        double omega_eff;
        double gamma_eff;
    };
    std::vector<Line> lines;
    SpectrumTrace tr;
    for (std::size_t m = 0; m < params.mechanics.size(); ++m) {
        const auto& mech = params.mechanics[m];
        const double g = coupling_rate(params, m);
        const Backaction ba = backaction(g, kappa, params.delta_21, mech.omega_m, mech, params.pump.side);
        const double n = blue ? mech.n_th + 1.0 : mech.n_th;
        lines.push_back({g * g * sig.kappa_ext2 * mech.gamma_m * n, ba.omega_eff, ba.gamma_eff});
        if (params.detection.rbw > angular_to_hz(ba.gamma_eff) / 5.0) {
            std::ostringstream os;
            os << "RBW " << params.detection.rbw << " Hz exceeds Gamma_eff/5 for mechanical mode " << m;
            tr.meta.warnings.push_back(os.str());
        }
    }
    tr.meta.rbw_hz = params.detection.rbw;
    tr.meta.pump_side = params.pump.side;
    tr.meta.kind = "esa";
    tr.freq.reserve(omega_grid.size());
    for (double w : omega_grid) {
        const double xo = w - (params.delta_21 - dlo);
        const double opt = 1.0 / (0.25 * kappa * kappa + xo * xo);
        double bracket = 1.0;
        for (const auto& l : lines) {
            const double xm = w - (l.omega_eff - dlo);
            bracket += l.amp * opt / (0.25 * l.gamma_eff * l.gamma_eff + xm * xm);
        }
        tr.freq.push_back(angular_to_hz(w));
        tr.power.push_back(base * bracket);
        tr.sigma.push_back(0.0);
    }
    return tr;
}

std::pair<double, double> trace_abscissa_scale(const std::vector<double>& freq) {
    if (freq.empty()) return {0.0, 1.0};
    const double mid = 0.5 * (freq.front() + freq.back());
    double half = 0.5 * (freq.back() - freq.front());
    if (!(half > 0.0)) half = 1.0;
    return {mid, half};
}

namespace {

double poly_eval(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
}

}  // namespace

SpectrumTrace synthesize_trace(const SpectrumTrace& clean, const NoiseModel& noise) {
    clean.validate();
    if (noise.baseline_level < 0.0) throw ConfigError("baseline_level must be >= 0");
    SpectrumTrace out = clean;
    const auto [mid, half] = trace_abscissa_scale(clean.freq);
    const int navg = std::max(1, clean.meta.n_averages);
    const double sd = noise.baseline_level / std::sqrt(static_cast<double>(navg));
    std::mt19937_64 rng(noise.rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!noise.poly_coeffs.empty()) out.power[i] += poly_eval(noise.poly_coeffs, (out.freq[i] - mid) / half);
        if (sd > 0.0) {
            out.power[i] += sd * gauss(rng);
            out.sigma[i] = std::hypot(out.sigma[i], sd);
        }
    }
    return out;
}

double BaselineFit::operator()(double f_hz) const {
    return poly_eval(coeffs, (f_hz - f_mid) / half_span);
}

Uncertain BaselineFit::integral(double f_lo, double f_hi) const {
    const double xa = (f_lo - f_mid) / half_span;
    const double xb = (f_hi - f_mid) / half_span;
    Eigen::VectorXd v(static_cast<Eigen::Index>(coeffs.size()));
    double value = 0.0;
    for (std::size_t c = 0; c < coeffs.size(); ++c) {
        const double k = static_cast<double>(c) + 1.0;
        v(static_cast<Eigen::Index>(c)) = half_span * (std::pow(xb, k) - std::pow(xa, k)) / k;
        value += coeffs[c] * v(static_cast<Eigen::Index>(c));
    }
    const double var = covariance.size() == v.size() * v.size() ? v.dot(covariance * v) : 0.0;
    return {value, std::sqrt(std::max(var, 0.0))};
}

std::pair<SpectrumTrace, BaselineFit> subtract_baseline(
    const SpectrumTrace& trace, const std::vector<std::pair<double, double>>& exclusion_windows,
    int order) {
    trace.validate();
    if (order < 0 || order > 2) throw ConfigError("baseline order must be 0, 1 or 2");
    const auto [mid, half] = trace_abscissa_scale(trace.freq);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        bool excluded = false;
        for (const auto& [lo, hi] : exclusion_windows) {
            if (trace.freq[i] >= std::min(lo, hi) && trace.freq[i] <= std::max(lo, hi)) {
                excluded = true;
                break;
            }
        }
        if (!excluded) keep.push_back(i);
    }
    if (keep.size() < 10) {
        throw InsufficientDataError("baseline fit needs >= 10 points outside the exclusion windows, have " +
                                    std::to_string(keep.size()));
    }
    const int ncoef = order + 1;
    Eigen::MatrixXd A(keep.size(), ncoef);
    Eigen::VectorXd y(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const double x = (trace.freq[keep[r]] - mid) / half;
        double p = 1.0;
        for (int c = 0; c < ncoef; ++c, p *= x) A(r, c) = p;
        y(r) = trace.power[keep[r]];
    }
    const Eigen::VectorXd coef = A.colPivHouseholderQr().solve(y);
    BaselineFit fit;
    fit.f_mid = mid;
    fit.half_span = half;
    fit.coeffs.assign(coef.data(), coef.data() + ncoef);
    const auto dof = static_cast<double>(keep.size()) - ncoef;
    const double s2 = dof > 0 ? (A * coef - y).squaredNorm() / dof : 0.0;
    fit.covariance = s2 * (A.transpose() * A).inverse();
    SpectrumTrace out = trace;
    for (std::size_t i = 0; i < out.size(); ++i) out.power[i] -= fit(out.freq[i]);
    return {out, fit};
}

}  // namespace brillouin
