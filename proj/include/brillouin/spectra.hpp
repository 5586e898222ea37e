#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brillouin/model.hpp"
#include "brillouin/uncertain.hpp"

namespace brillouin {

struct TraceMeta {
    double rbw_hz = 0.0;
    std::optional<PumpSide> pump_side;
    int n_averages = 1;
    std::string timestamp_start;  // ISO 8601, may be empty
    std::string timestamp_end;
    std::string kind;  // "omit", "omia", "esa", or free-form
    std::vector<std::string> warnings;
};

// Sampled spectrum. `freq` is ordinary Hz.
struct SpectrumTrace {
    std::vector<double> freq;
    std::vector<double> power;
    std::vector<double> sigma;
    TraceMeta meta;

    std::size_t size() const { return freq.size(); }
    // Throws ConfigError on length mismatch, non-increasing freq,
    // non-finite power or negative sigma.
    void validate() const;
};

struct NoiseModel {
    double baseline_level = 0.0;     // noise scale: sigma = baseline_level / sqrt(n_averages)
    std::vector<double> poly_coeffs;  // added baseline c0 + c1 x + c2 x^2, x in [-1, 1] over the trace
    std::uint64_t rng_seed = 0;
};

// Probe transmission |I_T|^2 around the signal mode. `probe_offsets` are
// probe-minus-pump angular frequencies. A red pump gives OMIT (dip), a blue
// pump OMIA (peak). Throws InstabilityError for OMIA when any C_m >= 1.
SpectrumTrace omit_omia_transmission(const SystemParams& params,
                                     const std::vector<double>& probe_offsets, double a0 = 1.0);

// Closed form of the transmission at a single offset, shared with the fitters.
struct TransmissionTerm {
    double omega_m;
    double gamma_m;
    double g;
};
double transmission_model(double omega, double a0, double kappa, double delta_21,
                          const std::vector<TransmissionTerm>& terms, PumpSide side);

// Heterodyne power spectrum seen by the analyzer. `omega_grid` is the
// angular analyzer frequency; the Stokes/anti-Stokes line sits at
// Omega_eff - Delta_LO. Adds a warning when RBW exceeds Gamma_eff / 5.
SpectrumTrace esa_power_spectrum(const SystemParams& params, const std::vector<double>& omega_grid);

// Flat shot-noise level beta hbar omega_signal P_LO of esa_power_spectrum.
double esa_baseline(const SystemParams& params);

SpectrumTrace synthesize_trace(const SpectrumTrace& clean, const NoiseModel& noise);

struct BaselineFit {
    std::vector<double> coeffs;  // in the normalized abscissa below
    double f_mid = 0.0;
    double half_span = 1.0;
    Eigen::MatrixXd covariance;  // residual variance times (A^T A)^-1

    double operator()(double f_hz) const;
    // Integral of the baseline over [f_lo, f_hi] Hz with its fit uncertainty.
    Uncertain integral(double f_lo, double f_hi) const;
};

// Order-2 least-squares baseline fitted outside the exclusion windows (Hz
// intervals) and subtracted from every point. Throws InsufficientDataError
// with fewer than 10 usable points.
std::pair<SpectrumTrace, BaselineFit> subtract_baseline(
    const SpectrumTrace& trace, const std::vector<std::pair<double, double>>& exclusion_windows,
    int order = 2);

// Normalized abscissa x = (f - f_mid) / half_span used by NoiseModel and BaselineFit.
std::pair<double, double> trace_abscissa_scale(const std::vector<double>& freq);

}  // namespace brillouin
