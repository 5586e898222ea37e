#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brillouin/fit.hpp"
#include "brillouin/model.hpp"
#include "brillouin/spectra.hpp"
#include "brillouin/uncertain.hpp"

namespace brillouin {

// Separately measured quantities that differ between the red and blue runs.
// Rates are angular. kappa_ratio_ext1/2 are kappa_red^extN / kappa_blue^extN
// from the Fano fits.
struct CorrectionSet {
    Uncertain pump_power;    // W
    Uncertain p_lo;          // W
    Uncertain kappa_signal;  // total linewidth of the signal mode
    Uncertain delta_detune;  // Omega_eff - Delta_21, signed
    Uncertain gamma_eff;
    Uncertain kappa_ratio_ext1;
    Uncertain kappa_ratio_ext2;
    Uncertain kappa_pump;  // total linewidth of the pump mode

    // All central values > 0 except delta_detune. Throws ConfigError.
    void validate() const;
};

enum class OccupancyMethod { Pair, WarmupRed, WarmupBlue };
std::string to_string(OccupancyMethod m);

struct OccupancyReport {
    Uncertain integral_r;
    Uncertain integral_b;
    Uncertain corrected_r;
    Uncertain corrected_b;
    Uncertain asymmetry;
    double n_th = 0.0;
    double bound_lo = 0.0;
    double bound_hi = 0.0;  // +inf when the asymmetry error bar reaches 1
    OccupancyMethod method = OccupancyMethod::Pair;
    bool physical = true;  // false when I_b <= I_r (or a negative warmup result)

    // Provenance.
    std::optional<CorrectionSet> corrections_r;
    std::optional<CorrectionSet> corrections_b;
    double half_width_r_hz = 0.0;
    double half_width_b_hz = 0.0;
    double window_fraction_r = 1.0;
    double window_fraction_b = 1.0;
    std::string timestamp_r;
    std::string timestamp_b;
    std::vector<std::string> warnings;
};

// Default half-width: 20 Gamma_eff clamped to kappa / 10 (any consistent unit).
double default_half_width(double gamma_eff, double kappa);

// Trapezoidal area of a baseline-subtracted trace over
// [center - half_width, center + half_width] (Hz), with linear interpolation
// at the window edges. sigma combines the per-point sigmas with their
// trapezoid weights. When gamma_eff_hz and kappa_hz are given, a warning is
// appended if the half-width is outside [5 Gamma_eff, kappa / 10].
Uncertain integrate_peak(const SpectrumTrace& trace, double center_hz, double half_width_hz,
                         double gamma_eff_hz = 0.0, double kappa_hz = 0.0,
                         std::vector<std::string>* warnings = nullptr);

// Prefactor P_p P_LO k_ext / (((kappa_s/2)^2 + detune^2) Gamma_eff kappa_p^2)
// with k_ext = kappa_ratio_ext1 for red and kappa_ratio_ext2 for blue (the
// common kappa_blue^ext1 kappa_blue^ext2 is dropped). Linear propagation.
Uncertain correction_prefactor(const CorrectionSet& corr, PumpSide side);

// area / correction_prefactor. Throws ConfigError on a zero divisor.
Uncertain corrected_integral(Uncertain area, const CorrectionSet& corr, PumpSide side);

// Fraction of the narrow-line area
//   (2 pi / Gamma_eff) / ((kappa_s/2)^2 + detune^2)
// that the product of the mechanical and optical Lorentzians places inside
// +/- half_width (angular) of the mechanical peak. Exact partial fractions.
double window_fraction(double half_width, const CorrectionSet& corr);

// n = 1 / (I_b / I_r - 1). Bounds map the asymmetry error-bar endpoints.
// Throws ConfigError if corr_r <= 0.
OccupancyReport occupancy_from_pair(Uncertain corr_r, Uncertain corr_b);

// Red/blue external-coupling ratios from four Fano fits (mode x port).
// Throws ConfigError if any fit did not converge.
std::pair<Uncertain, Uncertain> coupling_ratio_from_fano(const FitResult& red_port1,
                                                         const FitResult& blue_port1,
                                                         const FitResult& red_port2,
                                                         const FitResult& blue_port2);

// Single-sided occupation against a reference pair:
// red n = n_ref I / I_ref, blue n = (n_ref + 1) I / I_ref - 1.
// sigma of n_ref is taken as half the reference bound span.
OccupancyReport warmup_occupancy(const OccupancyReport& ref, Uncertain ref_corrected,
                                 Uncertain new_corrected, PumpSide side);

// Red trace with its peak (power - 1) scaled by prefactor_b / prefactor_r.
// Both traces must already be normalized to a baseline of 1.
SpectrumTrace normalize_for_display(const SpectrumTrace& trace_r, const SpectrumTrace& trace_b,
                                    const CorrectionSet& corr_r, const CorrectionSet& corr_b);

struct ThermometryOptions {
    std::optional<double> center_r_hz;  // located from the data when empty
    std::optional<double> center_b_hz;
    std::optional<double> half_width_hz;  // default_half_width per side when empty
    bool window_correction = true;
    int baseline_order = 2;
};

// Full chain on a raw red/blue ESA pair: quadratic baseline fit outside the
// peak, integration, window and prefactor corrections, occupancy.
OccupancyReport thermometry_from_traces(const SpectrumTrace& trace_r, const SpectrumTrace& trace_b,
                                        const CorrectionSet& corr_r, const CorrectionSet& corr_b,
                                        const ThermometryOptions& opt = {});

}  // namespace brillouin
