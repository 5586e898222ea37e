#pragma once

#include <complex>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "brillouin/fit.hpp"

namespace brillouin {

// Screw rotation in degrees; 10 degrees turns the lens by 32 urad.
inline constexpr double kScrewRadPerDegree = 32e-6 / 10.0;
constexpr double screw_to_rad(double deg) { return deg * kScrewRadPerDegree; }

// Lens (in, tr) and back-mirror (bm) tilts in screw degrees.
struct TiltState {
    double theta_in = 0.0;
    double phi_in = 0.0;
    double theta_bm = 0.0;
    double phi_bm = 0.0;
    double theta_tr = 0.0;
    double phi_tr = 0.0;

    TiltState operator-(const TiltState& o) const;
    bool finite() const;
};

// B, C and E are only needed when the input lens or back mirror is off its
// optimum; no defaults are shipped for them.
struct AlignmentModel {
    double a = 1.0;
    std::optional<double> b;
    std::optional<double> c;
    double d = 1.0;
    std::optional<double> e;
    double theta0 = 50.0;  // screw degrees
    TiltState optima;
    double r_max = 1.0;
    double t_max = 1.0;

    void validate() const;
};

// Coupler between free-space optics and one cavity port, with s22 = 0.
struct PortScattering {
    std::complex<double> s11{0.0, 0.0};
    std::complex<double> s12{1.0, 0.0};
    std::complex<double> s21{1.0, 0.0};
};

struct CouplingRates {
    double kappa = 0.0;       // total loss rate, rad/s
    double kappa_ext1 = 0.0;  // rad/s
    double kappa_ext2 = 0.0;  // rad/s
};

struct ReflectionTransmission {
    double r = 0.0;
    double t = 0.0;
};

// Light enters port 1 only:
//   R = |s12,1 s21,1 (kappa/2 - i delta - kappa_ext1) / (kappa/2 - i delta) + s11,1|^2
//   T = |s12,2 s21,1|^2 kappa_ext1 kappa_ext2 / ((kappa/2)^2 + delta^2)
ReflectionTransmission cavity_reflection_transmission(double delta, const CouplingRates& k, const PortScattering& port1,
                                                      const PortScattering& port2);

// The same reflection written in the fano_reflection form, centred at omega0.
FanoParams fano_params_from_scattering(const CouplingRates& k, const PortScattering& port1, double omega0 = 0.0);

// Off-resonant reflection: R_max exp(-A^2 (dtheta_in^2 + dphi_in^2) / 2 theta0^2).
double reflection_vs_input_tilt(const TiltState& tilts, const AlignmentModel& m);

// Resonant transmission:
//   T_max exp(-[(B dth_in - C dth_bm)^2 + (B dph_in - C dph_bm)^2
//              + (D dth_tr - E dth_bm)^2 + (D dph_tr - E dph_bm)^2] / theta0^2)
// Throws ConfigError if a tilt needs an uncalibrated B, C or E.
double transmission_vs_tilts(const TiltState& tilts, const AlignmentModel& m);

// Input lens and back mirror at their optima: T_max exp(-D^2 (dth_tr^2 + dph_tr^2) / theta0^2).
double transmission_vs_transmission_tilt(const TiltState& tilts, const AlignmentModel& m);

// Normalized overlap of two equal-waist Gaussian fields exp(-r^2 / w0^2)
// displaced by (dx, dy): exp(-(dx^2 + dy^2) / 2 w0^2).
double gaussian_overlap_factor(double dx, double dy, double waist);

enum class AlignmentFitKind { InputA, TransmissionD, ColdOptimumInput, ColdOptimumTransmission };
std::string to_string(AlignmentFitKind k);
AlignmentFitKind alignment_fit_kind_from_string(const std::string& s);

struct AlignmentObservation {
    TiltState tilts;
    double value = 0.0;
    AlignmentFitKind which = AlignmentFitKind::InputA;
};

struct AlignmentFit {
    AlignmentModel model;  // input model with the fitted quantities replaced
    FitResult fit;         // parameters: width (A or D), amplitude, theta0_c, phi0_c
    double center_theta = 0.0;
    double center_phi = 0.0;
    double shift_theta = 0.0;  // center minus the input model's optimum
    double shift_phi = 0.0;
    double amplitude = 0.0;
};

// Fits the Gaussian tilt law selected by `which`. Calibration kinds fit the
// width, amplitude and 2D center (>= 5 observations); cold-optimum kinds hold
// the width at the model's value (>= 3 observations). Observations of
// another kind are ignored. The start comes from a linear fit to log(value).
// Throws InsufficientDataError for too few or collinear samples.
AlignmentFit fit_alignment_gaussian(const std::vector<AlignmentObservation>& obs, AlignmentFitKind which,
                                    const AlignmentModel& model, const FitOptions& opt = {});

// CSV `theta_in_deg,phi_in_deg,theta_bm_deg,phi_bm_deg,theta_tr_deg,phi_tr_deg,value,which`.
std::vector<AlignmentObservation> read_alignment_observations(const std::filesystem::path& csv);
void write_alignment_observations(const std::filesystem::path& csv, const std::vector<AlignmentObservation>& obs);

}  // namespace brillouin
