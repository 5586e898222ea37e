#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brillouin/model.hpp"
#include "brillouin/spectra.hpp"
#include "brillouin/uncertain.hpp"

namespace brillouin {

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> values;
    Eigen::MatrixXd covariance;  // zero rows/columns for fixed parameters
    double chi2_reduced = 0.0;
    bool converged = false;
    int n_iter = 0;
    std::size_t n_points = 0;
    std::map<std::string, Uncertain> derived;  // quantities computed from the estimates
    std::vector<std::string> warnings;

    std::size_t index(const std::string& name) const;
    double value(const std::string& name) const { return values[index(name)]; }
    double sigma(const std::string& name) const;
    Uncertain get(const std::string& name) const { return {value(name), sigma(name)}; }
    std::map<std::string, double> as_map() const;
};

// Adds variance (e.g. drift or vibration terms) to one parameter.
void add_variance(FitResult& fit, const std::string& name, double extra_variance);

struct ParamSpec {
    std::string name;
    double init = 0.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool fixed = false;
};

using ModelFn = std::function<double(double x, const std::vector<double>& p)>;
// Fills grad (size = number of parameters, fixed ones included) with d model / d p.
using GradFn = std::function<void(double x, const std::vector<double>& p, std::vector<double>& grad)>;

struct FitOptions {
    int max_iter = 500;
    double lambda0 = 1e-3;
    double lambda_factor = 10.0;
    double ftol = 1e-12;  // relative cost change
    double gtol = 1e-10;  // scaled gradient infinity norm
    double rank_tol = 1e-12;
    bool throw_on_failure = true;
};

// Levenberg-Marquardt with Marquardt diagonal scaling and box bounds by
// projection. `sigma` empty means unit weights. Covariance is
// (J^T W J)^-1 * chi2_reduced. Throws ConvergenceError after max_iter and
// SingularJacobianError when the free columns are rank deficient at the optimum.
FitResult nls_fit(const ModelFn& model, const std::vector<double>& x, const std::vector<double>& y,
                  const std::vector<double>& sigma, const std::vector<ParamSpec>& params,
                  const FitOptions& opt = {}, const GradFn& grad = nullptr);

// Central finite-difference gradient of `model` at (x, p).
std::vector<double> numeric_gradient(const ModelFn& model, double x, const std::vector<double>& p);

// First-order propagation of a scalar function of the fit parameters.
Uncertain propagate(const std::function<double(const std::vector<double>&)>& f, const FitResult& fit);

// ----- Staged spectral fits. Results are in angular units (rad/s). -----

// a0^2 (kappa/2)^2 / ((kappa/2)^2 + (w - delta_21)^2); parameters delta_21, kappa, a0.
double optical_lorentzian(double omega, double delta_21, double kappa, double a0);
void optical_lorentzian_grad(double omega, const std::vector<double>& p, std::vector<double>& g);

FitResult fit_optical_lorentzian(const SpectrumTrace& trace,
                                 const std::vector<std::pair<double, double>>& exclusion_windows_hz = {},
                                 const FitOptions& opt = {});

struct Feature {
    double center_hz = 0.0;
    double width_hz = 0.0;  // FWHM estimate of the residual feature
    double amplitude = 0.0;  // signed residual at the extremum
};

// Local extrema of the residual against the optical fit exceeding
// `threshold` x MAD (scaled to a Gaussian sigma).
std::vector<Feature> detect_features(const SpectrumTrace& trace, const FitResult& optical,
                                     double threshold = 5.0);

// OMIT/OMIA feature in a window with the optical parameters held fixed.
// Parameters omega_m, gamma_m, g; derived C and gamma_eff.
// Throws NoFeatureError when nothing rises above the noise in the window.
// `fixed_terms` are neighbouring mechanical lines held at earlier estimates.
FitResult fit_mechanical_feature(const SpectrumTrace& trace, const FitResult& optical,
                                 std::pair<double, double> window_hz, PumpSide side,
                                 const FitOptions& opt = {},
                                 const std::vector<TransmissionTerm>& fixed_terms = {});

// Transmission model with analytic gradient for the mechanical fits.
// p = {delta_21, kappa, a0, omega_m_0, gamma_m_0, g_0, omega_m_1, ...}
void transmission_grad(double omega, const std::vector<double>& p, PumpSide side, std::vector<double>& g);

struct StagedFit {
    FitResult optical;
    std::vector<FitResult> mechanical;
    std::vector<Feature> features;
};

// Optical fit (robust start from a running median), feature detection,
// optical refit with +/-10 Gamma_eff exclusion windows, then one mechanical
// fit per feature with the optical parameters fixed. A second mechanical
// pass holds the other lines at their first-pass values. The staged values
// seed a joint refinement of all parameters on the full trace, which
// removes the bias left by neighbouring-line tails.
StagedFit staged_fit(const SpectrumTrace& trace, PumpSide side, double window_factor = 10.0,
                     const FitOptions& opt = {});

struct FanoParams {
    double r_offres = 1.0;
    double s_prime_kappa_ext = 0.0;  // S' kappa_ext1, rad/s
    double phi = 0.0;
    double kappa = 1.0;
    double omega0 = 0.0;
};

// R_off |1 - S' kappa_ext e^{-i phi} / (kappa/2 - i (omega - omega0))|^2
double fano_reflection(double omega, const FanoParams& p);
// Gradient in the order {r_offres, s_prime_kappa_ext, phi, kappa, omega0}.
void fano_reflection_grad(double omega, const std::vector<double>& p, std::vector<double>& g);

// Fits the Fano form; parameters r_offres, s_prime_kappa_ext, phi, kappa,
// omega0. The over/undercoupled ambiguity is resolved towards the
// undercoupled branch (S' kappa_ext cos phi <= kappa/2).
FitResult fit_fano_reflection(const SpectrumTrace& trace, const FitOptions& opt = {});

struct ScalingPoint {
    double power_w;
    double value;
    double sigma;  // <= 0 means unweighted
};

// Weighted straight line value = slope * power + intercept; derived r2.
FitResult fit_power_scaling(const std::vector<ScalingPoint>& points);

}  // namespace brillouin
