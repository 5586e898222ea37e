#include "brillouin/model.hpp"

#include <cmath>
#include <complex>
#include <limits>

#include "brillouin/errors.hpp"

namespace brillouin {

using cd = std::complex<double>;

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

}  // namespace

std::string to_string(PumpSide side) { return side == PumpSide::Red ? "red" : "blue"; }

PumpSide pump_side_from_string(const std::string& s) {
    if (s == "red" || s == "Red" || s == "RED") return PumpSide::Red;
    if (s == "blue" || s == "Blue" || s == "BLUE") return PumpSide::Blue;
    throw ConfigError("pump side must be 'red' or 'blue', got '" + s + "'");
}

void OpticalMode::validate() const {
    require(finite_nonneg(kappa_ext1) && finite_nonneg(kappa_ext2) && finite_nonneg(kappa_int),
            "optical loss rates must be finite and >= 0");
    require(kappa() > 0.0, "total optical linewidth must be > 0");
    require(std::isfinite(omega) && omega >= 0.0, "optical frequency must be finite and >= 0");
}

void MechanicalMode::validate() const {
    require(std::isfinite(omega_m) && omega_m > 0.0, "mechanical frequency must be > 0");
    require(std::isfinite(gamma_m) && gamma_m > 0.0, "mechanical linewidth must be > 0");
    require(std::isfinite(g0), "g0 must be finite");
    require(finite_nonneg(n_th), "n_th must be >= 0");
}

double DetectionChain::beta() const {
    return kTwoPi * (rbw / load_R) * 4.0 * gain_G * gain_G * eta * split_T * (1.0 - split_T);
}

void DetectionChain::validate() const {
    require(split_T > 0.0 && split_T < 1.0, "split_T must lie in (0, 1)");
    require(eta > 0.0 && eta <= 1.0, "eta must lie in (0, 1]");
    require(finite_nonneg(p_lo), "p_lo must be >= 0");
    require(rbw > 0.0 && std::isfinite(rbw), "rbw must be > 0");
    require(load_R > 0.0 && std::isfinite(load_R), "load_R must be > 0");
    require(hbar > 0.0, "hbar must be > 0");
    require(std::isfinite(gain_G) && std::isfinite(delta_lo), "detection constants must be finite");
}

const OpticalMode& SystemParams::pump_mode() const {
    return pump.side == PumpSide::Red ? mode_red : mode_blue;
}

const OpticalMode& SystemParams::signal_mode() const {
    return pump.side == PumpSide::Red ? mode_blue : mode_red;
}

void SystemParams::validate() const {
    mode_red.validate();
    mode_blue.validate();
    detection.validate();
    require(std::isfinite(delta_21) && delta_21 > 0.0, "delta_21 must be > 0");
    require(finite_nonneg(pump.power_in), "pump power must be >= 0");
    require(std::isfinite(pump.detuning), "pump detuning must be finite");
    for (const auto& m : mechanics) m.validate();
    for (std::size_t i = 0; i < mechanics.size(); ++i) {
        for (std::size_t j = i + 1; j < mechanics.size(); ++j) {
            const double sep = std::abs(mechanics[i].omega_m - mechanics[j].omega_m);
            const double width = std::max(mechanics[i].gamma_m, mechanics[j].gamma_m);
            require(sep >= 10.0 * width, "mechanical modes " + std::to_string(i) + " and " +
                                             std::to_string(j) + " overlap");
        }
    }
}

double intracavity_photon_number(const PumpSetting& pump, const OpticalMode& mode, double hbar) {
    const double kappa = mode.kappa();
    if (!(kappa > 0.0)) throw ConfigError("intracavity_photon_number: kappa must be > 0");
    if (pump.power_in < 0.0) throw ConfigError("intracavity_photon_number: negative power");
    if (pump.power_in == 0.0) return 0.0;
    const double flux = pump.power_in / (hbar * mode.omega);
    return mode.kappa_ext1 * flux / (0.25 * kappa * kappa + pump.detuning * pump.detuning);
}

double enhanced_coupling(double g0, double photon_number) {
    if (photon_number < 0.0) throw ConfigError("enhanced_coupling: negative photon number");
    return g0 * std::sqrt(photon_number);
}

Backaction backaction(double g, double kappa_signal, double delta_21, double omega,
                      const MechanicalMode& mech, PumpSide side) {
    if (!(kappa_signal > 0.0)) throw ConfigError("backaction: kappa_signal must be > 0");
    const double x = omega - delta_21;
    const double den = x * x + 0.25 * kappa_signal * kappa_signal;
    Backaction b;
    b.delta_omega = g * g * x / den;
    b.delta_gamma = g * g * kappa_signal / den;
    const double s = side == PumpSide::Red ? 1.0 : -1.0;
    b.omega_eff = mech.omega_m + s * b.delta_omega;
    b.gamma_eff = mech.gamma_m + s * b.delta_gamma;
    if (!(b.gamma_eff > 0.0)) {
        throw InstabilityError("parametric instability: effective mechanical linewidth <= 0",
                               b.gamma_eff);
    }
    return b;
}

double cooperativity(double g, double kappa, double gamma_m) {
    return 4.0 * g * g / (kappa * gamma_m);
}

double coupling_rate(const SystemParams& params, std::size_t mech_index) {
    const double n = intracavity_photon_number(params.pump, params.pump_mode(), params.detection.hbar);
    return enhanced_coupling(params.mechanics.at(mech_index).g0, n);
}

double scattering_s23_mag2(const SystemParams& params, std::size_t mech_index, double omega) {
    const auto& mech = params.mechanics.at(mech_index);
    const auto& sig = params.signal_mode();
    const double g = coupling_rate(params, mech_index);
    if (g == 0.0) return 0.0;
    const double kappa = sig.kappa();
    const bool red = params.pump.side == PumpSide::Red;
    // Red: signal at +omega, Sigma(omega). Blue: signal at -omega, Sigma(-omega).
    const double w = red ? omega : -omega;
    const Backaction ba = backaction(g, kappa, params.delta_21, w, mech, params.pump.side);
    const double xo = w - params.delta_21;
    const double xm = w - ba.omega_eff;
    return g * g * sig.kappa_ext2 / (0.25 * kappa * kappa + xo * xo) * mech.gamma_m /
           (0.25 * ba.gamma_eff * ba.gamma_eff + xm * xm);
}

namespace {

// Complex amplitudes of the detection-port row.
std::array<cd, 4> row_amplitudes(const SystemParams& params, double omega, std::size_t mech_index) {
    const auto& mech = params.mechanics.at(mech_index);
    const auto& sig = params.signal_mode();
    const double g = coupling_rate(params, mech_index);
    const double kappa = sig.kappa();
    const bool red = params.pump.side == PumpSide::Red;
    const cd I(0.0, 1.0);

    const double w = red ? omega : -omega;
    // Effective mechanical denominator Gamma_eff/2 - i(omega -/+ Omega_eff), with the
    // backaction evaluated at the same frequency.
    const Backaction ba = backaction(g, kappa, params.delta_21, w, mech, params.pump.side);
    const cd K = 0.5 * kappa - I * (red ? omega - params.delta_21 : omega + params.delta_21);
    const cd M = 0.5 * ba.gamma_eff - I * (red ? omega - ba.omega_eff : omega + ba.omega_eff);

    const double sk2 = std::sqrt(sig.kappa_ext2);
    const cd D = sk2 / K;
    const cd E = g * g / (K * M);
    const cd F = red ? 1.0 - E : 1.0 + E;

    std::array<cd, 4> s;
    s[0] = -std::sqrt(sig.kappa_ext1) * D * F;
    s[1] = 1.0 - sk2 * D * F;
    s[3] = -std::sqrt(sig.kappa_int) * D * F;
    if (g == 0.0) {
        s[2] = 0.0;
    } else {
        // i g sqrt(Gamma_m) / M on the phonon input, scaled by -D.
        s[2] = red ? -D * I * g * std::sqrt(mech.gamma_m) / M
                   : sk2 * std::sqrt(mech.gamma_m) * E / (I * g);
    }
    return s;
}

}  // namespace

std::array<double, 4> scattering_row(const SystemParams& params, double omega,
                                     std::size_t mech_index) {
    const auto s = row_amplitudes(params, omega, mech_index);
    return {std::norm(s[0]), std::norm(s[1]), std::norm(s[2]), std::norm(s[3])};
}

std::array<double, 4> blue_scattering_row(const SystemParams& params, double omega,
                                          std::size_t mech_index) {
    if (params.pump.side != PumpSide::Blue) {
        throw ConfigError("blue_scattering_row requires a blue pump");
    }
    return scattering_row(params, omega, mech_index);
}

double energy_conservation_residual(const SystemParams& params, double omega,
                                    std::size_t mech_index) {
    const auto r = scattering_row(params, omega, mech_index);
    const double s23 = params.pump.side == PumpSide::Red ? r[2] : -r[2];
    return (r[0] + r[1] + r[3]) + s23 - 1.0;
}

double effective_mass(const ModeGeometry& geom, MassConvention convention) {
    const double w = geom.waist_w0 / std::sqrt(2.0);
    const double base = geom.density_rho * kPi * w * w * geom.crystal_L;
    return convention == MassConvention::RMS ? 4.0 * base : 0.25 * base;
}

double bose_einstein_occupation(double omega, double temperature_k) {
    if (temperature_k <= 0.0) return 0.0;
    return 1.0 / std::expm1(kHbar * omega / (kBoltzmann * temperature_k));
}

}  // namespace brillouin
