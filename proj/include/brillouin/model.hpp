#pragma once

// Two-mode Brillouin cavity optomechanics: parameter types and the
// closed-form input-output quantities everything else is built on.
//
// All frequencies and rates in this header are angular (rad/s). Conversion
// to ordinary Hz happens only at file and command-line boundaries.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "brillouin/constants.hpp"

namespace brillouin {

enum class PumpSide { Red, Blue };

std::string to_string(PumpSide side);
PumpSide pump_side_from_string(const std::string& s);

struct OpticalMode {
    double omega = 0.0;       // resonance, rad/s
    double kappa_ext1 = 0.0;  // input port coupling, rad/s
    double kappa_ext2 = 0.0;  // detection port coupling, rad/s
    double kappa_int = 0.0;   // intrinsic loss, rad/s

    double kappa() const { return kappa_ext1 + kappa_ext2 + kappa_int; }
    void validate() const;
};

struct MechanicalMode {
    double omega_m = 0.0;  // rad/s
    double gamma_m = 0.0;  // intrinsic linewidth, rad/s
    double g0 = 0.0;       // single-photon coupling, rad/s
    double n_th = 0.0;     // thermal occupation

    void validate() const;
};

struct PumpSetting {
    PumpSide side = PumpSide::Red;
    double power_in = 0.0;  // W
    double detuning = 0.0;  // pump minus pumped-mode resonance, rad/s
};

struct DetectionChain {
    double gain_G = 1.0;     // V/W
    double split_T = 0.5;    // beamsplitter intensity transmission
    double eta = 1.0;        // collection efficiency
    double p_lo = 1e-3;      // W
    double delta_lo = kTwoPi * 115e6;  // |LO - scattered signal|, rad/s
    double rbw = 5e3;        // Hz
    double load_R = 50.0;    // ohm
    double hbar = kHbar;

    // 2*pi * (RBW / R_L) * 4 G^2 eta T (1 - T)
    double beta() const;
    void validate() const;
};

// The red mode (1) sits below the blue mode (2) by delta_21. A red pump
// drives mode 1 and scatters into mode 2; a blue pump drives mode 2 and
// scatters into mode 1.
struct SystemParams {
    OpticalMode mode_red;
    OpticalMode mode_blue;
    std::vector<MechanicalMode> mechanics;
    PumpSetting pump;
    DetectionChain detection;
    double delta_21 = 0.0;  // omega_2 - omega_1, rad/s

    const OpticalMode& pump_mode() const;
    const OpticalMode& signal_mode() const;

    // Throws ConfigError. Mechanical modes must be separated by at least ten
    // times the larger of the two linewidths.
    void validate() const;
};

struct ModeGeometry {
    double waist_w0 = 0.0;   // m
    double crystal_L = 0.0;  // m
    double density_rho = 0.0;  // kg/m^3
    int mode_number_m = 1;
};

enum class MassConvention { Max, RMS };

struct Backaction {
    double delta_omega = 0.0;
    double delta_gamma = 0.0;
    double omega_eff = 0.0;
    double gamma_eff = 0.0;
};

// Steady-state pump photon number, kappa_ext1 |alpha_in|^2 / ((kappa/2)^2 + Delta^2)
// with |alpha_in|^2 = P / (hbar omega).
double intracavity_photon_number(const PumpSetting& pump, const OpticalMode& mode,
                                 double hbar = kHbar);

// g = g0 sqrt(N)
double enhanced_coupling(double g0, double photon_number);

// Optical spring and damping from the self-energy
// Sigma(omega) = g^2 / ((omega - delta_21) + i kappa/2). `omega` is the
// argument of Sigma; blue-pump callers pass -omega for the signal frequency.
// Throws InstabilityError when gamma_eff <= 0.
Backaction backaction(double g, double kappa_signal, double delta_21, double omega,
                      const MechanicalMode& mech, PumpSide side);

// C = 4 g^2 / (kappa gamma_m)
double cooperativity(double g, double kappa, double gamma_m);

// Enhanced coupling of mechanical mode `mech_index` under the configured pump.
double coupling_rate(const SystemParams& params, std::size_t mech_index);

// |S_23|^2 at signal frequency omega (rotating frame of the pump). Peaks near
// +delta_21 for a red pump and -delta_21 for a blue pump.
double scattering_s23_mag2(const SystemParams& params, std::size_t mech_index, double omega);

// |S_21|^2 .. |S_24|^2 of the detection-port row for one mechanical mode,
// evaluated with the frequency-dependent backaction.
std::array<double, 4> scattering_row(const SystemParams& params, double omega,
                                     std::size_t mech_index = 0);

// Same as scattering_row, restricted to the blue-pump case.
std::array<double, 4> blue_scattering_row(const SystemParams& params, double omega,
                                          std::size_t mech_index = 0);

// sum_j |S_2j|^2 - 1 (red) or -|S_23|^2 + sum_{j!=3} |S_2j|^2 - 1 (blue).
double energy_conservation_residual(const SystemParams& params, double omega,
                                    std::size_t mech_index = 0);

double effective_mass(const ModeGeometry& geom, MassConvention convention);

// Bose-Einstein occupation of a mode at angular frequency omega, temperature T.
double bose_einstein_occupation(double omega, double temperature_k);

}  // namespace brillouin
