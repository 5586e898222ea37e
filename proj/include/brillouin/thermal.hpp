#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace brillouin {

// Temperatures are in kelvin. R_c-m = r0 + r1 / V_m + r2 / V_m^2 (K/W);
// blackbody currents b V^4 with b in W/K^4. r0 may be +inf (no conduction).
struct ThermalParams {
    double r0 = 0.0;
    double r1 = 0.0;
    double r2 = 0.0;
    double b_sc = 0.0;  // still <-> crystal
    double b_mc = 0.0;  // mount <-> crystal

    void validate() const;
};

struct WarmupSeries {
    std::vector<double> times;  // s
    std::vector<double> v_m;    // mount
    std::vector<double> v_s;    // still

    std::size_t size() const { return times.size(); }
    void validate() const;
};

double thermal_resistance(double v_m, const ThermalParams& p);

// Net blackbody current into the crystal from a body at v_other.
// Zero when the temperatures are equal.
double blackbody_net_current(double b, double v_other, double v_c);

// Coefficients {c0, c1, c2, c3, c4} of the steady-state quartic
// R (b_sc + b_mc) V^4 + V - (V_m + R (b_sc V_s^4 + b_mc V_m^4)).
// For R = inf the equation is divided by R first.
std::vector<double> crystal_quartic(double v_m, double v_s, const ThermalParams& p);

// Real roots of a polynomial given by ascending coefficients (companion matrix).
std::vector<double> real_polynomial_roots(const std::vector<double>& coeffs);

// Smallest root of the quartic inside [min(V_m, V_s), max(V_m, V_s)]:
// sign-change scan over 256 subdivisions, bisection to 1e-12 relative, one
// Newton step. Throws NoAdmissibleRootError with every real root attached.
double steady_state_crystal_temp(double v_m, double v_s, const ThermalParams& p);

std::vector<double> warmup_sweep(const WarmupSeries& series, const ThermalParams& p, int jobs = 1);

enum class Regime { MountTracking, StillTracking, Intermediate };
std::string to_string(Regime r);

// Target shape: crystal near `plateau_k` while the mount is below it, and
// following the mount above it.
struct PlateauCriterion {
    double plateau_k = 0.4;
    double plateau_tol = 0.25;  // relative band around plateau_k
    double track_tol = 0.1;     // relative distance to the mount
};

struct RegimePoint {
    ThermalParams params;
    Regime regime = Regime::Intermediate;
    double rms_to_mount = 0.0;
    double rms_to_still = 0.0;
    bool reproduces_plateau = false;
};

struct RegimeReport {
    std::vector<RegimePoint> points;
    std::size_t mount_tracking = 0;
    std::size_t still_tracking = 0;
    std::size_t intermediate = 0;
    std::size_t plateau_matches = 0;
};

// True when v_c sits within the plateau band for every point with the mount
// below plateau_k and within track_tol of the mount for every other point
// (both groups non-empty).
bool matches_plateau(const WarmupSeries& series, const std::vector<double>& v_c, const PlateauCriterion& crit);

// Mount- (still-) tracking when the RMS distance to the mount (still) is at
// most 10% of the RMS mount-still separation; intermediate otherwise.
RegimeReport scan_regimes(const WarmupSeries& series, const std::vector<ThermalParams>& grid,
                          const PlateauCriterion& crit = {}, int jobs = 1);

// n log-spaced values from lo to hi (n = 1 gives {lo}).
std::vector<double> log_axis(double lo, double hi, int n);

// Cartesian product of the per-parameter value lists; combinations that
// fail ThermalParams::validate are skipped.
std::vector<ThermalParams> thermal_grid(const std::vector<double>& r0, const std::vector<double>& r1,
                                        const std::vector<double>& r2, const std::vector<double>& b_sc,
                                        const std::vector<double>& b_mc);

// CSV `time_s,v_mount_k,v_still_k`; output adds `v_crystal_k`.
WarmupSeries read_warmup_series(const std::filesystem::path& csv);
void write_warmup_result(const std::filesystem::path& csv, const WarmupSeries& series,
                         const std::vector<double>& v_c);

}  // namespace brillouin
