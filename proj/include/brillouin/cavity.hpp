#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace brillouin {

using cplx = std::complex<double>;

struct Layer {
    double thickness = 0.0;  // m
    cplx index{1.0, 0.0};    // Im > 0 is absorbing
};

// Zero-thickness partially reflecting element placed at a layer boundary.
// `r` and `t` are seen from the left; the right-side reflection is
// r' = -conj(r) t / conj(t), which makes a lossless mirror unitary.
struct Mirror {
    std::size_t position = 0;  // boundary index: 0 = before layer 0, layers.size() = after the last
    cplx r{0.0, 0.0};
    cplx t{1.0, 0.0};
};

// Planar stack between two semi-infinite media. Index steps between
// neighbouring media are bare Fresnel interfaces; a mirror at the same
// boundary sits on the left of the index step.
struct LayerStack {
    cplx n_in{1.0, 0.0};
    cplx n_out{1.0, 0.0};
    std::vector<Layer> layers;
    std::vector<Mirror> mirrors;
    double wavelength_center = 1550e-9;  // m

    void validate() const;
    // Vacuum-equivalent length sum Re(n) d.
    double optical_length() const;
    // c / (2 optical_length).
    double fsr_estimate() const;
};

// Lossless mirror with power reflectivity R. The reflection phase is pi on
// the cavity (inside) side and 0 outside.
Mirror hard_mirror(std::size_t position, double reflectivity, bool inside_is_right);

struct CavityGeometry {
    double front_gap = 0.2e-3;  // m, mirror to crystal
    double crystal = 5.0e-3;    // m
    double back_gap = 5.2e-3;   // m, crystal to back mirror
    double n_crystal = 1.5346;
    double reflectivity = 0.999;
    double wavelength_center = 1550e-9;
};

// mirror | gap | crystal | gap | mirror
LayerStack mirror_crystal_stack(const CavityGeometry& g = {});

// Copy of `stack` with delta_l added to the last layer.
LayerStack with_back_gap_offset(const LayerStack& stack, double delta_l);

enum class Port { Front, Back };

struct StackSpectrum {
    std::vector<double> freqs;  // Hz
    std::vector<cplx> r;
    std::vector<cplx> t;
    cplx n_incident{1.0, 0.0};
    cplx n_exit{1.0, 0.0};

    double reflectance(std::size_t i) const { return std::norm(r[i]); }
    double transmittance(std::size_t i) const;
};

// 2x2 transfer-matrix product. Each boundary contributes
// (1/t) [[1, -r'], [r, t t' - r r']] and each layer diag(e^{-i phi}, e^{i phi})
// with phi = 2 pi f n d / c.
StackSpectrum stack_spectrum(const LayerStack& stack, const std::vector<double>& freqs, Port port = Port::Front);

// Single-frequency power transmittance from the front port.
double stack_transmittance(const LayerStack& stack, double freq);

struct Resonance {
    double f0 = 0.0;         // Hz
    double linewidth = 0.0;  // Hz, FWHM above the local floor
    double depth = 0.0;      // peak transmittance minus the local floor
};

struct ResonanceOptions {
    // Peaks must reach this fraction of the deepest one.
    double min_relative_depth = 0.5;
    // (peak - floor) / peak; rejects low-contrast etalon fringes.
    double min_contrast = 0.5;
    double min_points_per_fwhm = 8.0;
};

// Local transmittance maxima, refined by a parabola through 1/T at the
// three highest samples. Warns when a linewidth spans fewer than
// min_points_per_fwhm grid steps.
std::vector<Resonance> find_resonances(const StackSpectrum& spectrum, const ResonanceOptions& opt = {},
                                       std::vector<std::string>* warnings = nullptr);

// Resonances of the stack in [f_lo, f_hi], evaluated on a grid fine enough
// for the mirror finesse and then refined against the exact transmittance.
std::vector<Resonance> locate_resonances(const LayerStack& stack, double f_lo, double f_hi,
                                         const ResonanceOptions& opt = {});

// Iterated three-point vertex of 1/T around a guess.
double refine_resonance(const LayerStack& stack, double f_guess, double step);

struct ModeSpacingCurve {
    std::vector<double> delta_l;  // m
    std::vector<double> spacing;  // Hz, f_{k+1} - f_k
};

// Follows the n_modes resonances nearest c / wavelength_center across
// back-gap offsets; result[i][k] is mode k (ascending) at delta_l_grid[i].
// Each step predicts every mode by linear extrapolation and searches
// +-FSR/4 around it; a mode not found there triggers a full re-detection.
// Throws TrackingError when modes are lost or merge.
std::vector<std::vector<double>> track_resonances(const LayerStack& stack, const std::vector<double>& delta_l_grid,
                                                  int n_modes, int jobs = 1);

// Adjacent-pair spacings of n_pairs + 1 tracked modes.
std::vector<ModeSpacingCurve> mode_spacing_vs_length(const LayerStack& stack, const std::vector<double>& delta_l_grid,
                                                     int n_pairs, int jobs = 1);

struct InsensitivePoint {
    double delta_l_star = 0.0;       // m
    double spacing_at_star = 0.0;    // Hz
    double gradient_residual = 0.0;  // Hz/m, |d spacing / d delta_l| at the point
    double max_gradient = 0.0;       // Hz/m over the whole curve
};

// Central-difference gradient of the curve (one-sided at the ends).
std::vector<double> spacing_gradient(const ModeSpacingCurve& curve);

// Among the interior extrema of the curve (parabola through the three
// samples around each local extremum, the two outermost samples excluded) picks the one whose
// spacing is nearest `target_hz`. Throws NoFeatureError without an extremum.
InsensitivePoint find_displacement_insensitive_point(const ModeSpacingCurve& curve, double target_hz = 12.65e9);

struct LengthTuning {
    double back_gap_offset = 0.0;  // m, total back-gap change placing the stack on the point
    double window_offset = 0.0;    // m, back-gap offset of the evaluation that found it
    InsensitivePoint point;        // delta_l_star is relative to window_offset
    int evaluations = 0;
};

// Extremal spacings sit at fixed back-gap lengths, so only a discrete set of
// values is reachable. Steps the back gap by `coarse_step` until the nearest
// extremum crosses `target_hz`, bisects, then widens the search around the
// crossing window by window until an extremum lies within tolerance_hz.
// Every evaluation tracks n_pairs pairs over +-window. Returns the nearest
// extremum seen; throws TrackingError when no crossing occurs within
// max_offset.
LengthTuning tune_back_gap_to_target(const LayerStack& stack, double target_hz, int n_pairs = 5,
                                     double tolerance_hz = 0.5e6, double coarse_step = 20e-6,
                                     double max_offset = 1e-3, double window = 1e-6, int jobs = 1);

// CSV `delta_l_m,spacing_hz`.
void write_spacing_curve(const std::filesystem::path& csv, const ModeSpacingCurve& curve);
ModeSpacingCurve read_spacing_curve(const std::filesystem::path& csv);

}  // namespace brillouin
