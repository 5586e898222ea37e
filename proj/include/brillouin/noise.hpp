#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace brillouin {

// Power spectral density on a frequency grid in Hz. Units of `psd` are
// whatever the instrument reports (V^2/Hz, W/Hz, ...).
struct PsdTrace {
    std::vector<double> freq;
    std::vector<double> psd;

    std::size_t size() const { return freq.size(); }
    void validate() const;
};

struct BandStats {
    double center = 0.0;  // Hz
    double span = 0.0;    // Hz, full width
    double avg = 0.0;
    double std = 0.0;  // sample standard deviation
    double avg_plus_std = 0.0;
    std::size_t n_points = 0;
};

// Mean and spread of the samples inside [center - span/2, center + span/2].
// Throws InsufficientDataError with fewer than two samples in the band.
BandStats band_stats(const std::vector<double>& freq, const std::vector<double>& values, double center, double span);

struct FrequencyNoisePSD {
    std::vector<double> freq;  // Hz
    std::vector<double> s_ww;  // rad^2 Hz for laser noise, Hz^2/Hz for sweep-dip spectra
    std::size_t n_floored = 0;  // points where the excess went negative and was set to zero
    std::optional<BandStats> band;
    double integrated_rms = 0.0;  // sweep-dip spectra: sqrt of the PSD integrated over the grid
    std::vector<std::string> warnings;
};

// Power series of the Bessel function of the first kind, truncated once a
// term drops below 1e-17 of the running sum (|x| < 2.405 needs <= 12 terms).
double bessel_j_series(int n, double x);

// Solves [J1(beta) / J0(beta)]^2 = p1_over_p0 for beta in [0, 2.405).
// The ratio grows monotonically from 0 to infinity on that interval.
// Throws ConfigError for negative or non-finite ratios.
double eom_beta_from_sideband_ratio(double p1_over_p0);

struct ToneOptions {
    double search_half_width = 0.0;     // Hz around tone_freq; 0 = 20 grid steps
    double integrate_half_width = 0.0;  // Hz around the peak; 0 = 5 grid steps
    double min_snr = 5.0;               // peak excess over the flank noise (robust sigma)
};

struct ToneCalibration {
    double conversion = 0.0;        // A, rad^2 Hz per psd unit
    double tone_freq = 0.0;         // Hz, located peak
    double tone_power = 0.0;        // integrated measured tone power above the flank median
    double expected_tone = 0.0;     // pi omega^2 beta^2 / 2, rad^2 Hz
    double background = 0.0;        // flank median
};

// A = (pi omega^2 beta^2 / 2) / integral of (psd - background) df over the
// tone, with omega = 2 pi f_tone. Throws NoFeatureError when no peak rises
// min_snr above the flanks.
ToneCalibration calibrate_conversion(const PsdTrace& psd_with_tone, double tone_freq, double beta,
                                     const ToneOptions& opt = {});

struct LaserNoiseOptions {
    bool dark_in_shot = false;  // the shot-noise trace already contains the dark noise
    std::optional<double> band_center;  // Hz
    double band_span = 10e6;            // Hz
};

// S_ww = A max(total - shot - dark, 0). Traces must share their grid (1e-9
// relative), otherwise ConfigError.
FrequencyNoisePSD laser_frequency_noise(const PsdTrace& total, const PsdTrace& shot, const PsdTrace& dark,
                                        double conversion, const LaserNoiseOptions& opt = {});

struct PhaseNoiseInputs {
    double s_ww = 0.0;         // rad^2 Hz at the mechanical frequency
    double omega_m = 0.0;      // rad/s
    double photon_flux = 0.0;  // |E0|^2, 1/s
    double cooperativity = 0.0;
    // Leave both at zero to use gamma_eff = (1 + C) gamma_m (red pump).
    double gamma_m = 0.0;    // rad/s
    double gamma_eff = 0.0;  // rad/s
    double kappa_ext2_over_kappa = 0.5;
    // Optional checks of the formula's assumptions (0 = unchecked).
    double kappa = 0.0;      // rad/s
    double delta_21 = 0.0;   // rad/s
    double kappa_1 = 0.0;    // rad/s
    double kappa_2 = 0.0;    // rad/s
};

struct PhaseNoiseResult {
    double n_photon = 0.0;
    double n_phonon = 0.0;
    std::vector<std::string> warnings;
};

// n_photon = S_ww |E0|^2 / omega_m^2,
// n_phonon = ((gamma_eff - gamma_m) / gamma_eff) (kappa_ext2 / kappa) n_photon.
PhaseNoiseResult phase_noise_phonons(const PhaseNoiseInputs& in);

// Occupancy that sideband asymmetry reports for a true occupancy n when
// laser noise adds n_phi photons:
//   1/n_inf = (n + 1 + a (1 - C/2) n_phi) / (n - a (1 + C/2) n_phi) - 1,
// a = 2 kappa_ext / kappa. Throws ConfigError when the denominator is <= 0.
double inferred_occupancy(double n_th, double n_phi_photon, double kappa_ext_over_kappa, double cooperativity);

// Inverse of inferred_occupancy (linear in n):
//   n = n_inf (1 + p + q) + q, p = a (1 - C/2) n_phi, q = a (1 + C/2) n_phi.
// Requires n_inf > 0 and 0 <= C < 1.
double true_occupancy_from_inferred(double n_inf, double n_phi_photon, double kappa_ext_over_kappa,
                                    double cooperativity);

struct DipRecord {
    std::vector<double> dip_times;  // s, both sweep directions
    double sweep_rate = 0.0;        // Hz/s of the laser-cavity detuning
    // Used when sweep_rate is zero: rate = cavity_linewidth / dip_fwhm.
    double cavity_linewidth = 0.0;  // Hz
    double dip_fwhm = 0.0;          // s

    double effective_rate() const;
    void validate() const;
};

// Every second dip (same sweep direction) is used. The cumulative sum of
// the dip-time differences gives the cavity frequency up to a linear drift,
// which a least-squares line removes: df_j = rate x (t_2j - t0 - j T), sampled
// at 1 / T. Its one-sided PSD
// 2 |X_k|^2 / (fs N), k = 1 .. N/2, is returned with the integrated RMS.
// Consecutive dip gaps must repeat every second gap to within a quarter
// period; otherwise a dip is missing and InsufficientDataError is thrown, as
// it is for fewer than 18 dips.
FrequencyNoisePSD sweep_dip_noise_spectrum(const DipRecord& rec);

// Amplitude of a sinusoid from the PSD power within +-half_width of `freq`.
double spectral_line_amplitude(const FrequencyNoisePSD& psd, double freq, double half_width);

// CSV `freq_hz,psd`.
PsdTrace read_psd(const std::filesystem::path& csv);
void write_psd(const std::filesystem::path& csv, const std::vector<double>& freq, const std::vector<double>& psd);

// CSV `dip_time_s`; rates come from the caller.
std::vector<double> read_dip_times(const std::filesystem::path& csv);
void write_dip_times(const std::filesystem::path& csv, const std::vector<double>& dip_times);

}  // namespace brillouin
