#pragma once

// Inverse pipeline: background removal, thermal Lorentzian and calibration
// tone fits, and the calibrated coupling-rate estimate.

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

#include "omkit/spectra.hpp"

namespace omkit::spectra {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ToneNotFound : public FitError {
 public:
  using FitError::FitError;
};

struct Interval {
  double lo = 0.0;  // rad/s
  double hi = 0.0;
  bool contains(double w) const { return w >= lo && w <= hi; }
};

constexpr int kMaxBackgroundOrder = 5;

struct BackgroundResult {
  SpectrumTrace trace;             // background subtracted
  Eigen::VectorXd coefficients;    // in x = (omega - origin) / scale
  double origin = 0.0;
  double scale = 1.0;
};

/// Subtracts a polynomial fitted to the samples outside `mask`.
BackgroundResult remove_background(const SpectrumTrace& trace, int order = 2, const std::vector<Interval>& mask = {});

struct LorentzianOptions {
  std::vector<Interval> mask;  // samples ignored by the fit
  int baseline_order = 0;      // residual polynomial fitted jointly; -1 for none
  double min_snr = 3.0;  // fitted peak over its standard error
};

/// P = rbw * amplitude / ((omega - omega_m)^2 + (gamma_m / 2)^2).
struct LorentzianFit {
  double amplitude = 0.0;  // W rad^2 / s^2 per rad/s of rbw
  double omega_m = 0.0;
  double gamma_m = 0.0;
  double peak = 0.0;       // W
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // (amplitude, omega_m, gamma_m)
  double rel_var_area = 0.0;  // relative variance of amplitude / gamma_m
  double snr = 0.0;
  double chi2_red = 0.0;
  int iterations = 0;
  std::vector<double> fitted;  // full model (with baseline) at every sample, W
};

LorentzianFit fit_lorentzian(const SpectrumTrace& trace, const LorentzianOptions& options = {});

struct ToneOptions {
  double half_width_rbw = 3.0;  // fit region around the tone, in RBW
  int baseline_order = 2;
  double min_snr = 3.0;
};

struct ToneFit {
  double peak_power = 0.0;  // W
  double omega = 0.0;
  double sigma_peak = 0.0;
  double snr = 0.0;
};

ToneFit fit_tone(const SpectrumTrace& trace, double omega_guess, Window window = Window::gaussian,
                 const ToneOptions& options = {});

struct JointFit {
  LorentzianFit lorentzian;
  ToneFit tone;
  double offset = 0.0;
};

/// Lorentzian, tone window and constant offset fitted together, for tones
/// sitting on the thermal peak.
JointFit fit_joint(const SpectrumTrace& trace, double omega_tone_guess, Window window = Window::gaussian);

struct PipelineOptions {
  int background_order = 2;
  Window window = Window::gaussian;
  double tone_exclusion_rbw = 4.0;  // half-width of the tone mask for the thermal fit
  double peak_exclusion_gamma = 3.0;
  double tone_detect_snr = 3.0;  // on the unweighted residual fit
  double tone_min_snr = 3.0;     // after the weighted joint refinement
};

struct ScanFit {
  std::string scan_id;
  std::string detuning;
  double input_power = 0.0;
  LorentzianFit lorentzian;
  ToneFit tone;
  double factor = 0.0;        // sqrt(omega_m A / (4 gamma_m P_tone)), rad/s
  double factor_sigma = 0.0;
};

/// Background removal, thermal fit with the tone masked, tone fit on the
/// residual, then a joint fit of both weighted by a noise model (a fraction
/// of the signal plus a floor) estimated from the residuals.
ScanFit analyze_scan(const SpectrumTrace& trace, const CalibrationTone& tone, const PipelineOptions& options = {});

struct Systematics {
  double temperature_sigma = 0.0;  // K
  double depth_sigma = 0.0;        // rad
};

struct ExtractionResult {
  double g_om = 0.0;     // rad/s
  double sigma_stat = 0.0;
  double sigma_sys = 0.0;
  double factor_mean = 0.0;
  double chi2_red = 0.0;
  std::vector<double> per_scan_g;  // rad/s
  std::vector<std::string> warnings;
};

/// Mean of the per-scan factors, weighted by relative precision, scaled by omega_phi A_phi /
/// sqrt(k_B T / hbar). The statistical error is inflated by sqrt(chi2_red)
/// when the scatter exceeds the per-scan errors.
ExtractionResult extract_gom(const std::vector<ScanFit>& scans, const CalibrationTone& tone, double temperature,
                             const Systematics& systematics = {});

}  // namespace omkit::spectra
