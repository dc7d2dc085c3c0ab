#pragma once

// Forward model of a calibrated thermal-motion measurement: cavity
// transmission, thermal displacement spectrum, phase-modulation calibration
// tone and the spectrum analyzer's view of both. All frequencies are
// angular (rad/s) unless a name says _hz.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace omkit::spectra {

struct OpticalResonance {
  double omega_o = 0.0;
  double gamma_o0 = 0.0;   // intrinsic power loss rate
  double gamma_owg = 0.0;  // loss rate into each waveguide port

  static OpticalResonance from_quality_factors(double omega_o, double q_loaded, double q_intrinsic);

  double gamma_o() const { return gamma_o0 + 2.0 * gamma_owg; }
  double q_loaded() const { return omega_o / gamma_o(); }
  double q_intrinsic() const { return omega_o / gamma_o0; }
  std::vector<std::string> check() const;
};

struct MechanicalMode {
  double omega_m = 0.0;
  double gamma_m = 0.0;
  double temperature = 0.0;  // K

  double q() const { return omega_m / gamma_m; }
  std::vector<std::string> check() const;
};

struct CalibrationTone {
  double omega = 0.0;
  double depth = 0.0;  // phase-modulation depth A_phi, rad

  std::vector<std::string> check() const;     // hard errors
  std::vector<std::string> warnings() const;  // depth >= 0.1
};

enum class Window { gaussian, flat_top };

Window parse_window(const std::string& name);
std::string to_string(Window w);

/// Analyzer filter shape centered on zero offset with peak 1 and full width
/// at half maximum `rbw`. The flat-top variant is an order-8 super-Gaussian.
double window_value(Window w, double offset, double rbw);

/// Power transmission |S21|^2 through a two-port resonance.
double s21_sq(double omega, const OpticalResonance& res);

/// Classical occupation k_B T / (hbar omega_m).
double thermal_occupation(double temperature, double omega_m);

struct PsdValue {
  double density = 0.0;      // thermal Lorentzian part
  double tone_weight = 0.0;  // weight of the delta at tone_omega
  double tone_omega = 0.0;
};

/// Measured displacement spectrum, scaled by the transduction T.
PsdValue psd_model(double omega, const MechanicalMode& mech, double g_om, const CalibrationTone* tone,
                   double transduction = 1.0);

struct SpectrumModel {
  MechanicalMode mech;
  double g_om = 0.0;
  std::optional<CalibrationTone> tone;
  double transduction = 1.0;
  /// Polynomial in (omega - omega_m) / (2 pi MHz), in the units of the
  /// bracketed model (multiplied by the transduction like the signal).
  std::vector<double> background;
};

/// Analyzer reading at omega_sa for resolution bandwidth rbw (rad/s):
/// T [rbw 2 g^2 n gamma / (d^2 + gamma^2/4) + (A^2 w_phi^2 / 2) window + bg].
double sa_power(double omega_sa, const SpectrumModel& model, double rbw, Window window = Window::gaussian);

struct SpectrumTrace {
  std::vector<double> omega;  // strictly increasing
  std::vector<double> power;  // W
  double rbw = 0.0;           // rad/s
  double input_power = 0.0;   // W
  std::string scan_id;
  std::string detuning;       // blue, red or peak

  std::size_t size() const { return omega.size(); }
  double step() const;
  std::vector<std::string> check() const;
};

/// Warnings for violations of step << RBW << gamma_m.
std::vector<std::string> sampling_warnings(const SpectrumTrace& trace, double gamma_m);

/// CSV with "# key,value" header rows (rbw_hz, input_power_w, detuning,
/// scan_id, power_unit W|dBm) followed by frequency_hz,power rows.
SpectrumTrace load_trace(const std::filesystem::path& path);
void save_trace(const SpectrumTrace& trace, const std::filesystem::path& path);
std::vector<SpectrumTrace> load_trace_dir(const std::filesystem::path& dir);

struct SimConfig {
  double f_m_hz = 4.488e9;
  double q_m = 600.0;
  double temperature = 295.3;
  double g_om_hz = 649e3;  // g_om / 2 pi
  bool tone_enabled = true;
  double tone_freq_hz = 4.5e9;
  double tone_depth = 0.01;
  Window window = Window::gaussian;
  double rbw_hz = 1e6;
  double center_hz = 4.488e9;
  double span_hz = 100e6;
  double step_hz = 100e3;
  double input_power_w = 1e-3;
  double reference_power_w = 1e-3;
  double transduction = 1e-25;      // at the reference input power
  double detector_exponent = 2.0;   // transduction scales as (P_in / P_ref)^exponent
  double background_rel = 0.05;     // constant background / thermal peak
  double background_slope_rel = 0.002;  // per MHz, relative to the thermal peak
  double noise_rel = 0.0;           // multiplicative Gaussian noise per bin
  double noise_floor_rel = 0.0;     // additive Gaussian noise / thermal peak
  double dither_hz = 0.0;           // dither imprint sidebands at +- dither_hz
  double dither_sideband_rel = 0.0;
  std::string detuning = "blue";

  double omega_m() const;
  double gamma_m() const;
  double transduction_at_input() const;
  SpectrumModel model() const;
  std::vector<std::string> check() const;
  void validate() const;
};

SpectrumTrace simulate_scan(const SimConfig& config, std::uint64_t seed, const std::string& scan_id = "scan-0");

}  // namespace omkit::spectra
