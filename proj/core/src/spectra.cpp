#include "omkit/spectra.hpp"

#include <cmath>
#include <random>

#include "omkit/constants.hpp"
#include "omkit/errors.hpp"

namespace omkit::spectra {

namespace {

constexpr double kTwoPi = constants::two_pi;
constexpr double kMHz = kTwoPi * 1e6;  // 1 MHz in rad/s

}  // namespace

OpticalResonance OpticalResonance::from_quality_factors(double omega_o, double q_loaded, double q_intrinsic) {
  if (!(omega_o > 0) || !(q_loaded > 0) || !(q_loaded < q_intrinsic))
    throw std::invalid_argument("resonance: need omega_o > 0 and 0 < Q_loaded < Q_intrinsic");
  OpticalResonance r;
  r.omega_o = omega_o;
  r.gamma_o0 = omega_o / q_intrinsic;
  r.gamma_owg = 0.5 * (omega_o / q_loaded - r.gamma_o0);
  return r;
}

std::vector<std::string> OpticalResonance::check() const {
  std::vector<std::string> p;
  if (!(omega_o > 0)) p.push_back("omega_o must be > 0");
  if (!(gamma_o0 > 0)) p.push_back("gamma_o0 must be > 0");
  if (!(gamma_owg >= 0)) p.push_back("gamma_owg must be >= 0");
  return p;
}

std::vector<std::string> MechanicalMode::check() const {
  std::vector<std::string> p;
  if (!(omega_m > 0)) p.push_back("omega_m must be > 0");
  if (!(gamma_m > 0)) p.push_back("gamma_m must be > 0");
  if (!(temperature > 0)) p.push_back("temperature must be > 0");
  return p;
}

std::vector<std::string> CalibrationTone::check() const {
  std::vector<std::string> p;
  if (!(omega > 0)) p.push_back("tone frequency must be > 0");
  if (!(depth > 0)) p.push_back("tone depth must be > 0");
  return p;
}

std::vector<std::string> CalibrationTone::warnings() const {
  if (depth >= 0.1)
    return {"tone depth " + std::to_string(depth) + " rad is not small; the first-order sideband model degrades"};
  return {};
}

Window parse_window(const std::string& name) {
  if (name == "gaussian") return Window::gaussian;
  if (name == "flat_top" || name == "flattop") return Window::flat_top;
  throw std::invalid_argument("unknown window '" + name + "' (expected gaussian or flat_top)");
}

std::string to_string(Window w) { return w == Window::gaussian ? "gaussian" : "flat_top"; }

double window_value(Window w, double offset, double rbw) {
  const double u = 2.0 * offset / rbw;  // +-1 at half maximum
  if (w == Window::gaussian) return std::exp(-std::log(2.0) * u * u);
  const double u2 = u * u;
  return std::exp(-std::log(2.0) * u2 * u2 * u2 * u2);
}

double s21_sq(double omega, const OpticalResonance& res) {
  const double d = omega - res.omega_o;
  const double half = 0.5 * res.gamma_o();
  return res.gamma_owg * res.gamma_owg / (d * d + half * half);
}

double thermal_occupation(double temperature, double omega_m) {
  if (!(temperature > 0) || !(omega_m > 0)) throw std::domain_error("thermal_occupation: T and omega_m must be > 0");
  return constants::boltzmann * temperature / (constants::hbar * omega_m);
}

PsdValue psd_model(double omega, const MechanicalMode& mech, double g_om, const CalibrationTone* tone,
                   double transduction) {
  throw_if_any(mech.check());
  if (!(omega > 0)) throw std::domain_error("psd_model: omega must be > 0");
  const double n = thermal_occupation(mech.temperature, mech.omega_m);
  const double d = omega - mech.omega_m;
  PsdValue v;
  v.density = transduction * g_om * g_om * n * mech.gamma_m / (d * d + 0.25 * mech.gamma_m * mech.gamma_m);
  if (tone) {
    v.tone_omega = tone->omega;
    v.tone_weight = transduction * tone->depth * tone->depth * tone->omega * tone->omega / 4.0 * kTwoPi;
  }
  return v;
}

double sa_power(double omega_sa, const SpectrumModel& model, double rbw, Window window) {
  const auto& m = model.mech;
  const double n = thermal_occupation(m.temperature, m.omega_m);
  const double d = omega_sa - m.omega_m;
  double bracket = rbw * 2.0 * model.g_om * model.g_om * n * m.gamma_m / (d * d + 0.25 * m.gamma_m * m.gamma_m);
  if (model.tone) {
    const auto& t = *model.tone;
    bracket += 0.5 * t.depth * t.depth * t.omega * t.omega * window_value(window, omega_sa - t.omega, rbw);
  }
  if (!model.background.empty()) {
    const double x = d / kMHz;
    double bg = 0.0;
    for (auto it = model.background.rbegin(); it != model.background.rend(); ++it) bg = bg * x + *it;
    bracket += bg;
  }
  return model.transduction * bracket;
}

double SpectrumTrace::step() const {
  if (omega.size() < 2) return 0.0;
  return (omega.back() - omega.front()) / static_cast<double>(omega.size() - 1);
}

std::vector<std::string> SpectrumTrace::check() const {
  std::vector<std::string> p;
  if (omega.size() < 2) p.push_back("trace needs at least two samples");
  if (omega.size() != power.size()) p.push_back("frequency and power columns differ in length");
  for (std::size_t i = 1; i < omega.size(); ++i)
    if (!(omega[i] > omega[i - 1])) {
      p.push_back("frequencies must be strictly increasing (row " + std::to_string(i + 1) + ")");
      break;
    }
  for (double v : power)
    if (!std::isfinite(v)) {
      p.push_back("power values must be finite");
      break;
    }
  if (!(rbw > 0)) p.push_back("rbw must be > 0");
  return p;
}

std::vector<std::string> sampling_warnings(const SpectrumTrace& trace, double gamma_m) {
  std::vector<std::string> w;
  if (trace.step() > trace.rbw / 5.0)
    w.push_back("frequency step is not small compared with the RBW (step " + std::to_string(trace.step() / kTwoPi) +
                " Hz, RBW " + std::to_string(trace.rbw / kTwoPi) + " Hz)");
  if (trace.rbw > gamma_m / 5.0)
    w.push_back("RBW is not small compared with the mechanical linewidth; the Lorentzian is distorted");
  return w;
}

// ---------------------------------------------------------------------------
// Simulation

double SimConfig::omega_m() const { return kTwoPi * f_m_hz; }
double SimConfig::gamma_m() const { return omega_m() / q_m; }

double SimConfig::transduction_at_input() const {
  return transduction * std::pow(input_power_w / reference_power_w, detector_exponent);
}

SpectrumModel SimConfig::model() const {
  SpectrumModel m;
  m.mech = {omega_m(), gamma_m(), temperature};
  m.g_om = kTwoPi * g_om_hz;
  if (tone_enabled) m.tone = CalibrationTone{kTwoPi * tone_freq_hz, tone_depth};
  m.transduction = transduction_at_input();
  const double rbw = kTwoPi * rbw_hz;
  const double peak = rbw * 8.0 * m.g_om * m.g_om * thermal_occupation(temperature, m.mech.omega_m) / m.mech.gamma_m;
  m.background = {background_rel * peak, background_slope_rel * peak};
  return m;
}

std::vector<std::string> SimConfig::check() const {
  std::vector<std::string> p;
  auto positive = [&](double v, const char* name) {
    if (!(v > 0)) p.push_back(std::string(name) + " must be > 0");
  };
  positive(f_m_hz, "f_m_hz");
  positive(q_m, "q_m");
  positive(temperature, "temperature_k");
  positive(g_om_hz, "g_om_hz");
  positive(rbw_hz, "rbw_hz");
  positive(span_hz, "span_hz");
  positive(step_hz, "step_hz");
  positive(input_power_w, "input_power_w");
  positive(reference_power_w, "reference_power_w");
  positive(transduction, "transduction");
  if (tone_enabled) {
    positive(tone_freq_hz, "tone_freq_hz");
    positive(tone_depth, "tone_depth");
  }
  if (!(center_hz - 0.5 * span_hz > 0)) p.push_back("scan must stay at positive frequencies");
  if (step_hz > span_hz) p.push_back("step_hz must not exceed span_hz");
  if (!(noise_rel >= 0) || !(noise_floor_rel >= 0)) p.push_back("noise levels must be >= 0");
  if (!(dither_hz >= 0) || !(dither_sideband_rel >= 0)) p.push_back("dither parameters must be >= 0");
  return p;
}

void SimConfig::validate() const { throw_if_any(check()); }

SpectrumTrace simulate_scan(const SimConfig& config, std::uint64_t seed, const std::string& scan_id) {
  config.validate();
  const SpectrumModel model = config.model();
  const double rbw = kTwoPi * config.rbw_hz;
  const auto n = static_cast<std::size_t>(std::floor(config.span_hz / config.step_hz + 1e-9)) + 1;
  const double start = config.center_hz - 0.5 * config.span_hz;

  SpectrumModel thermal_only = model;
  thermal_only.tone.reset();
  thermal_only.background.clear();
  const double peak = sa_power(model.mech.omega_m, thermal_only, rbw);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SpectrumTrace trace;
  trace.rbw = rbw;
  trace.input_power = config.input_power_w;
  trace.scan_id = scan_id;
  trace.detuning = config.detuning;
  trace.omega.resize(n);
  trace.power.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = kTwoPi * (start + static_cast<double>(i) * config.step_hz);
    double p = sa_power(w, model, rbw, config.window);
    if (config.dither_sideband_rel > 0 && config.dither_hz > 0) {
      const double dw = kTwoPi * config.dither_hz;
      p += config.dither_sideband_rel * (sa_power(w - dw, thermal_only, rbw) + sa_power(w + dw, thermal_only, rbw));
    }
    if (config.noise_rel > 0) p *= 1.0 + config.noise_rel * normal(rng);
    if (config.noise_floor_rel > 0) p += config.noise_floor_rel * peak * normal(rng);
    trace.omega[i] = w;
    trace.power[i] = p;
  }
  return trace;
}

}  // namespace omkit::spectra
