#include <cmath>

#include "cli.hpp"
#include "omkit/constants.hpp"

namespace omkit::cli {

namespace {

void merge(Report& report, const KvConfig& cfg, const std::vector<std::string>& module_problems) {
  for (const auto& p : cfg.problems()) report.problems.push_back(cfg.source() + ": " + p);
  for (const auto& p : module_problems) report.problems.push_back(cfg.source() + ": " + p);
}

}  // namespace

LayoutSpec read_layout(KvConfig& cfg, Report& report) {
  LayoutSpec spec;
  spec.kind = cfg.text("kind", "resonator");
  std::vector<std::string> module;
  auto len = [&](const char* base, double& field) { field = cfg.quantity(base, Dim::length, field); };
  auto count = [&](const char* key, int& field) { field = cfg.integer(key, field); };

  if (spec.kind == "resonator") {
    const std::string preset = cfg.text("preset", "simulation");
    if (preset == "fabrication")
      spec.resonator = geometry::ResonatorParams::fabrication();
    else if (preset != "simulation")
      cfg.add_problem("preset: expected simulation or fabrication, got '" + preset + "'");
    auto& p = spec.resonator;
    len("a", p.a);
    len("r", p.r);
    len("w", p.w);
    len("mirror_q", p.mirror.q);
    len("mirror_v", p.mirror.v);
    len("mirror_p", p.mirror.p);
    len("mirror_u", p.mirror.u);
    len("defect_q", p.defect.q);
    len("defect_v", p.defect.v);
    len("defect_p", p.defect.p);
    len("defect_u", p.defect.u);
    len("d", p.d);
    len("s", p.s);
    len("t", p.t);
    len("chamfer", p.chamfer);
    count("n_defect", p.n_defect);
    count("n_gradient", p.n_gradient);
    count("n_mirror", p.n_mirror);
    count("n_taper", p.n_taper);
    count("snowflake_rows", p.snowflake_rows);
    count("snowflake_margin", p.snowflake_margin);
    const double scale = cfg.number("scale", 1.0);
    if (!(scale > 0))
      cfg.add_problem("scale must be > 0");
    else if (scale != 1.0)
      p = p.scaled(scale);
    module = p.check();
  } else if (spec.kind == "grating") {
    auto& g = spec.grating;
    len("pitch", g.pitch);
    g.fill = cfg.number("fill", g.fill);
    g.eccentricity = cfg.number("eccentricity", g.eccentricity);
    count("n_grates", g.n_grates);
    len("waveguide_width", g.waveguide_width);
    len("etch_depth", g.etch_depth);
    len("thickness", g.thickness);
    len("first_intercept", g.first_intercept);
    g.half_angle_deg = cfg.quantity("half_angle", Dim::angle, g.half_angle_deg);
    len("chord_tolerance", g.chord_tolerance);
    module = g.check();
  } else {
    cfg.add_problem("kind: expected resonator or grating, got '" + spec.kind + "'");
  }
  merge(report, cfg, module);
  return spec;
}

SimSpec read_sim(KvConfig& cfg, Report& report) {
  SimSpec spec;
  auto& s = spec.sim;
  auto freq = [&](const char* base, double& field) { field = cfg.quantity(base, Dim::frequency, field); };
  freq("f_m", s.f_m_hz);
  s.q_m = cfg.number("q_m", s.q_m);
  s.temperature = cfg.quantity("temperature", Dim::temperature, s.temperature);
  freq("g_om", s.g_om_hz);
  s.tone_enabled = cfg.flag("tone_enabled", s.tone_enabled);
  freq("tone_freq", s.tone_freq_hz);
  s.tone_depth = cfg.number("tone_depth_rad", s.tone_depth);
  const std::string window = cfg.text("window", spectra::to_string(s.window));
  try {
    s.window = spectra::parse_window(window);
  } catch (const std::invalid_argument& e) {
    cfg.add_problem(std::string("window: ") + e.what());
  }
  freq("rbw", s.rbw_hz);
  freq("center", s.center_hz);
  freq("span", s.span_hz);
  freq("step", s.step_hz);
  s.input_power_w = cfg.quantity("input_power", Dim::power, s.input_power_w);
  s.reference_power_w = cfg.quantity("reference_power", Dim::power, s.reference_power_w);
  s.transduction = cfg.number("transduction", s.transduction);
  s.detector_exponent = cfg.number("detector_exponent", s.detector_exponent);
  s.background_rel = cfg.number("background_rel", s.background_rel);
  s.background_slope_rel = cfg.number("background_slope_rel_per_mhz", s.background_slope_rel);
  s.noise_rel = cfg.number("noise_rel", s.noise_rel);
  s.noise_floor_rel = cfg.number("noise_floor_rel", s.noise_floor_rel);
  freq("dither", s.dither_hz);
  s.dither_sideband_rel = cfg.number("dither_sideband_rel", s.dither_sideband_rel);
  const std::string detuning = cfg.text("detuning", s.detuning);
  if (detuning == "alternate") {
    spec.alternate_detuning = true;
    s.detuning = "blue";
  } else if (detuning == "blue" || detuning == "red" || detuning == "peak") {
    s.detuning = detuning;
  } else {
    cfg.add_problem("detuning: expected blue, red, peak or alternate, got '" + detuning + "'");
  }
  spec.red_transduction_rel = cfg.number("red_transduction_rel", spec.red_transduction_rel);
  std::vector<std::string> module = s.check();
  if (!(spec.red_transduction_rel > 0)) module.push_back("red_transduction_rel must be > 0");
  merge(report, cfg, module);

  if (s.tone_enabled && s.tone_depth > 0) {
    const spectra::CalibrationTone tone{constants::two_pi * s.tone_freq_hz, s.tone_depth};
    for (const auto& w : tone.warnings()) report.warnings.push_back(cfg.source() + ": " + w);
  }
  if (s.rbw_hz > 0 && s.step_hz > s.rbw_hz / 3.0)
    report.warnings.push_back(cfg.source() + ": step_hz should be well below rbw_hz");
  if (s.q_m > 0 && s.rbw_hz > s.f_m_hz / s.q_m / 3.0)
    report.warnings.push_back(cfg.source() + ": rbw_hz should be well below the mechanical linewidth");
  return spec;
}

LockSpec read_lock(KvConfig& cfg, Report& report) {
  LockSpec spec;
  auto& p = spec.plant;
  auto& l = spec.lock;
  p.lambda_nm = cfg.quantity("lambda", Dim::length, p.lambda_nm);
  p.q_loaded = cfg.number("q_loaded", p.q_loaded);
  p.q_intrinsic = cfg.number("q_intrinsic", p.q_intrinsic);
  p.eta = cfg.number("eta", p.eta);
  p.center.rate = cfg.number("center_drift_nm_per_s", p.center.rate);
  p.center.walk_sigma = cfg.number("center_walk_nm_per_sqrt_s", p.center.walk_sigma);
  p.center.walk_time = cfg.quantity("center_walk_time", Dim::time, p.center.walk_time);
  p.eta_drift.rate = cfg.number("eta_drift_per_s", p.eta_drift.rate);
  p.eta_drift.walk_sigma = cfg.number("eta_walk_per_sqrt_s", p.eta_drift.walk_sigma);
  p.eta_drift.walk_time = cfg.quantity("eta_walk_time", Dim::time, p.eta_drift.walk_time);
  p.eta_step_time = cfg.quantity("eta_step_time", Dim::time, p.eta_step_time);
  p.eta_step_factor = cfg.number("eta_step_factor", p.eta_step_factor);
  p.eta_mod_depth = cfg.number("eta_mod_depth", p.eta_mod_depth);
  p.eta_mod_hz = cfg.quantity("eta_mod", Dim::frequency, p.eta_mod_hz);

  const std::string mode = cfg.text("mode", "dither");
  if (mode == "side")
    l.mode = locksim::LockMode::side;
  else if (mode != "dither")
    cfg.add_problem("mode: expected dither or side, got '" + mode + "'");
  l.dither_hz = cfg.quantity("dither", Dim::frequency, l.dither_hz);
  if (auto a = cfg.quantity("dither_amplitude", Dim::length)) l.dither_amplitude_nm = *a;
  l.harmonic = cfg.integer("harmonic", l.harmonic);
  l.time_constant = cfg.quantity("time_constant", Dim::time, l.time_constant);
  const auto kp = cfg.number("kp");
  const auto ki = cfg.number("ki_per_s");
  const auto kd = cfg.number("kd_s");
  const auto limit = cfg.number("integral_limit_nm");
  if (kp || ki || kd || limit) {
    locksim::PidGains g;
    g.kp = kp.value_or(0.0);
    g.ki = ki.value_or(0.0);
    g.kd = kd.value_or(0.0);
    if (limit) g.integral_limit = *limit;
    l.gains = g;
  }
  l.sample_rate = cfg.quantity("sample_rate", Dim::frequency, l.sample_rate);
  l.start_offset = cfg.number("start_offset_linewidths", l.start_offset);
  l.polarity = cfg.integer("polarity", l.polarity);
  l.loss_threshold = cfg.number("loss_threshold_linewidths", l.loss_threshold);
  spec.duration = cfg.quantity("duration", Dim::time, spec.duration);

  std::vector<std::string> module = p.check();
  for (auto& m : l.check()) module.push_back(m);
  if (!(spec.duration > 0)) module.push_back("duration must be > 0");
  merge(report, cfg, module);
  return spec;
}

Report validate_config(const std::string& kind, KvConfig& cfg) {
  Report report;
  if (kind == "layout")
    read_layout(cfg, report);
  else if (kind == "sim")
    read_sim(cfg, report);
  else if (kind == "lock")
    read_lock(cfg, report);
  else
    throw UsageError("unknown config kind '" + kind + "' (expected layout, sim or lock)");
  return report;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t hash) {
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace omkit::cli
