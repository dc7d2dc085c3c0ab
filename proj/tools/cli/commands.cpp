#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cli.hpp"
#include "json.hpp"
#include "omkit/constants.hpp"
#include "omkit/coupling.hpp"
#include "omkit/errors.hpp"
#include "omkit/layout_io.hpp"
#include "omkit/pec.hpp"
#include "omkit/spectra_fit.hpp"
#include "omkit/threads.hpp"

#ifndef OMKIT_VERSION
#define OMKIT_VERSION "0.0.0"
#endif

namespace omkit::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kTwoPi = constants::two_pi;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  std::string out;
  std::string format = "json";
};

// State shared by one dispatch call. When replaying, outputs go to
// `out_override` while the recorded argv stays untouched.
struct Context {
  std::vector<std::string> args;
  Globals globals;
  std::optional<fs::path> out_override;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  fs::path out_path() const { return out_override ? *out_override : fs::path(globals.out); }
  bool has_out() const { return out_override.has_value() || !globals.out.empty(); }
};

class Hasher {
 public:
  void text(std::string_view s) {
    h_ = fnv1a(s, h_);
    h_ = fnv1a(std::string_view("\0", 1), h_);
  }
  void file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    text(ss.str());
  }
  std::string hex() const {
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << h_;
    return ss.str();
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

void require_file(const fs::path& p, const std::string& what) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw FileError(what + " not found: " + p.string());
}

void require_dir(const fs::path& p, const std::string& what) {
  std::error_code ec;
  if (!fs::is_directory(p, ec)) throw FileError(what + " not found: " + p.string());
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << content;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FileError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json provenance(const Context& ctx, const std::string& command, const Hasher& hash) {
  json p;
  p["tool"] = "omkit";
  p["version"] = OMKIT_VERSION;
  p["command"] = command;
  p["argv"] = ctx.args;
  p["config_hash"] = "fnv1a64:" + hash.hex();
  p["seed"] = ctx.globals.seed ? json(*ctx.globals.seed) : json(nullptr);
  return p;
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& rows) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, rows);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), rows);
  } else {
    rows.emplace_back(prefix, j.is_string() ? j.get<std::string>() : j.dump());
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render(const json& j, const std::string& format) {
  if (format == "csv") {
    std::vector<std::pair<std::string, std::string>> rows;
    flatten(j, "", rows);
    std::string out = "key,value\n";
    for (const auto& [k, v] : rows) out += csv_field(k) + "," + csv_field(v) + "\n";
    return out;
  }
  return j.dump(2) + "\n";
}

// Result files named by --out get the result itself; otherwise it goes to
// stdout.
void emit_result(const Context& ctx, const json& j, const std::string& table_csv = {}) {
  const std::string text = ctx.globals.format == "csv" && !table_csv.empty() ? table_csv : render(j, ctx.globals.format);
  if (ctx.has_out())
    write_file(ctx.out_path(), text);
  else
    *ctx.out << text;
}

void emit_summary(const Context& ctx, const json& j) { *ctx.out << render(j, ctx.globals.format); }

std::string number(double v) { return json(v).dump(); }

json bounds_json(const geometry::BoundingBox& b) {
  return {{"min_nm", {b.min.x, b.min.y}}, {"max_nm", {b.max.x, b.max.y}}};
}

fs::path require_out(const Context& ctx, const std::string& command) {
  if (!ctx.has_out()) throw UsageError(command + ": --out is required");
  return ctx.out_path();
}

// ---------------------------------------------------------------- layout

struct LayoutArgs {
  std::string params;
  std::string preset;
};

int run_layout(Context& ctx, const LayoutArgs& a) {
  Hasher hash;
  KvConfig cfg = KvConfig::parse("", "<defaults>");
  if (!a.params.empty()) {
    require_file(a.params, "layout parameter file");
    cfg = KvConfig::load(a.params);
    hash.file(a.params);
  }
  if (!a.preset.empty()) {
    if (cfg.has("preset")) throw UsageError("layout: preset given both on the command line and in the config");
    cfg = KvConfig::parse(cfg.canonical() + "preset = " + a.preset + "\n", cfg.source());
  }
  hash.text(cfg.canonical());
  Report report;
  const LayoutSpec spec = read_layout(cfg, report);
  throw_if_any(report.problems);
  const fs::path out = require_out(ctx, "layout");

  const geometry::Layout layout =
      spec.kind == "grating" ? geometry::grating_layout(spec.grating) : geometry::vertebrae_layout(spec.resonator);
  geometry::save_layout(layout, out);

  json j;
  j["kind"] = spec.kind;
  j["polygons"] = layout.polygons.size();
  j["vertices"] = layout.vertex_count();
  j["bounds"] = bounds_json(layout.bounds());
  if (spec.kind == "resonator") {
    j["symmetry"] = {
        {"mirror_x_nm", geometry::symmetry_check(layout, geometry::MirrorPlane::x_equals(0)).max_distance},
        {"mirror_y_nm", geometry::symmetry_check(layout, geometry::MirrorPlane::y_equals(0)).max_distance}};
    j["cell_centers_nm"] = geometry::cell_centers(spec.resonator);
  }
  j["warnings"] = report.warnings;
  j["provenance"] = provenance(ctx, "layout", hash);
  emit_summary(ctx, j);
  return kOk;
}

// ---------------------------------------------------------------- pec

struct PecArgs {
  std::string layout;
  std::string target;
  std::string psf;
  double pixel = 2.0;
  double margin = 1000.0;
  double tol = 1e-3;
  int max_iter = 200;
  double damping = 1.0;
};

pec::PsfModel load_psf_arg(const std::string& path, Hasher& hash) {
  if (path.empty()) {
    hash.text("psf:gaas-250nm");
    return pec::PsfModel::gaas_250nm();
  }
  require_file(path, "PSF file");
  hash.file(path);
  pec::PsfModel m = pec::load_psf(path);
  m.validate();
  return m;
}

json dose_stats(const pec::DoseMap& dose, const pec::DoseMap* mask) {
  double mx = 0.0, mn = 1e300, sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < dose.values.size(); ++i) {
    mx = std::max(mx, dose.values[i]);
    if (mask && mask->values[i] > 0) {
      mn = std::min(mn, dose.values[i]);
      sum += dose.values[i];
      ++n;
    }
  }
  json j = {{"nx", dose.nx}, {"ny", dose.ny}, {"pixel_nm", dose.pixel}, {"origin_nm", {dose.origin_x, dose.origin_y}},
            {"max", mx}};
  if (n > 0) j["exposed"] = {{"pixels", n}, {"min", mn}, {"mean", sum / static_cast<double>(n)}};
  return j;
}

int run_pec_forward(Context& ctx, const PecArgs& a) {
  Hasher hash;
  if (a.layout.empty()) throw UsageError("pec forward: --layout is required");
  require_file(a.layout, "layout file");
  hash.file(a.layout);
  const pec::PsfModel psf = load_psf_arg(a.psf, hash);
  if (!(a.pixel > 0)) throw ValidationError({"pixel must be > 0"});
  if (!(a.margin >= 0)) throw ValidationError({"margin must be >= 0"});
  hash.text("pixel=" + number(a.pixel) + " margin=" + number(a.margin));
  const fs::path out = require_out(ctx, "pec forward");

  const geometry::Layout layout = geometry::load_layout(a.layout);
  const pec::DoseMap written = pec::rasterize(layout, a.pixel, a.margin);
  const pec::DoseMap deposited = pec::convolve_dose(written, psf);
  pec::save_dose(deposited, out);

  json j;
  j["deposited"] = dose_stats(deposited, &written);
  j["written_total"] = written.total();
  j["provenance"] = provenance(ctx, "pec forward", hash);
  emit_summary(ctx, j);
  return kOk;
}

int run_pec_correct(Context& ctx, const PecArgs& a) {
  Hasher hash;
  if (a.target.empty()) throw UsageError("pec correct: --target is required");
  require_file(a.target, "target file");
  hash.file(a.target);
  const pec::PsfModel psf = load_psf_arg(a.psf, hash);
  std::vector<std::string> problems;
  if (!(a.tol > 0)) problems.push_back("tol must be > 0");
  if (a.max_iter < 1) problems.push_back("max-iter must be >= 1");
  if (!(a.damping > 0 && a.damping <= 2)) problems.push_back("damping must lie in (0, 2]");
  if (!(a.pixel > 0)) problems.push_back("pixel must be > 0");
  throw_if_any(problems);
  hash.text("tol=" + number(a.tol) + " max_iter=" + std::to_string(a.max_iter) + " damping=" + number(a.damping) +
            " pixel=" + number(a.pixel) + " margin=" + number(a.margin));
  const fs::path out = require_out(ctx, "pec correct");

  pec::DoseMap target;
  if (fs::path(a.target).extension() == ".json")
    target = pec::exposure_target(pec::rasterize(geometry::load_layout(a.target), a.pixel, a.margin));
  else
    target = pec::load_dose(a.target);
  pec::CorrectionOptions opt;
  opt.tolerance = a.tol;
  opt.max_iterations = a.max_iter;
  opt.damping = a.damping;
  const pec::CorrectionResult r = pec::correct_dose(target, psf, opt);
  pec::save_dose(r.dose, out);

  json j;
  j["residual"] = r.residual;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["dose"] = dose_stats(r.dose, &target);
  j["provenance"] = provenance(ctx, "pec correct", hash);
  emit_summary(ctx, j);
  if (!r.converged) {
    *ctx.err << "pec correct: residual " << r.residual << " above tolerance " << a.tol << " after " << r.iterations
             << " iterations; best iterate written\n";
    return kRuntimeError;
  }
  return kOk;
}

// ---------------------------------------------------------------- gom

struct GomArgs {
  std::string mesh;
  std::string material;
  bool no_traces = false;
};

json complex_hz(std::complex<double> g) {
  return {{"re", g.real() / kTwoPi}, {"im", g.imag() / kTwoPi}, {"abs", std::abs(g) / kTwoPi}};
}

int run_gom(Context& ctx, const GomArgs& a) {
  Hasher hash;
  if (a.mesh.empty()) throw UsageError("gom: --mesh is required");
  require_file(a.mesh, "field file");
  hash.file(a.mesh);
  coupling::MaterialProps mat = coupling::MaterialProps::gaas();
  if (!a.material.empty()) {
    require_file(a.material, "material file");
    hash.file(a.material);
    mat = coupling::load_material(a.material);
  } else {
    hash.text("material:gaas");
  }
  mat.validate();
  hash.text(a.no_traces ? "traces=off" : "traces=on");

  const coupling::FieldMesh mesh = coupling::load_field_mesh(a.mesh);
  mesh.validate();
  coupling::SurfaceOptions so;
  so.use_traces = !a.no_traces;
  const coupling::CouplingResult r = coupling::g_om_total(mesh, mat, so);

  json j;
  j["g_mb_hz"] = complex_hz(r.g_mb);
  j["g_pe_hz"] = complex_hz(r.g_pe);
  j["g_om_hz"] = r.g_om / kTwoPi;
  j["omega_o_hz"] = mesh.omega_o / kTwoPi;
  j["omega_m_hz"] = mesh.omega_m / kTwoPi;
  j["mesh"] = {{"nodes", r.stats.nodes},
               {"cells", r.stats.cells},
               {"solid_cells", r.stats.solid_cells},
               {"facets", r.stats.facets},
               {"solid_volume_m3", r.stats.solid_volume},
               {"total_volume_m3", r.stats.total_volume},
               {"boundary_area_m2", r.stats.boundary_area}};
  j["warnings"] = r.warnings;
  j["provenance"] = provenance(ctx, "gom", hash);
  emit_result(ctx, j);
  return kOk;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string traces;
  double tone_freq = 0.0;   // Hz
  double tone_depth = 0.0;  // rad
  double temp = 0.0;        // K
  double temp_sigma = 0.0;
  double depth_sigma = 0.0;
  int background_order = 2;
  std::string window = "gaussian";
};

int run_fit(Context& ctx, const FitArgs& a) {
  Hasher hash;
  if (a.traces.empty()) throw UsageError("fit: --traces is required");
  require_dir(a.traces, "trace directory");
  std::vector<std::string> problems;
  if (!(a.tone_freq > 0)) problems.push_back("tone-freq must be > 0 (Hz)");
  if (!(a.tone_depth > 0)) problems.push_back("tone-depth must be > 0 (rad)");
  if (!(a.temp > 0)) problems.push_back("temp must be > 0 (K)");
  if (a.temp_sigma < 0 || a.depth_sigma < 0) problems.push_back("systematic uncertainties must be >= 0");
  if (a.background_order < 0 || a.background_order > spectra::kMaxBackgroundOrder)
    problems.push_back("background-order must be in [0, " + std::to_string(spectra::kMaxBackgroundOrder) + "]");
  spectra::Window window = spectra::Window::gaussian;
  try {
    window = spectra::parse_window(a.window);
  } catch (const std::invalid_argument& e) {
    problems.push_back(e.what());
  }
  throw_if_any(problems);

  const std::vector<spectra::SpectrumTrace> traces = spectra::load_trace_dir(a.traces);
  if (traces.empty()) throw FileError("no *.csv traces in " + a.traces);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.traces))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) hash.file(f);
  hash.text("tone=" + number(a.tone_freq) + "," + number(a.tone_depth) + " temp=" + number(a.temp) + " sys=" +
            number(a.temp_sigma) + "," + number(a.depth_sigma) + " order=" + std::to_string(a.background_order) +
            " window=" + a.window);

  const spectra::CalibrationTone tone{kTwoPi * a.tone_freq, a.tone_depth};
  spectra::PipelineOptions popt;
  popt.background_order = a.background_order;
  popt.window = window;

  // Scans are independent; results are collected in file order.
  struct Outcome {
    std::optional<spectra::ScanFit> fit;
    std::string error;
  };
  std::vector<Outcome> outcomes(traces.size());
  auto work = [&](std::size_t i) {
    try {
      outcomes[i].fit = spectra::analyze_scan(traces[i], tone, popt);
    } catch (const spectra::FitError& e) {
      outcomes[i].error = e.what();
    }
  };
  const std::size_t workers = std::min(traces.size(), worker_threads());
  if (workers <= 1) {
    for (std::size_t i = 0; i < traces.size(); ++i) work(i);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < traces.size(); i += workers) work(i);
      }));
    for (auto& j : jobs) j.get();
  }

  std::vector<spectra::ScanFit> fits;
  json skipped = json::array();
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (outcomes[i].fit) {
      fits.push_back(*outcomes[i].fit);
      for (const auto& w : spectra::sampling_warnings(traces[i], outcomes[i].fit->lorentzian.gamma_m))
        warnings.push_back(traces[i].scan_id + ": " + w);
    } else {
      skipped.push_back({{"scan_id", traces[i].scan_id}, {"reason", outcomes[i].error}});
    }
  }
  if (fits.empty()) throw spectra::FitError("fit: no scan could be fitted");
  const spectra::ExtractionResult r =
      spectra::extract_gom(fits, tone, a.temp, spectra::Systematics{a.temp_sigma, a.depth_sigma});
  for (const auto& w : r.warnings) warnings.push_back(w);

  json scans = json::array();
  std::string table = "scan_id,detuning,input_power_w,f_m_hz,gamma_m_hz,amplitude,tone_peak_w,factor,factor_sigma,g_om_hz\n";
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    const double g_hz = r.per_scan_g[i] / kTwoPi;
    scans.push_back({{"scan_id", f.scan_id},
                     {"detuning", f.detuning},
                     {"input_power_w", f.input_power},
                     {"f_m_hz", f.lorentzian.omega_m / kTwoPi},
                     {"gamma_m_hz", f.lorentzian.gamma_m / kTwoPi},
                     {"amplitude", f.lorentzian.amplitude},
                     {"tone_peak_w", f.tone.peak_power},
                     {"factor", f.factor},
                     {"factor_sigma", f.factor_sigma},
                     {"g_om_hz", g_hz}});
    table += csv_field(f.scan_id) + "," + csv_field(f.detuning) + "," + number(f.input_power) + "," +
             number(f.lorentzian.omega_m / kTwoPi) + "," + number(f.lorentzian.gamma_m / kTwoPi) + "," +
             number(f.lorentzian.amplitude) + "," + number(f.tone.peak_power) + "," + number(f.factor) + "," +
             number(f.factor_sigma) + "," + number(g_hz) + "\n";
  }

  json j;
  j["g_om_hz"] = r.g_om / kTwoPi;
  j["sigma_stat_hz"] = r.sigma_stat / kTwoPi;
  j["sigma_sys_hz"] = r.sigma_sys / kTwoPi;
  j["chi2_red"] = r.chi2_red;
  j["n_scans"] = fits.size();
  j["skipped"] = skipped;
  j["scans"] = scans;
  j["warnings"] = warnings;
  j["provenance"] = provenance(ctx, "fit", hash);
  emit_result(ctx, j, table);
  return kOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  int scans = 1;
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int run_simulate(Context& ctx, const SimulateArgs& a) {
  Hasher hash;
  if (a.config.empty()) throw UsageError("simulate: --config is required");
  require_file(a.config, "config file");
  KvConfig cfg = KvConfig::load(a.config);
  hash.text(cfg.canonical());
  Report report;
  const SimSpec spec = read_sim(cfg, report);
  if (a.scans < 1) report.problems.push_back("scans must be >= 1");
  throw_if_any(report.problems);
  const fs::path out = require_out(ctx, "simulate");
  const std::uint64_t seed = ctx.globals.seed.value_or(1);
  hash.text("scans=" + std::to_string(a.scans));

  fs::create_directories(out);
  json list = json::array();
  for (int i = 0; i < a.scans; ++i) {
    spectra::SimConfig sc = spec.sim;
    if (spec.alternate_detuning && i % 2 == 1) {
      sc.detuning = "red";
      sc.transduction *= spec.red_transduction_rel;
    }
    char name[32];
    std::snprintf(name, sizeof name, "scan-%03d", i);
    const std::uint64_t s = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i)));
    const spectra::SpectrumTrace t = spectra::simulate_scan(sc, s, name);
    const std::string file = std::string(name) + ".csv";
    spectra::save_trace(t, out / file);
    list.push_back({{"file", file}, {"scan_id", name}, {"detuning", sc.detuning}, {"seed", s}});
  }

  json j;
  j["scans"] = list;
  j["truth"] = {{"g_om_hz", spec.sim.g_om_hz},
                {"f_m_hz", spec.sim.f_m_hz},
                {"q_m", spec.sim.q_m},
                {"temperature_k", spec.sim.temperature},
                {"tone_freq_hz", spec.sim.tone_freq_hz},
                {"tone_depth_rad", spec.sim.tone_depth}};
  j["warnings"] = report.warnings;
  j["provenance"] = provenance(ctx, "simulate", hash);
  write_file(out / "manifest.json", j.dump(2) + "\n");
  emit_summary(ctx, j);
  return kOk;
}

// ---------------------------------------------------------------- lock-sim

struct LockArgs {
  std::string config;
  std::optional<double> duration;
};

int run_lock_sim(Context& ctx, const LockArgs& a) {
  Hasher hash;
  KvConfig cfg = KvConfig::parse("", "<defaults>");
  if (!a.config.empty()) {
    require_file(a.config, "config file");
    cfg = KvConfig::load(a.config);
  }
  hash.text(cfg.canonical());
  Report report;
  LockSpec spec = read_lock(cfg, report);
  if (a.duration) {
    spec.duration = *a.duration;
    if (!(spec.duration > 0)) report.problems.push_back("duration must be > 0");
  }
  throw_if_any(report.problems);
  hash.text("duration=" + number(spec.duration));
  const std::uint64_t seed = ctx.globals.seed.value_or(1);

  const locksim::LockResult r = locksim::run_lock(spec.plant, spec.lock, spec.duration, seed);

  json j;
  j["mode"] = spec.lock.mode == locksim::LockMode::side ? "side" : "dither";
  j["harmonic"] = spec.lock.harmonic;
  j["target_offset_linewidths"] = r.target_offset;
  j["final_offset_linewidths"] = r.final_offset;
  j["max_tail_error_linewidths"] = r.max_tail_error;
  j["converged"] = r.converged;
  j["lost"] = r.lost;
  j["loss_time_s"] = r.lost ? json(r.loss_time) : json(nullptr);
  j["polarity"] = r.polarity;
  j["dither_amplitude_nm"] = r.dither_amplitude_nm;
  j["gains"] = {{"kp", r.gains.kp}, {"ki_per_s", r.gains.ki}, {"kd_s", r.gains.kd}, {"integral_limit_nm", r.gains.integral_limit}};
  j["duration_s"] = spec.duration;
  j["warnings"] = report.warnings;
  j["provenance"] = provenance(ctx, "lock-sim", hash);

  if (ctx.has_out()) {
    const fs::path out = ctx.out_path();
    std::string text;
    if (out.extension() == ".json") {
      json traj = json::array();
      for (const auto& p : r.trajectory)
        traj.push_back({p.t, p.lambda_nm, p.demod, p.transmission, p.offset, p.locked});
      json full = j;
      full["trajectory_columns"] = {"t_s", "lambda_nm", "demod", "transmission", "offset_linewidths", "locked"};
      full["trajectory"] = traj;
      text = full.dump(2) + "\n";
    } else {
      text = "t_s,lambda_nm,demod,transmission,offset_linewidths,locked\n";
      for (const auto& p : r.trajectory)
        text += number(p.t) + "," + number(p.lambda_nm) + "," + number(p.demod) + "," + number(p.transmission) + "," +
                number(p.offset) + "," + (p.locked ? "1" : "0") + "\n";
    }
    write_file(out, text);
  }
  emit_summary(ctx, j);
  return kOk;
}

// ---------------------------------------------------------------- validate

struct ValidateArgs {
  std::string kind;
  std::string config;
};

int run_validate(Context& ctx, const ValidateArgs& a) {
  require_file(a.config, "config file");
  KvConfig cfg = KvConfig::load(a.config);
  const Report report = validate_config(a.kind, cfg);
  json j = {{"ok", report.ok()}, {"problems", report.problems}, {"warnings", report.warnings}};
  emit_summary(ctx, j);
  return report.ok() ? kOk : kConfigError;
}

// ---------------------------------------------------------------- replay

int dispatch_with(Context& ctx);

std::map<std::string, std::string> snapshot(const fs::path& p) {
  std::map<std::string, std::string> files;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::recursive_directory_iterator(p))
      if (e.is_regular_file()) files[fs::relative(e.path(), p).generic_string()] = read_file(e.path());
  } else if (fs::is_regular_file(p)) {
    files[""] = read_file(p);
  }
  return files;
}

int run_replay(Context& ctx, const std::string& result_path) {
  require_file(result_path, "result file");
  json result;
  try {
    result = json::parse(read_file(result_path));
  } catch (const json::exception& e) {
    throw ValidationError({result_path + ": not a JSON result (" + e.what() + ")"});
  }
  if (!result.contains("provenance") || !result["provenance"].contains("argv"))
    throw ValidationError({result_path + ": no provenance block"});
  const std::vector<std::string> argv = result["provenance"]["argv"].get<std::vector<std::string>>();
  if (!argv.empty() && argv.front() == "replay") throw ValidationError({"cannot replay a replay"});

  // Recover the original --out, then rerun with outputs redirected.
  std::string orig_out;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (argv[i] == "--out" && i + 1 < argv.size()) orig_out = argv[i + 1];
    if (argv[i].rfind("--out=", 0) == 0) orig_out = argv[i].substr(6);
  }
  const fs::path scratch =
      fs::temp_directory_path() / ("omkit-replay-" + std::to_string(fnv1a(read_file(result_path))));
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  const fs::path new_out = scratch / (orig_out.empty() ? "out" : fs::path(orig_out).filename());

  Context inner;
  inner.args = argv;
  if (!orig_out.empty()) inner.out_override = new_out;
  std::ostringstream inner_out, inner_err;
  inner.out = &inner_out;
  inner.err = &inner_err;
  const int code = dispatch_with(inner);

  json differences = json::array();
  const bool result_is_out = !orig_out.empty() && fs::exists(orig_out) && fs::equivalent(orig_out, result_path);
  if (!result_is_out) {
    if (inner_out.str() != read_file(result_path)) differences.push_back(result_path);
  }
  if (!orig_out.empty() && fs::exists(orig_out)) {
    const auto before = snapshot(orig_out);
    const auto after = snapshot(new_out);
    if (before != after) differences.push_back(orig_out);
  }
  fs::remove_all(scratch);

  json j = {{"identical", differences.empty() && code == kOk},
            {"exit_code", code},
            {"argv", argv},
            {"differences", differences}};
  emit_summary(ctx, j);
  if (code != kOk) *ctx.err << inner_err.str();
  return differences.empty() && code == kOk ? kOk : kRuntimeError;
}

// ---------------------------------------------------------------- dispatch

int dispatch_with(Context& ctx) {
  std::ostream& out = *ctx.out;
  std::ostream& err = *ctx.err;
  CLI::App app{"omkit: resonator layout, proximity correction, optomechanical coupling and measurement tools",
               "omkit"};
  app.require_subcommand(1);
  Globals& g = ctx.globals;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");
  app.add_option("--out", g.out, "Output file or directory");
  app.add_option("--format", g.format, "Summary format")->check(CLI::IsMember({"json", "csv"}));

  LayoutArgs la;
  auto* layout = app.add_subcommand("layout", "Generate a resonator or grating coupler layout (JSON or SVG by --out extension)");
  layout->add_option("--params", la.params, "Key-value parameter file");
  layout->add_option("--preset", la.preset, "simulation or fabrication");

  PecArgs pa;
  auto* pec_cmd = app.add_subcommand("pec", "Proximity-effect dose convolution and correction");
  pec_cmd->require_subcommand(1);
  auto* forward = pec_cmd->add_subcommand("forward", "Deposited dose of a layout written at unit dose");
  forward->add_option("--layout", pa.layout, "Layout JSON");
  forward->add_option("--psf", pa.psf, "PSF JSON (default: built-in GaAs 250 nm model)");
  forward->add_option("--pixel", pa.pixel, "Pixel size, nm");
  forward->add_option("--margin", pa.margin, "Margin around the layout, nm");
  auto* correct = pec_cmd->add_subcommand("correct", "Written dose whose deposited dose matches a target");
  correct->add_option("--target", pa.target, "Target dose file, or layout JSON to rasterize");
  correct->add_option("--psf", pa.psf, "PSF JSON (default: built-in GaAs 250 nm model)");
  correct->add_option("--pixel", pa.pixel, "Pixel size for layout targets, nm");
  correct->add_option("--margin", pa.margin, "Margin for layout targets, nm");
  correct->add_option("--tol", pa.tol, "Max residual on exposed pixels");
  correct->add_option("--max-iter", pa.max_iter, "Iteration cap");
  correct->add_option("--damping", pa.damping, "Update damping");

  GomArgs ga;
  auto* gom = app.add_subcommand("gom", "Optomechanical coupling rate from exported mode fields");
  gom->add_option("--mesh", ga.mesh, "Field file (.omcf)");
  gom->add_option("--material", ga.material, "Material JSON (default: GaAs)");
  gom->add_flag("--no-traces", ga.no_traces, "Use nodal fields on the boundary even when traces exist");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Calibrated g_om from a directory of spectrum analyzer traces");
  fit->add_option("--traces", fa.traces, "Directory of trace CSV files");
  fit->add_option("--tone-freq", fa.tone_freq, "Calibration tone frequency, Hz");
  fit->add_option("--tone-depth", fa.tone_depth, "Phase modulation depth, rad");
  fit->add_option("--temp", fa.temp, "Temperature, K");
  fit->add_option("--temp-sigma", fa.temp_sigma, "Temperature uncertainty, K");
  fit->add_option("--depth-sigma", fa.depth_sigma, "Modulation depth uncertainty, rad");
  fit->add_option("--background-order", fa.background_order, "Background polynomial order (0-5)");
  fit->add_option("--window", fa.window, "Analyzer window: gaussian or flat_top");

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Simulated spectrum analyzer scans");
  simulate->add_option("--config", sa.config, "Key-value simulation config");
  simulate->add_option("--scans", sa.scans, "Number of scans");

  LockArgs lka;
  auto* lock = app.add_subcommand("lock-sim", "Dither or side lock of a laser to a drifting resonance");
  lock->add_option("--config", lka.config, "Key-value lock config");
  lock->add_option("--duration", lka.duration, "Simulated time, s");

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Check a config file and report every problem");
  validate->add_option("kind", va.kind, "layout, sim or lock")->required();
  validate->add_option("config", va.config, "Config file")->required();

  std::string replay_path;
  auto* replay = app.add_subcommand("replay", "Rerun the command recorded in a result and compare outputs");
  replay->add_option("result", replay_path, "Result JSON with a provenance block")->required();

  for (auto* sub : {layout, pec_cmd, forward, correct, gom, fit, simulate, lock, validate, replay}) sub->fallthrough();

  std::vector<std::string> rev(ctx.args.rbegin(), ctx.args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }
  if (seed_opt->count() > 0) g.seed = seed;
  set_worker_threads(g.threads);

  try {
    if (*layout) return run_layout(ctx, la);
    if (*forward) return run_pec_forward(ctx, pa);
    if (*correct) return run_pec_correct(ctx, pa);
    if (*gom) return run_gom(ctx, ga);
    if (*fit) return run_fit(ctx, fa);
    if (*simulate) return run_simulate(ctx, sa);
    if (*lock) return run_lock_sim(ctx, lka);
    if (*validate) return run_validate(ctx, va);
    if (*replay) return run_replay(ctx, replay_path);
  } catch (const ValidationError& e) {
    err << "error: invalid configuration\n";
    for (const auto& p : e.problems()) err << "  " << p << "\n";
    return kConfigError;
  } catch (const FileError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    err << "error: malformed JSON input: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::logic_error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  err << app.help();
  return kConfigError;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx;
  ctx.args = args;
  ctx.out = &out;
  ctx.err = &err;
  return dispatch_with(ctx);
}

}  // namespace omkit::cli
