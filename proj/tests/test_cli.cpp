#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli/cli.hpp"
#include "json.hpp"
#include "omkit/pec.hpp"
#include "test_support.hpp"

using omkit::testing::source_dir;
using omkit::testing::TempDir;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = omkit::cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string config(const std::string& name) { return (source_dir() / "configs" / name).string(); }

// Copy of a shipped config with some lines replaced.
fs::path edited(const TempDir& dir, const std::string& name,
                const std::vector<std::pair<std::string, std::string>>& replace) {
  std::string text = slurp(config(name));
  for (const auto& [from, to] : replace) {
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    text.replace(at, from.size(), to);
  }
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("help and usage errors") {
  const Run help = run({"--help"});
  CHECK(help.code == 0);
  for (const char* sub : {"layout", "pec", "gom", "fit", "simulate", "lock-sim", "validate", "replay"})
    CHECK(help.out.find(sub) != std::string::npos);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"fit", "--temp", "warm"}).code == 2);
}

TEST_CASE("missing inputs exit 2 and name the path") {
  const Run r = run({"simulate", "--config", "/nonexistent/sim.cfg", "--scans", "1", "--out", "/tmp/x"});
  CHECK(r.code == 2);
  CHECK(r.err.find("/nonexistent/sim.cfg") != std::string::npos);
  const Run f = run({"fit", "--traces", "/nonexistent/traces"});
  CHECK(f.code == 2);
  CHECK(f.err.find("/nonexistent/traces") != std::string::npos);
}

TEST_CASE("validate collects every problem") {
  TempDir dir("cli-validate");
  const fs::path bad = edited(dir, "sim.cfg", {{"rbw_mhz = 1", "rbw_mhz = -1"}, {"q_m = 600", "q_m = 0"}});
  const Run r = run({"validate", "sim", bad.string()});
  CHECK(r.code == 2);
  const json j = json::parse(r.out);
  CHECK_FALSE(j["ok"].get<bool>());
  CHECK(j["problems"].size() == 2);
  CHECK(r.out.find("rbw") != std::string::npos);
  CHECK(r.out.find("q_m") != std::string::npos);

  const fs::path warn = edited(dir, "sim.cfg", {{"tone_depth_rad = 0.01", "tone_depth_rad = 0.5"}});
  const Run w = run({"validate", "sim", warn.string()});
  CHECK(w.code == 0);
  const json jw = json::parse(w.out);
  CHECK(jw["ok"].get<bool>());
  REQUIRE(jw["warnings"].size() == 1);
  CHECK(jw["warnings"][0].get<std::string>().find("not small") != std::string::npos);

  const fs::path unknown = edited(dir, "lock.cfg", {{"harmonic = 2", "harmonic = 2\nharmonik = 3"}});
  const Run u = run({"validate", "lock", unknown.string()});
  CHECK(u.code == 2);
  CHECK(u.out.find("harmonik") != std::string::npos);

  for (const char* c : {"sim.cfg", "fixture-sim.cfg"}) CHECK(run({"validate", "sim", config(c)}).code == 0);
  CHECK(run({"validate", "lock", config("lock.cfg")}).code == 0);
  for (const char* c : {"layout-sim.cfg", "layout-fab.cfg", "grating.cfg"}) CHECK(run({"validate", "layout", config(c)}).code == 0);
}

TEST_CASE("fit on the shipped traces") {
  TempDir dir("cli-fit");
  const std::string traces = (source_dir() / "data" / "traces").string();
  const std::vector<std::string> args = {"fit",   "--traces", traces, "--tone-freq", "4.5e9", "--tone-depth",
                                         "0.01", "--temp",   "295.3"};
  const Run r = run(args);
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["n_scans"].get<int>() == 12);
  CHECK(j["g_om_hz"].get<double>() == doctest::Approx(649e3).epsilon(0.1));
  CHECK(j["sigma_stat_hz"].get<double>() > 0.0);
  CHECK(j["provenance"]["command"] == "fit");

  // Same inputs, same bytes.
  CHECK(run(args).out == r.out);

  auto with_out = args;
  with_out.insert(with_out.end(), {"--out", (dir / "fit.json").string()});
  REQUIRE(run(with_out).code == 0);
  const Run replay = run({"replay", (dir / "fit.json").string()});
  CHECK(replay.code == 0);
  CHECK(json::parse(replay.out)["identical"].get<bool>());
}

TEST_CASE("simulate then fit round trip with replay") {
  TempDir dir("cli-sim");
  const std::string out = (dir / "scans").string();
  const std::vector<std::string> args = {"simulate", "--config", config("sim.cfg"), "--scans", "6",
                                         "--seed",   "11",       "--out",           out};
  REQUIRE(run(args).code == 0);
  CHECK(fs::exists(dir / "scans" / "manifest.json"));
  const std::string first = slurp(dir / "scans" / "scan-003.csv");
  REQUIRE(run(args).code == 0);
  CHECK(slurp(dir / "scans" / "scan-003.csv") == first);

  const Run replay = run({"replay", (dir / "scans" / "manifest.json").string()});
  CHECK(replay.code == 0);
  CHECK(json::parse(replay.out)["identical"].get<bool>());

  // A tampered output is reported.
  std::ofstream(dir / "scans" / "scan-003.csv", std::ios::app) << "4.6e9,1e-9\n";
  const Run tampered = run({"replay", (dir / "scans" / "manifest.json").string()});
  CHECK(tampered.code == 1);
  CHECK_FALSE(json::parse(tampered.out)["identical"].get<bool>());
}

TEST_CASE("lock-sim reports convergence") {
  const Run r = run({"lock-sim", "--config", config("lock.cfg"), "--seed", "3"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["converged"].get<bool>());
  CHECK(j["final_offset_linewidths"].get<double>() == doctest::Approx(0.2887).epsilon(0.02));
  CHECK(run({"lock-sim", "--config", config("lock.cfg"), "--duration", "-1"}).code == 2);
}

TEST_CASE("pec correct exits 1 without convergence") {
  TempDir dir("cli-pec");
  omkit::pec::DoseMap target(160, 160, 5.0);
  for (std::size_t y = 60; y < 100; ++y)
    for (std::size_t x = 60; x < 100; ++x) target.at(x, y) = 1.0;
  omkit::pec::save_dose(target, dir / "target.dose");
  const std::string t = (dir / "target.dose").string();
  const Run stalled = run({"pec", "correct", "--target", t, "--max-iter", "1", "--out", (dir / "d.dose").string()});
  CHECK(stalled.code == 1);
  CHECK(stalled.err.find("residual") != std::string::npos);
  CHECK(fs::exists(dir / "d.dose"));
  const Run ok = run({"pec", "correct", "--target", t, "--out", (dir / "d.dose").string()});
  CHECK(ok.code == 0);
  CHECK(json::parse(ok.out)["converged"].get<bool>());
  CHECK(run({"pec", "correct", "--target", t, "--damping", "3", "--out", (dir / "d.dose").string()}).code == 2);
}

TEST_CASE("binary exit codes") {
  TempDir dir("cli-bin");
  const std::string bin = OMKIT_BINARY;
  auto status = [&](const std::string& args) {
    const int s = std::system((bin + " " + args + " >" + (dir / "o.txt").string() + " 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  CHECK(status("--help") == 0);
  CHECK(status("validate sim " + config("sim.cfg")) == 0);
  CHECK(status("simulate --config /nonexistent.cfg --out x") == 2);
  CHECK(slurp(dir / "o.txt").find("/nonexistent.cfg") != std::string::npos);
  CHECK(status("layout --preset simulation --out " + (dir / "r.svg").string()) == 0);
  CHECK(slurp(dir / "r.svg").find("<svg") != std::string::npos);
}
