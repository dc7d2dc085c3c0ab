#pragma once

// Command-line front end shared by the omkit binary and the tests.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "omkit/geometry.hpp"
#include "omkit/locksim.hpp"
#include "omkit/spectra.hpp"

namespace omkit::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kConfigError = 2 };

/// Missing or unreadable input; reported with exit code 2.
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments; reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs one command line (without the program name).
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct Report {
  std::vector<std::string> problems;
  std::vector<std::string> warnings;
  bool ok() const { return problems.empty(); }
};

struct LayoutSpec {
  std::string kind = "resonator";  // resonator or grating
  geometry::ResonatorParams resonator = geometry::ResonatorParams::simulation();
  geometry::GratingParams grating = geometry::GratingParams::fabrication();
};

struct SimSpec {
  spectra::SimConfig sim;
  bool alternate_detuning = false;  // blue and red scans in turn
  double red_transduction_rel = 1.0;
};

struct LockSpec {
  locksim::PlantConfig plant;
  locksim::LockConfig lock;
  double duration = 10.0;  // s
};

// Readers fill the settings struct from the config and collect every problem: parse
// errors, unknown keys and the module's own invariant checks.
LayoutSpec read_layout(KvConfig& cfg, Report& report);
SimSpec read_sim(KvConfig& cfg, Report& report);
LockSpec read_lock(KvConfig& cfg, Report& report);

/// Validates a config for "layout", "sim" or "lock".
Report validate_config(const std::string& kind, KvConfig& cfg);

std::uint64_t fnv1a(std::string_view data, std::uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace omkit::cli
