#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "omkit/constants.hpp"
#include "omkit/errors.hpp"
#include "omkit/spectra.hpp"

namespace omkit::spectra {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::filesystem::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": not a number: '" + text + "'");
}

}  // namespace

SpectrumTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file " + path.string());
  std::map<std::string, std::string> header;
  SpectrumTrace trace;
  std::string line;
  std::size_t lineno = 0;
  bool column_row_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::string body = trim(t.substr(1));
      const auto comma = body.find(',');
      if (comma != std::string::npos) header[trim(body.substr(0, comma))] = trim(body.substr(comma + 1));
      continue;
    }
    if (!column_row_seen && !std::isdigit(static_cast<unsigned char>(t[0])) && t[0] != '-' && t[0] != '+' &&
        t[0] != '.') {
      column_row_seen = true;  // column names
      continue;
    }
    const auto comma = t.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected frequency_hz,power");
    trace.omega.push_back(constants::two_pi * parse_number(t.substr(0, comma), path, lineno));
    trace.power.push_back(parse_number(t.substr(comma + 1), path, lineno));
  }

  std::vector<std::string> problems;
  auto number = [&](const std::string& key, double fallback, bool required) {
    const auto it = header.find(key);
    if (it == header.end()) {
      if (required) problems.push_back("missing header '# " + key + ",<value>'");
      return fallback;
    }
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      problems.push_back("header " + key + " is not a number");
      return fallback;
    }
  };
  trace.rbw = constants::two_pi * number("rbw_hz", 0.0, true);
  trace.input_power = number("input_power_w", 0.0, false);
  trace.scan_id = header.count("scan_id") ? header["scan_id"] : path.stem().string();
  trace.detuning = header.count("detuning") ? header["detuning"] : "";
  const std::string unit = header.count("power_unit") ? header["power_unit"] : "W";
  if (unit == "dBm") {
    for (double& p : trace.power) p = 1e-3 * std::pow(10.0, p / 10.0);
  } else if (unit != "W") {
    problems.push_back("power_unit must be W or dBm, got '" + unit + "'");
  }
  for (auto& p : trace.check()) problems.push_back(p);
  if (!problems.empty()) {
    for (auto& p : problems) p = path.string() + ": " + p;
    throw ValidationError(problems);
  }
  return trace;
}

void save_trace(const SpectrumTrace& trace, const std::filesystem::path& path) {
  throw_if_any(trace.check());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "# rbw_hz," << trace.rbw / constants::two_pi << '\n'
      << "# input_power_w," << trace.input_power << '\n'
      << "# detuning," << trace.detuning << '\n'
      << "# scan_id," << trace.scan_id << '\n'
      << "# power_unit,W\n"
      << "frequency_hz,power\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << trace.omega[i] / constants::two_pi << ',' << trace.power[i] << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<SpectrumTrace> load_trace_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("trace directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no .csv traces in " + dir.string());
  std::vector<SpectrumTrace> traces;
  for (const auto& f : files) traces.push_back(load_trace(f));
  return traces;
}

}  // namespace omkit::spectra
