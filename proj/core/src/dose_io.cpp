#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "omkit/errors.hpp"
#include "omkit/pec.hpp"

namespace omkit::pec {

namespace {

static_assert(std::endian::native == std::endian::little, "dose files are written in native little-endian order");

}  // namespace

void save_dose(const DoseMap& map, const std::filesystem::path& path) {
  throw_if_any(map.check());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::ostringstream header;
  header.precision(17);
  header << "OMKIT-DOSE 1\n"
         << "nx " << map.nx << "\nny " << map.ny << "\npixel_nm " << map.pixel << "\norigin_nm " << map.origin_x
         << ' ' << map.origin_y << "\nend\n";
  out << header.str();
  out.write(reinterpret_cast<const char*>(map.values.data()),
            static_cast<std::streamsize>(map.values.size() * sizeof(double)));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

DoseMap load_dose(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dose file " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "OMKIT-DOSE 1") throw std::runtime_error(path.string() + ": not a dose file");
  DoseMap map;
  bool have_nx = false, have_ny = false, have_pixel = false;
  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key == "nx") {
      have_nx = static_cast<bool>(fields >> map.nx);
    } else if (key == "ny") {
      have_ny = static_cast<bool>(fields >> map.ny);
    } else if (key == "pixel_nm") {
      have_pixel = static_cast<bool>(fields >> map.pixel);
    } else if (key == "origin_nm") {
      fields >> map.origin_x >> map.origin_y;
    } else {
      throw std::runtime_error(path.string() + ": unknown header field '" + key + "'");
    }
  }
  if (line != "end" || !have_nx || !have_ny || !have_pixel)
    throw std::runtime_error(path.string() + ": incomplete dose header");
  map.values.resize(map.nx * map.ny);
  in.read(reinterpret_cast<char*>(map.values.data()), static_cast<std::streamsize>(map.values.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(map.values.size() * sizeof(double)))
    throw std::runtime_error(path.string() + ": truncated dose data");
  return map;
}

}  // namespace omkit::pec
