#include "omkit/layout_io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace omkit::geometry {

using nlohmann::json;

std::string layout_to_json(const Layout& layout) {
  json polys = json::array();
  for (const auto& poly : layout.polygons) {
    json verts = json::array();
    for (const auto& v : poly.vertices) verts.push_back({v.x, v.y});
    polys.push_back({{"layer", poly.layer}, {"vertices", std::move(verts)}});
  }
  json doc = {{"units", "nm"}, {"polygons", std::move(polys)}};
  return doc.dump(1);
}

Layout layout_from_json(const std::string& text) {
  const json doc = json::parse(text);
  if (doc.value("units", "") != "nm") throw std::runtime_error("layout: units must be \"nm\"");
  Layout layout;
  for (const auto& p : doc.at("polygons")) {
    Polygon poly;
    poly.layer = p.at("layer").get<std::string>();
    for (const auto& v : p.at("vertices")) {
      if (!v.is_array() || v.size() != 2) throw std::runtime_error("layout: vertex must be [x, y]");
      poly.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    if (poly.vertices.size() < 3) throw std::runtime_error("layout: polygon with fewer than 3 vertices");
    layout.polygons.push_back(std::move(poly));
  }
  return layout;
}

std::string layout_to_svg(const Layout& layout) {
  const auto box = layout.bounds();
  const double pad = 0.02 * std::max(box.width(), box.height()) + 1.0;
  std::ostringstream out;
  out << std::setprecision(10);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << box.min.x - pad << ' ' << -(box.max.y + pad)
      << ' ' << box.width() + 2 * pad << ' ' << box.height() + 2 * pad << "\">\n";
  for (const auto& poly : layout.polygons) {
    const char* fill = poly.layer == kSnowflakeLayer ? "#3b6ea5" : poly.layer == kCHoleLayer ? "#c4432b" : "#5a8f3c";
    out << "<polygon class=\"" << poly.layer << "\" fill=\"" << fill << "\" points=\"";
    for (const auto& v : poly.vertices) out << v.x << ',' << -v.y << ' ';  // SVG y points down
    out << "\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

Layout load_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open layout file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return layout_from_json(buf.str());
}

void save_layout(const Layout& layout, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (path.extension() == ".svg")
    out << layout_to_svg(layout);
  else
    out << layout_to_json(layout) << '\n';
}

}  // namespace omkit::geometry
