#pragma once

#include <filesystem>
#include <string>

#include "omkit/geometry.hpp"

namespace omkit::geometry {

// JSON schema: { "units": "nm", "polygons": [ { "layer": s, "vertices": [[x,y],...] } ] }
std::string layout_to_json(const Layout& layout);
Layout layout_from_json(const std::string& text);

std::string layout_to_svg(const Layout& layout);

Layout load_layout(const std::filesystem::path& path);

/// Writes JSON or SVG depending on the file extension.
void save_layout(const Layout& layout, const std::filesystem::path& path);

}  // namespace omkit::geometry
