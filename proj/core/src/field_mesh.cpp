#include "omkit/field_mesh.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "omkit/errors.hpp"

namespace omkit::coupling {

static_assert(std::endian::native == std::endian::little, "field files are read in native little-endian order");

double tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return std::abs((b - a).dot((c - a).cross(d - a))) / 6.0;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

std::vector<std::string> FieldMesh::check() const {
  std::vector<std::string> problems;
  const std::size_t n = nodes.size();
  if (n == 0) problems.push_back("mesh has no nodes");
  if (cells.empty()) problems.push_back("mesh has no cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    bool ok = true;
    for (auto idx : c.nodes)
      if (idx >= n) ok = false;
    if (!ok) {
      problems.push_back("cell " + std::to_string(i) + " references a missing node");
      continue;
    }
    if (c.medium != Medium::vacuum && c.medium != Medium::solid)
      problems.push_back("cell " + std::to_string(i) + " has unknown medium");
    if (tet_volume(nodes[c.nodes[0]], nodes[c.nodes[1]], nodes[c.nodes[2]], nodes[c.nodes[3]]) <= 0.0)
      problems.push_back("cell " + std::to_string(i) + " is degenerate");
  }
  for (std::size_t i = 0; i < facets.size(); ++i) {
    const auto& f = facets[i];
    for (auto idx : f.nodes)
      if (idx >= n) problems.push_back("facet " + std::to_string(i) + " references a missing node");
    if (!f.normal.allFinite() || std::abs(f.normal.norm() - 1.0) > 1e-9)
      problems.push_back("facet " + std::to_string(i) + " normal is not a unit vector");
  }
  if (displacement.size() != n) problems.push_back("displacement field size does not match node count");
  if (efield.size() != n) problems.push_back("electric field size does not match node count");
  if (!dfield.empty() && dfield.size() != n) problems.push_back("D field size does not match node count");
  if (!strain.empty()) {
    if (strain.size() != cells.size()) problems.push_back("strain size does not match cell count");
    for (std::size_t i = 0; i < strain.size(); ++i) {
      const double scale = std::max(strain[i].norm(), 1e-300);
      if ((strain[i] - strain[i].transpose()).norm() > 1e-12 * scale) {
        problems.push_back("strain of cell " + std::to_string(i) + " is not symmetric");
        break;
      }
    }
  }
  if (!traces.empty() && traces.size() != facets.size()) problems.push_back("trace count does not match facet count");
  if (!(omega_o > 0)) problems.push_back("omega_o must be > 0");
  if (!(omega_m > 0)) problems.push_back("omega_m must be > 0");
  return problems;
}

void FieldMesh::validate() const { throw_if_any(check()); }

MeshStats mesh_stats(const FieldMesh& mesh) {
  MeshStats s;
  s.nodes = mesh.nodes.size();
  s.cells = mesh.cells.size();
  s.facets = mesh.facets.size();
  for (const auto& c : mesh.cells) {
    const double v = tet_volume(mesh.nodes[c.nodes[0]], mesh.nodes[c.nodes[1]], mesh.nodes[c.nodes[2]],
                                mesh.nodes[c.nodes[3]]);
    s.total_volume += v;
    if (c.medium == Medium::solid) {
      ++s.solid_cells;
      s.solid_volume += v;
    }
  }
  for (const auto& f : mesh.facets)
    s.boundary_area += triangle_area(mesh.nodes[f.nodes[0]], mesh.nodes[f.nodes[1]], mesh.nodes[f.nodes[2]]);
  return s;
}

std::vector<CMat3> strain_from_displacement(const FieldMesh& mesh) {
  std::vector<CMat3> out;
  out.reserve(mesh.cells.size());
  for (const auto& c : mesh.cells) {
    Eigen::Matrix3d jac;
    Eigen::Matrix3cd dq;
    const Vec3& x0 = mesh.nodes[c.nodes[0]];
    for (int k = 0; k < 3; ++k) {
      jac.col(k) = mesh.nodes[c.nodes[k + 1]] - x0;
      dq.col(k) = mesh.displacement[c.nodes[k + 1]] - mesh.displacement[c.nodes[0]];
    }
    // dq = G * jac with G_ij = dQ_i / dx_j.
    const Eigen::Matrix3cd grad = dq * jac.inverse().cast<std::complex<double>>();
    out.push_back(0.5 * (grad + grad.transpose()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// File format

namespace {

double length_scale(const std::string& unit) {
  static const std::map<std::string, double> scales{{"m", 1.0}, {"mm", 1e-3}, {"um", 1e-6}, {"nm", 1e-9}};
  const auto it = scales.find(unit);
  if (it == scales.end()) throw std::runtime_error("unsupported length unit '" + unit + "'");
  return it->second;
}

template <typename T>
void read_array(std::istream& in, T* data, std::size_t count, const char* what) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if (in.gcount() != static_cast<std::streamsize>(count * sizeof(T)))
    throw std::runtime_error(std::string("field file truncated while reading ") + what);
}

template <typename T>
void write_array(std::ostream& out, const T* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

void read_cvec(std::istream& in, CVec3& v, const char* what) {
  double buf[6];
  read_array(in, buf, 6, what);
  for (int k = 0; k < 3; ++k) v[k] = {buf[2 * k], buf[2 * k + 1]};
}

void write_cvec(std::ostream& out, const CVec3& v) {
  double buf[6];
  for (int k = 0; k < 3; ++k) {
    buf[2 * k] = v[k].real();
    buf[2 * k + 1] = v[k].imag();
  }
  write_array(out, buf, 6);
}

// xx yy zz yz xz xy
constexpr int kVoigtRow[6] = {0, 1, 2, 1, 0, 0};
constexpr int kVoigtCol[6] = {0, 1, 2, 2, 2, 1};

}  // namespace

FieldMesh load_field_mesh(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open field file " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "OMCF 1") throw std::runtime_error(path.string() + ": not an OMCF 1 field file");

  std::map<std::string, std::string> header;
  bool terminated = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      terminated = true;
      break;
    }
    std::istringstream fields(line);
    std::string key, value;
    if (!(fields >> key >> value)) throw std::runtime_error(path.string() + ": malformed header line '" + line + "'");
    header[key] = value;
  }
  if (!terminated) throw std::runtime_error(path.string() + ": missing end_header");

  std::vector<std::string> problems;
  auto get = [&](const std::string& key) -> std::string {
    const auto it = header.find(key);
    if (it == header.end()) {
      problems.push_back("missing header field '" + key + "'");
      return "0";
    }
    return it->second;
  };
  const std::string length_unit = get("length_unit");
  const std::string displacement_unit = get("displacement_unit");
  const std::string efield_unit = get("efield_unit");
  const bool has_dfield = get("has_dfield") == "1";
  const bool has_strain = get("has_strain") == "1";
  const bool has_traces = get("has_traces") == "1";
  const double omega_o = std::stod(get("omega_o"));
  const double omega_m = std::stod(get("omega_m"));
  const auto n_nodes = static_cast<std::size_t>(std::stoull(get("nodes")));
  const auto n_cells = static_cast<std::size_t>(std::stoull(get("cells")));
  const auto n_facets = static_cast<std::size_t>(std::stoull(get("facets")));
  if (efield_unit != "V/m") problems.push_back("efield_unit must be V/m, got '" + efield_unit + "'");
  if (has_dfield || has_traces) {
    const auto it = header.find("dfield_unit");
    if (it == header.end() || it->second != "C/m^2") problems.push_back("dfield_unit must be C/m^2");
  }
  double lscale = 1.0, qscale = 1.0;
  try {
    lscale = length_scale(length_unit);
    qscale = length_scale(displacement_unit);
  } catch (const std::exception& e) {
    problems.push_back(e.what());
  }
  if (!problems.empty()) {
    for (auto& p : problems) p = path.string() + ": " + p;
    throw ValidationError(problems);
  }

  FieldMesh mesh;
  mesh.omega_o = omega_o;
  mesh.omega_m = omega_m;
  mesh.nodes.resize(n_nodes);
  for (auto& node : mesh.nodes) {
    read_array(in, node.data(), 3, "nodes");
    node *= lscale;
  }
  mesh.cells.resize(n_cells);
  for (auto& cell : mesh.cells) {
    std::int32_t buf[5];
    read_array(in, buf, 5, "cells");
    for (int k = 0; k < 4; ++k) {
      if (buf[k] < 0) throw std::runtime_error(path.string() + ": negative node index");
      cell.nodes[static_cast<std::size_t>(k)] = static_cast<std::uint32_t>(buf[k]);
    }
    cell.medium = static_cast<Medium>(buf[4]);
  }
  mesh.facets.resize(n_facets);
  for (auto& facet : mesh.facets) {
    std::int32_t buf[3];
    read_array(in, buf, 3, "facets");
    for (int k = 0; k < 3; ++k) {
      if (buf[k] < 0) throw std::runtime_error(path.string() + ": negative node index");
      facet.nodes[static_cast<std::size_t>(k)] = static_cast<std::uint32_t>(buf[k]);
    }
  }
  for (auto& facet : mesh.facets) read_array(in, facet.normal.data(), 3, "normals");
  mesh.displacement.resize(n_nodes);
  for (auto& q : mesh.displacement) {
    read_cvec(in, q, "displacement");
    q *= qscale;
  }
  mesh.efield.resize(n_nodes);
  for (auto& e : mesh.efield) read_cvec(in, e, "efield");
  if (has_dfield) {
    mesh.dfield.resize(n_nodes);
    for (auto& d : mesh.dfield) read_cvec(in, d, "dfield");
  }
  if (has_strain) {
    mesh.strain.resize(n_cells);
    for (auto& s : mesh.strain) {
      double buf[12];
      read_array(in, buf, 12, "strain");
      for (int k = 0; k < 6; ++k) {
        const std::complex<double> v{buf[2 * k], buf[2 * k + 1]};
        s(kVoigtRow[k], kVoigtCol[k]) = v;
        s(kVoigtCol[k], kVoigtRow[k]) = v;
      }
    }
  }
  if (has_traces) {
    mesh.traces.resize(n_facets);
    for (auto& t : mesh.traces)
      for (int k = 0; k < 3; ++k) {
        read_cvec(in, t.e_solid[static_cast<std::size_t>(k)], "traces");
        read_cvec(in, t.d_vacuum[static_cast<std::size_t>(k)], "traces");
      }
  }
  try {
    mesh.validate();
  } catch (const ValidationError& e) {
    auto problems_with_path = e.problems();
    for (auto& p : problems_with_path) p = path.string() + ": " + p;
    throw ValidationError(problems_with_path);
  }
  return mesh;
}

void save_field_mesh(const FieldMesh& mesh, const std::filesystem::path& path) {
  mesh.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::ostringstream header;
  header.precision(17);
  header << "OMCF 1\n"
         << "length_unit m\ndisplacement_unit m\nefield_unit V/m\ndfield_unit C/m^2\n"
         << "omega_o " << mesh.omega_o << "\nomega_m " << mesh.omega_m << "\nnodes " << mesh.nodes.size()
         << "\ncells " << mesh.cells.size() << "\nfacets " << mesh.facets.size()
         << "\nhas_dfield " << (mesh.dfield.empty() ? 0 : 1) << "\nhas_strain " << (mesh.strain.empty() ? 0 : 1)
         << "\nhas_traces " << (mesh.traces.empty() ? 0 : 1) << "\nend_header\n";
  out << header.str();
  for (const auto& node : mesh.nodes) write_array(out, node.data(), 3);
  for (const auto& cell : mesh.cells) {
    std::int32_t buf[5];
    for (int k = 0; k < 4; ++k) buf[k] = static_cast<std::int32_t>(cell.nodes[static_cast<std::size_t>(k)]);
    buf[4] = static_cast<std::int32_t>(cell.medium);
    write_array(out, buf, 5);
  }
  for (const auto& facet : mesh.facets) {
    std::int32_t buf[3];
    for (int k = 0; k < 3; ++k) buf[k] = static_cast<std::int32_t>(facet.nodes[static_cast<std::size_t>(k)]);
    write_array(out, buf, 3);
  }
  for (const auto& facet : mesh.facets) write_array(out, facet.normal.data(), 3);
  for (const auto& q : mesh.displacement) write_cvec(out, q);
  for (const auto& e : mesh.efield) write_cvec(out, e);
  for (const auto& d : mesh.dfield) write_cvec(out, d);
  for (const auto& s : mesh.strain) {
    double buf[12];
    for (int k = 0; k < 6; ++k) {
      const auto v = s(kVoigtRow[k], kVoigtCol[k]);
      buf[2 * k] = v.real();
      buf[2 * k + 1] = v.imag();
    }
    write_array(out, buf, 12);
  }
  for (const auto& t : mesh.traces)
    for (std::size_t k = 0; k < 3; ++k) {
      write_cvec(out, t.e_solid[k]);
      write_cvec(out, t.d_vacuum[k]);
    }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Fixtures

namespace fixtures {

namespace {

// Six tetrahedra sharing the cube diagonal from corner 0 to corner 7;
// corner bits are (x, y, z) = (1, 2, 4).
constexpr int kKuhn[6][4] = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7}, {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};

void fill_fields(FieldMesh& mesh, const VectorField& q, const VectorField& e, const VectorField& d) {
  for (const auto& x : mesh.nodes) {
    mesh.displacement.push_back(q(x));
    mesh.efield.push_back(e(x));
    if (d) mesh.dfield.push_back(d(x));
  }
}

}  // namespace

FieldMesh slab(const SlabSpec& spec, const VectorField& q, const VectorField& e, const VectorField& d,
               double omega_o, double omega_m) {
  if (spec.nx < 1 || spec.ny < 1 || spec.nz < 1) throw std::invalid_argument("slab: subdivisions must be >= 1");
  FieldMesh mesh;
  mesh.omega_o = omega_o;
  mesh.omega_m = omega_m;
  const int nzt = 2 * spec.nz;
  auto z_of = [&](int iz) {
    return iz <= spec.nz ? -spec.depth + spec.depth * iz / spec.nz : spec.height * (iz - spec.nz) / spec.nz;
  };
  auto id = [&](int ix, int iy, int iz) {
    return static_cast<std::uint32_t>((iz * (spec.ny + 1) + iy) * (spec.nx + 1) + ix);
  };
  for (int iz = 0; iz <= nzt; ++iz)
    for (int iy = 0; iy <= spec.ny; ++iy)
      for (int ix = 0; ix <= spec.nx; ++ix)
        mesh.nodes.emplace_back(spec.lx * ix / spec.nx, spec.ly * iy / spec.ny, z_of(iz));
  for (int iz = 0; iz < nzt; ++iz)
    for (int iy = 0; iy < spec.ny; ++iy)
      for (int ix = 0; ix < spec.nx; ++ix) {
        std::uint32_t corner[8];
        for (int b = 0; b < 8; ++b) corner[b] = id(ix + (b & 1), iy + ((b >> 1) & 1), iz + ((b >> 2) & 1));
        for (const auto& t : kKuhn)
          mesh.cells.push_back({{corner[t[0]], corner[t[1]], corner[t[2]], corner[t[3]]},
                                iz < spec.nz ? Medium::solid : Medium::vacuum});
      }
  for (int iy = 0; iy < spec.ny; ++iy)
    for (int ix = 0; ix < spec.nx; ++ix) {
      const auto a = id(ix, iy, spec.nz), b = id(ix + 1, iy, spec.nz), c = id(ix + 1, iy + 1, spec.nz),
                 dd = id(ix, iy + 1, spec.nz);
      mesh.facets.push_back({{a, b, c}, Vec3::UnitZ()});
      mesh.facets.push_back({{a, c, dd}, Vec3::UnitZ()});
    }
  fill_fields(mesh, q, e, d);
  mesh.strain = strain_from_displacement(mesh);
  mesh.validate();
  return mesh;
}

FieldMesh mirrored_box(double l, int n, const VectorField& q, const VectorField& e, const VectorField& d,
                       double omega_o, double omega_m) {
  if (n < 1) throw std::invalid_argument("mirrored_box: n must be >= 1");
  FieldMesh mesh;
  mesh.omega_o = omega_o;
  mesh.omega_m = omega_m;
  const int ny = n, nz = std::max(1, n / 2);
  const double hx = l / n, hy = l / ny, hz = 0.5 * l / nz;
  // ix runs over [-n, n]; x(-ix) == -x(ix) exactly.
  auto id = [&](int ix, int iy, int iz) {
    return static_cast<std::uint32_t>((iz * (ny + 1) + iy) * (2 * n + 1) + (ix + n));
  };
  for (int iz = 0; iz <= nz; ++iz)
    for (int iy = 0; iy <= ny; ++iy)
      for (int ix = -n; ix <= n; ++ix) {
        const double x = ix >= 0 ? ix * hx : -((-ix) * hx);
        mesh.nodes.emplace_back(x, -0.5 * l + iy * hy, -0.25 * l + iz * hz);
      }
  for (int side : {1, -1})
    for (int iz = 0; iz < nz; ++iz)
      for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < n; ++ix) {
          std::uint32_t corner[8];
          for (int b = 0; b < 8; ++b)
            corner[b] = id(side * (ix + (b & 1)), iy + ((b >> 1) & 1), iz + ((b >> 2) & 1));
          for (const auto& t : kKuhn)
            mesh.cells.push_back({{corner[t[0]], corner[t[1]], corner[t[2]], corner[t[3]]}, Medium::solid});
        }
  auto quad = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t dd, const Vec3& normal) {
    mesh.facets.push_back({{a, b, c}, normal});
    mesh.facets.push_back({{a, c, dd}, normal});
  };
  for (int iz = 0; iz < nz; ++iz)
    for (int iy = 0; iy < ny; ++iy)
      for (int side : {1, -1})
        quad(id(side * n, iy, iz), id(side * n, iy + 1, iz), id(side * n, iy + 1, iz + 1), id(side * n, iy, iz + 1),
             Vec3(side, 0, 0));
  for (int side : {1, -1})
    for (int ix = 0; ix < n; ++ix) {
      for (int iz = 0; iz < nz; ++iz) {
        quad(id(side * ix, 0, iz), id(side * (ix + 1), 0, iz), id(side * (ix + 1), 0, iz + 1), id(side * ix, 0, iz + 1),
             -Vec3::UnitY());
        quad(id(side * ix, ny, iz), id(side * (ix + 1), ny, iz), id(side * (ix + 1), ny, iz + 1),
             id(side * ix, ny, iz + 1), Vec3::UnitY());
      }
      for (int iy = 0; iy < ny; ++iy) {
        quad(id(side * ix, iy, 0), id(side * (ix + 1), iy, 0), id(side * (ix + 1), iy + 1, 0), id(side * ix, iy + 1, 0),
             -Vec3::UnitZ());
        quad(id(side * ix, iy, nz), id(side * (ix + 1), iy, nz), id(side * (ix + 1), iy + 1, nz),
             id(side * ix, iy + 1, nz), Vec3::UnitZ());
      }
    }
  fill_fields(mesh, q, e, d);
  mesh.strain = strain_from_displacement(mesh);
  mesh.validate();
  return mesh;
}

FieldMesh single_tet(double edge, const CVec3& q, const CVec3& e, const CMat3& strain, double omega_o,
                     double omega_m) {
  FieldMesh mesh;
  mesh.omega_o = omega_o;
  mesh.omega_m = omega_m;
  mesh.nodes = {Vec3(0, 0, 0), Vec3(edge, 0, 0), Vec3(0, edge, 0), Vec3(0, 0, edge)};
  mesh.cells = {{{0, 1, 2, 3}, Medium::solid}};
  mesh.facets = {{{0, 2, 1}, -Vec3::UnitZ()},
                 {{0, 1, 3}, -Vec3::UnitY()},
                 {{0, 3, 2}, -Vec3::UnitX()},
                 {{1, 2, 3}, Vec3(1, 1, 1).normalized()}};
  mesh.displacement.assign(4, q);
  mesh.efield.assign(4, e);
  mesh.dfield.assign(4, CVec3::Zero());
  mesh.strain = {strain};
  mesh.validate();
  return mesh;
}

}  // namespace fixtures

}  // namespace omkit::coupling
