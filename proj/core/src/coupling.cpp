#include "omkit/coupling.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "omkit/constants.hpp"
#include "omkit/errors.hpp"
#include "omkit/threads.hpp"

namespace omkit::coupling {

namespace {

using cplx = std::complex<double>;

// Degree-2 rule on the tetrahedron: barycentric (a, b, b, b) and
// permutations, equal weights.
constexpr double kTetA = 0.5854101966249685;
constexpr double kTetB = 0.1381966011250105;

// Degree-5 seven-point rule on the triangle.
struct TriPoint {
  double l0, l1, l2, w;
};
constexpr double kA1 = 0.0597158717897698, kB1 = 0.4701420641051151, kW1 = 0.1323941527885062;
constexpr double kA2 = 0.7974269853530873, kB2 = 0.1012865073234563, kW2 = 0.1259391805448271;
constexpr TriPoint kTriRule[7] = {
    {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225}, {kA1, kB1, kB1, kW1}, {kB1, kA1, kB1, kW1}, {kB1, kB1, kA1, kW1},
    {kA2, kB2, kB2, kW2},               {kB2, kA2, kB2, kW2}, {kB2, kB2, kA2, kW2},
};

// Sum of f(i) over [0, n) in fixed-size chunks; the chunk partials are
// combined in index order, so the result does not depend on thread count.
template <typename T, typename F>
T ordered_sum(std::size_t n, F f) {
  constexpr std::size_t kChunk = 2048;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  auto run = [&](std::size_t c) {
    T s{};
    for (std::size_t i = c * kChunk; i < std::min(n, (c + 1) * kChunk); ++i) s += f(i);
    return s;
  };
  std::vector<T> partial(chunks);
  const std::size_t workers = std::min<std::size_t>(chunks, worker_threads());
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) partial[c] = run(c);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t c = w; c < chunks; c += workers) partial[c] = run(c);
      }));
    for (auto& j : jobs) j.get();
  }
  T total{};
  for (const auto& p : partial) total += p;
  return total;
}

double cell_volume(const FieldMesh& mesh, const Cell& c) {
  return tet_volume(mesh.nodes[c.nodes[0]], mesh.nodes[c.nodes[1]], mesh.nodes[c.nodes[2]], mesh.nodes[c.nodes[3]]);
}

template <typename G>
double tet_quadrature(const Cell& c, double volume, const std::vector<CVec3>& field, G integrand) {
  double sum = 0.0;
  for (int q = 0; q < 4; ++q) {
    CVec3 v = CVec3::Zero();
    for (int k = 0; k < 4; ++k) v += (k == q ? kTetA : kTetB) * field[c.nodes[static_cast<std::size_t>(k)]];
    sum += integrand(v);
  }
  return 0.25 * volume * sum;
}

double prefactor(const FieldMesh& mesh) {
  return 0.5 * mesh.omega_o * std::sqrt(constants::hbar / (2.0 * mesh.omega_m));
}

double permittivity(const MaterialProps& mat, Medium medium) {
  return medium == Medium::solid ? constants::vacuum_permittivity * mat.epsilon_r : constants::vacuum_permittivity;
}

}  // namespace

// ---------------------------------------------------------------------------
// Material

MaterialProps MaterialProps::gaas() { return {}; }

std::vector<std::string> MaterialProps::check() const {
  std::vector<std::string> problems;
  if (!(density > 0)) problems.push_back("density must be > 0");
  if (!(epsilon_r > 1)) problems.push_back("epsilon_r must be > 1");
  if (!(c11 > std::abs(c12))) problems.push_back("stiffness requires c11 > |c12|");
  if (!(c44 > 0)) problems.push_back("stiffness requires c44 > 0");
  for (double v : {p11, p12, p44, e14, rotation_z_deg})
    if (!std::isfinite(v)) {
      problems.push_back("material constants must be finite");
      break;
    }
  return problems;
}

void MaterialProps::validate() const { throw_if_any(check()); }

MaterialProps material_from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  if (doc.contains("symmetry") && doc.at("symmetry").get<std::string>() != "cubic")
    throw std::invalid_argument("material: only cubic crystals are supported");
  MaterialProps m;
  m.density = doc.at("density_kg_m3").get<double>();
  m.c11 = doc.at("c11_gpa").get<double>();
  m.c12 = doc.at("c12_gpa").get<double>();
  m.c44 = doc.at("c44_gpa").get<double>();
  m.e14 = doc.value("e14_c_m2", 0.0);
  m.p11 = doc.at("p11").get<double>();
  m.p12 = doc.at("p12").get<double>();
  m.p44 = doc.at("p44").get<double>();
  m.epsilon_r = doc.at("epsilon_r").get<double>();
  m.rotation_z_deg = doc.value("rotation_z_deg", 0.0);
  m.validate();
  return m;
}

std::string material_to_json(const MaterialProps& m) {
  nlohmann::json doc = {{"symmetry", "cubic"}, {"density_kg_m3", m.density}, {"c11_gpa", m.c11},
                        {"c12_gpa", m.c12},    {"c44_gpa", m.c44},          {"e14_c_m2", m.e14},
                        {"p11", m.p11},        {"p12", m.p12},              {"p44", m.p44},
                        {"epsilon_r", m.epsilon_r}, {"rotation_z_deg", m.rotation_z_deg}};
  return doc.dump(2);
}

MaterialProps load_material(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open material file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return material_from_json(buf.str());
}

std::array<double, 81> photoelastic_tensor(const MaterialProps& mat) {
  auto idx = [](int a, int b, int c, int d) { return static_cast<std::size_t>(((a * 3 + b) * 3 + c) * 3 + d); };
  std::array<double, 81> crystal{};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d) {
          double v = 0.0;
          if (a == b && c == d) v = a == c ? mat.p11 : mat.p12;
          else if (a != b && ((a == c && b == d) || (a == d && b == c))) v = mat.p44;
          crystal[idx(a, b, c, d)] = v;
        }
  if (mat.rotation_z_deg == 0.0) return crystal;

  const double th = mat.rotation_z_deg * constants::pi / 180.0;
  Eigen::Matrix3d r;
  r << std::cos(th), -std::sin(th), 0, std::sin(th), std::cos(th), 0, 0, 0, 1;
  std::array<double, 81> out{};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d) {
          double s = 0.0;
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
              for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l)
                  s += r(a, i) * r(b, j) * r(c, k) * r(d, l) * crystal[idx(i, j, k, l)];
          out[idx(a, b, c, d)] = s;
        }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization integrals

double mech_norm(const FieldMesh& mesh, const MaterialProps& mat) {
  mesh.validate();
  const double value = ordered_sum<double>(mesh.cells.size(), [&](std::size_t i) {
    const auto& c = mesh.cells[i];
    if (c.medium != Medium::solid) return 0.0;
    return mat.density * tet_quadrature(c, cell_volume(mesh, c), mesh.displacement,
                                        [](const CVec3& q) { return q.squaredNorm(); });
  });
  if (!(value > 0)) throw std::domain_error("mech_norm: displacement field vanishes on the solid");
  return value;
}

double em_norm(const FieldMesh& mesh, const MaterialProps& mat) {
  mesh.validate();
  const double value = ordered_sum<double>(mesh.cells.size(), [&](std::size_t i) {
    const auto& c = mesh.cells[i];
    return permittivity(mat, c.medium) *
           tet_quadrature(c, cell_volume(mesh, c), mesh.efield, [](const CVec3& e) { return e.squaredNorm(); });
  });
  if (!(value > 0)) throw std::domain_error("em_norm: electric field vanishes everywhere");
  return value;
}

// ---------------------------------------------------------------------------
// Coupling contributions

Contribution g_mb(const FieldMesh& mesh, const MaterialProps& mat, const SurfaceOptions& options) {
  mat.validate();
  mesh.validate();
  if (mesh.facets.empty()) throw std::invalid_argument("g_mb: mesh has no boundary facets");
  Contribution result;
  const bool traces = options.use_traces && !mesh.traces.empty();
  if (!traces) {
    if (mesh.dfield.empty()) throw std::invalid_argument("g_mb: D field missing and no facet traces available");
    if (options.use_traces)
      result.warnings.push_back("facet traces absent; boundary E and D taken from nodal values");
  }
  const double eps0 = constants::vacuum_permittivity;
  const double eps_s = eps0 * mat.epsilon_r;
  const double e_contrast = eps_s - eps0;
  const double d_contrast = 1.0 / eps_s - 1.0 / eps0;

  for (std::size_t i = 0; i < mesh.facets.size(); ++i) {
    const auto& f = mesh.facets[i];
    if (triangle_area(mesh.nodes[f.nodes[0]], mesh.nodes[f.nodes[1]], mesh.nodes[f.nodes[2]]) <= 0.0)
      throw std::invalid_argument("g_mb: facet " + std::to_string(i) + " has zero area");
  }

  const cplx surface = ordered_sum<cplx>(mesh.facets.size(), [&](std::size_t i) {
    const auto& f = mesh.facets[i];
    const Vec3& n = f.normal;
    const auto nc = n.cast<cplx>();
    const double area = triangle_area(mesh.nodes[f.nodes[0]], mesh.nodes[f.nodes[1]], mesh.nodes[f.nodes[2]]);
    cplx sum = 0.0;
    for (const auto& p : kTriRule) {
      const double l[3] = {p.l0, p.l1, p.l2};
      CVec3 q = CVec3::Zero(), e = CVec3::Zero(), d = CVec3::Zero();
      for (std::size_t k = 0; k < 3; ++k) {
        q += l[k] * mesh.displacement[f.nodes[k]];
        e += l[k] * (traces ? mesh.traces[i].e_solid[k] : mesh.efield[f.nodes[k]]);
        d += l[k] * (traces ? mesh.traces[i].d_vacuum[k] : mesh.dfield[f.nodes[k]]);
      }
      const CVec3 e_par = e - nc.dot(e) * nc;  // Eigen's dot conjugates the left operand; n is real
      const cplx d_perp = nc.dot(d);
      const double bracket = e_contrast * e_par.squaredNorm() - d_contrast * std::norm(d_perp);
      sum += p.w * nc.dot(q) * bracket;
    }
    return area * sum;
  });

  result.value = -prefactor(mesh) * surface / (std::sqrt(mech_norm(mesh, mat)) * em_norm(mesh, mat));
  return result;
}

Contribution g_pe(const FieldMesh& mesh, const MaterialProps& mat) {
  mat.validate();
  mesh.validate();
  if (mesh.strain.empty()) throw std::invalid_argument("g_pe: strain field missing");
  const auto p = photoelastic_tensor(mat);
  const double eps0 = constants::vacuum_permittivity;
  const double scale = eps0 * mat.epsilon_r * mat.epsilon_r;  // (1/eps0) eps_S^2 for isotropic eps_S

  const cplx volume = ordered_sum<cplx>(mesh.cells.size(), [&](std::size_t i) {
    const auto& c = mesh.cells[i];
    if (c.medium != Medium::solid) return cplx{};
    const CMat3& strain = mesh.strain[i];
    CMat3 m = CMat3::Zero();
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int cc = 0; cc < 3; ++cc)
          for (int d = 0; d < 3; ++d) m(a, b) += p[static_cast<std::size_t>(((a * 3 + b) * 3 + cc) * 3 + d)] * strain(cc, d);
    const double vol = cell_volume(mesh, c);
    cplx sum = 0.0;
    for (int qp = 0; qp < 4; ++qp) {
      CVec3 e = CVec3::Zero();
      for (int k = 0; k < 4; ++k) e += (k == qp ? kTetA : kTetB) * mesh.efield[c.nodes[static_cast<std::size_t>(k)]];
      sum += e.dot(m * e);  // E^H M E
    }
    return 0.25 * vol * sum;
  });

  Contribution result;
  result.value = prefactor(mesh) * scale * volume / (std::sqrt(mech_norm(mesh, mat)) * em_norm(mesh, mat));
  return result;
}

CouplingResult g_om_total(const FieldMesh& mesh, const MaterialProps& mat, const SurfaceOptions& options) {
  CouplingResult r;
  auto mb = g_mb(mesh, mat, options);
  auto pe = g_pe(mesh, mat);
  r.g_mb = mb.value;
  r.g_pe = pe.value;
  r.g_om = std::abs(r.g_mb + r.g_pe);
  r.stats = mesh_stats(mesh);
  r.warnings = std::move(mb.warnings);
  r.warnings.insert(r.warnings.end(), pe.warnings.begin(), pe.warnings.end());
  return r;
}

}  // namespace omkit::coupling
