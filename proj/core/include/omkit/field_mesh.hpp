#pragma once

// Tetrahedral FEM export of one optical and one mechanical mode.
//
// Nodal fields are linear within each tetrahedron. Strain is constant per
// cell and stored as symmetric tensor components (not engineering shear).
// Boundary facets carry outward unit normals of the solid and optionally
// the one-sided field traces at their corners: E from the solid side and D
// from the vacuum side.
//
// On disk (.omcf) a text header of "key value" lines ending in "end_header"
// is followed by little-endian binary arrays:
//   nodes       n x 3 float64
//   cells       m x 5 int32 (4 node indices, medium 0 = vacuum, 1 = solid)
//   facets      f x 3 int32, then f x 3 float64 normals
//   Q, E        n x 3 complex (re, im float64 pairs)
//   D           n x 3 complex            if has_dfield
//   strain      m x 6 complex            if has_strain (xx yy zz yz xz xy)
//   traces      f x 3 x (E 3 complex, D 3 complex)  if has_traces

#include <Eigen/Core>
#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace omkit::coupling {

using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using CMat3 = Eigen::Matrix3cd;

enum class Medium : std::int32_t { vacuum = 0, solid = 1 };

struct Cell {
  std::array<std::uint32_t, 4> nodes{};
  Medium medium = Medium::solid;
};

struct FacetTrace {
  std::array<CVec3, 3> e_solid;
  std::array<CVec3, 3> d_vacuum;
};

struct Facet {
  std::array<std::uint32_t, 3> nodes{};
  Vec3 normal = Vec3::UnitZ();
};

struct FieldMesh {
  std::vector<Vec3> nodes;                // m
  std::vector<Cell> cells;
  std::vector<Facet> facets;
  std::vector<CVec3> displacement;        // Q per node, m
  std::vector<CVec3> efield;              // E per node, V/m
  std::vector<CVec3> dfield;              // D per node, C/m^2; may be empty
  std::vector<CMat3> strain;              // per cell; may be empty
  std::vector<FacetTrace> traces;         // per facet; may be empty
  double omega_o = 0.0;                   // rad/s
  double omega_m = 0.0;                   // rad/s

  std::vector<std::string> check() const;
  void validate() const;
};

struct MeshStats {
  std::size_t nodes = 0;
  std::size_t cells = 0;
  std::size_t solid_cells = 0;
  std::size_t facets = 0;
  double solid_volume = 0.0;   // m^3
  double total_volume = 0.0;   // m^3
  double boundary_area = 0.0;  // m^2
};

MeshStats mesh_stats(const FieldMesh& mesh);

double tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);
double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

/// Constant strain of each cell from the linear displacement interpolant.
std::vector<CMat3> strain_from_displacement(const FieldMesh& mesh);

FieldMesh load_field_mesh(const std::filesystem::path& path);
void save_field_mesh(const FieldMesh& mesh, const std::filesystem::path& path);

namespace fixtures {

using VectorField = std::function<CVec3(const Vec3&)>;

/// Solid slab z in [-depth, 0] under vacuum z in [0, height], both over
/// [0, lx] x [0, ly]. Only the top face of the slab is a boundary facet
/// (normal +z). Cubes are split into six tetrahedra each.
struct SlabSpec {
  double lx = 1e-6;
  double ly = 1e-6;
  double depth = 0.25e-6;
  double height = 0.5e-6;
  int nx = 4;
  int ny = 4;
  int nz = 2;  // layers per medium
};

FieldMesh slab(const SlabSpec& spec, const VectorField& q, const VectorField& e, const VectorField& d,
               double omega_o, double omega_m);

/// Solid box [-l, l] x [-l/2, l/2] x [-l/4, l/4] built from its x >= 0 half
/// and an exact mirror copy, so the mesh is symmetric under x -> -x. All six
/// outer faces are boundary facets. Strain is derived from q.
FieldMesh mirrored_box(double l, int n, const VectorField& q, const VectorField& e, const VectorField& d,
                       double omega_o, double omega_m);

/// One solid tetrahedron with uniform fields and the given cell strain.
FieldMesh single_tet(double edge, const CVec3& q, const CVec3& e, const CMat3& strain, double omega_o,
                     double omega_m);

}  // namespace fixtures

}  // namespace omkit::coupling
