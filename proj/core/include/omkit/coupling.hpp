#pragma once

// Optomechanical vacuum coupling rate from FEM mode fields, as the sum of
// the moving-boundary (surface) and photoelastic (volume) perturbations.

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include "omkit/field_mesh.hpp"

namespace omkit::coupling {

/// Cubic crystal. Stiffness in GPa, e14 in C/m^2; e14 and the stiffness
/// constants describe the material but do not enter the coupling integrals.
struct MaterialProps {
  double density = 5317.0;  // kg/m^3
  double c11 = 118.41;
  double c12 = 53.78;
  double c44 = 59.12;
  double e14 = -0.16;
  double p11 = -0.165;
  double p12 = -0.140;
  double p44 = -0.072;
  double epsilon_r = 11.361;
  /// Rotation of the crystal axes about z relative to the mesh axes.
  double rotation_z_deg = 0.0;

  static MaterialProps gaas();

  std::vector<std::string> check() const;
  void validate() const;
};

MaterialProps material_from_json(const std::string& text);
std::string material_to_json(const MaterialProps& mat);
MaterialProps load_material(const std::filesystem::path& path);

/// Rank-4 photoelastic tensor p_abcd in mesh coordinates, flattened as
/// index ((a*3 + b)*3 + c)*3 + d. The cubic Voigt constants map stress-like:
/// p_1111 = p11, p_1122 = p12, p_1212 = p_1221 = p44. Contracting with
/// tensor strain over all nine (c, d) therefore gives 2 p44 eps_12 for a
/// shear, the same as Voigt p44 times engineering shear strain.
std::array<double, 81> photoelastic_tensor(const MaterialProps& mat);

/// Integral of rho |Q|^2 over the solid, kg m^2.
double mech_norm(const FieldMesh& mesh, const MaterialProps& mat);

/// Integral of E* eps E over all cells (eps0 eps_r in solid, eps0 in vacuum).
double em_norm(const FieldMesh& mesh, const MaterialProps& mat);

struct SurfaceOptions {
  bool use_traces = true;  // prefer one-sided facet traces when present
};

struct Contribution {
  std::complex<double> value;  // rad/s
  std::vector<std::string> warnings;
};

Contribution g_mb(const FieldMesh& mesh, const MaterialProps& mat, const SurfaceOptions& options = {});
Contribution g_pe(const FieldMesh& mesh, const MaterialProps& mat);

struct CouplingResult {
  std::complex<double> g_mb;
  std::complex<double> g_pe;
  double g_om = 0.0;  // |g_mb + g_pe|, rad/s
  MeshStats stats;
  std::vector<std::string> warnings;
};

CouplingResult g_om_total(const FieldMesh& mesh, const MaterialProps& mat, const SurfaceOptions& options = {});

}  // namespace omkit::coupling
