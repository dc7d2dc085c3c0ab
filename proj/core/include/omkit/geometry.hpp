#pragma once

// Parametric layout generation for the vertebrae resonator, the snowflake
// lattice that hosts it, and focusing grating couplers. All lengths are in nm.

#include <cstddef>
#include <string>
#include <vector>

namespace omkit::geometry {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }

/// Closed vertex loop; the closing edge back to the first vertex is implicit.
using Loop = std::vector<Vec2>;

struct Polygon {
  std::string layer;
  Loop vertices;
};

struct BoundingBox {
  Vec2 min;
  Vec2 max;
  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
};

/// A set of exposed shapes. Exposed (hole) loops are counter-clockwise;
/// clockwise loops cut islands back out of an enclosing exposed loop.
struct Layout {
  std::vector<Polygon> polygons;

  BoundingBox bounds() const;
  std::size_t vertex_count() const;
};

// Layer names used by the generators.
inline constexpr const char* kSnowflakeLayer = "snowflake";
inline constexpr const char* kCHoleLayer = "c_hole";
inline constexpr const char* kGratingLayer = "grating";

/// C-hole cell dimensions. q is the hole extent across the waveguide, v the
/// extent along it; p x u is the paddle that sits inside the hole.
struct CellParams {
  double q = 0.0;
  double v = 0.0;
  double p = 0.0;
  double u = 0.0;

  std::vector<std::string> check(const std::string& prefix = "") const;
  void validate() const;
};

struct ResonatorParams {
  double a = 0.0;        // lattice pitch
  double r = 0.0;        // snowflake arm length (center to tip)
  double w = 0.0;        // snowflake arm width
  CellParams mirror;
  CellParams defect;
  double d = 0.0;        // width of the C opening (paddle neck)
  double s = 0.0;        // waveguide span, center-to-center of the flanking snowflake rows
  double t = 250.0;      // slab thickness; carried for completeness, not drawn
  double chamfer = 20.0;
  int n_defect = 1;
  int n_gradient = 3;
  int n_mirror = 6;
  int n_taper = 0;
  int snowflake_rows = 5;     // rows on each side of the waveguide
  int snowflake_margin = 2;   // extra lattice columns beyond the last C-hole cell

  /// Dimensions used for the finite-element design.
  static ResonatorParams simulation();
  /// Dimensions written for the measured device.
  static ResonatorParams fabrication();

  /// Copy with every length multiplied by k (k > 0).
  ResonatorParams scaled(double k) const;

  int cells_per_side() const { return n_taper + n_mirror + n_gradient + n_defect; }

  std::vector<std::string> check() const;
  void validate() const;
};

struct GratingParams {
  double pitch = 632.0;          // grate period
  double fill = 0.58;            // etched fraction of each period
  double eccentricity = -0.05;   // b in a = b x + sqrt(x^2 + y^2)
  int n_grates = 40;
  double waveguide_width = 1000.0;
  double etch_depth = 150.0;
  double thickness = 250.0;
  double first_intercept = 10000.0;  // a of the innermost curve
  double half_angle_deg = 30.0;      // angular extent of the pad about +x
  double chord_tolerance = 0.1;      // max sagitta between samples

  static GratingParams fabrication();

  std::vector<std::string> check() const;
  void validate() const;
};

/// Minimal-degree polynomial step with n vanishing derivatives at both ends.
/// Throws std::domain_error for n < 0 or x outside [0, 1].
double smoothstep(int n, double x);

/// Gradient cell i (1-based, i = 1 next to the mirror cells) interpolated
/// with smoothstep_1(i / (n_gradient + 1)).
CellParams gradient_cell(const CellParams& mirror, const CellParams& defect, int i, int n_gradient);

/// Taper cell k (1-based, k = n_taper outermost), linearly shrunk from the
/// mirror cell by 1 - k / (n_taper + 1).
CellParams taper_cell(const CellParams& mirror, int k, int n_taper);

/// Signed shoelace area; positive for counter-clockwise loops.
double polygon_area(const Loop& loop);

/// Fillet every corner with the given radius. Radii are clipped so that no
/// fillet consumes more than half of an adjacent edge. Arcs are sampled with
/// a fixed maximum angular step, so the vertex count does not depend on scale.
Loop round_corners(const Loop& loop, double radius, double max_angle_step);

/// Six-armed snowflake centered at `center`, arms along multiples of 60 deg.
Loop snowflake_polygon(double r, double w, double chamfer, Vec2 center = {});

/// C-shaped hole centered at `center`. `opening` is +1 or -1 and selects the
/// side (+x or -x) where the paddle neck of width d meets the slab.
Loop c_hole_polygon(const CellParams& cell, double d, double chamfer, Vec2 center, int opening);

/// Full resonator: C-hole train along x, mirror-symmetric about x = 0 and
/// y = 0, flanked by snowflake lattice rows.
Layout vertebrae_layout(const ResonatorParams& params);

/// Centers of the C-hole cells, ordered left to right.
std::vector<double> cell_centers(const ResonatorParams& params);

/// y >= 0 branch of a = b x + sqrt(x^2 + y^2). Throws std::domain_error when
/// x lies outside the conic.
double grating_y(double a, double b, double x);

struct Curve {
  double intercept = 0.0;
  std::vector<Vec2> points;
};

/// Inner and outer boundary of each etched grate, ordered by intercept.
std::vector<Curve> grating_curves(const GratingParams& params);

/// Closed band polygons built from consecutive curve pairs.
Layout grating_layout(const GratingParams& params);

/// Line through `point` with unit normal `normal`; reflection is the
/// Householder map v -> v - 2 ((v - point) . n) n.
struct MirrorPlane {
  Vec2 normal{1.0, 0.0};
  Vec2 point{};

  static MirrorPlane x_equals(double x0) { return {{1.0, 0.0}, {x0, 0.0}}; }
  static MirrorPlane y_equals(double y0) { return {{0.0, 1.0}, {0.0, y0}}; }

  Vec2 reflect(Vec2 v) const;
};

struct SymmetryReport {
  double max_distance = 0.0;
  std::size_t vertices = 0;
};

/// Largest distance from any vertex of the reflected layout to its nearest
/// vertex in the original, and vice versa (vertex-set Hausdorff distance).
SymmetryReport symmetry_check(const Layout& layout, const MirrorPlane& plane);

}  // namespace omkit::geometry
