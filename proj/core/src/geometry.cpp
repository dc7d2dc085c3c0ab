#include "omkit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "omkit/errors.hpp"

namespace omkit::geometry {

namespace {

constexpr double kPi = std::numbers::pi;
// pi/32 keeps the sagitta of a 20 nm fillet below 0.025 nm.
constexpr double kFilletStep = kPi / 32.0;

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return std::round(out);
}

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

Vec2 normalized(Vec2 v) {
  const double n = norm(v);
  return {v.x / n, v.y / n};
}

double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

struct HoleDims {
  double q, v, p, u, d;
};

Loop reflect_x(const Loop& loop, double x0) {
  Loop out;
  out.reserve(loop.size());
  for (auto it = loop.rbegin(); it != loop.rend(); ++it) out.push_back({2.0 * x0 - it->x, it->y});
  return out;
}

Loop reflect_y(const Loop& loop) {
  Loop out;
  out.reserve(loop.size());
  for (auto it = loop.rbegin(); it != loop.rend(); ++it) out.push_back({it->x, -it->y});
  return out;
}

Loop translated(const Loop& loop, Vec2 offset) {
  Loop out;
  out.reserve(loop.size());
  for (const auto& v : loop) out.push_back(v + offset);
  return out;
}

// Hole with the neck opening toward +x, centered at the origin.
Loop c_hole_outline(const HoleDims& h) {
  const double right = h.v / 2.0;
  const double left = -h.v / 2.0;
  const double top = h.q / 2.0;
  const double px = h.p / 2.0;
  const double pu = h.u / 2.0;
  const double dn = h.d / 2.0;
  return {
      {right, dn},   {right, top},  {left, top}, {left, -top}, {right, -top}, {right, -dn},
      {px, -dn},     {px, -pu},     {-px, -pu},  {-px, pu},    {px, pu},      {px, dn},
  };
}

std::vector<std::string> check_hole(const HoleDims& h, const std::string& what) {
  std::vector<std::string> problems;
  if (!(h.q > 0 && h.v > 0 && h.p > 0 && h.u > 0 && h.d > 0)) {
    problems.push_back(what + ": all C-hole dimensions must be positive");
    return problems;
  }
  if (!(h.p < h.v)) problems.push_back(what + ": paddle length p must be < v");
  if (!(h.u < h.q)) problems.push_back(what + ": paddle width u must be < q");
  if (!(h.d < h.u)) problems.push_back(what + ": opening d must be < paddle width u");
  return problems;
}

}  // namespace

BoundingBox Layout::bounds() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  BoundingBox box{{inf, inf}, {-inf, -inf}};
  for (const auto& poly : polygons) {
    for (const auto& v : poly.vertices) {
      box.min.x = std::min(box.min.x, v.x);
      box.min.y = std::min(box.min.y, v.y);
      box.max.x = std::max(box.max.x, v.x);
      box.max.y = std::max(box.max.y, v.y);
    }
  }
  return box;
}

std::size_t Layout::vertex_count() const {
  std::size_t n = 0;
  for (const auto& poly : polygons) n += poly.vertices.size();
  return n;
}

std::vector<std::string> CellParams::check(const std::string& prefix) const {
  std::vector<std::string> problems;
  if (!(q > 0)) problems.push_back(prefix + "q must be > 0");
  if (!(v > 0)) problems.push_back(prefix + "v must be > 0");
  if (!(p > 0)) problems.push_back(prefix + "p must be > 0");
  if (!(u > 0)) problems.push_back(prefix + "u must be > 0");
  if (p > 0 && v > 0 && !(p < v)) problems.push_back(prefix + "p must be < v");
  if (u > 0 && q > 0 && !(u < q)) problems.push_back(prefix + "u must be < q");
  return problems;
}

void CellParams::validate() const { throw_if_any(check()); }

ResonatorParams ResonatorParams::simulation() {
  ResonatorParams p;
  p.t = 250;
  p.a = 550;
  p.r = 245;
  p.w = 87;
  p.mirror = {320, 480, 175, 210};
  p.defect = {310, 470, 220, 210};
  p.d = 80;
  p.s = 1503;
  p.chamfer = 20;
  p.n_defect = 1;
  p.n_gradient = 3;
  p.n_mirror = 6;
  p.n_taper = 0;
  return p;
}

ResonatorParams ResonatorParams::fabrication() {
  ResonatorParams p;
  p.t = 250;
  p.a = 572;
  p.r = 245;
  p.w = 62;
  p.mirror = {299, 472, 182, 252};
  p.defect = {285, 453, 228, 249};
  p.d = 115;
  p.s = 1563;
  p.chamfer = 20;
  p.n_defect = 1;
  p.n_gradient = 3;
  p.n_mirror = 3;
  p.n_taper = 2;
  return p;
}

ResonatorParams ResonatorParams::scaled(double k) const {
  if (!(k > 0)) throw std::invalid_argument("scale factor must be > 0");
  ResonatorParams out = *this;
  out.a *= k;
  out.r *= k;
  out.w *= k;
  for (CellParams* c : {&out.mirror, &out.defect}) {
    c->q *= k;
    c->v *= k;
    c->p *= k;
    c->u *= k;
  }
  out.d *= k;
  out.s *= k;
  out.t *= k;
  out.chamfer *= k;
  return out;
}

std::vector<std::string> ResonatorParams::check() const {
  std::vector<std::string> problems;
  auto append = [&](std::vector<std::string> more) {
    problems.insert(problems.end(), more.begin(), more.end());
  };
  if (!(a > 0)) problems.push_back("a must be > 0");
  if (!(r > 0)) problems.push_back("r must be > 0");
  if (!(w > 0)) problems.push_back("w must be > 0");
  if (a > 0 && r > 0 && !(a > 2 * r)) problems.push_back("a must exceed 2r (snowflakes overlap)");
  if (r > 0 && w > 0 && !(r > w * std::sqrt(3.0) / 2.0))
    problems.push_back("r must exceed w*sqrt(3)/2 (degenerate snowflake arms)");
  append(mirror.check("mirror."));
  append(defect.check("defect."));
  if (!(d > 0)) problems.push_back("d must be > 0");
  if (d > 0 && !(d < mirror.u && d < defect.u)) problems.push_back("d must be smaller than the paddle width u");
  if (!(s > 0)) problems.push_back("s must be > 0");
  if (!(t > 0)) problems.push_back("t must be > 0");
  if (!(chamfer >= 0)) problems.push_back("chamfer must be >= 0");
  if (mirror.v > 0 && defect.v > 0 && !(std::max(mirror.v, defect.v) < a))
    problems.push_back("C-hole width v must be smaller than the pitch a");
  if (s > 0 && r > 0 && !(s / 2.0 - r > std::max(mirror.q, defect.q) / 2.0))
    problems.push_back("waveguide span s too small: snowflakes overlap the C-holes");
  if (n_defect < 0 || n_gradient < 0 || n_mirror < 0 || n_taper < 0)
    problems.push_back("cell counts must be non-negative");
  if (cells_per_side() <= 0) problems.push_back("at least one C-hole cell per side is required");
  if (snowflake_rows < 0) problems.push_back("snowflake_rows must be >= 0");
  if (snowflake_margin < 0) problems.push_back("snowflake_margin must be >= 0");
  return problems;
}

void ResonatorParams::validate() const { throw_if_any(check()); }

GratingParams GratingParams::fabrication() { return GratingParams{}; }

std::vector<std::string> GratingParams::check() const {
  std::vector<std::string> problems;
  if (!(pitch > 0)) problems.push_back("pitch must be > 0");
  if (!(fill > 0 && fill < 1)) problems.push_back("fill must lie in (0, 1)");
  if (!(std::abs(eccentricity) < 1)) problems.push_back("|b| must be < 1");
  if (n_grates < 1) problems.push_back("n_grates must be >= 1");
  if (!(first_intercept > 0)) problems.push_back("first_intercept must be > 0");
  if (!(half_angle_deg > 0 && half_angle_deg <= 90)) problems.push_back("half_angle_deg must lie in (0, 90]");
  if (!(chord_tolerance > 0)) problems.push_back("chord_tolerance must be > 0");
  if (!(waveguide_width > 0)) problems.push_back("waveguide_width must be > 0");
  if (!(etch_depth > 0 && etch_depth <= thickness)) problems.push_back("etch_depth must lie in (0, thickness]");
  return problems;
}

void GratingParams::validate() const { throw_if_any(check()); }

double smoothstep(int n, double x) {
  if (n < 0) throw std::domain_error("smoothstep: order must be >= 0");
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("smoothstep: x must lie in [0, 1]");
  // The alternating sum cancels badly near 1; use the mirror image there.
  if (x > 0.5) return 1.0 - smoothstep(n, 1.0 - x);
  double sum = 0.0;
  double power = 1.0;  // (-x)^k
  for (int k = 0; k <= n; ++k) {
    sum += binomial(n + k, k) * binomial(2 * n + 1, n - k) * power;
    power *= -x;
  }
  return std::pow(x, n + 1) * sum;
}

CellParams gradient_cell(const CellParams& mirror, const CellParams& defect, int i, int n_gradient) {
  if (n_gradient < 1 || i < 1 || i > n_gradient)
    throw std::out_of_range("gradient_cell: index " + std::to_string(i) + " outside [1, " +
                            std::to_string(n_gradient) + "]");
  const double s = smoothstep(1, static_cast<double>(i) / (n_gradient + 1));
  auto lerp = [s](double from, double to) { return from + s * (to - from); };
  return {lerp(mirror.q, defect.q), lerp(mirror.v, defect.v), lerp(mirror.p, defect.p),
          lerp(mirror.u, defect.u)};
}

CellParams taper_cell(const CellParams& mirror, int k, int n_taper) {
  if (n_taper < 1 || k < 1 || k > n_taper)
    throw std::out_of_range("taper_cell: index " + std::to_string(k) + " outside [1, " +
                            std::to_string(n_taper) + "]");
  const double f = 1.0 - static_cast<double>(k) / (n_taper + 1);
  return {mirror.q * f, mirror.v * f, mirror.p * f, mirror.u * f};
}

double polygon_area(const Loop& loop) {
  const std::size_t n = loop.size();
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = loop[i];
    const Vec2& b = loop[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

Loop round_corners(const Loop& loop, double radius, double max_angle_step) {
  const std::size_t n = loop.size();
  if (radius <= 0.0 || n < 3) return loop;
  if (!(max_angle_step > 0)) throw std::invalid_argument("round_corners: angle step must be > 0");

  Loop out;
  out.reserve(n * 8);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 prev = loop[(i + n - 1) % n];
    const Vec2 cur = loop[i];
    const Vec2 next = loop[(i + 1) % n];
    const Vec2 to_prev = prev - cur;
    const Vec2 to_next = next - cur;
    const double len_prev = norm(to_prev);
    const double len_next = norm(to_next);
    const Vec2 u_prev = normalized(to_prev);
    const Vec2 u_next = normalized(to_next);

    // Interior angle between the two edges at this vertex.
    const double alpha = std::atan2(std::abs(cross(u_prev, u_next)), dot(u_prev, u_next));
    if (alpha > kPi - 1e-9 || alpha < 1e-9) {
      out.push_back(cur);
      continue;
    }
    const double half_tan = std::tan(alpha / 2.0);
    double tangent = radius / half_tan;
    tangent = std::min({tangent, 0.5 * len_prev, 0.5 * len_next});
    const double r_eff = tangent * half_tan;

    const Vec2 t_in = cur + tangent * u_prev;
    const Vec2 t_out = cur + tangent * u_next;
    const Vec2 bisector = normalized(u_prev + u_next);
    const Vec2 center = cur + (r_eff / std::sin(alpha / 2.0)) * bisector;

    const double sweep = kPi - alpha;
    const int segments = std::max(1, static_cast<int>(std::ceil(sweep / max_angle_step - 1e-12)));
    // Direction of travel along the arc matches the turn direction of the path.
    const double turn = cross(cur - prev, next - cur) > 0 ? 1.0 : -1.0;
    const double start = std::atan2(t_in.y - center.y, t_in.x - center.x);
    out.push_back(t_in);
    for (int s = 1; s < segments; ++s) {
      const double ang = start + turn * sweep * s / segments;
      out.push_back({center.x + r_eff * std::cos(ang), center.y + r_eff * std::sin(ang)});
    }
    out.push_back(t_out);
  }
  return out;
}

Loop snowflake_polygon(double r, double w, double chamfer, Vec2 center) {
  if (!(w > 0) || !(r > w / 2.0) || !(r > w * std::sqrt(3.0) / 2.0))
    throw std::invalid_argument("snowflake_polygon: degenerate dimensions (need r > w*sqrt(3)/2, w > 0)");
  if (chamfer < 0) throw std::invalid_argument("snowflake_polygon: chamfer must be >= 0");

  // Arms along k*60 deg. Tip corners sit at distance r along the arm, offset
  // by w/2; the concave corner between adjacent arms lies on the bisector at
  // distance w.
  Loop base;
  base.reserve(18);
  for (int k = 0; k < 6; ++k) {
    const double th = k * kPi / 3.0;
    const Vec2 along{std::cos(th), std::sin(th)};
    const Vec2 perp{-along.y, along.x};
    base.push_back(r * along - (w / 2.0) * perp);
    base.push_back(r * along + (w / 2.0) * perp);
    const double mid = th + kPi / 6.0;
    base.push_back({w * std::cos(mid), w * std::sin(mid)});
  }
  // Snap to exact six-fold symmetry: rotate the first arm's three vertices.
  Loop sym;
  sym.reserve(base.size());
  for (int k = 0; k < 6; ++k) {
    const double c = std::cos(k * kPi / 3.0);
    const double s = std::sin(k * kPi / 3.0);
    for (int j = 0; j < 3; ++j) {
      const Vec2 v = base[j];
      sym.push_back({c * v.x - s * v.y, s * v.x + c * v.y});
    }
  }
  return translated(round_corners(sym, chamfer, kFilletStep), center);
}

Loop c_hole_polygon(const CellParams& cell, double d, double chamfer, Vec2 center, int opening) {
  const HoleDims h{cell.q, cell.v, cell.p, cell.u, d};
  throw_if_any(check_hole(h, "c_hole"));
  if (opening != 1 && opening != -1) throw std::invalid_argument("c_hole_polygon: opening must be +1 or -1");
  Loop loop = round_corners(c_hole_outline(h), chamfer, kFilletStep);
  if (opening < 0) loop = reflect_x(loop, 0.0);
  return translated(loop, center);
}

std::vector<double> cell_centers(const ResonatorParams& params) {
  const int n = params.cells_per_side();
  std::vector<double> xs;
  xs.reserve(2 * n);
  for (int k = n - 1; k >= 0; --k) xs.push_back(-(k + 0.5) * params.a);
  for (int k = 0; k < n; ++k) xs.push_back((k + 0.5) * params.a);
  return xs;
}

Layout vertebrae_layout(const ResonatorParams& params) {
  params.validate();
  const int n_side = params.cells_per_side();

  // Cells on the left half ordered from the defect outward; index 0 touches x = 0.
  std::vector<HoleDims> dims;
  dims.reserve(n_side);
  const double d = params.d;
  for (int i = 0; i < params.n_defect; ++i) {
    const auto& c = params.defect;
    dims.push_back({c.q, c.v, c.p, c.u, d});
  }
  for (int i = params.n_gradient; i >= 1; --i) {
    const auto c = gradient_cell(params.mirror, params.defect, i, params.n_gradient);
    dims.push_back({c.q, c.v, c.p, c.u, d});
  }
  for (int i = 0; i < params.n_mirror; ++i) {
    const auto& c = params.mirror;
    dims.push_back({c.q, c.v, c.p, c.u, d});
  }
  for (int k = 1; k <= params.n_taper; ++k) {
    const auto c = taper_cell(params.mirror, k, params.n_taper);
    const double f = 1.0 - static_cast<double>(k) / (params.n_taper + 1);
    dims.push_back({c.q, c.v, c.p, c.u, d * f});
  }

  Layout layout;
  std::vector<Polygon> left;
  for (int k = n_side - 1; k >= 0; --k) {
    const double xc = -(k + 0.5) * params.a;
    throw_if_any(check_hole(dims[k], "cell " + std::to_string(k)));
    Loop loop = round_corners(c_hole_outline(dims[k]), params.chamfer, kFilletStep);
    loop = reflect_x(loop, 0.0);  // opening faces away from the defect
    left.push_back({kCHoleLayer, translated(loop, {xc, 0.0})});
  }
  for (const auto& p : left) layout.polygons.push_back(p);
  for (auto it = left.rbegin(); it != left.rend(); ++it)
    layout.polygons.push_back({kCHoleLayer, reflect_x(it->vertices, 0.0)});

  // Snowflake rows above the waveguide, mirrored below.
  const Loop flake = snowflake_polygon(params.r, params.w, params.chamfer);
  const int half_cols = n_side + params.snowflake_margin;
  const double row_step = params.a * std::sqrt(3.0) / 2.0;
  std::vector<Polygon> top;
  for (int j = 0; j < params.snowflake_rows; ++j) {
    const double y = params.s / 2.0 + j * row_step;
    if (j % 2 == 0) {
      for (int m = -half_cols; m < half_cols; ++m)
        top.push_back({kSnowflakeLayer, translated(flake, {(m + 0.5) * params.a, y})});
    } else {
      for (int m = -half_cols; m <= half_cols; ++m)
        top.push_back({kSnowflakeLayer, translated(flake, {m * params.a, y})});
    }
  }
  for (const auto& p : top) layout.polygons.push_back(p);
  for (const auto& p : top) layout.polygons.push_back({kSnowflakeLayer, reflect_y(p.vertices)});
  return layout;
}

double grating_y(double a, double b, double x) {
  const double lhs = a - b * x;
  const double disc = lhs * lhs - x * x;
  if (!(lhs >= 0.0) || !(disc >= 0.0))
    throw std::domain_error("grating_y: x = " + std::to_string(x) + " lies outside the curve");
  return std::sqrt(disc);
}

namespace {

Vec2 conic_point(double a, double b, double phi) {
  // Polar form of a = b x + r about the focus.
  const double r = a / (1.0 + b * std::cos(phi));
  return {r * std::cos(phi), r * std::sin(phi)};
}

double chord_sagitta(Vec2 p0, Vec2 p1, Vec2 mid) {
  const Vec2 chord = p1 - p0;
  const double len = norm(chord);
  if (len == 0.0) return norm(mid - p0);
  return std::abs(cross(chord, mid - p0)) / len;
}

void sample_conic(double a, double b, double phi0, double phi1, double tol, int depth,
                  std::vector<Vec2>& out) {
  const Vec2 p0 = conic_point(a, b, phi0);
  const Vec2 p1 = conic_point(a, b, phi1);
  const double mid_phi = 0.5 * (phi0 + phi1);
  const Vec2 mid = conic_point(a, b, mid_phi);
  if (depth < 48 && chord_sagitta(p0, p1, mid) > tol) {
    sample_conic(a, b, phi0, mid_phi, tol, depth + 1, out);
    sample_conic(a, b, mid_phi, phi1, tol, depth + 1, out);
    return;
  }
  out.push_back(p1);
}

std::vector<Vec2> sample_curve(double a, double b, double half_angle, double tol) {
  // Start from a uniform split so that short, nearly straight spans do not
  // hide curvature from the sagitta test.
  constexpr int kInitial = 16;
  std::vector<Vec2> pts{conic_point(a, b, -half_angle)};
  for (int i = 0; i < kInitial; ++i) {
    const double p0 = -half_angle + 2.0 * half_angle * i / kInitial;
    const double p1 = -half_angle + 2.0 * half_angle * (i + 1) / kInitial;
    sample_conic(a, b, p0, p1, tol, 0, pts);
  }
  return pts;
}

}  // namespace

std::vector<Curve> grating_curves(const GratingParams& params) {
  params.validate();
  const double half_angle = params.half_angle_deg * kPi / 180.0;
  std::vector<Curve> curves;
  curves.reserve(2 * params.n_grates);
  for (int n = 0; n < params.n_grates; ++n) {
    const double inner = params.first_intercept + n * params.pitch;
    const double outer = inner + params.fill * params.pitch;
    for (double a : {inner, outer})
      curves.push_back({a, sample_curve(a, params.eccentricity, half_angle, params.chord_tolerance)});
  }
  return curves;
}

Layout grating_layout(const GratingParams& params) {
  const auto curves = grating_curves(params);
  Layout layout;
  for (std::size_t i = 0; i + 1 < curves.size(); i += 2) {
    // Outer curve counter-clockwise (increasing angle), inner curve back.
    Loop loop(curves[i + 1].points.begin(), curves[i + 1].points.end());
    loop.insert(loop.end(), curves[i].points.rbegin(), curves[i].points.rend());
    layout.polygons.push_back({kGratingLayer, std::move(loop)});
  }
  return layout;
}

Vec2 MirrorPlane::reflect(Vec2 v) const {
  const Vec2 n = normalized(normal);
  const double dist = dot(v - point, n);
  return {v.x - 2.0 * dist * n.x, v.y - 2.0 * dist * n.y};
}

namespace {

// Uniform bucket grid for nearest-vertex queries.
class VertexIndex {
 public:
  VertexIndex(const std::vector<Vec2>& pts, double cell) : pts_(pts), cell_(cell) {
    for (std::size_t i = 0; i < pts_.size(); ++i) buckets_[key(cell_of(pts_[i].x), cell_of(pts_[i].y))].push_back(i);
  }

  double nearest(Vec2 q) const {
    const long cx = cell_of(q.x);
    const long cy = cell_of(q.y);
    double best = std::numeric_limits<double>::infinity();
    for (long ring = 0; ring < 1'000'000; ++ring) {
      for (long dx = -ring; dx <= ring; ++dx) {
        for (long dy = -ring; dy <= ring; ++dy) {
          if (std::max(std::labs(dx), std::labs(dy)) != ring) continue;
          auto it = buckets_.find(key(cx + dx, cy + dy));
          if (it == buckets_.end()) continue;
          for (std::size_t i : it->second) best = std::min(best, norm(pts_[i] - q));
        }
      }
      // Every unvisited bucket is at least `ring * cell_` away.
      if (best <= ring * cell_) break;
      if (ring > max_ring_) break;
    }
    return best;
  }

  void set_max_ring(long r) { max_ring_ = r; }

 private:
  long cell_of(double v) const { return static_cast<long>(std::floor(v / cell_)); }
  static std::uint64_t key(long x, long y) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32) |
           static_cast<std::uint32_t>(y);
  }

  const std::vector<Vec2>& pts_;
  double cell_;
  long max_ring_ = 1'000'000;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

}  // namespace

SymmetryReport symmetry_check(const Layout& layout, const MirrorPlane& plane) {
  std::vector<Vec2> original;
  original.reserve(layout.vertex_count());
  for (const auto& poly : layout.polygons)
    for (const auto& v : poly.vertices) original.push_back(v);
  SymmetryReport report;
  report.vertices = original.size();
  if (original.empty()) return report;

  std::vector<Vec2> mirrored;
  mirrored.reserve(original.size());
  for (const auto& v : original) mirrored.push_back(plane.reflect(v));

  const auto box = layout.bounds();
  const double extent = std::max(box.width(), box.height());
  const double cell = std::max(extent / std::sqrt(static_cast<double>(original.size())), 1e-6);
  const long max_ring = static_cast<long>(std::ceil(2.0 * extent / cell)) + 2;

  VertexIndex in_original(original, cell);
  VertexIndex in_mirrored(mirrored, cell);
  in_original.set_max_ring(max_ring);
  in_mirrored.set_max_ring(max_ring);
  for (const auto& v : mirrored) report.max_distance = std::max(report.max_distance, in_original.nearest(v));
  for (const auto& v : original) report.max_distance = std::max(report.max_distance, in_mirrored.nearest(v));
  return report;
}

}  // namespace omkit::geometry
