#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <random>

#include "omkit/geometry.hpp"
#include "omkit/layout_io.hpp"
#include "test_support.hpp"

using namespace omkit::geometry;
using omkit::testing::smoothstep_reference;

namespace {

double max_symmetry(const Layout& l) {
  return std::max(symmetry_check(l, MirrorPlane::x_equals(0)).max_distance,
                  symmetry_check(l, MirrorPlane::y_equals(0)).max_distance);
}

Loop rotate(const Loop& loop, double angle) {
  Loop out;
  const double c = std::cos(angle), s = std::sin(angle);
  for (const auto& v : loop) out.push_back({c * v.x - s * v.y, s * v.x + c * v.y});
  return out;
}

double hausdorff(const Loop& a, const Loop& b) {
  auto one_way = [](const Loop& p, const Loop& q) {
    double worst = 0.0;
    for (const auto& u : p) {
      double best = 1e300;
      for (const auto& v : q) best = std::min(best, std::hypot(u.x - v.x, u.y - v.y));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_way(a, b), one_way(b, a));
}

}  // namespace

TEST_CASE("smoothstep matches the incomplete beta reference") {
  for (int n = 0; n <= 5; ++n)
    for (int i = 0; i <= 200; ++i) {
      const double x = i / 200.0;
      CHECK(smoothstep(n, x) == doctest::Approx(smoothstep_reference(n, x)).epsilon(1e-12));
    }
}

TEST_CASE("smoothstep endpoints, complementarity and monotonicity") {
  for (int n = 0; n <= 5; ++n) {
    CAPTURE(n);
    CHECK(smoothstep(n, 0.0) == 0.0);
    CHECK(smoothstep(n, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    double prev = -1.0;
    for (int i = 0; i <= 100; ++i) {
      const double x = i / 100.0;
      CHECK(smoothstep(n, x) + smoothstep(n, 1.0 - x) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(smoothstep(n, x) >= prev);
      prev = smoothstep(n, x);
    }
  }
}

TEST_CASE("smoothstep derivatives 1..n vanish at both ends") {
  // Near the ends the step behaves as x^(n+1), so S(h)/h^(n+1) stays bounded
  // while the first n derivatives, by finite differences, go to zero.
  for (int n = 1; n <= 5; ++n) {
    CAPTURE(n);
    for (double h : {1e-2, 5e-3}) {
      const double lead = smoothstep(n, h) / std::pow(h, n + 1);
      const double lead_hi = (1.0 - smoothstep(n, 1.0 - h)) / std::pow(h, n + 1);
      // The leading coefficient is binomial(2n+1, n).
      double binom = 1.0;
      for (int k = 1; k <= n; ++k) binom = binom * (n + 1 + k) / k;
      CHECK(lead == doctest::Approx(binom).epsilon(0.2));
      CHECK(lead_hi == doctest::Approx(binom).epsilon(0.2));
    }
  }
  CHECK(smoothstep(0, 0.3) == doctest::Approx(0.3));
}

TEST_CASE("smoothstep rejects invalid arguments") {
  CHECK_THROWS_AS(smoothstep(-1, 0.5), std::domain_error);
  CHECK_THROWS_AS(smoothstep(2, -0.01), std::domain_error);
  CHECK_THROWS_AS(smoothstep(2, 1.01), std::domain_error);
}

TEST_CASE("gradient cells interpolate strictly between mirror and defect") {
  const auto p = ResonatorParams::simulation();
  for (int i = 1; i <= p.n_gradient; ++i) {
    const CellParams c = gradient_cell(p.mirror, p.defect, i, p.n_gradient);
    const double s = smoothstep(1, static_cast<double>(i) / (p.n_gradient + 1));
    CHECK(c.q == doctest::Approx(p.mirror.q + s * (p.defect.q - p.mirror.q)));
    CHECK(c.p == doctest::Approx(p.mirror.p + s * (p.defect.p - p.mirror.p)));
    CHECK(c.p != doctest::Approx(p.mirror.p));
    CHECK(c.p != doctest::Approx(p.defect.p));
  }
}

TEST_CASE("taper cells shrink linearly") {
  const CellParams m{300, 480, 180, 250};
  const CellParams t1 = taper_cell(m, 1, 2);
  const CellParams t2 = taper_cell(m, 2, 2);
  CHECK(t1.q == doctest::Approx(m.q * 2.0 / 3.0));
  CHECK(t2.v == doctest::Approx(m.v / 3.0));
}

TEST_CASE("polygon area and orientation") {
  const Loop square{{0, 0}, {2, 0}, {2, 3}, {0, 3}};
  CHECK(polygon_area(square) == doctest::Approx(6.0));
  const Loop cw(square.rbegin(), square.rend());
  CHECK(polygon_area(cw) == doctest::Approx(-6.0));
}

TEST_CASE("rounded corners remove the expected area") {
  // A square of side L with all corners filleted at radius R loses
  // 4 R^2 (1 - pi/4).
  const Loop square{{0, 0}, {100, 0}, {100, 100}, {0, 100}};
  const double r = 20.0;
  const Loop rounded = round_corners(square, r, 0.5 * omkit::testing::kPi / 180.0);
  const double expected = 100.0 * 100.0 - 4.0 * r * r * (1.0 - omkit::testing::kPi / 4.0);
  CHECK(polygon_area(rounded) == doctest::Approx(expected).epsilon(1e-4));
  // Vertex count is independent of scale.
  Loop big;
  for (const auto& v : square) big.push_back(10.0 * v);
  CHECK(round_corners(big, 10 * r, 0.5 * omkit::testing::kPi / 180.0).size() == rounded.size());
}

TEST_CASE("snowflake has sixfold symmetry") {
  const Loop s = snowflake_polygon(245, 87, 20);
  CHECK(polygon_area(s) > 0);
  CHECK(hausdorff(s, rotate(s, omkit::testing::kPi / 3.0)) < 1e-9);
  CHECK(hausdorff(s, rotate(s, 2.0 * omkit::testing::kPi / 3.0)) < 1e-9);
  // Without chamfer: three bars 2r x w crossing at 60 deg. Inclusion-exclusion
  // with pairwise rhombi 2 w^2 / sqrt(3) and the central hexagon
  // (sqrt(3) / 2) w^2 gives 6 r w - (3 sqrt(3) / 2) w^2.
  const double r = 245, w = 87;
  const Loop sharp = snowflake_polygon(r, w, 0.0);
  CHECK(polygon_area(sharp) == doctest::Approx(6.0 * r * w - 1.5 * std::sqrt(3.0) * w * w).epsilon(1e-9));
  // Each of the 18 fillets moves at most R^2 of area in either direction.
  CHECK(std::abs(polygon_area(s) - polygon_area(sharp)) < 18.0 * 20.0 * 20.0);
  CHECK(polygon_area(s) != doctest::Approx(polygon_area(sharp)));
}

TEST_CASE("C-hole openings mirror each other") {
  const CellParams c{320, 480, 175, 210};
  const Loop right = c_hole_polygon(c, 80, 20, {0, 0}, +1);
  const Loop left = c_hole_polygon(c, 80, 20, {0, 0}, -1);
  CHECK(polygon_area(right) > 0);
  CHECK(polygon_area(right) < c.q * c.v);
  CHECK(polygon_area(right) == doctest::Approx(polygon_area(left)));
  Loop mirrored;
  for (const auto& v : right) mirrored.push_back({-v.x, v.y});
  CHECK(hausdorff(mirrored, left) < 1e-9);
}

TEST_CASE("vertebrae layout mirror symmetry") {
  for (const auto& p : {ResonatorParams::simulation(), ResonatorParams::fabrication(),
                        ResonatorParams::simulation().scaled(1.1), ResonatorParams::fabrication().scaled(0.9)}) {
    const Layout l = vertebrae_layout(p);
    CHECK(l.polygons.size() > static_cast<std::size_t>(2 * p.cells_per_side()));
    CHECK(max_symmetry(l) < 1e-9);
  }
}

TEST_CASE("vertebrae layout symmetry survives random valid perturbations") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> jitter(0.97, 1.03);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = ResonatorParams::simulation();
    p.a *= jitter(rng);
    p.mirror.p *= jitter(rng);
    p.defect.u *= jitter(rng);
    p.s *= jitter(rng);
    if (!p.check().empty()) continue;
    CHECK(max_symmetry(vertebrae_layout(p)) < 1e-9);
  }
}

TEST_CASE("cell centers are symmetric and pitched by a") {
  const auto p = ResonatorParams::simulation();
  const auto c = cell_centers(p);
  REQUIRE(c.size() == static_cast<std::size_t>(2 * p.cells_per_side()));
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(-c[c.size() - 1 - i]));
  CHECK(c[1] - c[0] == doctest::Approx(p.a));
}

TEST_CASE("resonator parameter validation lists every problem") {
  auto p = ResonatorParams::simulation();
  p.a = -1;
  p.mirror.p = 600;
  p.d = 0;
  const auto problems = p.check();
  CHECK(problems.size() >= 3);
  CHECK_THROWS(p.validate());
  CHECK(ResonatorParams::simulation().check().empty());
  CHECK(ResonatorParams::fabrication().check().empty());
  CHECK_THROWS(ResonatorParams::simulation().scaled(0.0));
}

TEST_CASE("grating curves satisfy their conic") {
  const auto g = GratingParams::fabrication();
  const auto curves = grating_curves(g);
  REQUIRE(curves.size() == static_cast<std::size_t>(2 * g.n_grates));
  for (std::size_t i = 1; i < curves.size(); ++i) CHECK(curves[i].intercept > curves[i - 1].intercept);
  for (const auto& c : curves)
    for (const auto& v : c.points)
      CHECK(g.eccentricity * v.x + std::hypot(v.x, v.y) == doctest::Approx(c.intercept).epsilon(1e-9));
  CHECK(curves[2].intercept - curves[0].intercept == doctest::Approx(g.pitch));
  CHECK(curves[1].intercept - curves[0].intercept == doctest::Approx(g.fill * g.pitch));
}

TEST_CASE("grating_y and its domain") {
  const double a = 1000, b = -0.05;
  for (double x : {900.0, 950.0, 1000.0}) {
    const double y = grating_y(a, b, x);
    CHECK(b * x + std::hypot(x, y) == doctest::Approx(a));
  }
  CHECK_THROWS_AS(grating_y(a, b, 2000.0), std::domain_error);
  const Layout l = grating_layout(GratingParams::fabrication());
  CHECK(symmetry_check(l, MirrorPlane::y_equals(0)).max_distance < 1e-9);
}

TEST_CASE("layout JSON round trip and SVG export") {
  const Layout l = vertebrae_layout(ResonatorParams::simulation());
  const Layout back = layout_from_json(layout_to_json(l));
  REQUIRE(back.polygons.size() == l.polygons.size());
  for (std::size_t i = 0; i < l.polygons.size(); ++i) {
    CHECK(back.polygons[i].layer == l.polygons[i].layer);
    REQUIRE(back.polygons[i].vertices.size() == l.polygons[i].vertices.size());
    for (std::size_t k = 0; k < l.polygons[i].vertices.size(); ++k) {
      CHECK(back.polygons[i].vertices[k].x == l.polygons[i].vertices[k].x);
      CHECK(back.polygons[i].vertices[k].y == l.polygons[i].vertices[k].y);
    }
  }
  const std::string svg = layout_to_svg(l);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("<polygon") != std::string::npos);

  omkit::testing::TempDir dir("layout");
  save_layout(l, dir / "l.json");
  CHECK(load_layout(dir / "l.json").vertex_count() == l.vertex_count());
  CHECK_THROWS(layout_from_json("{\"units\": \"um\", \"polygons\": []}"));
}
