#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <fstream>
#include <random>

#include "omkit/errors.hpp"
#include "omkit/pec.hpp"
#include "omkit/special.hpp"
#include "test_support.hpp"

using namespace omkit::pec;
using omkit::geometry::Layout;
using omkit::geometry::Loop;
using omkit::testing::kPi;
using omkit::testing::radial_integral;

namespace {

// E_nu(x) straight from the defining integral over [1, inf).
double expint_oracle(double nu, double x) {
  boost::math::quadrature::exp_sinh<double> rule;
  return rule.integrate([&](double t) { return std::exp(-x * t) * std::pow(t, -nu); }, 1.0,
                        std::numeric_limits<double>::infinity());
}

PsfModel single(double sigma, double gamma, double nu, double cutoff = 0.0) {
  PsfModel m;
  m.terms = {{1.0, sigma, gamma, nu}};
  m.cutoff = cutoff;
  return m;
}

Layout rect_layout(double x0, double y0, double x1, double y1) {
  Layout l;
  l.polygons.push_back({"rect", {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}});
  return l;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("expint against closed forms and the defining integral") {
  using omkit::special::expint;
  CHECK(expint(0.0, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(expint(0.0, 3.5) == doctest::Approx(std::exp(-3.5) / 3.5).epsilon(1e-14));
  for (double nu : {0.5, 1.0, 1.5, 2.0, 3.7})
    for (double x : {1e-4, 0.01, 0.3, 1.0, 4.0, 30.0}) {
      CAPTURE(nu);
      CAPTURE(x);
      CHECK(expint(nu, x) == doctest::Approx(expint_oracle(nu, x)).epsilon(1e-10));
    }
  for (double nu : {0.5, 1.0, 2.0})
    for (double x : {20.0, 100.0, 600.0}) CHECK(expint(nu, x) < std::exp(-x) / x);
  CHECK(omkit::special::expint_scaled(1.0, 800.0) == doctest::Approx(1.0 / 801.0).epsilon(2e-6));
  CHECK_THROWS_AS(expint(1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(expint(-1.0, 1.0), std::domain_error);
}

TEST_CASE("gp_eval matches the written-out term and its Gaussian limit") {
  const GpTerm gauss{1.0, 5.0, 0.0, 0.0};
  CHECK(gp_eval(gauss, 0.0) == doctest::Approx(1.0 / (kPi * 25.0)).epsilon(1e-14));
  for (const GpTerm t : {GpTerm{1.0, 685.0, 1.0, 1.0}, GpTerm{1.0, 40.0, 12.0, 2.5}, GpTerm{1.0, 100.0, 300.0, 0.7}})
    for (double r : {0.0, 0.5, 3.0, 50.0, 400.0, 2000.0})
      CHECK(gp_eval(t, r) == doctest::Approx(omkit::testing::gp_reference(t.sigma, t.gamma, t.nu, r)).epsilon(1e-10));
  // nu -> 0 approaches the Gaussian continuously.
  CHECK(gp_eval({1.0, 5.0, 2.0, 1e-9}, 2.0) == doctest::Approx(gp_eval(gauss, 2.0)).epsilon(1e-6));
  CHECK_THROWS(gp_eval({1.0, -1.0, 0.0, 0.0}, 1.0));
  CHECK_THROWS(gp_eval(gauss, -1.0));
}

TEST_CASE("every shipped term and the mixture integrate to one") {
  const PsfModel m = PsfModel::gaas_250nm();
  CHECK(m.weight_sum() == doctest::Approx(1.0).epsilon(1e-6));
  for (const auto& t : m.terms) {
    CAPTURE(t.sigma);
    const double r_max = 10.0 * std::max(t.sigma, 10.0 * t.gamma);
    const double integral = radial_integral([&](double r) { return gp_eval(t, r); }, 1e-3, r_max);
    CHECK(std::abs(integral - 1.0) < 1e-6);
  }
  PsfModel no_cut = m;
  no_cut.cutoff = 0.0;
  const double total = radial_integral([&](double r) { return psf_eval(no_cut, r); }, 1e-3, 130000.0);
  CHECK(std::abs(total - 1.0) < 1e-6);
}

TEST_CASE("psf_eval is flat inside the cutoff and decreasing outside") {
  const PsfModel m = PsfModel::gaas_250nm();
  CHECK(psf_eval(m, 0.0) == psf_eval(m, m.cutoff));
  CHECK(psf_eval(m, 50.0) == psf_eval(m, m.cutoff));
  double prev = psf_eval(m, m.cutoff);
  for (double r = m.cutoff + 1.0; r < 80000.0; r *= 1.05) {
    const double v = psf_eval(m, r);
    CHECK(v > 0.0);
    CHECK(v <= prev);
    prev = v;
  }
  const PsfModel one = single(685.0, 1.0, 1.0);
  for (double r : {0.0, 10.0, 700.0}) CHECK(psf_eval(one, r) == gp_eval(one.terms[0], r));
}

TEST_CASE("PSF validation and JSON") {
  PsfModel bad = PsfModel::gaas_250nm();
  bad.terms[0].weight = 0.5;
  bad.terms[1].sigma = -2.0;
  bad.cutoff = -1.0;
  CHECK(bad.check().size() >= 3);
  CHECK_THROWS_AS(bad.validate(), omkit::ValidationError);

  const PsfModel m = PsfModel::gaas_250nm();
  const PsfModel back = psf_from_json(psf_to_json(m));
  REQUIRE(back.terms.size() == m.terms.size());
  for (std::size_t i = 0; i < m.terms.size(); ++i) {
    CHECK(back.terms[i].weight == m.terms[i].weight);
    CHECK(back.terms[i].sigma == m.terms[i].sigma);
    CHECK(back.terms[i].gamma == m.terms[i].gamma);
    CHECK(back.terms[i].nu == m.terms[i].nu);
  }
  CHECK(back.cutoff == m.cutoff);

  const PsfModel shipped = load_psf(omkit::testing::source_dir() / "psf" / "gaas-250nm.json");
  REQUIRE(shipped.terms.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(shipped.terms[i].weight == m.terms[i].weight);
    CHECK(shipped.terms[i].sigma == m.terms[i].sigma);
  }
  CHECK(shipped.cutoff == 100.0);
  CHECK_THROWS(psf_from_json("{\"terms\": 3}"));
  CHECK_THROWS(load_psf("/nonexistent/psf.json"));
}

TEST_CASE("rasterize computes area fractions") {
  SUBCASE("rectangle filling the grid") {
    DoseMap g(8, 6, 10.0);
    rasterize_into(rect_layout(-5, -5, 100, 100), g);
    for (double v : g.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("half a pixel row") {
    DoseMap g(8, 6, 10.0);
    rasterize_into(rect_layout(0, 20, 80, 25), g);
    for (std::size_t x = 0; x < 8; ++x) {
      CHECK(g.at(x, 2) == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(g.at(x, 1) == 0.0);
      CHECK(g.at(x, 3) == 0.0);
    }
  }
  SUBCASE("snowflake coverage matches the shoelace area") {
    Layout l;
    l.polygons.push_back({"snowflake", omkit::geometry::snowflake_polygon(245, 87, 20)});
    const double area = omkit::geometry::polygon_area(l.polygons[0].vertices);
    for (double pixel : {1.0, 2.0}) {
      const DoseMap g = rasterize(l, pixel, 4.0);
      for (double v : g.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-12);
      }
      CHECK(g.total() * pixel * pixel == doctest::Approx(area).epsilon(5e-3));
    }
  }
  DoseMap partial(3, 1, 1.0);
  partial.values = {0.2, 0.5, 0.9};
  CHECK(exposure_target(partial).values == std::vector<double>{0.0, 1.0, 1.0});
  CHECK_THROWS(exposure_target(partial, 0.0));
  CHECK_THROWS(rasterize(Layout{}, 1.0));
  CHECK_THROWS(rasterize(rect_layout(0, 0, 1, 1), 0.0));
}

TEST_CASE("impulse response reproduces psf_eval") {
  const PsfModel m = PsfModel::gaas_250nm();
  DoseMap d(512, 512, 5.0);
  d.at(256, 256) = 1.0;
  const DoseMap out = convolve_dose(d, m);
  double worst = 0.0;
  for (int k = 3; k < 256; ++k)
    for (int diag = 0; diag < 2; ++diag) {
      const std::size_t ix = 256 + k, iy = 256 + (diag ? k : 0);
      if (iy >= 512) continue;
      const double r = 5.0 * std::hypot(ix - 256.0, iy - 256.0);
      worst = std::max(worst, std::abs(out.at(ix, iy) / (psf_eval(m, r) * 25.0) - 1.0));
    }
  CHECK(worst < 0.02);
}

TEST_CASE("FFT convolution equals a direct sum over the sampled kernel") {
  PsfModel m;
  m.terms = {{0.6, 6.0, 0.0, 0.0}, {0.4, 15.0, 3.0, 1.5}};
  m.cutoff = 4.0;
  const double pixel = 2.0;
  const std::size_t n = 48;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DoseMap d(n, n + 5, pixel);
  for (auto& v : d.values) v = u(rng) < 0.2 ? u(rng) : 0.0;

  DoseConvolver conv(d.nx, d.ny, pixel, m);
  const long r = static_cast<long>(conv.fine_radius());
  const double extent = 4.0 * 15.0;
  auto kernel = [&](long dx, long dy) {
    if (dx == 0 && dy == 0) return conv.center_weight();
    const double dist = pixel * std::hypot(double(dx), double(dy));
    const double rr = std::max(dist, m.cutoff);
    double k = 0.0;
    for (const auto& t : m.terms)
      if (dist <= std::max(4.0 * t.sigma, m.cutoff)) k += t.weight * gp_eval(t, rr);
    return k * pixel * pixel;
  };
  // The kernel sampled this way sums to one.
  double mass = 0.0;
  for (long dy = -r; dy <= r; ++dy)
    for (long dx = -r; dx <= r; ++dx) mass += kernel(dx, dy);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(static_cast<double>(r) * pixel >= extent);

  const DoseMap fast = conv.apply(d);
  double worst = 0.0;
  for (long y = 0; y < static_cast<long>(d.ny); ++y)
    for (long x = 0; x < static_cast<long>(d.nx); ++x) {
      double direct = 0.0;
      for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx) {
          const long sx = x - dx, sy = y - dy;
          if (sx < 0 || sy < 0 || sx >= static_cast<long>(d.nx) || sy >= static_cast<long>(d.ny)) continue;
          direct += kernel(dx, dy) * d.at(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy));
        }
      worst = std::max(worst, std::abs(direct - fast.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y))));
    }
  CHECK(worst < 1e-12);
}

TEST_CASE("convolution is linear and conserves dose") {
  const PsfModel m = PsfModel::gaas_250nm();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DoseMap a(200, 160, 10.0), b(200, 160, 10.0);
  for (auto& v : a.values) v = u(rng);
  for (auto& v : b.values) v = u(rng) * u(rng);
  const double alpha = 0.7, beta = -2.3;
  DoseMap mix = a;
  for (std::size_t i = 0; i < mix.values.size(); ++i) mix.values[i] = alpha * a.values[i] + beta * b.values[i];
  const DoseConvolver conv(a.nx, a.ny, a.pixel, m);
  const DoseMap ca = conv.apply(a), cb = conv.apply(b), cm = conv.apply(mix);
  std::vector<double> diff(cm.values.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = cm.values[i] - (alpha * ca.values[i] + beta * cb.values[i]);
  CHECK(max_abs(diff) <= 1e-9 * max_abs(cm.values));

  // Dose is conserved when the grid holds the whole kernel.
  const PsfModel short_range = single(30.0, 5.0, 1.0, 10.0);
  DoseMap spot(128, 128, 4.0);
  spot.at(60, 70) = 1.0;
  spot.at(64, 64) = 0.5;
  CHECK(convolve_dose(spot, short_range).total() == doctest::Approx(1.5).epsilon(1e-3));
}

TEST_CASE("uniform exposure stays uniform away from the edges") {
  const PsfModel m = single(20.0, 4.0, 1.0, 5.0);
  DoseMap d(160, 160, 4.0);
  std::fill(d.values.begin(), d.values.end(), 1.0);
  const DoseConvolver conv(d.nx, d.ny, d.pixel, m);
  const DoseMap out = conv.apply(d);
  const std::size_t r = conv.fine_radius();
  for (std::size_t y = r; y + r < d.ny; ++y)
    for (std::size_t x = r; x + r < d.nx; ++x) CHECK(out.at(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.at(0, 0) < 0.5);
}

TEST_CASE("two distant exposures: midpoint dose matches direct summation") {
  const PsfModel m = PsfModel::gaas_250nm();
  const double pixel = 20.0;
  DoseMap d(1600, 200, pixel, -16000.0, -2000.0);
  // Pixels centered on x = -10000 and x = +10000, y = 0 (pixel centers at 10 mod 20).
  auto index = [&](double x) { return static_cast<std::size_t>((x - d.origin_x) / pixel); };
  const std::size_t ya = static_cast<std::size_t>((0.0 - d.origin_y) / pixel);
  d.at(index(-10000.0), ya) = 1.0;
  d.at(index(10000.0), ya) = 1.0;
  const DoseConvolver conv(d.nx, d.ny, pixel, m);
  CHECK(conv.coarse_factor() > 0);
  const DoseMap out = conv.apply(d);
  const double xa = d.center_x(index(-10000.0)), xb = d.center_x(index(10000.0));
  const std::size_t mid = index(0.0);
  const double xm = d.center_x(mid);
  const double expected = (psf_eval(m, std::abs(xm - xa)) + psf_eval(m, std::abs(xm - xb))) * pixel * pixel;
  CHECK(out.at(mid, ya) == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("padding problems are reported") {
  const PsfModel m = single(20.0, 0.0, 0.0, 0.0);
  DoseMap d(64, 64, 4.0);
  d.at(1, 30) = 1.0;
  ConvolveOptions narrow;
  narrow.padding = 3;
  CHECK_THROWS_AS(convolve_dose(d, m, narrow), PaddingError);
  ConvolveOptions strict;
  strict.require_margin = true;
  CHECK_THROWS_AS(convolve_dose(d, m, strict), PaddingError);
  d.at(1, 30) = 0.0;
  d.at(32, 32) = 1.0;
  CHECK_NOTHROW(convolve_dose(d, m, strict));
  ConvolveOptions wide;
  wide.padding = 40;
  const DoseMap a = convolve_dose(d, m, wide), b = convolve_dose(d, m);
  std::vector<double> diff(a.values.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a.values[i] - b.values[i];
  CHECK(max_abs(diff) < 1e-14);
}

TEST_CASE("correct_dose with a delta kernel returns the target") {
  const PsfModel delta = single(0.3, 0.0, 0.0, 0.0);
  DoseMap target(32, 32, 5.0);
  for (std::size_t y = 8; y < 20; ++y)
    for (std::size_t x = 10; x < 25; ++x) target.at(x, y) = 1.0;
  target.at(9, 8) = 0.4;
  const auto res = correct_dose(target, delta);
  CHECK(res.converged);
  CHECK(res.iterations == 1);
  for (std::size_t i = 0; i < target.values.size(); ++i) CHECK(res.dose.values[i] == target.values[i]);
}

TEST_CASE("isolated square: corrected interior dose exceeds one") {
  const PsfModel m = PsfModel::gaas_250nm();
  DoseMap target(160, 160, 5.0);
  for (std::size_t y = 70; y < 90; ++y)
    for (std::size_t x = 70; x < 90; ++x) target.at(x, y) = 1.0;
  const auto res = correct_dose(target, m);
  REQUIRE(res.converged);
  CHECK(res.residual <= 1e-3);
  CHECK(res.dose.at(80, 80) > 1.0);
  for (double v : res.dose.values) CHECK(v >= 0.0);
  const DoseMap back = convolve_dose(res.dose, m);
  double worst = 0.0;
  for (std::size_t i = 0; i < target.values.size(); ++i)
    if (target.values[i] > 0) worst = std::max(worst, std::abs(back.values[i] - target.values[i]));
  CHECK(worst <= 1e-3);
}

TEST_CASE("dense snowflake field needs less dose per shape than an isolated one") {
  const PsfModel m = PsfModel::gaas_250nm();
  const double pitch = 600.0, pixel = 10.0;
  Layout dense, isolated;
  for (int j = -3; j <= 3; ++j)
    for (int i = -3; i <= 3; ++i) {
      const Loop s = omkit::geometry::snowflake_polygon(245, 87, 20, {i * pitch, j * pitch});
      dense.polygons.push_back({"snowflake", s});
      if (i == 0 && j == 0) isolated.polygons.push_back({"snowflake", s});
    }
  DoseMap grid_d(480, 480, pixel, -2400.0, -2400.0);
  DoseMap grid_i = grid_d;
  rasterize_into(dense, grid_d);
  rasterize_into(isolated, grid_i);
  grid_d = exposure_target(grid_d);
  grid_i = exposure_target(grid_i);
  const auto rd = correct_dose(grid_d, m), ri = correct_dose(grid_i, m);
  REQUIRE(rd.converged);
  REQUIRE(ri.converged);
  // Mean written dose over the central shape.
  double sum_d = 0.0, sum_i = 0.0, cover = 0.0;
  for (std::size_t k = 0; k < grid_i.values.size(); ++k) {
    sum_d += rd.dose.values[k] * grid_i.values[k];
    sum_i += ri.dose.values[k] * grid_i.values[k];
    cover += grid_i.values[k];
  }
  CHECK(sum_d / cover < sum_i / cover);
  CHECK(sum_i / cover > 1.0);
}

TEST_CASE("correct_dose reports non-convergence with the best iterate") {
  const PsfModel m = PsfModel::gaas_250nm();
  DoseMap target(96, 96, 5.0);
  for (std::size_t y = 40; y < 56; ++y)
    for (std::size_t x = 40; x < 56; ++x) target.at(x, y) = 1.0;
  CorrectionOptions opts;
  opts.max_iterations = 2;
  opts.tolerance = 1e-9;
  const auto res = correct_dose(target, m, opts);
  CHECK_FALSE(res.converged);
  CHECK(res.iterations == 2);
  CHECK(res.residual > 1e-9);
  CHECK(res.dose.same_grid(target));

  DoseMap over = target;
  over.at(0, 0) = 1.5;
  CHECK_THROWS(correct_dose(over, m));
  opts.damping = 0.0;
  CHECK_THROWS(correct_dose(target, m, opts));
}

TEST_CASE("dose files round trip exactly") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  DoseMap d(37, 21, 2.5, -41.25, 13.0);
  for (auto& v : d.values) v = u(rng);
  omkit::testing::TempDir dir("dose");
  save_dose(d, dir / "d.bin");
  const DoseMap back = load_dose(dir / "d.bin");
  CHECK(back.same_grid(d));
  CHECK(back.origin_x == d.origin_x);
  CHECK(back.origin_y == d.origin_y);
  CHECK(back.values == d.values);

  {
    std::ofstream bad(dir / "bad.bin", std::ios::binary);
    bad << "OMKIT-DOSE 1\n37 21\n";
  }
  CHECK_THROWS(load_dose(dir / "bad.bin"));
  CHECK_THROWS(load_dose(dir / "missing.bin"));
  DoseMap negative(2, 2, 1.0);
  negative.values[3] = -1.0;
  CHECK_FALSE(negative.check().empty());
}
