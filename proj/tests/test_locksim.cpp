#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "omkit/errors.hpp"
#include "omkit/locksim.hpp"
#include "test_support.hpp"

using namespace omkit::locksim;
using omkit::testing::kPi;

namespace {

const double kInflection = 1.0 / (2.0 * std::sqrt(3.0));

std::vector<double> sampled(double fs, double duration, const std::function<double(double)>& f) {
  std::vector<double> out;
  for (long k = 0; k < static_cast<long>(fs * duration); ++k) out.push_back(f(k / fs));
  return out;
}

}  // namespace

TEST_CASE("plant transmission") {
  PlantConfig cfg;
  Plant plant(cfg, 1);
  const PlantState s = plant.state();
  CHECK(plant_transmission(s, cfg.lambda_nm) == doctest::Approx(0.25).epsilon(1e-12));
  PlantState doubled = s;
  doubled.eta *= 2.0;
  for (double dl : {-0.2, 0.0, 0.13})
    CHECK(plant_transmission(doubled, cfg.lambda_nm + dl) ==
          doctest::Approx(2.0 * plant_transmission(s, cfg.lambda_nm + dl)).epsilon(1e-14));
  CHECK(cfg.linewidth_nm() == doctest::Approx(1550.0 / 4300.0));
  CHECK(omega_to_wavelength(wavelength_to_omega(1550.0)) == doctest::Approx(1550.0).epsilon(1e-15));

  // A linear drift carries the peak along.
  PlantConfig drifting = cfg;
  drifting.center.rate = 0.01;  // nm/s
  Plant p(drifting, 1);
  for (int i = 0; i < 200; ++i) p.advance(0.01);
  CHECK(p.center_nm() == doctest::Approx(cfg.lambda_nm + 0.02).epsilon(1e-12));
  CHECK(plant_transmission(p.state(), cfg.lambda_nm + 0.02) == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(plant_transmission(p.state(), cfg.lambda_nm) < 0.249);

  PlantConfig stepped = cfg;
  stepped.eta_step_time = 0.5;
  stepped.eta_step_factor = 0.9;
  Plant ps(stepped, 1);
  for (int i = 0; i < 100; ++i) ps.advance(0.01);
  CHECK(ps.state().eta == doctest::Approx(0.9));

  PlantConfig bad = cfg;
  bad.q_intrinsic = 1000;
  bad.eta = -1;
  CHECK(bad.check().size() == 2);
  CHECK_THROWS_AS(Plant(bad, 1), omkit::ValidationError);
}

TEST_CASE("lock-in demodulation") {
  const double fs = 8000, f = 100, tau = 0.03;
  auto settled = [](const std::vector<double>& y) { return y.back(); };
  SUBCASE("harmonic normalization and orthogonality") {
    for (int k = 1; k <= 3; ++k) {
      const auto in = sampled(fs, 1.0, [&](double t) { return 0.7 * std::cos(2 * kPi * k * f * t); });
      for (int n = 1; n <= 3; ++n) {
        const double v = settled(lockin_demod(in, fs, f, n, tau));
        if (n == k)
          CHECK(v == doctest::Approx(0.7).epsilon(0.02));
        else
          CHECK(std::abs(v) < 0.02);
      }
    }
  }
  SUBCASE("DC input reads zero") {
    const auto in = sampled(fs, 1.0, [](double) { return 3.0; });
    for (int n = 1; n <= 3; ++n) CHECK(std::abs(settled(lockin_demod(in, fs, f, n, tau))) < 0.05);
  }
  SUBCASE("second harmonic of a quadratic") {
    // T = c (l0 + e cos wt)^2 = c (l0^2 + e^2/2) + 2 c l0 e cos wt + (c e^2 / 2) cos 2wt.
    const double c = 4.0, e = 0.1, l0 = 0.0;
    const auto in = sampled(fs, 1.0, [&](double t) {
      const double l = l0 + e * std::cos(2 * kPi * f * t);
      return c * l * l;
    });
    CHECK(settled(lockin_demod(in, fs, f, 2, tau)) == doctest::Approx(c * e * e / 2).epsilon(0.02));
    CHECK(std::abs(settled(lockin_demod(in, fs, f, 1, tau))) < 0.02 * c * e * e);
  }
  CHECK_THROWS(LockIn(100, 2, 0.03, 3000));
  CHECK_THROWS(LockIn(100, 0, 0.03, 8000));
  CHECK_THROWS(LockIn(100, 1, 0.0, 8000));
}

TEST_CASE("PID controller") {
  Pid zero({1.0, 2.0, 0.1});
  for (int i = 0; i < 10; ++i) CHECK(zero.step(0.0, 0.01) == 0.0);
  Pid integral({0.0, 3.0, 0.0});
  double out = 0.0;
  for (int i = 0; i < 100; ++i) out = integral.step(0.5, 0.01);
  CHECK(out == doctest::Approx(3.0 * 0.5 * 1.0).epsilon(1e-12));
  Pid proportional({2.5, 0.0, 0.0});
  CHECK(proportional.step(0.4, 0.01) == doctest::Approx(1.0));
  Pid derivative({0.0, 0.0, 0.2});
  derivative.step(0.0, 0.01);
  CHECK(derivative.step(0.1, 0.01) == doctest::Approx(2.0));
  Pid clamped({0.0, 10.0, 0.0, 0.3});
  for (int i = 0; i < 1000; ++i) out = clamped.step(1.0, 0.01);
  CHECK(out == doctest::Approx(0.3));
  clamped.reset();
  CHECK(clamped.step(0.0, 0.01) == 0.0);
  CHECK_THROWS(clamped.step(1.0, 0.0));
}

TEST_CASE("second-harmonic lock settles on the inflection point") {
  const PlantConfig plant;
  LockConfig cfg;
  const LockResult r = run_lock(plant, cfg, 10.0, 1);
  CHECK(r.converged);
  CHECK_FALSE(r.lost);
  CHECK(r.final_offset == doctest::Approx(kInflection).epsilon(0.01));
  CHECK(r.target_offset == doctest::Approx(kInflection).epsilon(0.01));
  CHECK(r.gains.ki == doctest::Approx(1.0 / (4.0 * cfg.time_constant)));
  CHECK(r.trajectory.size() == 1000);

  cfg.start_offset = -0.3;
  CHECK(run_lock(plant, cfg, 10.0, 1).final_offset == doctest::Approx(-kInflection).epsilon(0.01));

  // Small-dither regime.
  for (double rel : {0.01, 0.03, 0.05}) {
    LockConfig c;
    c.dither_amplitude_nm = rel * plant.linewidth_nm();
    const LockResult rr = run_lock(plant, c, 10.0, 1);
    CAPTURE(rel);
    CHECK(rr.converged);
    CHECK(rr.final_offset == doctest::Approx(kInflection).epsilon(0.01));
  }
}

TEST_CASE("first-harmonic lock settles on the peak") {
  LockConfig cfg;
  cfg.harmonic = 1;
  for (double start : {0.1, -0.2}) {
    cfg.start_offset = start;
    const LockResult r = run_lock(PlantConfig{}, cfg, 10.0, 1);
    CHECK(r.converged);
    CHECK(std::abs(r.final_offset) < 0.01);
  }
}

TEST_CASE("slow resonance drift is tracked") {
  PlantConfig plant;
  plant.center.rate = 0.002;  // nm/s, far below the loop bandwidth
  plant.center.walk_sigma = 0.0005;
  plant.center.walk_time = 2.0;
  const LockResult r = run_lock(plant, LockConfig{}, 10.0, 3);
  CHECK_FALSE(r.lost);
  CHECK(r.max_tail_error < 0.05);
  for (const auto& p : r.trajectory) CHECK(p.locked);
  // The laser followed the resonance by about 0.02 nm.
  CHECK(r.trajectory.back().lambda_nm - r.trajectory.front().lambda_nm == doctest::Approx(0.02).epsilon(0.3));
}

TEST_CASE("fast drift loses lock and reports when") {
  PlantConfig plant;
  plant.center.rate = 5.0;
  const LockResult r = run_lock(plant, LockConfig{}, 10.0, 1);
  CHECK(r.lost);
  CHECK(r.loss_time > 0.0);
  CHECK(r.loss_time < 1.0);
  CHECK_FALSE(r.trajectory.back().locked);
}

TEST_CASE("efficiency changes move a side lock but not the dither lock") {
  const PlantConfig plant;
  PlantConfig stepped = plant;
  stepped.eta_step_time = 5.0;
  stepped.eta_step_factor = 0.9;

  const LockConfig dither;
  const double dither_shift =
      run_lock(stepped, dither, 10.0, 1).final_offset - run_lock(plant, dither, 10.0, 1).final_offset;
  CHECK(std::abs(dither_shift) < 0.005);

  LockConfig side;
  side.mode = LockMode::side;
  const LockResult side_base = run_lock(plant, side, 10.0, 1);
  CHECK(side_base.final_offset == doctest::Approx(kInflection).epsilon(0.01));
  const double side_shift = run_lock(stepped, side, 10.0, 1).final_offset - side_base.final_offset;
  CHECK(std::abs(side_shift) > 0.05);

  PlantConfig slow = plant;
  slow.eta_drift.rate = 0.002;
  slow.eta_mod_depth = 0.02;
  slow.eta_mod_hz = 0.2;
  const double drift_shift =
      run_lock(slow, dither, 10.0, 1).final_offset - run_lock(plant, dither, 10.0, 1).final_offset;
  CHECK(std::abs(drift_shift) < 0.001);
}

TEST_CASE("identical seeds give identical trajectories") {
  PlantConfig plant;
  plant.center.walk_sigma = 0.001;
  plant.eta_drift.walk_sigma = 0.01;
  const LockResult a = run_lock(plant, LockConfig{}, 3.0, 9), b = run_lock(plant, LockConfig{}, 3.0, 9),
                   c = run_lock(plant, LockConfig{}, 3.0, 10);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(a.trajectory[i].lambda_nm == b.trajectory[i].lambda_nm);
    CHECK(a.trajectory[i].demod == b.trajectory[i].demod);
    if (i < c.trajectory.size() && c.trajectory[i].lambda_nm != a.trajectory[i].lambda_nm) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("lock configuration validation") {
  LockConfig cfg;
  cfg.harmonic = 0;
  cfg.time_constant = 0.001;
  cfg.sample_rate = 100;
  cfg.polarity = 3;
  CHECK(cfg.check().size() >= 4);
  CHECK_THROWS_AS(run_lock(PlantConfig{}, cfg, 1.0, 1), omkit::ValidationError);
  CHECK_THROWS(run_lock(PlantConfig{}, LockConfig{}, 0.0, 1));
  LockConfig far;
  far.start_offset = 30.0;
  CHECK_THROWS(run_lock(PlantConfig{}, far, 1.0, 1));
}
