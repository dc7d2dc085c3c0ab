#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <fstream>

#include "omkit/constants.hpp"
#include "omkit/spectra.hpp"
#include "test_support.hpp"

using namespace omkit::spectra;
using omkit::constants::two_pi;

namespace {

constexpr double kFm = 4.488e9;
constexpr double kT = 295.3;

MechanicalMode measured_mode() { return {two_pi * kFm, two_pi * kFm / 600.0, kT}; }

}  // namespace

TEST_CASE("two-port transmission") {
  const double wo = two_pi * 194e12;
  const OpticalResonance r = OpticalResonance::from_quality_factors(wo, 4300, 8600);
  CHECK(s21_sq(wo, r) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.q_loaded() == doctest::Approx(4300).epsilon(1e-12));
  CHECK(r.q_intrinsic() == doctest::Approx(8600).epsilon(1e-12));
  CHECK(s21_sq(wo + 0.5 * r.gamma_o(), r) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(s21_sq(wo - 0.5 * r.gamma_o(), r) == doctest::Approx(0.125).epsilon(1e-12));
  // Peak (1 - Q_L/Q_0)^2 for any valid pair.
  for (const auto& [ql, q0] : {std::pair{1000.0, 1500.0}, {5000.0, 1e5}, {20.0, 21.0}}) {
    const auto res = OpticalResonance::from_quality_factors(wo, ql, q0);
    CHECK(s21_sq(wo, res) == doctest::Approx((1 - ql / q0) * (1 - ql / q0)).epsilon(1e-12));
    for (double d : {-3.0, -0.2, 0.7, 10.0}) CHECK(s21_sq(wo + d * res.gamma_o(), res) <= s21_sq(wo, res));
  }
  OpticalResonance decoupled = r;
  decoupled.gamma_owg = 0.0;
  CHECK(s21_sq(wo, decoupled) == 0.0);
  CHECK_THROWS(OpticalResonance::from_quality_factors(wo, 9000, 8600));
}

TEST_CASE("thermal occupation") {
  const double n = thermal_occupation(kT, two_pi * kFm);
  CHECK(n >= 1357);
  CHECK(n <= 1385);
  CHECK(n == doctest::Approx(1371).epsilon(14.0 / 1371));
  CHECK(thermal_occupation(2 * kT, two_pi * kFm) == doctest::Approx(2 * n).epsilon(1e-14));
  CHECK(thermal_occupation(kT, two_pi * 2 * kFm) == doctest::Approx(n / 2).epsilon(1e-14));
  // Inverting for the temperature that gives exactly 1371.
  const double t_exact = 1371 * omkit::constants::hbar * two_pi * kFm / omkit::constants::boltzmann;
  CHECK(std::abs(t_exact - kT) < 1.0);
  CHECK_THROWS_AS(thermal_occupation(0.0, 1.0), std::domain_error);
}

TEST_CASE("displacement spectrum") {
  const MechanicalMode m = measured_mode();
  const double g = two_pi * 649e3, tr = 3.7;
  const double n = thermal_occupation(m.temperature, m.omega_m);
  CHECK(psd_model(m.omega_m, m, 0.0, nullptr).density == 0.0);
  CHECK(psd_model(m.omega_m, m, g, nullptr, tr).density == doctest::Approx(tr * g * g * n * 4 / m.gamma_m).epsilon(1e-14));
  boost::math::quadrature::tanh_sinh<double> rule;
  // Integrate in units of the linewidth: omega = omega_m + u gamma_m.
  const double area = rule.integrate(
      [&](double u) { return m.gamma_m * psd_model(m.omega_m + u * m.gamma_m, m, g, nullptr, tr).density; }, -500.0, 500.0);
  CHECK(area == doctest::Approx(tr * g * g * n * two_pi).epsilon(1e-3));
  const CalibrationTone tone{two_pi * 4.5e9, 0.01};
  const PsdValue v = psd_model(m.omega_m, m, g, &tone, tr);
  CHECK(v.tone_omega == tone.omega);
  CHECK(v.tone_weight == doctest::Approx(tr * 1e-4 * tone.omega * tone.omega / 4 * two_pi).epsilon(1e-14));
}

TEST_CASE("analyzer power") {
  const MechanicalMode m = measured_mode();
  const double rbw = two_pi * 1e6, g = two_pi * 649e3, tr = 1e-20;
  const double n = thermal_occupation(m.temperature, m.omega_m);
  SpectrumModel thermal{m, g, std::nullopt, tr, {}};
  CHECK(sa_power(m.omega_m, thermal, rbw) == doctest::Approx(tr * rbw * 8 * g * g * n / m.gamma_m).epsilon(1e-14));

  const CalibrationTone tone{two_pi * 4.5e9, 0.01};
  SpectrumModel tone_only{m, 0.0, tone, tr, {}};
  CHECK(sa_power(tone.omega, tone_only, rbw) ==
        doctest::Approx(tr * 0.5 * 1e-4 * tone.omega * tone.omega).epsilon(1e-14));
  for (Window w : {Window::gaussian, Window::flat_top}) {
    CHECK(window_value(w, 0.0, rbw) == 1.0);
    CHECK(window_value(w, 0.5 * rbw, rbw) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(window_value(w, -0.5 * rbw, rbw) == doctest::Approx(0.5).epsilon(1e-14));
  }
  CHECK(window_value(Window::flat_top, 0.3 * rbw, rbw) > window_value(Window::gaussian, 0.3 * rbw, rbw));

  // Swept thermal power integrates to 2 RBW times the spectrum's area.
  boost::math::quadrature::tanh_sinh<double> rule;
  const double swept =
      rule.integrate([&](double u) { return m.gamma_m * sa_power(m.omega_m + u * m.gamma_m, thermal, rbw); }, -500.0, 500.0);
  const double psd_area = rule.integrate(
      [&](double u) { return m.gamma_m * psd_model(m.omega_m + u * m.gamma_m, m, g, nullptr, tr).density; }, -500.0, 500.0);
  CHECK(swept == doctest::Approx(2 * rbw * psd_area).epsilon(0.01));

  // Background polynomial in MHz offsets from omega_m.
  SpectrumModel with_bg = thermal;
  with_bg.g_om = 0.0;
  with_bg.background = {2.0, 0.5, -0.1};
  const double w = m.omega_m + two_pi * 3e6;
  CHECK(sa_power(w, with_bg, rbw) == doctest::Approx(tr * (2.0 + 0.5 * 3 - 0.1 * 9)).epsilon(1e-12));
}

TEST_CASE("tone and sampling checks") {
  CHECK(CalibrationTone{two_pi * 4.5e9, 0.01}.warnings().empty());
  CHECK_FALSE(CalibrationTone{two_pi * 4.5e9, 0.5}.warnings().empty());
  CHECK(CalibrationTone{two_pi * 4.5e9, 0.5}.check().empty());
  CHECK_FALSE(CalibrationTone{two_pi * 4.5e9, -0.1}.check().empty());

  SimConfig c;
  const SpectrumTrace fine = simulate_scan(c, 1);
  CHECK(sampling_warnings(fine, c.gamma_m()).empty());
  SimConfig coarse = c;
  coarse.step_hz = 500e3;
  CHECK(sampling_warnings(simulate_scan(coarse, 1), c.gamma_m()).size() == 1);
  SimConfig wide = c;
  wide.rbw_hz = 3e6;
  CHECK(sampling_warnings(simulate_scan(wide, 1), c.gamma_m()).size() == 1);
  CHECK_THROWS(parse_window("hann"));
  CHECK(parse_window(to_string(Window::flat_top)) == Window::flat_top);
}

TEST_CASE("simulated scans") {
  SimConfig c;
  SUBCASE("noiseless scans are exact analyzer samples") {
    const SpectrumTrace t = simulate_scan(c, 5);
    REQUIRE(t.size() == 1001);
    CHECK(t.omega.front() == doctest::Approx(two_pi * (c.center_hz - 0.5 * c.span_hz)));
    CHECK(t.step() == doctest::Approx(two_pi * c.step_hz));
    const SpectrumModel model = c.model();
    for (std::size_t i = 0; i < t.size(); i += 37)
      CHECK(t.power[i] == doctest::Approx(sa_power(t.omega[i], model, t.rbw)).epsilon(1e-14));
  }
  SUBCASE("seeded noise is reproducible") {
    c.noise_rel = 0.2;
    c.noise_floor_rel = 0.1;
    const SpectrumTrace a = simulate_scan(c, 42), b = simulate_scan(c, 42), d = simulate_scan(c, 43);
    CHECK(a.power == b.power);
    CHECK(a.power != d.power);
  }
  SUBCASE("transduction follows the detector exponent") {
    const double p0 = simulate_scan(c, 1).power[500];
    c.input_power_w *= 2.0;
    CHECK(simulate_scan(c, 1).power[500] == doctest::Approx(4.0 * p0).epsilon(1e-12));
  }
  SUBCASE("dither sidebands add shifted copies of the thermal peak") {
    SimConfig d = c;
    d.dither_hz = 20e6;
    d.dither_sideband_rel = 0.05;
    d.tone_enabled = false;
    c.tone_enabled = false;
    const SpectrumTrace with = simulate_scan(d, 1), without = simulate_scan(c, 1);
    // 20 MHz above the center sits the upper sideband's peak.
    const std::size_t i = 700;
    CHECK(with.power[i] > without.power[i]);
  }
  SUBCASE("invalid configuration lists every problem") {
    c.rbw_hz = -1;
    c.q_m = 0;
    c.noise_rel = -0.1;
    CHECK(c.check().size() == 3);
    CHECK_THROWS(simulate_scan(c, 1));
  }
}

TEST_CASE("trace files") {
  SimConfig c;
  c.noise_rel = 0.1;
  SpectrumTrace t = simulate_scan(c, 3, "scan-x");
  t.detuning = "red";
  omkit::testing::TempDir dir("traces");
  save_trace(t, dir / "a.csv");
  const SpectrumTrace back = load_trace(dir / "a.csv");
  CHECK(back.scan_id == "scan-x");
  CHECK(back.detuning == "red");
  CHECK(back.rbw == doctest::Approx(t.rbw).epsilon(1e-15));
  CHECK(back.input_power == t.input_power);
  REQUIRE(back.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(back.omega[i] == doctest::Approx(t.omega[i]).epsilon(1e-15));
    CHECK(back.power[i] == t.power[i]);
  }

  {
    std::ofstream f(dir / "b.csv");
    f << "# rbw_hz,1000000\n# input_power_w,0.001\n# detuning,blue\n# scan_id,dbm\n# power_unit,dBm\n"
      << "frequency_hz,power\n4.0e9,-30\n4.1e9,0\n";
  }
  const SpectrumTrace dbm = load_trace(dir / "b.csv");
  CHECK(dbm.power[0] == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(dbm.power[1] == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(dbm.omega[1] == doctest::Approx(two_pi * 4.1e9));
  CHECK(load_trace_dir(dir.path()).size() == 2);

  {
    std::ofstream f(dir / "bad.csv");
    f << "# rbw_hz,1000000\n# power_unit,V\nfrequency_hz,power\n2,1\n1,1\n";
  }
  CHECK_THROWS(load_trace(dir / "bad.csv"));
  {
    std::ofstream f(dir / "text.csv");
    f << "# rbw_hz,1e6\nfrequency_hz,power\n1,abc\n";
  }
  try {
    load_trace(dir / "text.csv");
    FAIL("expected a parse error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("text.csv:3") != std::string::npos);
  }
  CHECK_THROWS(load_trace(dir / "none.csv"));
  CHECK_THROWS(load_trace_dir(dir / "nowhere"));
}
