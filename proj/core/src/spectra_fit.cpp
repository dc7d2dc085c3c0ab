#include "omkit/spectra_fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "omkit/constants.hpp"
#include "omkit/errors.hpp"
#include "omkit/least_squares.hpp"

namespace omkit::spectra {

namespace {

constexpr double kMHz = constants::two_pi * 1e6;
const double kLn2 = std::log(2.0);

bool masked(const std::vector<Interval>& mask, double w) {
  return std::any_of(mask.begin(), mask.end(), [w](const Interval& iv) { return iv.contains(w); });
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

int window_exponent(Window w) { return w == Window::gaussian ? 2 : 8; }

// Window value and its derivative with respect to u, where u = +-1 at half
// maximum.
void window_and_slope(Window window, double u, double& value, double& slope) {
  const int k = window_exponent(window);
  const double uk1 = std::pow(u, k - 1);
  value = std::exp(-kLn2 * uk1 * u);
  slope = -kLn2 * k * uk1 * value;
}

void require_converged(const fit::LmResult& r, const char* what) {
  if (!r.converged || !r.params.allFinite())
    throw FitError(std::string(what) + ": least-squares fit did not converge");
}

ToneFit fit_tone_scaled(const SpectrumTrace& trace, const std::vector<double>& power, double omega_guess,
                        Window window, const ToneOptions& options, double y_scale) {
  if (options.baseline_order < -1 || options.baseline_order > kMaxBackgroundOrder)
    throw std::invalid_argument("fit_tone: baseline order must be in [-1, 5]");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double x = (trace.omega[i] - omega_guess) / trace.rbw;
    if (std::abs(x) <= options.half_width_rbw) {
      xs.push_back(x);
      ys.push_back(power[i]);
    }
  }
  const int nb = options.baseline_order + 1;
  if (xs.size() < static_cast<std::size_t>(3 * (2 + nb)) || xs.empty())
    throw ToneNotFound("fit_tone: tone frequency not covered by the trace");
  if (!(y_scale > 0)) y_scale = 1.0;
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xs.data(), n);
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), n) / y_scale;
  const double xs_half = options.half_width_rbw;

  const Eigen::Index imax = [&] {
    Eigen::Index i = 0;
    y.maxCoeff(&i);
    return i;
  }();
  const double base0 = median(std::vector<double>(y.data(), y.data() + n));
  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(2 + nb);
  p0[0] = std::max(y[imax] - base0, 1e-12);
  p0[1] = std::abs(x[imax]) < 1.0 ? x[imax] : 0.0;
  if (nb > 0) p0[2] = base0;

  auto fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double w, slope;
      const double u = 2.0 * (x[i] - p[1]);
      window_and_slope(window, u, w, slope);
      double m = p[0] * w;
      double t = 1.0;
      const double xn = x[i] / xs_half;
      for (int k = 0; k < nb; ++k) {
        m += p[2 + k] * t;
        if (jac) (*jac)(i, 2 + k) = t;
        t *= xn;
      }
      r[i] = m - y[i];
      if (jac) {
        (*jac)(i, 0) = w;
        (*jac)(i, 1) = -2.0 * p[0] * slope;
      }
    }
  };
  const auto res = fit::levenberg_marquardt(fn, p0, n);
  require_converged(res, "fit_tone");

  ToneFit out;
  const double peak = res.params[0];
  const double sd = std::sqrt(std::max(res.covariance(0, 0), 0.0));
  out.snr = sd > 0 ? peak / sd : std::numeric_limits<double>::infinity();
  if (!(peak > 1e-6) || out.snr < options.min_snr || std::abs(res.params[1]) > options.half_width_rbw)
    throw ToneNotFound("fit_tone: no calibration tone above the noise near " +
                       std::to_string(omega_guess / constants::two_pi) + " Hz");
  out.peak_power = peak * y_scale;
  out.omega = omega_guess + res.params[1] * trace.rbw;
  out.sigma_peak = std::sqrt(std::max(res.covariance(0, 0), 0.0)) * y_scale;
  return out;
}

// Thermal Lorentzian, tone window and a baseline polynomial over the whole
// trace, in MHz about the trace center and normalized power. Parameters are
// (h, c, w, P, c_tone, b0, b1, ...).
struct JointProblem {
  Eigen::VectorXd x, y;
  Eigen::VectorXd sqrt_weight;
  double rbw_mhz = 1.0;
  double half_span = 1.0;
  Window window = Window::gaussian;
  int nb = 1;

  double lorentzian(const Eigen::VectorXd& p, Eigen::Index i) const {
    const double u = 2.0 * (x[i] - p[1]) / p[2];
    return p[0] / (1.0 + u * u);
  }
  double baseline(const Eigen::VectorXd& p, Eigen::Index i) const {
    double m = 0.0, t = 1.0;
    for (int k = 0; k < nb; ++k) {
      m += p[5 + k] * t;
      t *= x[i] / half_span;
    }
    return m;
  }
  double tone(const Eigen::VectorXd& p, Eigen::Index i) const {
    double w, slope;
    window_and_slope(window, 2.0 * (x[i] - p[4]) / rbw_mhz, w, slope);
    return p[3] * w;
  }
};

fit::LmResult solve_joint(const JointProblem& jp, const Eigen::VectorXd& p0) {
  const Eigen::Index n = jp.x.size();
  auto fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = jp.sqrt_weight[i];
      const double u = 2.0 * (jp.x[i] - p[1]) / p[2];
      const double l = 1.0 / (1.0 + u * u);
      double w, slope;
      const double v = 2.0 * (jp.x[i] - p[4]) / jp.rbw_mhz;
      window_and_slope(jp.window, v, w, slope);
      double m = p[0] * l + p[3] * w;
      double t = 1.0;
      for (int k = 0; k < jp.nb; ++k) {
        m += p[5 + k] * t;
        if (jac) (*jac)(i, 5 + k) = s * t;
        t *= jp.x[i] / jp.half_span;
      }
      r[i] = s * (m - jp.y[i]);
      if (jac) {
        (*jac)(i, 0) = s * l;
        (*jac)(i, 1) = s * 4.0 * p[0] * u * l * l / p[2];
        (*jac)(i, 2) = s * 2.0 * p[0] * u * u * l * l / p[2];
        (*jac)(i, 3) = s * w;
        (*jac)(i, 4) = -s * 2.0 * p[3] * slope / jp.rbw_mhz;
      }
    }
  };
  return fit::levenberg_marquardt(fn, p0, n);
}

// Per-bin variance a^2 s^2 + b^2 regressed on squared residuals, with s the
// signal level. Returns unit weights when the residuals vanish.
Eigen::VectorXd noise_weights(const Eigen::VectorXd& residual, const Eigen::VectorXd& signal) {
  const Eigen::Index n = residual.size();
  const Eigen::VectorXd r2 = residual.array().square();
  const Eigen::VectorXd s2 = signal.array().square();
  const double mean_r2 = r2.mean();
  if (!(mean_r2 > 1e-24 * std::max(s2.maxCoeff(), 1e-300))) return Eigen::VectorXd::Ones(n);
  Eigen::MatrixXd a(n, 2);
  a.col(0) = s2;
  a.col(1).setOnes();
  Eigen::Vector2d c = a.colPivHouseholderQr().solve(r2);
  if (c[0] < 0) c = {0.0, mean_r2};
  if (c[1] < 0) c = {r2.dot(s2) / s2.squaredNorm(), 0.0};
  c[1] = std::max(c[1], 1e-6 * c[0] * s2.maxCoeff());
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = 1.0 / (c[0] * s2[i] + c[1]);
  return w / w.mean();
}

}  // namespace

BackgroundResult remove_background(const SpectrumTrace& trace, int order, const std::vector<Interval>& mask) {
  throw_if_any(trace.check());
  if (order < 0 || order > kMaxBackgroundOrder)
    throw std::invalid_argument("remove_background: order must be in [0, " + std::to_string(kMaxBackgroundOrder) +
                                "], got " + std::to_string(order));
  BackgroundResult out;
  out.origin = 0.5 * (trace.omega.front() + trace.omega.back());
  out.scale = std::max(0.5 * (trace.omega.back() - trace.omega.front()), 1e-300);
  std::vector<double> xs, ys;
  double y_scale = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (masked(mask, trace.omega[i])) continue;
    xs.push_back((trace.omega[i] - out.origin) / out.scale);
    ys.push_back(trace.power[i]);
    y_scale = std::max(y_scale, std::abs(trace.power[i]));
  }
  const std::size_t needed = 10 * static_cast<std::size_t>(order + 1);
  if (xs.size() < needed)
    throw FitError("remove_background: " + std::to_string(xs.size()) + " unmasked samples, need at least " +
                   std::to_string(needed) + " for order " + std::to_string(order));
  if (y_scale == 0.0) y_scale = 1.0;
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  const Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), n) / y_scale;
  out.coefficients = fit::polyfit(Eigen::Map<Eigen::VectorXd>(xs.data(), n), y, order) * y_scale;
  out.trace = trace;
  for (std::size_t i = 0; i < trace.size(); ++i)
    out.trace.power[i] -= fit::polyval(out.coefficients, (trace.omega[i] - out.origin) / out.scale);
  return out;
}

LorentzianFit fit_lorentzian(const SpectrumTrace& trace, const LorentzianOptions& options) {
  throw_if_any(trace.check());
  if (options.baseline_order < -1 || options.baseline_order > kMaxBackgroundOrder)
    throw std::invalid_argument("fit_lorentzian: baseline order must be in [-1, 5]");
  const int nb = options.baseline_order + 1;
  const double origin = 0.5 * (trace.omega.front() + trace.omega.back());
  const double half_span = std::max(0.5 * (trace.omega.back() - trace.omega.front()) / kMHz, 1e-12);

  std::vector<double> xs, ys;
  double y_scale = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (masked(options.mask, trace.omega[i])) continue;
    xs.push_back((trace.omega[i] - origin) / kMHz);
    ys.push_back(trace.power[i]);
    y_scale = std::max(y_scale, std::abs(trace.power[i]));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  if (n < 3 * (3 + nb)) throw FitError("fit_lorentzian: too few unmasked samples");
  if (y_scale == 0.0) throw FitError("fit_lorentzian: trace is identically zero");
  const Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xs.data(), n);
  const Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), n) / y_scale;

  // Starting point from a lightly smoothed copy.
  Eigen::VectorXd smooth(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, i - 2), hi = std::min<Eigen::Index>(n - 1, i + 2);
    smooth[i] = y.segment(lo, hi - lo + 1).mean();
  }
  Eigen::Index imax = 0;
  smooth.maxCoeff(&imax);
  const double base0 = nb > 0 ? median(std::vector<double>(y.data(), y.data() + n)) : 0.0;
  const double h0 = smooth[imax] - base0;
  double fwhm0 = 0.0;
  {
    Eigen::Index lo = imax, hi = imax;
    while (lo > 0 && smooth[lo] - base0 > 0.5 * h0) --lo;
    while (hi < n - 1 && smooth[hi] - base0 > 0.5 * h0) ++hi;
    fwhm0 = x[hi] - x[lo];
    if (!(fwhm0 > 0)) fwhm0 = half_span / 5.0;
  }

  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(3 + nb);
  p0 << h0, x[imax], fwhm0, Eigen::VectorXd::Zero(nb);
  if (nb > 0) p0[3] = base0;

  auto fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = 2.0 * (x[i] - p[1]) / p[2];
      const double l = 1.0 / (1.0 + u * u);
      double m = p[0] * l;
      double t = 1.0;
      const double xn = x[i] / half_span;
      for (int k = 0; k < nb; ++k) {
        m += p[3 + k] * t;
        if (jac) (*jac)(i, 3 + k) = t;
        t *= xn;
      }
      r[i] = m - y[i];
      if (jac) {
        (*jac)(i, 0) = l;
        (*jac)(i, 1) = 4.0 * p[0] * u * l * l / p[2];
        (*jac)(i, 2) = 2.0 * p[0] * u * u * l * l / p[2];
      }
    }
  };
  const auto res = fit::levenberg_marquardt(fn, p0, n);
  require_converged(res, "fit_lorentzian");
  const double h = res.params[0], c = res.params[1], w = std::abs(res.params[2]);
  if (!(h > 0) || !(w > 0)) throw FitError("fit_lorentzian: fitted peak is not positive");

  LorentzianFit out;
  const double sd = std::sqrt(std::max(res.covariance(0, 0), 0.0));
  out.snr = sd > 0 ? h / sd : std::numeric_limits<double>::infinity();
  if (out.snr < options.min_snr)
    throw FitError("fit_lorentzian: peak SNR " + std::to_string(out.snr) + " below " + std::to_string(options.min_snr));
  out.iterations = res.iterations;
  out.chi2_red = res.cost / res.dof;
  out.peak = h * y_scale;
  out.gamma_m = w * kMHz;
  out.omega_m = origin + c * kMHz;
  out.amplitude = out.peak * out.gamma_m * out.gamma_m / (4.0 * trace.rbw);

  const Eigen::Matrix3d cov = res.covariance.topLeftCorner(3, 3);
  Eigen::Matrix3d t = Eigen::Matrix3d::Zero();  // d(amplitude, omega_m, gamma_m) / d(h, c, w)
  t(0, 0) = out.amplitude / h;
  t(0, 2) = 2.0 * out.amplitude / w;
  t(1, 1) = kMHz;
  t(2, 2) = kMHz;
  out.covariance = t * cov * t.transpose();
  out.rel_var_area = cov(0, 0) / (h * h) + cov(2, 2) / (w * w) + 2.0 * cov(0, 2) / (h * w);

  out.fitted.resize(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double xi = (trace.omega[i] - origin) / kMHz;
    const double u = 2.0 * (xi - c) / res.params[2];
    double m = h / (1.0 + u * u);
    double tt = 1.0;
    for (int k = 0; k < nb; ++k) {
      m += res.params[3 + k] * tt;
      tt *= xi / half_span;
    }
    out.fitted[i] = m * y_scale;
  }
  return out;
}

ToneFit fit_tone(const SpectrumTrace& trace, double omega_guess, Window window, const ToneOptions& options) {
  throw_if_any(trace.check());
  double y_scale = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i)
    if (std::abs(trace.omega[i] - omega_guess) <= options.half_width_rbw * trace.rbw)
      y_scale = std::max(y_scale, std::abs(trace.power[i]));
  return fit_tone_scaled(trace, trace.power, omega_guess, window, options, y_scale);
}

namespace {

JointProblem joint_problem(const SpectrumTrace& trace, const std::vector<double>& power, double y_scale, Window window,
                           int nb) {
  JointProblem jp;
  const double origin = 0.5 * (trace.omega.front() + trace.omega.back());
  const Eigen::Index n = static_cast<Eigen::Index>(trace.size());
  jp.x.resize(n);
  jp.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    jp.x[i] = (trace.omega[static_cast<std::size_t>(i)] - origin) / kMHz;
    jp.y[i] = power[static_cast<std::size_t>(i)] / y_scale;
  }
  jp.sqrt_weight = Eigen::VectorXd::Ones(n);
  jp.rbw_mhz = trace.rbw / kMHz;
  jp.half_span = std::max(0.5 * (trace.omega.back() - trace.omega.front()) / kMHz, 1e-12);
  jp.window = window;
  jp.nb = nb;
  return jp;
}

Eigen::VectorXd joint_start(const SpectrumTrace& trace, const LorentzianFit& l0, const ToneFit& t0, double y_scale,
                            int nb) {
  const double origin = 0.5 * (trace.omega.front() + trace.omega.back());
  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(5 + nb);
  p0[0] = l0.peak / y_scale;
  p0[1] = (l0.omega_m - origin) / kMHz;
  p0[2] = l0.gamma_m / kMHz;
  p0[3] = t0.peak_power / y_scale;
  p0[4] = (t0.omega - origin) / kMHz;
  return p0;
}

JointFit unpack_joint(const SpectrumTrace& trace, const JointProblem& jp, const fit::LmResult& res, double y_scale,
                      const LorentzianFit& start) {
  const double origin = 0.5 * (trace.omega.front() + trace.omega.back());
  const Eigen::VectorXd& p = res.params;
  const Eigen::MatrixXd& cov = res.covariance;
  const double h = p[0], w = std::abs(p[2]);
  if (!(h > 0) || !(p[3] > 0)) throw FitError("joint fit: non-positive fitted amplitudes");

  JointFit out;
  auto& lf = out.lorentzian;
  lf = start;
  lf.peak = h * y_scale;
  lf.omega_m = origin + p[1] * kMHz;
  lf.gamma_m = w * kMHz;
  lf.amplitude = lf.peak * lf.gamma_m * lf.gamma_m / (4.0 * trace.rbw);
  lf.chi2_red = res.cost / res.dof;
  lf.iterations = res.iterations;
  const double sd_h = std::sqrt(std::max(cov(0, 0), 0.0));
  lf.snr = sd_h > 0 ? h / sd_h : std::numeric_limits<double>::infinity();
  Eigen::Matrix3d t = Eigen::Matrix3d::Zero();
  t(0, 0) = lf.amplitude / h;
  t(0, 2) = 2.0 * lf.amplitude / w;
  t(1, 1) = kMHz;
  t(2, 2) = kMHz;
  lf.covariance = t * cov.topLeftCorner(3, 3) * t.transpose();
  lf.rel_var_area = cov(0, 0) / (h * h) + cov(2, 2) / (w * w) + 2.0 * cov(0, 2) / (h * w);
  lf.fitted.resize(trace.size());
  for (Eigen::Index i = 0; i < jp.x.size(); ++i)
    lf.fitted[static_cast<std::size_t>(i)] = (jp.lorentzian(p, i) + jp.baseline(p, i)) * y_scale;

  out.tone.peak_power = p[3] * y_scale;
  out.tone.omega = origin + p[4] * kMHz;
  const double sd_p = std::sqrt(std::max(cov(3, 3), 0.0));
  out.tone.sigma_peak = sd_p * y_scale;
  out.tone.snr = sd_p > 0 ? p[3] / sd_p : std::numeric_limits<double>::infinity();
  out.offset = jp.nb > 0 ? p[5] * y_scale : 0.0;
  return out;
}

}  // namespace

JointFit fit_joint(const SpectrumTrace& trace, double omega_tone_guess, Window window) {
  throw_if_any(trace.check());
  // Start from separate fits: thermal peak with the tone masked, then the
  // tone on the residual.
  LorentzianOptions lopt;
  lopt.mask = {{omega_tone_guess - 4.0 * trace.rbw, omega_tone_guess + 4.0 * trace.rbw}};
  const LorentzianFit l0 = fit_lorentzian(trace, lopt);
  std::vector<double> residual(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) residual[i] = trace.power[i] - l0.fitted[i];
  ToneOptions topt;
  topt.baseline_order = 0;
  const double y_scale = *std::max_element(trace.power.begin(), trace.power.end());
  const ToneFit t0 = fit_tone_scaled(trace, residual, omega_tone_guess, window, topt, y_scale);

  const JointProblem jp = joint_problem(trace, trace.power, y_scale, window, 1);
  Eigen::VectorXd p0 = joint_start(trace, l0, t0, y_scale, 1);
  const auto res = solve_joint(jp, p0);
  require_converged(res, "fit_joint");
  return unpack_joint(trace, jp, res, y_scale, l0);
}

ScanFit analyze_scan(const SpectrumTrace& trace, const CalibrationTone& tone, const PipelineOptions& options) {
  throw_if_any(trace.check());
  throw_if_any(tone.check());
  const bool tone_in_trace = tone.omega >= trace.omega.front() && tone.omega <= trace.omega.back();
  if (!tone_in_trace) throw ToneNotFound("analyze_scan: tone frequency lies outside the trace");
  const Interval tone_mask{tone.omega - options.tone_exclusion_rbw * trace.rbw,
                           tone.omega + options.tone_exclusion_rbw * trace.rbw};

  // A first thermal fit locates the peak so it can be masked for the
  // background polynomial; the second fit carries a residual baseline of the
  // same order to absorb the Lorentzian tails the mask leaves behind.
  LorentzianOptions lopt;
  lopt.mask = {tone_mask};
  lopt.baseline_order = options.background_order;
  const LorentzianFit first = fit_lorentzian(trace, lopt);
  const Interval peak_mask{first.omega_m - options.peak_exclusion_gamma * first.gamma_m,
                           first.omega_m + options.peak_exclusion_gamma * first.gamma_m};
  const BackgroundResult bg = remove_background(trace, options.background_order, {tone_mask, peak_mask});
  const LorentzianFit thermal = fit_lorentzian(bg.trace, lopt);

  std::vector<double> residual(trace.size());
  double tone_scale = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    residual[i] = bg.trace.power[i] - thermal.fitted[i];
    if (tone_mask.contains(trace.omega[i])) tone_scale = std::max(tone_scale, std::abs(bg.trace.power[i]));
  }
  ToneOptions topt;
  topt.baseline_order = 0;
  topt.min_snr = options.tone_detect_snr;
  const ToneFit t0 = fit_tone_scaled(bg.trace, residual, tone.omega, options.window, topt, tone_scale);

  // Joint refinement weighted by a noise model estimated from the residuals
  // of the separate fits.
  const int nb = options.background_order + 1;
  const double y_scale = *std::max_element(bg.trace.power.begin(), bg.trace.power.end());
  JointProblem jp = joint_problem(bg.trace, bg.trace.power, y_scale, options.window, nb);
  const Eigen::VectorXd p0 = joint_start(bg.trace, thermal, t0, y_scale, nb);
  Eigen::VectorXd r0(jp.x.size()), signal(jp.x.size());
  for (Eigen::Index i = 0; i < jp.x.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double raw = thermal.fitted[k] + jp.tone(p0, i) * y_scale + (trace.power[k] - bg.trace.power[k]);
    signal[i] = raw / y_scale;
    r0[i] = (bg.trace.power[k] - thermal.fitted[k]) / y_scale - jp.tone(p0, i);
  }
  jp.sqrt_weight = noise_weights(r0, signal).cwiseSqrt();
  const auto res = solve_joint(jp, p0);
  require_converged(res, "analyze_scan");
  const JointFit joint = unpack_joint(bg.trace, jp, res, y_scale, thermal);
  if (joint.tone.snr < options.tone_min_snr)
    throw ToneNotFound("analyze_scan: calibration tone SNR " + std::to_string(joint.tone.snr) + " below " +
                       std::to_string(options.tone_min_snr));

  ScanFit out;
  out.scan_id = trace.scan_id;
  out.detuning = trace.detuning;
  out.input_power = trace.input_power;
  out.lorentzian = joint.lorentzian;
  out.tone = joint.tone;
  const auto& lf = out.lorentzian;
  out.factor = std::sqrt(lf.omega_m * lf.amplitude / (4.0 * lf.gamma_m * out.tone.peak_power));
  // F^2 is proportional to h w / P.
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(res.params.size());
  grad[0] = 1.0 / res.params[0];
  grad[2] = 1.0 / res.params[2];
  grad[3] = -1.0 / res.params[3];
  const double rel_var_f2 = grad.dot(res.covariance * grad);
  out.factor_sigma = out.factor * 0.5 * std::sqrt(std::max(rel_var_f2, 0.0));
  return out;
}

ExtractionResult extract_gom(const std::vector<ScanFit>& scans, const CalibrationTone& tone, double temperature,
                             const Systematics& systematics) {
  if (scans.empty()) throw std::invalid_argument("extract_gom: no scans");
  throw_if_any(tone.check());
  if (!(temperature > 0)) throw std::invalid_argument("extract_gom: temperature must be > 0");
  for (const auto& s : scans)
    if (!(s.factor > 0) || !(s.factor_sigma >= 0) || !(s.lorentzian.amplitude > 0) || !(s.tone.peak_power > 0))
      throw std::invalid_argument("extract_gom: scan " + s.scan_id + " has non-positive fitted parameters");

  ExtractionResult out;
  out.warnings = tone.warnings();
  const double n = static_cast<double>(scans.size());
  // Scans are weighted by their relative precision. Absolute errors scale
  // with the factor itself, so 1/sigma^2 weights would favour scans that
  // fluctuated low and bias the mean downwards.
  const bool weighted = std::all_of(scans.begin(), scans.end(), [](const ScanFit& s) { return s.factor_sigma > 0; });
  double mean = 0.0, sigma = 0.0;
  if (weighted) {
    double sw = 0.0, swx = 0.0;
    for (const auto& s : scans) {
      const double rel = s.factor_sigma / s.factor;
      const double w = 1.0 / (rel * rel);
      sw += w;
      swx += w * s.factor;
    }
    mean = swx / sw;
    double chi2 = 0.0;
    for (const auto& s : scans) {
      const double sd = mean * s.factor_sigma / s.factor;
      chi2 += (s.factor - mean) * (s.factor - mean) / (sd * sd);
    }
    out.chi2_red = scans.size() > 1 ? chi2 / (n - 1.0) : 0.0;
    sigma = mean * std::sqrt(1.0 / sw) * std::max(1.0, std::sqrt(out.chi2_red));
  } else {
    for (const auto& s : scans) mean += s.factor / n;
    double ss = 0.0;
    for (const auto& s : scans) ss += (s.factor - mean) * (s.factor - mean);
    sigma = scans.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  }
  if (out.chi2_red > 1.0)
    out.warnings.push_back("scan scatter exceeds fit errors (reduced chi2 " + std::to_string(out.chi2_red) +
                           "); statistical error inflated");

  const double scale = tone.omega * tone.depth / std::sqrt(constants::boltzmann * temperature / constants::hbar);
  out.factor_mean = mean;
  out.g_om = scale * mean;
  out.sigma_stat = scale * sigma;
  const double rel_a = systematics.depth_sigma / tone.depth;
  const double rel_t = 0.5 * systematics.temperature_sigma / temperature;
  out.sigma_sys = out.g_om * std::sqrt(rel_a * rel_a + rel_t * rel_t);
  for (const auto& s : scans) out.per_scan_g.push_back(scale * s.factor);
  return out;
}

}  // namespace omkit::spectra
