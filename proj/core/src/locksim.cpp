#include "omkit/locksim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "omkit/constants.hpp"
#include "omkit/errors.hpp"

namespace omkit::locksim {

namespace {

constexpr double kTwoPi = constants::two_pi;

}  // namespace

double wavelength_to_omega(double lambda_nm) { return kTwoPi * constants::speed_of_light / (lambda_nm * 1e-9); }
double omega_to_wavelength(double omega) { return kTwoPi * constants::speed_of_light / omega * 1e9; }

// ---------------------------------------------------------------------------
// Plant

spectra::OpticalResonance PlantConfig::resonance() const {
  return spectra::OpticalResonance::from_quality_factors(wavelength_to_omega(lambda_nm), q_loaded, q_intrinsic);
}

double PlantConfig::linewidth_nm() const { return lambda_nm / q_loaded; }

std::vector<std::string> PlantConfig::check() const {
  std::vector<std::string> p;
  if (!(lambda_nm > 0)) p.push_back("lambda_nm must be > 0");
  if (!(q_loaded > 0)) p.push_back("q_loaded must be > 0");
  if (!(q_intrinsic > q_loaded)) p.push_back("q_intrinsic must exceed q_loaded");
  if (!(eta > 0)) p.push_back("eta must be > 0");
  for (const auto* d : {&center, &eta_drift}) {
    if (!std::isfinite(d->rate) || !(d->walk_sigma >= 0) || !(d->walk_time > 0))
      p.push_back("drift rates must be finite, walk sigma >= 0 and walk time > 0");
  }
  if (!(eta_step_factor > 0)) p.push_back("eta_step_factor must be > 0");
  if (!(eta_mod_depth >= 0 && eta_mod_depth < 1)) p.push_back("eta_mod_depth must be in [0, 1)");
  if (!(eta_mod_hz >= 0)) p.push_back("eta_mod_hz must be >= 0");
  return p;
}

double plant_transmission(const PlantState& state, double lambda_nm) {
  return state.eta * spectra::s21_sq(wavelength_to_omega(lambda_nm), state.resonance);
}

Plant::Plant(const PlantConfig& config, std::uint64_t seed) : cfg_(config), rng_(seed) {
  throw_if_any(cfg_.check());
}

void Plant::advance(double dt) {
  if (!(dt > 0)) throw std::invalid_argument("Plant::advance: dt must be > 0");
  t_ += dt;
  auto walk = [&](double& x, const DriftProcess& d) {
    if (d.walk_sigma > 0) x += -x / d.walk_time * dt + d.walk_sigma * std::sqrt(dt) * normal_(rng_);
  };
  walk(center_walk_, cfg_.center);
  walk(eta_walk_, cfg_.eta_drift);
}

double Plant::center_nm() const { return cfg_.lambda_nm + cfg_.center.rate * t_ + center_walk_; }

PlantState Plant::state() const {
  PlantState s;
  s.resonance =
      spectra::OpticalResonance::from_quality_factors(wavelength_to_omega(center_nm()), cfg_.q_loaded, cfg_.q_intrinsic);
  double eta = cfg_.eta * (1.0 + cfg_.eta_drift.rate * t_ + eta_walk_);
  if (cfg_.eta_step_time >= 0 && t_ >= cfg_.eta_step_time) eta *= cfg_.eta_step_factor;
  if (cfg_.eta_mod_depth > 0) eta *= 1.0 + cfg_.eta_mod_depth * std::sin(kTwoPi * cfg_.eta_mod_hz * t_);
  if (!(eta > 0)) throw std::runtime_error("plant efficiency drifted to a non-positive value at t = " + std::to_string(t_));
  s.eta = eta;
  return s;
}

// ---------------------------------------------------------------------------
// Lock-in and PID

LockIn::LockIn(double dither_hz, int harmonic, double time_constant, double sample_rate)
    : f_(dither_hz), tau_(time_constant), n_(harmonic) {
  if (!(dither_hz > 0)) throw std::invalid_argument("lock-in: dither frequency must be > 0");
  if (harmonic < 1) throw std::invalid_argument("lock-in: harmonic must be >= 1");
  if (!(time_constant > 0)) throw std::invalid_argument("lock-in: time constant must be > 0");
  if (!(sample_rate >= 20.0 * harmonic * dither_hz))
    throw std::invalid_argument("lock-in: stream undersampled; need at least " +
                                std::to_string(20.0 * harmonic * dither_hz) + " Hz");
  alpha_ = 1.0 - std::exp(-1.0 / (sample_rate * tau_));
}

double LockIn::step(double signal, double t) {
  y_ += alpha_ * (2.0 * signal * std::cos(kTwoPi * n_ * f_ * t) - y_);
  return y_;
}

std::vector<double> lockin_demod(const std::vector<double>& signal, double sample_rate, double dither_hz, int harmonic,
                                 double time_constant) {
  LockIn li(dither_hz, harmonic, time_constant, sample_rate);
  std::vector<double> out(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) out[i] = li.step(signal[i], static_cast<double>(i) / sample_rate);
  return out;
}

double Pid::step(double error, double dt) {
  if (!(dt > 0)) throw std::invalid_argument("pid: dt must be > 0");
  integral_ = std::clamp(integral_ + g_.ki * error * dt, -g_.integral_limit, g_.integral_limit);
  const double derivative = first_ ? 0.0 : (error - prev_error_) / dt;
  first_ = false;
  prev_error_ = error;
  return g_.kp * error + integral_ + g_.kd * derivative;
}

void Pid::reset() {
  integral_ = 0.0;
  prev_error_ = 0.0;
  first_ = true;
}

// ---------------------------------------------------------------------------
// Closed loop

std::vector<std::string> LockConfig::check() const {
  std::vector<std::string> p;
  if (!(dither_hz > 0)) p.push_back("dither_hz must be > 0");
  if (harmonic < 1) p.push_back("harmonic must be >= 1");
  if (!(time_constant > 0)) p.push_back("time_constant_s must be > 0");
  if (dither_hz > 0 && time_constant < 2.0 / dither_hz)
    p.push_back("time_constant_s must span several dither periods");
  if (!(sample_rate >= 20.0 * std::max(harmonic, 1) * dither_hz))
    p.push_back("sample_rate_hz must be at least 20 x harmonic x dither_hz");
  if (dither_amplitude_nm && !(*dither_amplitude_nm > 0)) p.push_back("dither_amplitude_nm must be > 0");
  if (polarity < -1 || polarity > 1) p.push_back("polarity must be -1, 0 (auto) or 1");
  if (!(loss_threshold > 0)) p.push_back("loss_threshold must be > 0");
  if (gains && (gains->kp < 0 || gains->ki < 0 || gains->kd < 0)) p.push_back("PID gains must be >= 0");
  return p;
}

namespace {

// Steady-state lock-in reading (dither mode) or transmission error (side
// mode) for a static plant at bias wavelength lambda.
struct ErrorModel {
  PlantState state;
  LockMode mode;
  double eps;
  int n;
  double side_value = 0.0;

  double operator()(double lambda) const {
    if (mode == LockMode::side) return plant_transmission(state, lambda) - side_value;
    constexpr int kPoints = 64;
    double s = 0.0;
    for (int j = 0; j < kPoints; ++j) {
      const double th = kTwoPi * j / kPoints;
      s += plant_transmission(state, lambda + eps * std::cos(th)) * std::cos(n * th);
    }
    return 2.0 * s / kPoints;
  }
};

}  // namespace

LockResult run_lock(const PlantConfig& plant_cfg, const LockConfig& cfg, double duration, std::uint64_t seed) {
  throw_if_any(cfg.check());
  if (!(duration > 0)) throw std::invalid_argument("run_lock: duration must be > 0");
  Plant plant(plant_cfg, seed);
  const PlantState initial = plant.state();
  const double gamma = initial.resonance.gamma_o();
  const double omega0 = initial.resonance.omega_o;
  const double width_nm = plant_cfg.linewidth_nm();
  auto offset_of = [&](double lambda, const PlantState& s) {
    return (wavelength_to_omega(lambda) - s.resonance.omega_o) / s.resonance.gamma_o();
  };

  LockResult result;
  const double eps = cfg.mode == LockMode::side ? 0.0 : cfg.dither_amplitude_nm.value_or(0.02 * width_nm);
  result.dither_amplitude_nm = eps;
  const double lambda_start = omega_to_wavelength(omega0 + cfg.start_offset * gamma);

  ErrorModel model{initial, cfg.mode, eps, cfg.harmonic};
  if (cfg.mode == LockMode::side) {
    // Side lock holds the transmission found at the inflection point on
    // the starting side of the resonance.
    const double side = cfg.start_offset >= 0 ? 1.0 : -1.0;
    model.side_value =
        plant_transmission(initial, omega_to_wavelength(omega0 + side * gamma / (2.0 * std::sqrt(3.0))));
  }

  // Lock point: zero of the error model nearest the start.
  double lo = 0, hi = 0;
  bool bracketed = false;
  const double h = 0.005 * width_nm;
  const double e_start = model(lambda_start);
  if (e_start == 0.0) {
    lo = hi = lambda_start;
    bracketed = true;
  }
  for (int k = 1; k <= 400 && !bracketed; ++k) {
    for (double dir : {1.0, -1.0}) {
      const double a = lambda_start + dir * (k - 1) * h, b = lambda_start + dir * k * h;
      if (std::signbit(model(a)) != std::signbit(model(b))) {
        lo = std::min(a, b);
        hi = std::max(a, b);
        bracketed = true;
        break;
      }
    }
  }
  if (!bracketed) throw std::invalid_argument("run_lock: no lock point within two linewidths of the start");
  for (int it = 0; it < 100 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (std::signbit(model(mid)) == std::signbit(model(lo)))
      lo = mid;
    else
      hi = mid;
  }
  const double lambda_target = 0.5 * (lo + hi);
  result.target_offset = offset_of(lambda_target, initial);
  const double dl = 1e-3 * width_nm;
  const double slope = (model(lambda_target + dl) - model(lambda_target - dl)) / (2.0 * dl);
  if (slope == 0.0) throw std::invalid_argument("run_lock: error signal has zero slope at the lock point");
  result.polarity = cfg.polarity != 0 ? cfg.polarity : (slope > 0 ? 1 : -1);

  result.gains = cfg.gains.value_or(PidGains{0.0, 1.0 / (4.0 * cfg.time_constant), 0.0, 2.0 * width_nm});
  Pid pid(result.gains);

  const double dt = 1.0 / cfg.sample_rate;
  const auto per_period = static_cast<long>(std::llround(cfg.sample_rate / cfg.dither_hz));
  const double period = static_cast<double>(per_period) * dt;
  const auto total = static_cast<long>(std::ceil(duration / dt));
  const double alpha = 1.0 - std::exp(-dt / cfg.time_constant);

  double lambda_bias = lambda_start;
  double filtered = 0.0;
  // The detector is AC coupled: the previous period's mean transmission is
  // removed before mixing.
  double dc = plant_transmission(plant.state(), lambda_start);
  double acc_demod = 0.0, acc_t = 0.0;
  long in_period = 0;
  for (long k = 0; k < total; ++k) {
    const double t = static_cast<double>(k) * dt;
    const PlantState s = plant.state();
    const double phase = kTwoPi * cfg.dither_hz * t;
    const double trans = plant_transmission(s, lambda_bias + eps * std::cos(phase));
    const double input =
        cfg.mode == LockMode::dither ? 2.0 * (trans - dc) * std::cos(cfg.harmonic * phase) : trans - model.side_value;
    filtered += alpha * (input - filtered);
    acc_demod += filtered;
    acc_t += trans;
    plant.advance(dt);
    if (++in_period < per_period) continue;

    const double demod = acc_demod / static_cast<double>(per_period);
    const double mean_t = acc_t / static_cast<double>(per_period);
    dc = mean_t;
    acc_demod = acc_t = 0.0;
    in_period = 0;
    const double error = -result.polarity * demod / std::abs(slope);
    lambda_bias = lambda_start + pid.step(error, period);

    TrajectoryPoint pt;
    pt.t = plant.time();
    pt.lambda_nm = lambda_bias;
    pt.demod = demod;
    pt.transmission = mean_t;
    pt.offset = offset_of(lambda_bias, plant.state());
    pt.locked = std::abs(pt.offset - result.target_offset) <= cfg.loss_threshold;
    result.trajectory.push_back(pt);
    if (!pt.locked) {
      result.lost = true;
      result.loss_time = pt.t;
      break;
    }
  }

  const std::size_t n = result.trajectory.size();
  if (n > 0) {
    const std::size_t tail = std::max<std::size_t>(1, n / 5);
    double sum = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) {
      sum += result.trajectory[i].offset;
      result.max_tail_error =
          std::max(result.max_tail_error, std::abs(result.trajectory[i].offset - result.target_offset));
    }
    result.final_offset = sum / static_cast<double>(tail);
  }
  result.converged = !result.lost && n > 0 && result.max_tail_error < 0.01;
  return result;
}

}  // namespace omkit::locksim
