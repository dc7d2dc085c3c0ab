#pragma once

// Time-stepped simulation of a laser locked to a drifting optical resonance
// by wavelength dither and lock-in detection at the n-th harmonic, with a
// plain transmission side lock as a baseline.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "omkit/spectra.hpp"

namespace omkit::locksim {

double wavelength_to_omega(double lambda_nm);
double omega_to_wavelength(double omega);

/// Linear drift plus an optional mean-reverting random walk.
struct DriftProcess {
  double rate = 0.0;            // units per second
  double walk_sigma = 0.0;      // units per sqrt(second)
  double walk_time = 1.0;       // mean-reversion time, s
};

struct PlantConfig {
  double lambda_nm = 1550.0;  // resonance wavelength at t = 0
  double q_loaded = 4300.0;
  double q_intrinsic = 8600.0;
  double eta = 1.0;           // global efficiency at t = 0
  DriftProcess center;        // nm
  DriftProcess eta_drift;     // relative to eta
  double eta_step_time = -1.0;   // s; negative disables
  double eta_step_factor = 1.0;
  double eta_mod_depth = 0.0;    // relative sinusoidal modulation
  double eta_mod_hz = 0.0;

  spectra::OpticalResonance resonance() const;
  double linewidth_nm() const;     // lambda / Q_loaded
  std::vector<std::string> check() const;
};

struct PlantState {
  spectra::OpticalResonance resonance;  // centered at the current resonance
  double eta = 1.0;
};

/// eta * |S21|^2 at the laser wavelength.
double plant_transmission(const PlantState& state, double lambda_nm);

class Plant {
 public:
  Plant(const PlantConfig& config, std::uint64_t seed);
  void advance(double dt);
  double time() const { return t_; }
  double center_nm() const;
  PlantState state() const;

 private:
  PlantConfig cfg_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  double t_ = 0.0;
  double center_walk_ = 0.0;
  double eta_walk_ = 0.0;
};

/// Multiplies by cos(2 pi n f t) and low-pass filters with a single pole;
/// the output is scaled by two so that a harmonic a cos(2 pi n f t) reads a.
class LockIn {
 public:
  LockIn(double dither_hz, int harmonic, double time_constant, double sample_rate);
  double step(double signal, double t);
  double value() const { return y_; }

 private:
  double f_, tau_, alpha_;
  int n_;
  double y_ = 0.0;
};

/// Demodulated stream of `signal`, sampled at `sample_rate` starting at t = 0.
std::vector<double> lockin_demod(const std::vector<double>& signal, double sample_rate, double dither_hz, int harmonic,
                                 double time_constant);

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double integral_limit = 1e300;  // anti-windup clamp on the integral term
};

class Pid {
 public:
  explicit Pid(const PidGains& gains) : g_(gains) {}
  double step(double error, double dt);
  void reset();

 private:
  PidGains g_;
  double integral_ = 0.0;
  double prev_error_ = 0.0;
  bool first_ = true;
};

enum class LockMode { dither, side };

struct LockConfig {
  LockMode mode = LockMode::dither;
  double dither_hz = 100.0;
  std::optional<double> dither_amplitude_nm;  // default 0.02 linewidths
  int harmonic = 2;
  double time_constant = 0.03;  // s
  std::optional<PidGains> gains;  // default integral-only, critically damped with the lock-in pole
  double sample_rate = 8000.0;    // Hz
  double start_offset = 0.3;      // initial (omega_laser - omega_o) / gamma_o
  int polarity = 0;               // 0 chooses from the plant's slope at the lock point
  double loss_threshold = 0.25;   // |offset - lock point| in linewidths that counts as lost lock

  std::vector<std::string> check() const;
};

struct TrajectoryPoint {
  double t = 0.0;
  double lambda_nm = 0.0;     // laser bias wavelength (dither excluded)
  double demod = 0.0;
  double transmission = 0.0;  // mean over the dither period
  double offset = 0.0;        // (omega_laser - omega_o(t)) / gamma_o
  bool locked = true;
};

struct LockResult {
  std::vector<TrajectoryPoint> trajectory;  // one point per dither period
  double target_offset = 0.0;   // lock point in linewidths
  double final_offset = 0.0;    // mean offset over the last 20% of the run
  double max_tail_error = 0.0;  // max |offset - target| over the last 20%
  bool converged = false;       // max_tail_error < 0.01
  bool lost = false;
  double loss_time = 0.0;
  int polarity = 1;
  double dither_amplitude_nm = 0.0;
  PidGains gains;
};

LockResult run_lock(const PlantConfig& plant, const LockConfig& config, double duration, std::uint64_t seed);

}  // namespace omkit::locksim
