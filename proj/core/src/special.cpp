#include "omkit/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace omkit::special {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

// Modified Lentz evaluation of the continued fraction
// E_nu(x) = e^-x / (x + nu - 1*nu / (x + nu + 2 - 2(nu+1) / (x + nu + 4 - ...))).
// Returns e^x E_nu(x).
double continued_fraction_scaled(double nu, double x) {
  double b = x + nu;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -i * (nu - 1.0 + i);
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("expint: continued fraction did not converge");
}

// Power series for integer order n >= 1 and 0 < x <= 1.
double integer_series(int n, double x) {
  const int nm1 = n - 1;
  double ans = nm1 != 0 ? 1.0 / nm1 : -std::log(x) - std::numbers::egamma;
  double fact = 1.0;
  for (int i = 1; i <= kMaxIter; ++i) {
    fact *= -x / i;
    double del;
    if (i != nm1) {
      del = -fact / (i - nm1);
    } else {
      double psi = -std::numbers::egamma;
      for (int k = 1; k <= nm1; ++k) psi += 1.0 / k;
      del = fact * (-std::log(x) + psi);
    }
    ans += del;
    if (std::abs(del) < std::abs(ans) * kEps) return ans;
  }
  throw std::runtime_error("expint: series did not converge");
}

// Gamma(1 - nu) x^(nu-1) - sum_k (-x)^k / (k! (k + 1 - nu)) for non-integer nu.
double fractional_series(double nu, double x) {
  double sum = 0.0;
  double term = 1.0;  // (-x)^k / k!
  for (int k = 0; k <= kMaxIter; ++k) {
    if (k > 0) term *= -x / k;
    const double del = term / (k + 1.0 - nu);
    sum += del;
    if (k > 2 && std::abs(del) < std::abs(sum) * kEps) break;
  }
  return std::tgamma(1.0 - nu) * std::pow(x, nu - 1.0) - sum;
}

void check_domain(double nu, double x) {
  if (!(x > 0.0)) throw std::domain_error("expint: x must be > 0, got " + std::to_string(x));
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw std::domain_error("expint: nu must be >= 0");
}

}  // namespace

double expint_scaled(double nu, double x) {
  check_domain(nu, x);
  const double rounded = std::round(nu);
  // Orders within 1e-9 of an integer use the integer recurrences; the
  // fractional series cancels catastrophically there.
  const bool integral = std::abs(nu - rounded) < 1e-9;
  if (integral && rounded == 0.0) return 1.0 / x;
  if (x > 1.0) return continued_fraction_scaled(integral ? rounded : nu, x);
  const double value = integral ? integer_series(static_cast<int>(rounded), x) : fractional_series(nu, x);
  return value * std::exp(x);
}

double expint(double nu, double x) {
  check_domain(nu, x);
  const double rounded = std::round(nu);
  const bool integral = std::abs(nu - rounded) < 1e-9;
  if (integral && rounded == 0.0) return std::exp(-x) / x;
  if (x > 1.0) return continued_fraction_scaled(integral ? rounded : nu, x) * std::exp(-x);
  return integral ? integer_series(static_cast<int>(rounded), x) : fractional_series(nu, x);
}

}  // namespace omkit::special
