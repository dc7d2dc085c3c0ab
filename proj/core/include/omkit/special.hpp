#pragma once

namespace omkit::special {

/// Generalized exponential integral E_nu(x) = int_1^inf exp(-x t) t^-nu dt
/// for real nu >= 0 and x > 0. Throws std::domain_error otherwise.
double expint(double nu, double x);

/// exp(x) * E_nu(x); finite where E_nu itself underflows.
double expint_scaled(double nu, double x);

}  // namespace omkit::special
