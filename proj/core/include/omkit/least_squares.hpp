#pragma once

#include <Eigen/Core>
#include <functional>

namespace omkit::fit {

/// Fills residuals r(p) and, when jac is non-null, the Jacobian dr/dp.
using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac)>;

struct LmOptions {
  int max_iterations = 500;
  double xtol = 1e-12;  // relative step size
  double ftol = 1e-15;  // relative cost reduction
  double gtol = 1e-14;  // scaled gradient
  double tau = 1e-3;    // initial damping relative to max diag(J^T J)
};

struct LmResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // s^2 (J^T J)^-1 with s^2 = cost / dof
  double cost = 0.0;           // sum of squared residuals
  int dof = 0;
  int iterations = 0;
  bool converged = false;
};

/// Levenberg-Marquardt with Marquardt diagonal scaling and Nielsen's
/// damping update.
LmResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& p0, Eigen::Index n_residuals,
                             const LmOptions& options = {});

/// Least-squares polynomial coefficients c_0..c_order of y ~ sum c_k x^k.
Eigen::VectorXd polyfit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int order);
double polyval(const Eigen::VectorXd& coefficients, double x);

}  // namespace omkit::fit
