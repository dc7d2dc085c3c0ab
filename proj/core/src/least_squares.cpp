#include "omkit/least_squares.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace omkit::fit {

LmResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& p0, Eigen::Index n_residuals,
                             const LmOptions& options) {
  const Eigen::Index np = p0.size();
  if (n_residuals <= np) throw std::invalid_argument("levenberg_marquardt: need more residuals than parameters");

  LmResult result;
  Eigen::VectorXd p = p0;
  Eigen::VectorXd r(n_residuals), r_new(n_residuals);
  Eigen::MatrixXd jac(n_residuals, np);
  fn(p, r, &jac);
  if (!r.allFinite() || !jac.allFinite()) throw std::runtime_error("levenberg_marquardt: non-finite initial residuals");
  double cost = r.squaredNorm();

  Eigen::MatrixXd a = jac.transpose() * jac;
  Eigen::VectorXd g = jac.transpose() * r;
  Eigen::VectorXd diag = a.diagonal().cwiseMax(1e-300);
  double mu = options.tau * diag.maxCoeff();
  double nu = 2.0;

  for (int it = 1; it <= options.max_iterations; ++it) {
    result.iterations = it;
    if ((g.array().abs() / diag.array().sqrt()).maxCoeff() <= options.gtol * std::sqrt(std::max(cost, 1e-300))) {
      result.converged = true;
      break;
    }
    Eigen::MatrixXd damped = a;
    damped.diagonal() += mu * diag;
    const Eigen::VectorXd h = damped.ldlt().solve(-g);
    if (h.norm() <= options.xtol * (p.norm() + options.xtol)) {
      result.converged = true;
      break;
    }
    const Eigen::VectorXd p_new = p + h;
    fn(p_new, r_new, nullptr);
    const double cost_new = r_new.allFinite() ? r_new.squaredNorm() : std::numeric_limits<double>::infinity();
    const double predicted = h.dot(mu * diag.cwiseProduct(h) - g);
    const double rho = predicted > 0 ? (cost - cost_new) / predicted : -1.0;
    if (rho > 0) {
      const double reduction = cost - cost_new;
      p = p_new;
      fn(p, r, &jac);
      cost = r.squaredNorm();
      a = jac.transpose() * jac;
      g = jac.transpose() * r;
      diag = diag.cwiseMax(a.diagonal());
      mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      if (reduction <= options.ftol * cost) {
        result.converged = true;
        break;
      }
    } else {
      mu *= nu;
      nu *= 2.0;
      if (!std::isfinite(mu)) break;
    }
  }

  result.params = p;
  result.cost = cost;
  result.dof = static_cast<int>(n_residuals - np);
  const double s2 = cost / result.dof;
  result.covariance = s2 * a.completeOrthogonalDecomposition().pseudoInverse();
  return result;
}

Eigen::VectorXd polyfit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int order) {
  if (order < 0) throw std::invalid_argument("polyfit: order must be >= 0");
  if (x.size() != y.size()) throw std::invalid_argument("polyfit: size mismatch");
  if (x.size() <= order) throw std::invalid_argument("polyfit: under-determined");
  Eigen::MatrixXd v(x.size(), order + 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double t = 1.0;
    for (int k = 0; k <= order; ++k) {
      v(i, k) = t;
      t *= x[i];
    }
  }
  return v.colPivHouseholderQr().solve(y);
}

double polyval(const Eigen::VectorXd& c, double x) {
  double s = 0.0;
  for (Eigen::Index k = c.size() - 1; k >= 0; --k) s = s * x + c[k];
  return s;
}

}  // namespace omkit::fit
