#pragma once

#include <functional>

#include <Eigen/Core>

namespace ddspec {

struct LeastSquaresOptions {
  int max_iterations = 500;
  double step_tol = 1e-8;   // relative parameter step
  double cost_tol = 1e-10;  // relative cost change on an accepted step
  double fd_step = 1e-6;    // relative central-difference step
  double initial_lambda = 1e-3;
};

struct LeastSquaresResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd covariance;  // (J^T J)^+ at the solution
  double cost = 0.0;           // sum of squared residuals
  int iterations = 0;
  int rank = 0;
  bool converged = false;
};

/// Residual vector r(x); for weighted fits each entry is (model - data) / sigma.
using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

Eigen::MatrixXd numeric_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& r0, double rel_step);

/// Levenberg-Marquardt with Marquardt diagonal scaling and central-difference
/// Jacobians. Does not throw on non-convergence; check `converged`.
LeastSquaresResult levenberg_marquardt(const ResidualFunction& f, const Eigen::VectorXd& x0,
                                       const LeastSquaresOptions& options = {});

}  // namespace ddspec
