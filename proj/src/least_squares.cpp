#include "ddspec/least_squares.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "ddspec/error.hpp"

namespace ddspec {

namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

Eigen::MatrixXd numeric_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& r0, double rel_step) {
  Eigen::MatrixXd j(r0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = rel_step * std::max(1.0, std::abs(x[k]));
    Eigen::VectorXd hi = x;
    Eigen::VectorXd lo = x;
    hi[k] += h;
    lo[k] -= h;
    const Eigen::VectorXd rh = f(hi);
    const Eigen::VectorXd rl = f(lo);
    if (all_finite(rh) && all_finite(rl)) {
      j.col(k) = (rh - rl) / (2.0 * h);
    } else if (all_finite(rh)) {
      j.col(k) = (rh - r0) / h;
    } else {
      j.col(k) = (r0 - rl) / h;
    }
  }
  return j;
}

LeastSquaresResult levenberg_marquardt(const ResidualFunction& f, const Eigen::VectorXd& x0,
                                       const LeastSquaresOptions& options) {
  LeastSquaresResult out;
  out.x = x0;
  out.residuals = f(x0);
  require(all_finite(out.residuals), "least squares: residuals not finite at the starting point");
  require(out.residuals.size() >= x0.size(), "least squares: fewer residuals than parameters");
  out.cost = out.residuals.squaredNorm();

  double lambda = options.initial_lambda;
  out.jacobian = numeric_jacobian(f, out.x, out.residuals, options.fd_step);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    out.iterations = iter + 1;
    const Eigen::MatrixXd jtj = out.jacobian.transpose() * out.jacobian;
    const Eigen::VectorXd g = out.jacobian.transpose() * out.residuals;
    if (g.lpNorm<Eigen::Infinity>() == 0.0) {
      out.converged = true;
      break;
    }
    const Eigen::VectorXd scale = jtj.diagonal().cwiseMax(1e-300);

    bool accepted = false;
    bool done = false;
    while (lambda < 1e16) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * scale;
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      const Eigen::VectorXd trial = out.x + step;
      const Eigen::VectorXd r = f(trial);
      const double cost = all_finite(r) ? r.squaredNorm() : INFINITY;
      if (cost < out.cost) {
        const double rel_cost = (out.cost - cost) / std::max(out.cost, 1e-300);
        const double rel_step = step.norm() / (out.x.norm() + options.step_tol);
        out.x = trial;
        out.residuals = r;
        out.cost = cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        done = rel_cost < options.cost_tol || rel_step < options.step_tol;
        break;
      }
      // A rejected step that is already negligible means we sit at the minimum.
      if (step.norm() < options.step_tol * (out.x.norm() + options.step_tol)) {
        done = true;
        break;
      }
      lambda *= 4.0;
    }
    if (done) {
      out.converged = true;
      break;
    }
    if (!accepted) break;
    out.jacobian = numeric_jacobian(f, out.x, out.residuals, options.fd_step);
  }

  out.jacobian = numeric_jacobian(f, out.x, out.residuals, options.fd_step);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.jacobian, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? s[0] * 1e-10 : 0.0;
  Eigen::VectorXd inv2 = Eigen::VectorXd::Zero(s.size());
  out.rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > cutoff) {
      inv2[i] = 1.0 / (s[i] * s[i]);
      ++out.rank;
    }
  }
  out.covariance = svd.matrixV() * inv2.asDiagonal() * svd.matrixV().transpose();
  return out;
}

}  // namespace ddspec
