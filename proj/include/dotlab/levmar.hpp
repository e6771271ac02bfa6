#pragma once

// Thin wrapper around Eigen's MINPACK-derived Levenberg-Marquardt solver with
// a central-difference Jacobian and covariance estimate.

#include "dotlab/errors.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace dotlab::fit {

struct LeastSquaresOptions {
  double xtol = 1e-8;   // relative step
  double gtol = 1e-10;  // scaled gradient (cosine) test
  double ftol = 1e-14;
  int max_evaluations = 4000;
  double fd_step = 1e-6;  // relative finite-difference step
  std::vector<double> typical;  // per-parameter scale for the difference step
};

struct LeastSquaresResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd covariance;  // sigma^2 (J^T J)^-1
  Eigen::VectorXd std_error;
  double cost = 0.0;  // sum of squared residuals
  double condition = 0.0;  // of the column-scaled Jacobian
  int iterations = 0;
  int evaluations = 0;
  std::string status;
  bool converged = false;
};

using ResidualFn = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r)>;

namespace detail {

inline Eigen::MatrixXd central_jacobian(const ResidualFn& f, const Eigen::VectorXd& x, Eigen::Index m,
                                        const LeastSquaresOptions& opt) {
  Eigen::MatrixXd jac(m, x.size());
  Eigen::VectorXd rp(m), rm(m);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double typ = i < static_cast<Eigen::Index>(opt.typical.size()) ? opt.typical[static_cast<std::size_t>(i)] : 1.0;
    const double h = opt.fd_step * std::max(std::abs(x[i]), typ);
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    f(xp, rp);
    f(xm, rm);
    jac.col(i) = (rp - rm) / (xp[i] - xm[i]);
  }
  return jac;
}

struct Functor : Eigen::DenseFunctor<double> {
  Functor(const ResidualFn& fn, int n, int m, const LeastSquaresOptions& o)
      : Eigen::DenseFunctor<double>(n, m), f(fn), opt(o) {}
  int operator()(const InputType& x, ValueType& r) const {
    f(x, r);
    return 0;
  }
  int df(const InputType& x, JacobianType& j) const {
    j = central_jacobian(f, x, values(), opt);
    return 0;
  }
  const ResidualFn& f;
  const LeastSquaresOptions& opt;
};

inline const char* status_text(Eigen::LevenbergMarquardtSpace::Status s) {
  using namespace Eigen::LevenbergMarquardtSpace;
  switch (s) {
    case RelativeReductionTooSmall: return "relative reduction below ftol";
    case RelativeErrorTooSmall: return "relative step below xtol";
    case RelativeErrorAndReductionTooSmall: return "relative step and reduction below tolerance";
    case CosinusTooSmall: return "gradient below gtol";
    case TooManyFunctionEvaluation: return "evaluation budget exhausted";
    case FtolTooSmall: return "ftol too small";
    case XtolTooSmall: return "xtol too small";
    case GtolTooSmall: return "gtol too small";
    default: return "improper input";
  }
}

}  // namespace detail

/// Minimizes |r(x)|^2 over x starting from x0; `m` is the residual count.
/// Throws NoConvergence when the evaluation budget runs out.
inline LeastSquaresResult least_squares(const ResidualFn& f, const Eigen::VectorXd& x0, Eigen::Index m,
                                        const LeastSquaresOptions& opt = {}) {
  detail::Functor functor(f, static_cast<int>(x0.size()), static_cast<int>(m), opt);
  Eigen::LevenbergMarquardt<detail::Functor> lm(functor);
  lm.setXtol(opt.xtol);
  lm.setGtol(opt.gtol);
  lm.setFtol(opt.ftol);
  lm.setMaxfev(opt.max_evaluations);
  LeastSquaresResult res;
  res.x = x0;
  const auto status = lm.minimize(res.x);
  res.iterations = static_cast<int>(lm.iterations());
  res.evaluations = static_cast<int>(lm.nfev());
  res.status = detail::status_text(status);
  res.residuals.resize(m);
  f(res.x, res.residuals);
  res.cost = res.residuals.squaredNorm();
  using namespace Eigen::LevenbergMarquardtSpace;
  if (status == TooManyFunctionEvaluation || status == ImproperInputParameters)
    throw NoConvergence("least squares: " + res.status, res.iterations, std::sqrt(res.cost));
  res.converged = true;

  res.jacobian = detail::central_jacobian(f, res.x, m, opt);
  const Eigen::VectorXd norms = res.jacobian.colwise().norm();
  Eigen::MatrixXd scaled = res.jacobian;
  for (Eigen::Index c = 0; c < scaled.cols(); ++c)
    if (norms[c] > 0.0) scaled.col(c) /= norms[c];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
  const auto sv = svd.singularValues();
  res.condition = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
  const double dof = static_cast<double>(std::max<Eigen::Index>(m - x0.size(), 1));
  const double sigma2 = res.cost / dof;
  const Eigen::MatrixXd jtj = res.jacobian.transpose() * res.jacobian;
  res.covariance = sigma2 * jtj.completeOrthogonalDecomposition().pseudoInverse();
  res.std_error = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return res;
}

}  // namespace dotlab::fit
