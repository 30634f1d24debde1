#ifndef SSW_LOGISTIC_HPP
#define SSW_LOGISTIC_HPP

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <type_traits>

#include "ssw/error.hpp"

namespace ssw {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Logistic function, branch-stable for large |eta|.
template <typename Scalar>
  requires(!std::is_base_of_v<Eigen::EigenBase<Scalar>, Scalar>)
inline Scalar expit(Scalar eta) {
  using std::exp;
  if (eta >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-eta));
  const Scalar e = exp(eta);
  return e / (Scalar(1) + e);
}

/// log(1 + exp(eta)) without overflow.
template <typename Scalar>
inline Scalar log1pexp(Scalar eta) {
  using std::exp;
  using std::log1p;
  if (eta > Scalar(0)) return eta + log1p(exp(-eta));
  return log1p(exp(eta));
}

/// Elementwise expit over any Eigen expression.
template <typename Derived>
inline auto expit(const Eigen::ArrayBase<Derived>& eta) {
  using Scalar = typename Derived::Scalar;
  return eta.unaryExpr([](Scalar v) { return expit(v); });
}

template <typename Scalar>
struct NewtonOptions {
  Scalar score_tol = Scalar(1e-10);  // on max|score| / n
  Scalar step_tol = Scalar(1e-8);    // on max|step| / (1 + max|coef|)
  int max_iter = 100;
  Scalar divergence_bound = Scalar(30);
};

template <typename Scalar>
struct NewtonResult {
  VectorX<Scalar> coef;
  int iterations = 0;
  Scalar score_norm = Scalar(0);
  MatrixX<Scalar> information;  // X' W X at coef
};

/// Bernoulli log-likelihood of a logistic model at linear predictor `eta`.
template <typename Scalar>
Scalar logistic_loglik(const VectorX<Scalar>& eta, const VectorX<Scalar>& y) {
  Scalar ll(0);
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - log1pexp(eta[i]);
  return ll;
}

/// Damped Newton (IRLS) solve of sum_i x_i (y_i - expit(x_i' coef)) = 0.
///
/// Convergence requires both a small score and a small Newton step, so a
/// separated problem (score -> 0 while |coef| grows without bound) is reported
/// as separation once the coefficients leave the divergence bound.
template <typename Scalar>
NewtonResult<Scalar> fit_logistic_newton(
    const Eigen::Ref<const MatrixX<Scalar>>& x, const Eigen::Ref<const VectorX<Scalar>>& y,
    const NewtonOptions<Scalar>& opts = {}, const std::optional<VectorX<Scalar>>& start = {}) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n == 0) throw FitError(FitError::Kind::EmptySubset, "logistic fit on an empty row set");
  {
    Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(x);
    qr.setThreshold(Scalar(1e-10));
    if (qr.rank() < p)
      throw FitError(FitError::Kind::RankDeficient,
                     "design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                         " < " + std::to_string(p) + ")");
  }

  NewtonResult<Scalar> out;
  out.coef = start ? *start : VectorX<Scalar>::Zero(p);
  if (out.coef.size() != p) throw ArgumentError("starting coefficient length mismatch");

  const Scalar score_bound = opts.score_tol * Scalar(n);
  VectorX<Scalar> eta = x * out.coef;
  Scalar ll = logistic_loglik<Scalar>(eta, y);

  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    const VectorX<Scalar> prob = expit(eta.array()).matrix();
    const VectorX<Scalar> score = x.transpose() * (y - prob);
    const VectorX<Scalar> weight = (prob.array() * (Scalar(1) - prob.array())).matrix();
    out.information = x.transpose() * weight.asDiagonal() * x;
    out.score_norm = score.cwiseAbs().maxCoeff();
    out.iterations = iter;

    const Scalar coef_norm = out.coef.cwiseAbs().maxCoeff();
    if (coef_norm > opts.divergence_bound)
      throw FitError(FitError::Kind::Separation,
                     "complete or quasi-complete separation: coefficient max-norm " +
                         std::to_string(coef_norm) + " exceeds bound");

    Eigen::LDLT<MatrixX<Scalar>> ldlt(out.information);
    const VectorX<Scalar> step = ldlt.solve(score);
    if (ldlt.info() != Eigen::Success || !step.allFinite())
      throw FitError(FitError::Kind::Separation, "information matrix singular during fit");

    const Scalar step_norm = step.cwiseAbs().maxCoeff();
    if (out.score_norm <= score_bound && step_norm <= opts.step_tol * (Scalar(1) + coef_norm))
      return out;
    if (iter == opts.max_iter) break;

    Scalar scale(1);
    for (int halving = 0; halving < 40; ++halving) {
      const VectorX<Scalar> trial = out.coef + scale * step;
      const VectorX<Scalar> trial_eta = x * trial;
      const Scalar trial_ll = logistic_loglik<Scalar>(trial_eta, y);
      if (trial_ll >= ll - Scalar(1e-12) * (Scalar(1) + std::abs(ll)) || halving == 39) {
        out.coef = trial;
        eta = trial_eta;
        ll = trial_ll;
        break;
      }
      scale /= Scalar(2);
    }
  }
  throw FitError(FitError::Kind::NonConvergence,
                 "logistic fit did not converge in " + std::to_string(opts.max_iter) +
                     " iterations (score max-norm " + std::to_string(out.score_norm) + ")");
}

}  // namespace ssw

#endif  // SSW_LOGISTIC_HPP
