#ifndef SSW_MESTIMATION_HPP
#define SSW_MESTIMATION_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "ssw/classification.hpp"
#include "ssw/data_model.hpp"
#include "ssw/error.hpp"

namespace ssw {

/// Stacked parameter (theta, pi, mu_ssw(1), mu_ssw(0)).
struct LambdaEstimate {
  ThetaEstimate fit;
  double pi = 0.0;
  double mu1 = 0.0;
  double mu0 = 0.0;

  Eigen::Index dim() const { return fit.theta.size() + 3; }
  Eigen::VectorXd vector() const;
};

/// Contrast picking mu_ssw(1) - mu_ssw(0) out of a lambda of dimension `dim`.
Eigen::VectorXd ate_contrast(Eigen::Index dim);

/// Cluster-indexed estimating functions m_i(lambda) for the SSW estimator,
/// with the inputs that do not depend on lambda precomputed.
class StackedEquations {
 public:
  StackedEquations(const TrialDataset& data, const ModelSpec& spec);

  Eigen::Index dim() const { return static_cast<Eigen::Index>(spec_.size()) + 3; }
  const ModelSpec& spec() const { return spec_; }

  /// m x dim matrix; row i is m_i(lambda).
  Eigen::MatrixXd per_cluster(const Eigen::VectorXd& lambda) const;
  Eigen::VectorXd total(const Eigen::VectorXd& lambda) const { return per_cluster(lambda).colwise().sum().transpose(); }
  /// sum_i d m_i / d lambda', closed form.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& lambda) const;
  /// Central differences of total(); test oracle.
  Eigen::MatrixXd jacobian_numeric(const Eigen::VectorXd& lambda, double step = 1e-6) const;

  /// Per-unit transformed outcomes whose means are mu_ssw(1) and mu_ssw(0).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> unit_terms(const Eigen::VectorXd& theta, double pi) const;

 private:
  void check_denominators(const CounterfactualProbabilities& pv) const;

  const TrialDataset* data_;
  ModelSpec spec_;
  Eigen::MatrixXd base_;       // N x p, all rows
  Eigen::MatrixXd validated_;  // factual D on validated rows
  Eigen::VectorXd validated_ystar_;
  std::vector<std::size_t> validated_offsets_;
  Eigen::VectorXd a_, ystar_;
};

Eigen::MatrixXd estimating_functions(const TrialDataset& data, const ModelSpec& spec,
                                     const Eigen::VectorXd& lambda);

/// Block-triangular solve: theta from the GEE, pi as the treated share, then
/// the two closed-form means.
LambdaEstimate solve_lambda(const TrialDataset& data, const ModelSpec& spec, const FitOptions& options = {});

Eigen::MatrixXd jacobian_analytic(const TrialDataset& data, const ModelSpec& spec,
                                  const Eigen::VectorXd& lambda);

template <typename Scalar>
struct SandwichVariance {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> v_lambda;  // variance of lambda-hat
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> bread;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> meat;
  Scalar condition = Scalar(1);
  bool ill_conditioned = false;
};

/// B^{-1} M B^{-T} / m with B = jacobian_sum / m and M = sum_i m_i m_i' / m.
template <typename DerivedJ, typename DerivedM>
SandwichVariance<typename DerivedJ::Scalar> sandwich_variance(const Eigen::MatrixBase<DerivedJ>& jacobian_sum,
                                                              const Eigen::MatrixBase<DerivedM>& m_values,
                                                              Eigen::Index clusters) {
  using Scalar = typename DerivedJ::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (jacobian_sum.rows() != jacobian_sum.cols() || m_values.cols() != jacobian_sum.rows())
    throw ArgumentError("sandwich dimensions disagree");
  if (clusters < 1) throw ArgumentError("sandwich needs at least one cluster");
  const Scalar m = static_cast<Scalar>(clusters);
  SandwichVariance<Scalar> out;
  out.bread = jacobian_sum / m;
  out.meat = (m_values.transpose() * m_values) / m;
  Eigen::FullPivLU<Mat> lu(out.bread);
  if (!lu.isInvertible()) throw IdentificationError("sandwich bread matrix is singular");
  const Scalar rcond = lu.rcond();
  out.condition = rcond > Scalar(0) ? Scalar(1) / rcond : std::numeric_limits<Scalar>::infinity();
  out.ill_conditioned = out.condition > Scalar(1e10);
  const Mat inv = lu.inverse();
  Mat v = inv * out.meat * inv.transpose() / m;
  out.v_lambda = (v + v.transpose()) / Scalar(2);
  return out;
}

/// (k' lambda, k' V k).
template <typename Derived>
std::pair<double, double> contrast(const Eigen::VectorXd& lambda, const Eigen::MatrixBase<Derived>& v_lambda,
                                   const Eigen::VectorXd& k) {
  if (k.size() != lambda.size() || v_lambda.rows() != k.size() || v_lambda.cols() != k.size())
    throw ArgumentError("contrast vector length does not match lambda");
  return {k.dot(lambda), k.dot(v_lambda * k)};
}

}  // namespace ssw

#endif  // SSW_MESTIMATION_HPP
