#include "ssw/mestimation.hpp"

#include <string>

#include "ssw/logistic.hpp"

namespace ssw {

namespace {

constexpr double kMinClassificationGap = 1e-6;

}  // namespace

Eigen::VectorXd LambdaEstimate::vector() const {
  Eigen::VectorXd out(dim());
  out << fit.theta, pi, mu1, mu0;
  return out;
}

Eigen::VectorXd ate_contrast(Eigen::Index dim) {
  Eigen::VectorXd k = Eigen::VectorXd::Zero(dim);
  k[dim - 2] = 1.0;
  k[dim - 1] = -1.0;
  return k;
}

StackedEquations::StackedEquations(const TrialDataset& data, const ModelSpec& spec)
    : data_(&data), spec_(spec), base_(base_design(data, spec)) {
  const DesignMatrix v = build_design(data, spec, Subset::ValidatedOnly);
  validated_ = v.values;
  validated_offsets_ = v.cluster_offsets;
  validated_ystar_.resize(validated_.rows());
  for (std::size_t k = 0; k < v.provenance.size(); ++k)
    validated_ystar_[static_cast<Eigen::Index>(k)] = data.y_star(v.provenance[k].observation);
  const auto n = static_cast<Eigen::Index>(data.num_rows());
  a_.resize(n);
  ystar_.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    a_[r] = data.a(static_cast<std::size_t>(r));
    ystar_[r] = data.y_star(static_cast<std::size_t>(r));
  }
}

void StackedEquations::check_denominators(const CounterfactualProbabilities& pv) const {
  for (Eigen::Index r = 0; r < base_.rows(); ++r)
    for (int a = 0; a < 2; ++a) {
      const double gap = pv(1, a)[r] - pv(0, a)[r];
      if (!(std::abs(gap) >= kMinClassificationGap)) {
        const auto row = static_cast<std::size_t>(r);
        throw IdentificationError(
            "classification probabilities p(1," + std::to_string(a) + ") and p(0," + std::to_string(a) +
            ") coincide for row " + std::to_string(row + 1) + " in cluster '" +
            data_->cluster_label(static_cast<std::size_t>(data_->cluster_of(row))) + "'");
      }
    }
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> StackedEquations::unit_terms(const Eigen::VectorXd& theta,
                                                                         double pi) const {
  const CounterfactualProbabilities pv = counterfactual_pv(theta, spec_, base_);
  check_denominators(pv);
  const Eigen::ArrayXd a = a_.array(), ys = ystar_.array();
  Eigen::VectorXd treated =
      ((a * ys - pi * pv(0, 1).array()) / (pi * (pv(1, 1).array() - pv(0, 1).array()))).matrix();
  Eigen::VectorXd control = (((1.0 - a) * ys - (1.0 - pi) * pv(0, 0).array()) /
                             ((1.0 - pi) * (pv(1, 0).array() - pv(0, 0).array())))
                                .matrix();
  return {std::move(treated), std::move(control)};
}

Eigen::MatrixXd StackedEquations::per_cluster(const Eigen::VectorXd& lambda) const {
  const Eigen::Index p = static_cast<Eigen::Index>(spec_.size());
  if (lambda.size() != p + 3) throw ArgumentError("lambda has the wrong dimension");
  const Eigen::VectorXd theta = lambda.head(p);
  const double pi = lambda[p], mu1 = lambda[p + 1], mu0 = lambda[p + 2];
  const auto [treated, control] = unit_terms(theta, pi);
  const Eigen::VectorXd resid =
      validated_ystar_ - expit((validated_ * theta).array()).matrix();

  const std::size_t m = data_->num_clusters();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), p + 3);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto vb = static_cast<Eigen::Index>(validated_offsets_[i]);
    const auto vn = static_cast<Eigen::Index>(validated_offsets_[i + 1]) - vb;
    if (vn > 0)
      out.row(row).head(p) = (validated_.middleRows(vb, vn).transpose() * resid.segment(vb, vn)).transpose();
    const auto b = static_cast<Eigen::Index>(data_->cluster_begin(i));
    const auto n = static_cast<Eigen::Index>(data_->cluster_size(i));
    out(row, p) = (a_.segment(b, n).array() - pi).sum();
    out(row, p + 1) = (treated.segment(b, n).array() - mu1).sum();
    out(row, p + 2) = (control.segment(b, n).array() - mu0).sum();
  }
  return out;
}

Eigen::MatrixXd StackedEquations::jacobian(const Eigen::VectorXd& lambda) const {
  const Eigen::Index p = static_cast<Eigen::Index>(spec_.size());
  if (lambda.size() != p + 3) throw ArgumentError("lambda has the wrong dimension");
  const Eigen::VectorXd theta = lambda.head(p);
  const double pi = lambda[p];
  const double n_total = static_cast<double>(base_.rows());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(p + 3, p + 3);

  // GEE block: minus the logistic information on validated rows.
  const Eigen::ArrayXd pv_fit = expit((validated_ * theta).array());
  const Eigen::VectorXd w = (pv_fit * (1.0 - pv_fit)).matrix();
  jac.topLeftCorner(p, p) = -(validated_.transpose() * w.asDiagonal() * validated_);

  jac(p, p) = -n_total;

  const CounterfactualProbabilities pv = counterfactual_pv(theta, spec_, base_);
  check_denominators(pv);
  const Eigen::ArrayXd a = a_.array(), ys = ystar_.array();
  auto slope = [](const Eigen::VectorXd& prob) { return (prob.array() * (1.0 - prob.array())).eval(); };

  // mu_ssw(1) row.
  {
    const Eigen::ArrayXd p01 = pv(0, 1).array(), p11 = pv(1, 1).array();
    const Eigen::ArrayXd s01 = slope(pv(0, 1)), s11 = slope(pv(1, 1));
    const Eigen::ArrayXd gap = p11 - p01;
    const Eigen::ArrayXd denom_sq = pi * pi * gap.square();
    // first term: -pi^2 D01 p01(1-p01)(p11-p01) / (pi^2 (p11-p01)^2)
    const Eigen::ArrayXd first01 = -pi * pi * s01 * gap / denom_sq;
    // second term: -[pi (A Y* - pi p01) / (pi^2 (p11-p01)^2)] (D11 s11 - D01 s01)
    const Eigen::ArrayXd lead = pi * (a * ys - pi * p01) / denom_sq;
    const Eigen::VectorXd c01 = (first01 + lead * s01).matrix();
    const Eigen::VectorXd c11 = (-lead * s11).matrix();
    const Eigen::VectorXd grad = spec_.mask(0, 1).cwiseProduct(base_.transpose() * c01) +
                                 spec_.mask(1, 1).cwiseProduct(base_.transpose() * c11);
    jac.block(p + 1, 0, 1, p) = grad.transpose();
    jac(p + 1, p) = (-a * ys / (pi * pi * gap)).sum();
    jac(p + 1, p + 1) = -n_total;
  }
  // mu_ssw(0) row.
  {
    const double q = 1.0 - pi;
    const Eigen::ArrayXd p00 = pv(0, 0).array(), p10 = pv(1, 0).array();
    const Eigen::ArrayXd s00 = slope(pv(0, 0)), s10 = slope(pv(1, 0));
    const Eigen::ArrayXd gap = p10 - p00;
    const Eigen::ArrayXd denom_sq = q * q * gap.square();
    const Eigen::ArrayXd first00 = -q * q * s00 * gap / denom_sq;
    const Eigen::ArrayXd lead = q * ((1.0 - a) * ys - q * p00) / denom_sq;
    const Eigen::VectorXd c00 = (first00 + lead * s00).matrix();
    const Eigen::VectorXd c10 = (-lead * s10).matrix();
    const Eigen::VectorXd grad = spec_.mask(0, 0).cwiseProduct(base_.transpose() * c00) +
                                 spec_.mask(1, 0).cwiseProduct(base_.transpose() * c10);
    jac.block(p + 2, 0, 1, p) = grad.transpose();
    jac(p + 2, p) = ((1.0 - a) * ys / (q * q * gap)).sum();
    jac(p + 2, p + 2) = -n_total;
  }
  return jac;
}

Eigen::MatrixXd StackedEquations::jacobian_numeric(const Eigen::VectorXd& lambda, double step) const {
  const Eigen::Index d = dim();
  Eigen::MatrixXd jac(d, d);
  for (Eigen::Index c = 0; c < d; ++c) {
    Eigen::VectorXd up = lambda, down = lambda;
    const double h = step * std::max(1.0, std::abs(lambda[c]));
    up[c] += h;
    down[c] -= h;
    jac.col(c) = (total(up) - total(down)) / (2.0 * h);
  }
  return jac;
}

Eigen::MatrixXd estimating_functions(const TrialDataset& data, const ModelSpec& spec,
                                     const Eigen::VectorXd& lambda) {
  return StackedEquations(data, spec).per_cluster(lambda);
}

Eigen::MatrixXd jacobian_analytic(const TrialDataset& data, const ModelSpec& spec,
                                  const Eigen::VectorXd& lambda) {
  return StackedEquations(data, spec).jacobian(lambda);
}

LambdaEstimate solve_lambda(const TrialDataset& data, const ModelSpec& spec, const FitOptions& options) {
  if (spec.role() != ModelRole::Classification)
    throw SpecError("solve_lambda needs a classification model");
  LambdaEstimate out{fit_gee_logistic(data, spec, Subset::ValidatedOnly, options), data.pi_hat(), 0.0, 0.0};
  const StackedEquations eq(data, spec);
  const auto [treated, control] = eq.unit_terms(out.fit.theta, out.pi);
  out.mu1 = treated.mean();
  out.mu0 = control.mean();
  return out;
}

}  // namespace ssw
