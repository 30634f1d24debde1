#include "ssw/classification.hpp"

#include <cmath>
#include <string>

#include "ssw/error.hpp"
#include "ssw/logistic.hpp"

namespace ssw {

ThetaEstimate fit_gee_logistic(const TrialDataset& data, const ModelSpec& spec, Subset subset,
                               const FitOptions& options) {
  const DesignMatrix design = build_design(data, spec, subset);
  Eigen::VectorXd outcome(design.values.rows());
  const bool selection = spec.role() == ModelRole::Selection;
  for (std::size_t k = 0; k < design.provenance.size(); ++k) {
    const std::size_t r = design.provenance[k].observation;
    outcome[static_cast<Eigen::Index>(k)] = selection ? data.v(r) : data.y_star(r);
  }
  const std::size_t n = design.provenance.size();
  double sum = outcome.sum();
  if (n > 0 && (sum == 0.0 || sum == static_cast<double>(n)))
    throw FitError(FitError::Kind::Separation, "outcome is constant on the fitted subset");

  NewtonOptions<double> newton;
  newton.score_tol = options.tol;
  newton.max_iter = options.max_iter;
  auto result = fit_logistic_newton<double>(design.values, outcome, newton, options.start);
  return ThetaEstimate{std::move(result.coef), spec,       result.iterations,
                       result.score_norm,      n,          std::move(result.information)};
}

double predict_pv(const ThetaEstimate& fit, const DesignRow& row) {
  if (row.values.size() != fit.theta.size())
    throw ArgumentError("design row length " + std::to_string(row.values.size()) +
                        " does not match coefficient length " + std::to_string(fit.theta.size()));
  return expit(row.values.dot(fit.theta));
}

CounterfactualProbabilities counterfactual_pv(const Eigen::VectorXd& theta, const ModelSpec& spec,
                                              const Eigen::MatrixXd& base) {
  CounterfactualProbabilities out;
  for (int y = 0; y < 2; ++y)
    for (int a = 0; a < 2; ++a) {
      const Eigen::VectorXd coef = theta.cwiseProduct(spec.mask(y, a));
      out.p[static_cast<std::size_t>(y)][static_cast<std::size_t>(a)] = expit((base * coef).array()).matrix();
    }
  return out;
}

std::size_t ClassificationTable::total() const {
  std::size_t n = 0;
  for (const auto& arm : counts)
    for (const auto& row : arm)
      for (std::size_t c : row) n += c;
  return n;
}

double ClassificationTable::p(int y, int a) const {
  const std::size_t n = cell_total(y, a);
  if (n == 0)
    throw IdentificationError("validation subset has no rows with Y=" + std::to_string(y) +
                              ", A=" + std::to_string(a));
  return static_cast<double>(cell_positive(y, a)) / static_cast<double>(n);
}

ClassificationTable tabulate_classification(const TrialDataset& data) {
  ClassificationTable t;
  for (std::size_t r = 0; r < data.num_rows(); ++r) {
    if (data.v(r) != 1) continue;
    ++t.counts[static_cast<std::size_t>(data.a(r))][static_cast<std::size_t>(*data.y(r))]
              [static_cast<std::size_t>(data.y_star(r))];
  }
  return t;
}

ClassificationTable nonparametric_pv(const TrialDataset& data) {
  ClassificationTable t = tabulate_classification(data);
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y) (void)t.p(y, a);
  return t;
}

std::vector<Ia4Flag> check_ia4(const ThetaEstimate& fit, const TrialDataset& data, double eps) {
  const Eigen::MatrixXd base = base_design(data, fit.spec);
  const CounterfactualProbabilities pv = counterfactual_pv(fit.theta, fit.spec, base);
  std::vector<Ia4Flag> flags;
  for (std::size_t r = 0; r < data.num_rows(); ++r) {
    const auto k = static_cast<Eigen::Index>(r);
    for (int a = 0; a < 2; ++a) {
      const double gap = pv(1, a)[k] - pv(0, a)[k];
      if (std::abs(gap) < eps) flags.push_back({r, a, gap});
    }
  }
  return flags;
}

}  // namespace ssw
