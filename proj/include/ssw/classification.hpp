#ifndef SSW_CLASSIFICATION_HPP
#define SSW_CLASSIFICATION_HPP

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "ssw/data_model.hpp"

namespace ssw {

struct FitOptions {
  double tol = 1e-10;
  int max_iter = 100;
  std::optional<Eigen::VectorXd> start;
};

/// Logistic GEE (independence working correlation) coefficients.
struct ThetaEstimate {
  Eigen::VectorXd theta;
  ModelSpec spec;
  int iterations = 0;
  double score_norm = 0.0;
  std::size_t n_used = 0;
  Eigen::MatrixXd information;  // sum of p(1-p) D D' over fitted rows
};

/// Solves sum_i sum_j D_ij (outcome_ij - expit(D_ij' theta)) = 0 on `subset`.
/// The outcome is Y* for classification specs and V for selection specs.
ThetaEstimate fit_gee_logistic(const TrialDataset& data, const ModelSpec& spec, Subset subset,
                               const FitOptions& options = {});

double predict_pv(const ThetaEstimate& fit, const DesignRow& row);

/// Probabilities expit(D_{ya}' theta) for every dataset row, indexed [y][a].
struct CounterfactualProbabilities {
  std::array<std::array<Eigen::VectorXd, 2>, 2> p;
  const Eigen::VectorXd& operator()(int y, int a) const { return p[static_cast<std::size_t>(y)][static_cast<std::size_t>(a)]; }
};

CounterfactualProbabilities counterfactual_pv(const Eigen::VectorXd& theta, const ModelSpec& spec,
                                              const Eigen::MatrixXd& base);

/// Validation-subset classification counts and ratios.
struct ClassificationTable {
  // counts[a][y][y_star]
  std::array<std::array<std::array<std::size_t, 2>, 2>, 2> counts{};

  std::size_t cell_total(int y, int a) const {
    const auto& c = counts[static_cast<std::size_t>(a)][static_cast<std::size_t>(y)];
    return c[0] + c[1];
  }
  std::size_t cell_positive(int y, int a) const {
    return counts[static_cast<std::size_t>(a)][static_cast<std::size_t>(y)][1];
  }
  std::size_t total() const;
  /// p^v(y, a); throws if the cell is empty.
  double p(int y, int a) const;
};

ClassificationTable tabulate_classification(const TrialDataset& data);
/// Cell-ratio estimates of p^v(y,a); every (y,a) cell must be non-empty.
ClassificationTable nonparametric_pv(const TrialDataset& data);

struct Ia4Flag {
  std::size_t observation = 0;
  int a = 0;
  double gap = 0.0;  // p(D_{1a}) - p(D_{0a})
};

/// Units where |p(D_{1a}) - p(D_{0a})| < eps for some a.
std::vector<Ia4Flag> check_ia4(const ThetaEstimate& fit, const TrialDataset& data, double eps);

}  // namespace ssw

#endif  // SSW_CLASSIFICATION_HPP
