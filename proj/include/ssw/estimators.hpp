#ifndef SSW_ESTIMATORS_HPP
#define SSW_ESTIMATORS_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ssw/classification.hpp"
#include "ssw/data_model.hpp"

namespace ssw {

enum class Method { SSW, SSWSaturated, SSWHomogeneous, SSO, IPSW };
enum class IntervalKind { Normal, TCorrected, BootstrapPercentile };

std::string method_name(Method m);
Method parse_method(const std::string& name);
std::string interval_name(IntervalKind k);
IntervalKind parse_interval(const std::string& name);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  IntervalKind method = IntervalKind::Normal;
  double level = 0.95;
  std::optional<double> df;
  std::optional<int> replicates;
};

struct EstimateDiagnostics {
  std::string model;  // classification or selection term list
  Eigen::VectorXd coefficients;
  int fit_iterations = 0;
  double score_norm = 0.0;
  std::size_t n_fit = 0;
  std::optional<std::size_t> ia4_flags;  // units flagged at eps = 0.05
  std::optional<double> bread_condition;
  bool ill_conditioned = false;
  std::optional<double> min_selection_probability;
  std::optional<std::size_t> bootstrap_invalid;
  std::optional<double> bootstrap_invalid_rate;
  std::vector<std::string> notes;
};

struct EstimateReport {
  Method method = Method::SSW;
  double tau_hat = 0.0;
  double mu1_hat = 0.0;
  double mu0_hat = 0.0;
  std::optional<double> variance;
  std::optional<Interval> interval;
  bool valid = false;
  std::size_t clusters = 0;
  std::size_t individuals = 0;
  EstimateDiagnostics diagnostics;

  std::optional<double> se() const;
};

enum class SswVariant { Covariate, Saturated, Homogeneous };

struct EstimateOptions {
  bool variance = true;     // sandwich variance for SSW variants
  bool diagnostics = true;  // IA4 scan and extra fit metadata
  FitOptions fit;
  FitOptions selection_fit;
  double selection_floor = 1e-3;
};

/// tau_ssw and the cluster-robust variance of mu1 - mu0.
EstimateReport ssw(const TrialDataset& data, const ModelSpec& spec, SswVariant variant,
                   const EstimateOptions& options = {});
EstimateReport sso(const TrialDataset& data);
EstimateReport ipsw(const TrialDataset& data, const ModelSpec& selection_spec,
                    const EstimateOptions& options = {});

Interval interval_normal(const EstimateReport& report, double level = 0.95);
/// t interval with m - 7 degrees of freedom.
Interval interval_t(const EstimateReport& report, std::size_t clusters, double level = 0.95);

/// Which estimator to run, independent of the dataset.
struct EstimatorConfig {
  Method method = Method::SSW;
  std::optional<ModelSpec> classification_spec;  // for Method::SSW
  std::optional<ModelSpec> selection_spec;       // for Method::IPSW
};

EstimateReport estimate(const TrialDataset& data, const EstimatorConfig& config,
                        const EstimateOptions& options = {});

struct BootstrapResult {
  Interval interval;
  std::vector<double> replicates;  // valid replicate estimates, replicate-index order
  std::size_t invalid = 0;
  double invalid_rate = 0.0;
};

using PointEstimator = std::function<double(const TrialDataset&)>;

/// Percentile interval from resampling whole clusters with replacement.
BootstrapResult cluster_bootstrap(const TrialDataset& data, const PointEstimator& estimator, int replicates,
                                  double level, std::uint64_t seed, unsigned threads = 0);
/// Point estimator for `config`, warm-started from fits on `reference` when possible.
PointEstimator make_point_estimator(const EstimatorConfig& config, const EstimateReport& reference);

bool is_valid_estimate(double tau);

}  // namespace ssw

#endif  // SSW_ESTIMATORS_HPP
