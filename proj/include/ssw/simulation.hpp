#ifndef SSW_SIMULATION_HPP
#define SSW_SIMULATION_HPP

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ssw/data_model.hpp"
#include "ssw/estimators.hpp"
#include "ssw/rng.hpp"

namespace ssw::sim {

inline constexpr double kLogisticVariance = 3.289868133696452872944830;  // pi^2 / 3
inline constexpr std::size_t kNumCovariates = 4;

/// Random-intercept variance giving a latent-scale ICC of `icc`.
double icc_to_variance(double icc);
/// (site variance, clinician variance) for within-clinician / across-clinician correlations.
std::pair<double, double> nested_variances(double wswc, double wsac);

/// alpha_a + beta_a' x + delta_a y with every coefficient linear in a.
struct LinearPredictor {
  double alpha = 0.0, alpha_a = 0.0;
  std::array<double, kNumCovariates> beta{}, beta_a{};
  double delta = 0.0, delta_a = 0.0;

  double operator()(int a, const double* x, int y) const {
    double eta = alpha + alpha_a * a + (delta + delta_a * a) * y;
    for (std::size_t k = 0; k < kNumCovariates; ++k) eta += (beta[k] + beta_a[k] * a) * x[k];
    return eta;
  }
};

struct ParameterSet {
  std::string name;
  LinearPredictor outcome;    // psi
  LinearPredictor silver;     // rho
  LinearPredictor selection;  // phi
};

ParameterSet table1_parameters(bool dx);
/// large_error: LME vs SME; large_validation: LV vs SV.
ParameterSet figure2_parameters(bool large_error, bool large_validation);

struct NestedConfig {
  int clinicians_min = 2;
  int clinicians_max = 3;
  double wswc = 0.01;
  double wsac = 0.005;
};

struct ScenarioConfig {
  std::string name = "custom";
  int m = 30;
  int size_min = 100;
  int size_max = 300;
  double icc_y = 0.01;
  double icc_v = 0.01;
  bool dx = false;
  std::optional<NestedConfig> nested;
  std::optional<double> sigma_b_ystar;  // SD of a cluster intercept in the silver-outcome model
  std::string parameter_set = "table1";
  ParameterSet params;
  double pi_assign = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Presets: table1-{ndx,dx}-icc{01,10}-{small,large}, s2-{ndx,dx}-wswc{01,10}-{small,large},
/// s3-{ndx,dx}-icc{01,10}-{small,large}, figure2-{sme,lme}-{sv,lv}.
ScenarioConfig preset(const std::string& name);
std::vector<std::string> preset_names();
/// Resolves `parameter_set` into params.
ParameterSet parameter_set(const std::string& name, bool dx);

/// X1 ~ N(1,1), X2 exchangeable normal (mean .5, var .5, within-cluster cov .05),
/// X3 ~ Bern(.55), X4 ~ U(0,1) shared by the cluster.
Eigen::MatrixXd generate_covariates(const std::vector<int>& sizes, Philox& rng);
Eigen::MatrixXd generate_covariates(const std::vector<int>& sizes, std::uint64_t seed);

/// Both potential worlds for every generated unit.
struct PotentialOutcomes {
  std::array<std::vector<int>, 2> y, y_star, v;
};

struct Replicate {
  TrialDataset data;
  double true_ate = 0.0;  // mean Y(1) - mean Y(0) over generated units
  double selection_rate = 0.0;
  double misclassification_rate = 0.0;  // among selected
  std::optional<PotentialOutcomes> potential;
};

Replicate generate_replicate(const ScenarioConfig& config, std::uint64_t replicate, bool keep_potential = false);

/// Model-1 classification layout (1, Y, A, Y:A, X1..X3, X1..X3:A, X4).
ModelSpec model1_spec();
/// Selection layout matching the data-generating selection terms without Y.
ModelSpec default_selection_spec();

struct SuiteEntry {
  std::string label;
  EstimatorConfig config;
};

std::vector<SuiteEntry> table1_suite();
std::vector<SuiteEntry> figure2_suite();

struct StudyOptions {
  bool normal = true;
  bool t_corrected = true;
  int bootstrap_b = 0;  // 0 disables bootstrap intervals
  double level = 0.95;
  unsigned threads = 0;
};

struct ReplicateRecord {
  std::size_t replicate = 0;
  std::size_t estimator = 0;
  double tau = 0.0;
  std::optional<double> variance;
  bool valid = false;
  std::string failure;
  std::optional<Interval> normal, t_corrected, bootstrap;
  double true_ate = 0.0;
};

struct EstimatorSummary {
  std::string label;
  Method method = Method::SSW;
  std::size_t n_valid = 0;
  double failure_rate = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double empirical_variance = 0.0;
  std::optional<double> mean_model_variance;
  std::optional<double> coverage_normal, coverage_t, coverage_bootstrap;
};

struct SimSummary {
  std::string scenario;
  std::size_t n_reps = 0;
  std::uint64_t seed = 0;
  double true_ate = 0.0;
  double mean_pi_hat = 0.0;
  double mean_selection_rate = 0.0;
  double mean_misclassification_rate = 0.0;
  std::vector<EstimatorSummary> estimators;
  std::vector<ReplicateRecord> records;  // replicate-major, estimator-minor
};

SimSummary run_study(const ScenarioConfig& config, std::size_t n_reps, const std::vector<SuiteEntry>& suite,
                     const StudyOptions& options = {});

/// 2 x 2 grid over misclassification and validation size.
std::vector<SimSummary> figure2_grid(std::size_t n_reps, std::uint64_t seed, unsigned threads = 0);

}  // namespace ssw::sim

#endif  // SSW_SIMULATION_HPP
