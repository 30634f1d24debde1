#include "ssw/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ssw/distributions.hpp"
#include "ssw/error.hpp"
#include "ssw/logistic.hpp"
#include "ssw/mestimation.hpp"
#include "ssw/parallel.hpp"
#include "ssw/rng.hpp"

namespace ssw {

std::string method_name(Method m) {
  switch (m) {
    case Method::SSW: return "SSW";
    case Method::SSWSaturated: return "SSW-saturated";
    case Method::SSWHomogeneous: return "SSW-homogeneous";
    case Method::SSO: return "SSO";
    case Method::IPSW: return "IPSW";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "ssw") return Method::SSW;
  if (s == "ssw-saturated") return Method::SSWSaturated;
  if (s == "ssw-homogeneous") return Method::SSWHomogeneous;
  if (s == "sso") return Method::SSO;
  if (s == "ipsw") return Method::IPSW;
  throw ArgumentError("unknown estimator '" + name + "'");
}

std::string interval_name(IntervalKind k) {
  switch (k) {
    case IntervalKind::Normal: return "normal";
    case IntervalKind::TCorrected: return "t_corrected";
    case IntervalKind::BootstrapPercentile: return "bootstrap_percentile";
  }
  return "?";
}

IntervalKind parse_interval(const std::string& name) {
  if (name == "normal") return IntervalKind::Normal;
  if (name == "t" || name == "t_corrected") return IntervalKind::TCorrected;
  if (name == "bootstrap" || name == "bootstrap_percentile") return IntervalKind::BootstrapPercentile;
  throw ArgumentError("unknown interval kind '" + name + "'");
}

std::optional<double> EstimateReport::se() const {
  if (!variance) return std::nullopt;
  return std::sqrt(std::max(0.0, *variance));
}

bool is_valid_estimate(double tau) { return std::isfinite(tau) && tau >= -1.0 && tau <= 1.0; }

namespace {

EstimateReport finish(EstimateReport r, const TrialDataset& data) {
  r.tau_hat = r.mu1_hat - r.mu0_hat;
  r.valid = is_valid_estimate(r.tau_hat);
  r.clusters = data.num_clusters();
  r.individuals = data.num_rows();
  return r;
}

ModelSpec variant_spec(const ModelSpec& spec, SswVariant variant) {
  switch (variant) {
    case SswVariant::Saturated: return ModelSpec::saturated_classification();
    case SswVariant::Homogeneous: return ModelSpec::homogeneous_classification();
    case SswVariant::Covariate: break;
  }
  return spec;
}

bool is_saturated(const ModelSpec& spec) {
  const ModelSpec sat = ModelSpec::saturated_classification();
  if (spec.size() != sat.size()) return false;
  for (const Term& t : sat.terms())
    if (std::find(spec.terms().begin(), spec.terms().end(), t) == spec.terms().end()) return false;
  return true;
}

/// Boundary solution of the saturated model: a cell ratio of 0 or 1 has no finite coefficient, so the
/// probabilities come straight from the cell ratios and no sandwich is available.
EstimateReport ssw_cell_ratios(const TrialDataset& data, const ModelSpec& spec, EstimateReport r) {
  const ClassificationTable t = nonparametric_pv(data);
  const double pi = data.pi_hat();
  const double d1 = t.p(1, 1) - t.p(0, 1), d0 = t.p(1, 0) - t.p(0, 0);
  if (std::abs(d1) < 1e-6 || std::abs(d0) < 1e-6)
    throw IdentificationError("classification cell ratios give p(1,a) - p(0,a) near 0");
  double s1 = 0.0, s0 = 0.0;
  for (std::size_t k = 0; k < data.num_rows(); ++k) {
    s1 += (data.a(k) * data.y_star(k) - pi * t.p(0, 1)) / (pi * d1);
    s0 += ((1 - data.a(k)) * data.y_star(k) - (1 - pi) * t.p(0, 0)) / ((1 - pi) * d0);
  }
  const double n = static_cast<double>(data.num_rows());
  r.mu1_hat = s1 / n;
  r.mu0_hat = s0 / n;
  r.diagnostics.model = spec.to_string();
  r.diagnostics.n_fit = t.total();
  r.diagnostics.notes.push_back("saturated fit on the boundary; cell ratios used and analytic variance unavailable");
  return finish(std::move(r), data);
}

}  // namespace

EstimateReport ssw(const TrialDataset& data, const ModelSpec& spec, SswVariant variant,
                   const EstimateOptions& options) {
  const ModelSpec used = variant_spec(spec, variant);
  if (used.role() != ModelRole::Classification) throw SpecError("SSW needs a classification model");
  EstimateReport r;
  r.method = variant == SswVariant::Covariate    ? Method::SSW
             : variant == SswVariant::Saturated ? Method::SSWSaturated
                                                : Method::SSWHomogeneous;

  std::optional<ThetaEstimate> fitted;
  try {
    fitted.emplace(fit_gee_logistic(data, used, Subset::ValidatedOnly, options.fit));
  } catch (const FitError& e) {
    if (e.kind() != FitError::Kind::Separation || !is_saturated(used)) throw;
    return ssw_cell_ratios(data, used, r);
  }
  const ThetaEstimate& fit = *fitted;
  const StackedEquations eq(data, used);
  const double pi = data.pi_hat();
  const auto [treated, control] = eq.unit_terms(fit.theta, pi);
  r.mu1_hat = treated.mean();
  r.mu0_hat = control.mean();

  r.diagnostics.model = used.to_string();
  r.diagnostics.coefficients = fit.theta;
  r.diagnostics.fit_iterations = fit.iterations;
  r.diagnostics.score_norm = fit.score_norm;
  r.diagnostics.n_fit = fit.n_used;
  if (variant == SswVariant::Homogeneous)
    r.diagnostics.notes.push_back("classification model held constant over treatment and covariates");

  if (options.variance) {
    LambdaEstimate lambda{fit, pi, r.mu1_hat, r.mu0_hat};
    const Eigen::VectorXd lam = lambda.vector();
    const Eigen::MatrixXd m_values = eq.per_cluster(lam);
    const auto sandwich =
        sandwich_variance(eq.jacobian(lam), m_values, static_cast<Eigen::Index>(data.num_clusters()));
    r.variance = contrast(lam, sandwich.v_lambda, ate_contrast(lambda.dim())).second;
    r.diagnostics.bread_condition = sandwich.condition;
    r.diagnostics.ill_conditioned = sandwich.ill_conditioned;
    if (sandwich.ill_conditioned) r.diagnostics.notes.push_back("sandwich bread condition number above 1e10");
  }
  if (options.diagnostics) r.diagnostics.ia4_flags = check_ia4(fit, data, 0.05).size();
  return finish(std::move(r), data);
}

EstimateReport sso(const TrialDataset& data) {
  EstimateReport r;
  r.method = Method::SSO;
  const double n = static_cast<double>(data.num_rows());
  const double pi = data.pi_hat();
  double treated = 0.0, control = 0.0;
  for (std::size_t k = 0; k < data.num_rows(); ++k) {
    treated += data.a(k) * data.y_star(k);
    control += (1 - data.a(k)) * data.y_star(k);
  }
  r.mu1_hat = treated / pi / n;
  r.mu0_hat = control / (1.0 - pi) / n;
  return finish(std::move(r), data);
}

EstimateReport ipsw(const TrialDataset& data, const ModelSpec& selection_spec, const EstimateOptions& options) {
  if (selection_spec.role() != ModelRole::Selection) throw SpecError("IPSW needs a selection model");
  EstimateReport r;
  r.method = Method::IPSW;
  r.diagnostics.model = selection_spec.to_string();
  const std::size_t n_rows = data.num_rows();
  if (data.num_validated() == 0) throw DataError("IPSW needs at least one validated row");

  Eigen::VectorXd prob;
  if (data.num_validated() == n_rows) {
    prob = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n_rows));
    r.diagnostics.notes.push_back("every row validated; selection probabilities set to 1");
  } else {
    ThetaEstimate fit = fit_gee_logistic(data, selection_spec, Subset::All, options.selection_fit);
    const DesignMatrix design = build_design(data, selection_spec, Subset::All);
    prob = expit((design.values * fit.theta).array()).matrix();
    r.diagnostics.coefficients = fit.theta;
    r.diagnostics.fit_iterations = fit.iterations;
    r.diagnostics.score_norm = fit.score_norm;
    r.diagnostics.n_fit = fit.n_used;
  }

  const double n = static_cast<double>(n_rows);
  const double pi = data.pi_hat();
  double treated = 0.0, control = 0.0, min_prob = 1.0;
  std::vector<std::size_t> extreme;
  for (std::size_t k = 0; k < n_rows; ++k) {
    if (data.v(k) != 1) continue;
    const double pk = prob[static_cast<Eigen::Index>(k)];
    min_prob = std::min(min_prob, pk);
    if (pk < options.selection_floor) {
      extreme.push_back(k);
      continue;
    }
    const int y = *data.y(k);
    treated += data.a(k) * y / (pk * pi);
    control += (1 - data.a(k)) * y / (pk * (1.0 - pi));
  }
  if (!extreme.empty()) {
    std::ostringstream msg;
    msg << "selection probability below " << options.selection_floor << " for " << extreme.size()
        << " validated unit(s); rows:";
    for (std::size_t k = 0; k < std::min<std::size_t>(extreme.size(), 10); ++k) msg << ' ' << extreme[k] + 1;
    throw IdentificationError(msg.str());
  }
  r.mu1_hat = treated / n;
  r.mu0_hat = control / n;
  r.diagnostics.min_selection_probability = min_prob;
  return finish(std::move(r), data);
}

Interval interval_normal(const EstimateReport& report, double level) {
  if (!report.variance) throw ArgumentError(method_name(report.method) + " report has no variance");
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("level must lie in (0, 1)");
  const double half = normal_quantile(0.5 + level / 2.0) * *report.se();
  return {report.tau_hat - half, report.tau_hat + half, IntervalKind::Normal, level, std::nullopt, std::nullopt};
}

Interval interval_t(const EstimateReport& report, std::size_t clusters, double level) {
  if (!report.variance) throw ArgumentError(method_name(report.method) + " report has no variance");
  if (clusters <= 7) throw ArgumentError("t interval needs more than 7 clusters (m - 7 degrees of freedom)");
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("level must lie in (0, 1)");
  const double df = static_cast<double>(clusters - 7);
  const double half = student_t_quantile(0.5 + level / 2.0, df) * *report.se();
  return {report.tau_hat - half, report.tau_hat + half, IntervalKind::TCorrected, level, df, std::nullopt};
}

EstimateReport estimate(const TrialDataset& data, const EstimatorConfig& config, const EstimateOptions& options) {
  switch (config.method) {
    case Method::SSW:
      if (!config.classification_spec) throw ArgumentError("SSW needs a classification model");
      return ssw(data, *config.classification_spec, SswVariant::Covariate, options);
    case Method::SSWSaturated:
      return ssw(data, ModelSpec::saturated_classification(), SswVariant::Saturated, options);
    case Method::SSWHomogeneous:
      return ssw(data, ModelSpec::homogeneous_classification(), SswVariant::Homogeneous, options);
    case Method::SSO:
      return sso(data);
    case Method::IPSW: {
      if (config.selection_spec) return ipsw(data, *config.selection_spec, options);
      if (config.classification_spec) return ipsw(data, config.classification_spec->to_selection(), options);
      throw ArgumentError("IPSW needs a selection model");
    }
  }
  throw ArgumentError("unknown method");
}

PointEstimator make_point_estimator(const EstimatorConfig& config, const EstimateReport& reference) {
  EstimateOptions options;
  options.variance = false;
  options.diagnostics = false;
  if (reference.diagnostics.coefficients.size() > 0) {
    if (config.method == Method::IPSW) options.selection_fit.start = reference.diagnostics.coefficients;
    else options.fit.start = reference.diagnostics.coefficients;
  }
  return [config, options](const TrialDataset& d) { return estimate(d, config, options).tau_hat; };
}

BootstrapResult cluster_bootstrap(const TrialDataset& data, const PointEstimator& estimator, int replicates,
                                  double level, std::uint64_t seed, unsigned threads) {
  if (replicates < 100) throw ArgumentError("cluster bootstrap needs at least 100 replicates");
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("level must lie in (0, 1)");
  const std::size_t m = data.num_clusters();
  const auto count = static_cast<std::size_t>(replicates);
  std::vector<double> draws(count, std::numeric_limits<double>::quiet_NaN());
  parallel_for(
      count,
      [&](std::size_t b) {
        Philox rng(seed, b, StreamRole::Bootstrap);
        std::vector<std::size_t> picks(m);
        for (auto& pick : picks) pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(m) - 1));
        try {
          draws[b] = estimator(data.resample_clusters(picks));
        } catch (const Error&) {
          draws[b] = std::numeric_limits<double>::quiet_NaN();
        }
      },
      threads);

  BootstrapResult out;
  for (double t : draws) {
    if (is_valid_estimate(t)) out.replicates.push_back(t);
    else ++out.invalid;
  }
  out.invalid_rate = static_cast<double>(out.invalid) / static_cast<double>(count);
  if (2 * out.invalid > count)
    throw Error("cluster bootstrap: " + std::to_string(out.invalid) + " of " + std::to_string(count) +
                " replicates invalid");
  const double alpha = 1.0 - level;
  out.interval.lower = empirical_quantile(out.replicates, alpha / 2.0);
  out.interval.upper = empirical_quantile(out.replicates, 1.0 - alpha / 2.0);
  out.interval.method = IntervalKind::BootstrapPercentile;
  out.interval.level = level;
  out.interval.replicates = replicates;
  return out;
}

}  // namespace ssw
