#include "ssw/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ssw/error.hpp"
#include "ssw/logistic.hpp"
#include "ssw/parallel.hpp"

namespace ssw::sim {

double icc_to_variance(double icc) {
  if (!(icc >= 0.0 && icc < 1.0)) throw ArgumentError("ICC must lie in [0, 1)");
  return icc * kLogisticVariance / (1.0 - icc);
}

std::pair<double, double> nested_variances(double wswc, double wsac) {
  if (!(wsac >= 0.0 && wsac <= wswc && wswc < 1.0))
    throw ArgumentError("nested correlations need 0 <= WSAC <= WSWC < 1");
  const double scale = kLogisticVariance / (1.0 - wswc);
  return {wsac * scale, (wswc - wsac) * scale};
}

namespace {

LinearPredictor table1_outcome() {
  LinearPredictor p;
  p.alpha = -1.0;
  p.alpha_a = 0.75;
  p.beta = {0.15, 0.2, 0.15, -0.15};
  return p;
}

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

ParameterSet table1_parameters(bool dx) {
  ParameterSet s;
  s.name = dx ? "table1-dx" : "table1-ndx";
  s.outcome = table1_outcome();
  if (dx) {
    s.silver.alpha = -1.25;
    s.silver.alpha_a = 0.5;
    s.silver.beta = {0.25, -0.25, -0.15, 0.1};
    s.silver.beta_a = {-0.5, 0.1, -0.1, 0.0};
  } else {
    s.silver.alpha = -1.25;
    s.silver.alpha_a = 0.25;
  }
  s.silver.delta = 1.5;
  s.silver.delta_a = 1.0;
  s.selection.alpha = -0.25;
  s.selection.alpha_a = -0.25;
  s.selection.beta = {-0.5, -0.5, 0.25, -0.25};
  s.selection.delta = -0.15;
  s.selection.delta_a = 0.3;
  return s;
}

ParameterSet figure2_parameters(bool large_error, bool large_validation) {
  ParameterSet s;
  s.name = std::string("figure2-") + (large_error ? "lme" : "sme") + "-" + (large_validation ? "lv" : "sv");
  s.outcome = table1_outcome();
  if (large_error) {
    s.silver.alpha = -0.25;
    s.silver.alpha_a = 0.05;
    s.silver.beta = {-0.5, -0.35, 0.15, 0.0};
    s.silver.beta_a = {0.15, 0.1, 0.0, 0.0};
    s.silver.delta = 0.7;
    s.silver.delta_a = 0.25;
  } else {
    s.silver.alpha = -2.0;
    s.silver.alpha_a = -0.75;
    s.silver.beta = {-0.55, -0.35, 0.15, -0.1};
    s.silver.beta_a = {0.2, 0.1, 0.0, 0.0};
    s.silver.delta = 4.0;
    s.silver.delta_a = 1.75;
  }
  if (large_validation) {
    s.selection.alpha = 0.7;
    s.selection.alpha_a = -0.25;
    s.selection.beta = {-0.5, -0.5, -0.5, 0.1};
  } else {
    s.selection.alpha = -0.25;
    s.selection.alpha_a = 0.1;
    s.selection.beta = {-0.75, -0.75, -0.75, 0.15};
  }
  s.selection.delta = 0.15;
  s.selection.delta_a = -0.3;
  return s;
}

ParameterSet parameter_set(const std::string& name, bool dx) {
  if (name == "table1") return table1_parameters(dx);
  if (name == "table1-ndx") return table1_parameters(false);
  if (name == "table1-dx") return table1_parameters(true);
  for (bool le : {false, true})
    for (bool lv : {false, true}) {
      ParameterSet s = figure2_parameters(le, lv);
      if (s.name == name) return s;
    }
  throw ArgumentError("unknown parameter set '" + name + "'");
}

void ScenarioConfig::validate() const {
  if (m < 2) throw ArgumentError("scenario needs at least two clusters");
  if (size_min < 1 || size_max < size_min) throw ArgumentError("invalid cluster size range");
  if (!(icc_y >= 0.0 && icc_y < 1.0) || !(icc_v >= 0.0 && icc_v < 1.0))
    throw ArgumentError("ICC values must lie in [0, 1)");
  if (nested) {
    if (!(nested->wsac >= 0.0 && nested->wsac <= nested->wswc && nested->wswc < 1.0))
      throw ArgumentError("nested correlations need 0 <= WSAC <= WSWC < 1");
    if (nested->clinicians_min < 1 || nested->clinicians_max < nested->clinicians_min)
      throw ArgumentError("invalid clinician count range");
  }
  if (sigma_b_ystar && *sigma_b_ystar < 0.0) throw ArgumentError("sigma_b_ystar must be non-negative");
  if (!(pi_assign > 0.0 && pi_assign < 1.0)) throw ArgumentError("pi_assign must lie in (0, 1)");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const char* family : {"table1", "s2", "s3"})
    for (const char* cov : {"ndx", "dx"})
      for (const char* icc : {"01", "10"})
        for (const char* size : {"small", "large"})
          names.push_back(std::string(family) + "-" + cov + (std::string(family) == "s2" ? "-wswc" : "-icc") +
                          icc + "-" + size);
  for (const char* me : {"sme", "lme"})
    for (const char* v : {"sv", "lv"}) names.push_back(std::string("figure2-") + me + "-" + v);
  return names;
}

ScenarioConfig preset(const std::string& name) {
  const auto all = preset_names();
  if (std::find(all.begin(), all.end(), name) == all.end())
    throw ArgumentError("unknown scenario preset '" + name + "'");
  ScenarioConfig c;
  c.name = name;
  if (name.rfind("figure2-", 0) == 0) {
    c.parameter_set = name;
    c.dx = true;
    c.params = parameter_set(name, true);
    return c;
  }
  const bool dx = name.find("-dx-") != std::string::npos;
  const bool high = name.find("10-") != std::string::npos;
  const bool large = name.size() >= 5 && name.compare(name.size() - 5, 5, "large") == 0;
  c.dx = dx;
  c.parameter_set = "table1";
  c.params = table1_parameters(dx);
  c.icc_y = c.icc_v = high ? 0.1 : 0.01;
  if (large) {
    c.size_min = 500;
    c.size_max = 1000;
  }
  if (name.rfind("s2-", 0) == 0) c.nested = NestedConfig{2, 3, high ? 0.1 : 0.01, high ? 0.05 : 0.005};
  if (name.rfind("s3-", 0) == 0) c.sigma_b_ystar = std::sqrt(icc_to_variance(c.icc_y));
  return c;
}

Eigen::MatrixXd generate_covariates(const std::vector<int>& sizes, Philox& rng) {
  const int total = std::accumulate(sizes.begin(), sizes.end(), 0);
  Eigen::MatrixXd x(total, static_cast<Eigen::Index>(kNumCovariates));
  const double shared_sd = std::sqrt(0.05), own_sd = std::sqrt(0.45);
  Eigen::Index row = 0;
  for (int n : sizes) {
    if (n < 1) throw ArgumentError("cluster sizes must be positive");
    const double cluster_x2 = shared_sd * rng.normal();
    const double x4 = rng.uniform();
    for (int j = 0; j < n; ++j, ++row) {
      x(row, 0) = 1.0 + rng.normal();
      x(row, 1) = 0.5 + cluster_x2 + own_sd * rng.normal();
      x(row, 2) = rng.bernoulli(0.55);
      x(row, 3) = x4;
    }
  }
  return x;
}

Eigen::MatrixXd generate_covariates(const std::vector<int>& sizes, std::uint64_t seed) {
  Philox rng(seed, 0, StreamRole::Design);
  return generate_covariates(sizes, rng);
}

Replicate generate_replicate(const ScenarioConfig& config, std::uint64_t replicate, bool keep_potential) {
  config.validate();
  const ParameterSet& par = config.params;
  Philox design(config.seed, replicate, StreamRole::Design);
  Philox effects(config.seed, replicate, StreamRole::Effects);
  Philox outcomes(config.seed, replicate, StreamRole::Outcomes);
  Philox assignment(config.seed, replicate, StreamRole::Assignment);

  const auto m = static_cast<std::size_t>(config.m);
  std::vector<int> sizes(m);
  for (auto& n : sizes) n = static_cast<int>(design.uniform_int(config.size_min, config.size_max));
  const Eigen::MatrixXd x = generate_covariates(sizes, design);
  const auto total = static_cast<std::size_t>(x.rows());

  TrialDataset::Columns c;
  c.cluster_labels.reserve(m);
  c.cluster.reserve(total);
  for (std::size_t i = 0; i < m; ++i) {
    c.cluster_labels.push_back("c" + std::to_string(i + 1));
    c.cluster.insert(c.cluster.end(), static_cast<std::size_t>(sizes[i]), static_cast<int>(i));
  }

  double var_y = icc_to_variance(config.icc_y), var_v = icc_to_variance(config.icc_v);
  double var_clin = 0.0;
  if (config.nested) {
    const auto [site, clin] = nested_variances(config.nested->wswc, config.nested->wsac);
    var_y = var_v = site;
    var_clin = clin;
  }
  std::vector<double> b_y(m), b_v(m), b_ys(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    b_y[i] = std::sqrt(var_y) * effects.normal();
    b_v[i] = std::sqrt(var_v) * effects.normal();
    if (config.sigma_b_ystar) b_ys[i] = *config.sigma_b_ystar * effects.normal();
  }

  // Clinician per row plus clinician intercepts for outcome and selection.
  std::vector<double> bc_y(total, 0.0), bc_v(total, 0.0);
  if (config.nested) {
    c.clinician.resize(total);
    std::size_t row = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto l = static_cast<int>(design.uniform_int(config.nested->clinicians_min, config.nested->clinicians_max));
      const int first = static_cast<int>(c.clinician_labels.size());
      std::vector<double> cy(static_cast<std::size_t>(l)), cv(static_cast<std::size_t>(l));
      for (int k = 0; k < l; ++k) {
        c.clinician_labels.push_back(c.cluster_labels[i] + "-k" + std::to_string(k + 1));
        cy[static_cast<std::size_t>(k)] = std::sqrt(var_clin) * effects.normal();
        cv[static_cast<std::size_t>(k)] = std::sqrt(var_clin) * effects.normal();
      }
      for (int j = 0; j < sizes[i]; ++j, ++row) {
        const auto k = static_cast<std::size_t>(design.uniform_int(0, l - 1));
        c.clinician[row] = first + static_cast<int>(k);
        bc_y[row] = cy[k];
        bc_v[row] = cv[k];
      }
    }
  }

  PotentialOutcomes po;
  for (int a = 0; a < 2; ++a) {
    po.y[a].resize(total);
    po.y_star[a].resize(total);
    po.v[a].resize(total);
  }
  double sum_y1 = 0.0, sum_y0 = 0.0;
  for (std::size_t r = 0; r < total; ++r) {
    const std::size_t i = static_cast<std::size_t>(c.cluster[r]);
    double xr[kNumCovariates];
    for (std::size_t k = 0; k < kNumCovariates; ++k) xr[k] = x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
    for (int a = 0; a < 2; ++a) po.y[a][r] = outcomes.bernoulli(expit(par.outcome(a, xr, 0) + b_y[i] + bc_y[r]));
    for (int a = 0; a < 2; ++a)
      po.y_star[a][r] = outcomes.bernoulli(expit(par.silver(a, xr, po.y[a][r]) + b_ys[i]));
    for (int a = 0; a < 2; ++a)
      po.v[a][r] = outcomes.bernoulli(expit(par.selection(a, xr, po.y[a][r]) + b_v[i] + bc_v[r]));
    sum_y1 += po.y[1][r];
    sum_y0 += po.y[0][r];
  }

  std::vector<int> arm(m);
  bool both = false;
  while (!both) {
    int treated = 0;
    for (auto& ai : arm) treated += (ai = assignment.bernoulli(config.pi_assign));
    both = treated > 0 && treated < config.m;
  }

  c.a.resize(total);
  c.y_star.resize(total);
  c.v.resize(total);
  c.y.resize(total);
  std::size_t selected = 0, misclassified = 0;
  for (std::size_t r = 0; r < total; ++r) {
    const int a = arm[static_cast<std::size_t>(c.cluster[r])];
    c.a[r] = a;
    c.y_star[r] = po.y_star[a][r];
    c.v[r] = po.v[a][r];
    if (c.v[r] == 1) {
      c.y[r] = po.y[a][r];
      ++selected;
      misclassified += po.y[a][r] != po.y_star[a][r];
    }
  }
  c.x = x;

  CovariateSchema schema{{"X1", false}, {"X2", false}, {"X3", false}, {"X4", true}};
  Replicate out{TrialDataset(std::move(c), std::move(schema)),
                (sum_y1 - sum_y0) / static_cast<double>(total),
                static_cast<double>(selected) / static_cast<double>(total),
                selected ? static_cast<double>(misclassified) / static_cast<double>(selected) : 0.0,
                std::nullopt};
  if (keep_potential) out.potential = std::move(po);
  return out;
}

ModelSpec model1_spec() {
  return ModelSpec::parse("1,Y,A,Y:A,X1,X2,X3,X1:A,X2:A,X3:A,X4", ModelRole::Classification);
}

ModelSpec default_selection_spec() { return ModelSpec::parse("1,A,X1,X2,X3,X4", ModelRole::Selection); }

std::vector<SuiteEntry> table1_suite() {
  return {{"Model 1", {Method::SSW, model1_spec(), std::nullopt}},
          {"Model 2", {Method::SSWSaturated, std::nullopt, std::nullopt}}};
}

std::vector<SuiteEntry> figure2_suite() {
  return {{"SSW", {Method::SSW, model1_spec(), std::nullopt}},
          {"SSW-homogeneous", {Method::SSWHomogeneous, std::nullopt, std::nullopt}},
          {"SSO", {Method::SSO, std::nullopt, std::nullopt}},
          {"IPSW", {Method::IPSW, std::nullopt, default_selection_spec()}}};
}

namespace {

struct ReplicateOutcome {
  double true_ate = 0.0;
  double pi_hat = 0.0;
  double selection_rate = 0.0;
  double misclassification_rate = 0.0;
  std::vector<ReplicateRecord> records;
};

bool covers(const std::optional<Interval>& iv, double truth) {
  return iv && iv->lower <= truth && truth <= iv->upper;
}

}  // namespace

SimSummary run_study(const ScenarioConfig& config, std::size_t n_reps, const std::vector<SuiteEntry>& suite,
                     const StudyOptions& options) {
  if (suite.empty()) throw ArgumentError("estimator suite is empty");
  if (n_reps < 2) throw ArgumentError("a study needs at least two replicates");
  config.validate();

  std::vector<ReplicateOutcome> slots(n_reps);
  // Bootstrap loops run serially inside each replicate so the replicate loop owns the threads.
  parallel_for(
      n_reps,
      [&](std::size_t rep) {
        Replicate sim = generate_replicate(config, rep);
        ReplicateOutcome& out = slots[rep];
        out.true_ate = sim.true_ate;
        out.pi_hat = sim.data.pi_hat();
        out.selection_rate = sim.selection_rate;
        out.misclassification_rate = sim.misclassification_rate;
        for (std::size_t e = 0; e < suite.size(); ++e) {
          ReplicateRecord rec;
          rec.replicate = rep;
          rec.estimator = e;
          rec.true_ate = sim.true_ate;
          try {
            EstimateOptions eo;
            eo.diagnostics = false;
            const EstimateReport report = estimate(sim.data, suite[e].config, eo);
            rec.tau = report.tau_hat;
            rec.variance = report.variance;
            rec.valid = report.valid;
            if (!rec.valid) rec.failure = "estimate outside [-1, 1]";
            if (rec.valid && report.variance) {
              if (options.normal) rec.normal = interval_normal(report, options.level);
              if (options.t_corrected && sim.data.num_clusters() > 7)
                rec.t_corrected = interval_t(report, sim.data.num_clusters(), options.level);
            }
            if (rec.valid && options.bootstrap_b > 0) {
              const std::uint64_t boot_seed = mix64(config.seed ^ mix64(rep + 1));
              rec.bootstrap = cluster_bootstrap(sim.data, make_point_estimator(suite[e].config, report),
                                                options.bootstrap_b, options.level, boot_seed, 1)
                                  .interval;
            }
          } catch (const Error& err) {
            rec.valid = false;
            rec.tau = std::numeric_limits<double>::quiet_NaN();
            rec.failure = err.what();
          }
          out.records.push_back(std::move(rec));
        }
      },
      options.threads);

  SimSummary s;
  s.scenario = config.name;
  s.n_reps = n_reps;
  s.seed = config.seed;
  for (const auto& slot : slots) {
    s.true_ate += slot.true_ate;
    s.mean_pi_hat += slot.pi_hat;
    s.mean_selection_rate += slot.selection_rate;
    s.mean_misclassification_rate += slot.misclassification_rate;
  }
  const double reps = static_cast<double>(n_reps);
  s.true_ate /= reps;
  s.mean_pi_hat /= reps;
  s.mean_selection_rate /= reps;
  s.mean_misclassification_rate /= reps;

  for (std::size_t e = 0; e < suite.size(); ++e) {
    EstimatorSummary es;
    es.label = suite[e].label;
    es.method = suite[e].config.method;
    std::vector<double> taus;
    double var_sum = 0.0;
    std::size_t var_count = 0, cov_n = 0, cov_t = 0, cov_b = 0, n_t = 0, n_n = 0, n_b = 0;
    for (const auto& slot : slots) {
      const ReplicateRecord& rec = slot.records[e];
      if (!rec.valid) continue;
      taus.push_back(rec.tau);
      if (rec.variance) {
        var_sum += *rec.variance;
        ++var_count;
      }
      if (rec.normal) ++n_n, cov_n += covers(rec.normal, s.true_ate);
      if (rec.t_corrected) ++n_t, cov_t += covers(rec.t_corrected, s.true_ate);
      if (rec.bootstrap) ++n_b, cov_b += covers(rec.bootstrap, s.true_ate);
    }
    es.n_valid = taus.size();
    es.failure_rate = static_cast<double>(n_reps - taus.size()) / reps;
    if (!taus.empty()) {
      es.mean_estimate = std::accumulate(taus.begin(), taus.end(), 0.0) / static_cast<double>(taus.size());
      es.bias = es.mean_estimate - s.true_ate;
      double ss = 0.0;
      for (double t : taus) ss += (t - es.mean_estimate) * (t - es.mean_estimate);
      es.empirical_variance = taus.size() > 1 ? ss / static_cast<double>(taus.size() - 1) : 0.0;
    } else {
      es.mean_estimate = es.bias = es.empirical_variance = std::numeric_limits<double>::quiet_NaN();
    }
    if (var_count) es.mean_model_variance = var_sum / static_cast<double>(var_count);
    if (n_n) es.coverage_normal = static_cast<double>(cov_n) / static_cast<double>(n_n);
    if (n_t) es.coverage_t = static_cast<double>(cov_t) / static_cast<double>(n_t);
    if (n_b) es.coverage_bootstrap = static_cast<double>(cov_b) / static_cast<double>(n_b);
    s.estimators.push_back(std::move(es));
  }
  s.records.reserve(n_reps * suite.size());
  for (auto& slot : slots)
    for (auto& rec : slot.records) s.records.push_back(std::move(rec));
  return s;
}

std::vector<SimSummary> figure2_grid(std::size_t n_reps, std::uint64_t seed, unsigned threads) {
  std::vector<SimSummary> out;
  StudyOptions options;
  options.threads = threads;
  for (const char* name : {"figure2-sme-sv", "figure2-sme-lv", "figure2-lme-sv", "figure2-lme-lv"}) {
    ScenarioConfig c = preset(name);
    c.seed = seed;
    out.push_back(run_study(c, n_reps, figure2_suite(), options));
  }
  return out;
}

}  // namespace ssw::sim
