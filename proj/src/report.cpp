#include "ssw/report.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "ssw/error.hpp"

namespace ssw::report {

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string percent(double frac, int decimals = 1) {
  return format_fixed(100.0 * frac, decimals) + "%";
}

json predictor_json(const sim::LinearPredictor& p) {
  return {{"alpha", p.alpha}, {"alpha_a", p.alpha_a}, {"beta", p.beta},
          {"beta_a", p.beta_a}, {"delta", p.delta},   {"delta_a", p.delta_a}};
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

/// Count for arm g (g < 0 pools both arms).
std::size_t group_count(const ClassificationTable& t, int g, int y, int ys) {
  const auto yi = static_cast<std::size_t>(y), si = static_cast<std::size_t>(ys);
  if (g < 0) return t.counts[0][yi][si] + t.counts[1][yi][si];
  return t.counts[static_cast<std::size_t>(g)][yi][si];
}

std::size_t group_total(const ClassificationTable& t, int g) {
  std::size_t n = 0;
  for (int y = 0; y < 2; ++y)
    for (int ys = 0; ys < 2; ++ys) n += group_count(t, g, y, ys);
  return n;
}

std::string csv_optional(const std::optional<double>& v) { return v ? csv_number(*v) : "NA"; }

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_fixed(double v, int decimals) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  // -0.000 reads as a sign error in tables
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

json to_json(const Interval& iv) {
  json j{{"lower", finite_or_null(iv.lower)},
         {"upper", finite_or_null(iv.upper)},
         {"method", interval_name(iv.method)},
         {"level", iv.level}};
  if (iv.df) j["df"] = *iv.df;
  if (iv.replicates) j["replicates"] = *iv.replicates;
  return j;
}

json to_json(const EstimateDiagnostics& d) {
  json j{{"model", d.model},
         {"coefficients", std::vector<double>(d.coefficients.data(), d.coefficients.data() + d.coefficients.size())},
         {"fit_iterations", d.fit_iterations},
         {"score_norm", d.score_norm},
         {"n_fit", d.n_fit},
         {"ill_conditioned", d.ill_conditioned},
         {"notes", d.notes}};
  if (d.ia4_flags) j["ia4_flags"] = *d.ia4_flags;
  if (d.bread_condition) j["bread_condition"] = finite_or_null(*d.bread_condition);
  if (d.min_selection_probability) j["min_selection_probability"] = *d.min_selection_probability;
  if (d.bootstrap_invalid) j["bootstrap_invalid"] = *d.bootstrap_invalid;
  if (d.bootstrap_invalid_rate) j["bootstrap_invalid_rate"] = *d.bootstrap_invalid_rate;
  return j;
}

json to_json(const EstimateReport& r) {
  json j{{"method", method_name(r.method)},
         {"tau_hat", finite_or_null(r.tau_hat)},
         {"mu1_hat", finite_or_null(r.mu1_hat)},
         {"mu0_hat", finite_or_null(r.mu0_hat)},
         {"variance", optional_number(r.variance)},
         {"se", optional_number(r.se())},
         {"interval", r.interval ? to_json(*r.interval) : json(nullptr)},
         {"valid", r.valid},
         {"clusters", r.clusters},
         {"individuals", r.individuals},
         {"diagnostics", to_json(r.diagnostics)}};
  return j;
}

json to_json(const ExclusionReport& e) {
  return {{"rows_read", e.rows_read},
          {"rows_dropped", e.rows_dropped()},
          {"missing_treatment", e.missing_treatment},
          {"missing_silver", e.missing_silver},
          {"missing_covariate", e.missing_covariate},
          {"dropped_lines", e.dropped_lines}};
}

json to_json(const ClassificationTable& t) {
  json groups = json::array();
  for (int g : {1, 0, -1}) {
    const std::size_t total = group_total(t, g);
    json cells = json::array();
    for (int y = 0; y < 2; ++y)
      for (int ys = 0; ys < 2; ++ys) {
        const std::size_t n = group_count(t, g, y, ys);
        cells.push_back({{"y", y},
                         {"y_star", ys},
                         {"count", n},
                         {"percent", total ? json(100.0 * static_cast<double>(n) / static_cast<double>(total))
                                           : json(nullptr)}});
      }
    json pv = json::object();
    for (int y = 0; y < 2; ++y) {
      const std::size_t row = group_count(t, g, y, 0) + group_count(t, g, y, 1);
      pv[y ? "p_ystar1_given_y1" : "p_ystar1_given_y0"] =
          row ? json(static_cast<double>(group_count(t, g, y, 1)) / static_cast<double>(row)) : json(nullptr);
    }
    groups.push_back({{"arm", g < 0 ? json("overall") : json(g)},
                      {"validated", total},
                      {"cells", cells},
                      {"classification_probabilities", pv}});
  }
  return groups;
}

json to_json(const sim::ScenarioConfig& c) {
  json j{{"name", c.name},
         {"m", c.m},
         {"size_min", c.size_min},
         {"size_max", c.size_max},
         {"icc_y", c.icc_y},
         {"icc_v", c.icc_v},
         {"dx", c.dx},
         {"parameter_set", c.parameter_set},
         {"pi_assign", c.pi_assign},
         {"seed", c.seed},
         {"sigma_b_ystar", optional_number(c.sigma_b_ystar)},
         {"parameters",
          {{"name", c.params.name},
           {"outcome", predictor_json(c.params.outcome)},
           {"silver", predictor_json(c.params.silver)},
           {"selection", predictor_json(c.params.selection)}}}};
  if (c.nested)
    j["nested"] = {{"clinicians_min", c.nested->clinicians_min},
                   {"clinicians_max", c.nested->clinicians_max},
                   {"wswc", c.nested->wswc},
                   {"wsac", c.nested->wsac}};
  else
    j["nested"] = nullptr;
  return j;
}

sim::ScenarioConfig scenario_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("scenario file must hold a JSON object");
  try {
    sim::ScenarioConfig c = j.contains("preset") ? sim::preset(j.at("preset").get<std::string>()) : sim::ScenarioConfig{};
    if (!j.contains("preset")) c.params = sim::parameter_set(c.parameter_set, c.dx);
    c.name = j.value("name", j.value("preset", c.name));
    c.m = j.value("m", c.m);
    c.size_min = j.value("size_min", c.size_min);
    c.size_max = j.value("size_max", c.size_max);
    c.icc_y = j.value("icc_y", c.icc_y);
    c.icc_v = j.value("icc_v", c.icc_v);
    c.pi_assign = j.value("pi_assign", c.pi_assign);
    c.seed = j.value("seed", c.seed);
    const bool dx = j.value("dx", c.dx);
    const std::string set = j.value("parameter_set", c.parameter_set);
    if (dx != c.dx || set != c.parameter_set || !j.contains("preset")) {
      c.dx = dx;
      c.parameter_set = set;
      c.params = sim::parameter_set(set, dx);
    }
    if (j.contains("sigma_b_ystar")) {
      if (j["sigma_b_ystar"].is_null()) c.sigma_b_ystar.reset();
      else c.sigma_b_ystar = j["sigma_b_ystar"].get<double>();
    }
    if (j.contains("nested")) {
      const json& n = j["nested"];
      if (n.is_null()) {
        c.nested.reset();
      } else {
        sim::NestedConfig nc = c.nested.value_or(sim::NestedConfig{});
        nc.clinicians_min = n.value("clinicians_min", nc.clinicians_min);
        nc.clinicians_max = n.value("clinicians_max", nc.clinicians_max);
        nc.wswc = n.value("wswc", nc.wswc);
        nc.wsac = n.value("wsac", nc.wsac);
        c.nested = nc;
      }
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("bad scenario file: ") + e.what());
  }
}

json to_json(const sim::EstimatorSummary& s) {
  return {{"label", s.label},
          {"method", method_name(s.method)},
          {"n_valid", s.n_valid},
          {"failure_rate", s.failure_rate},
          {"mean_estimate", finite_or_null(s.mean_estimate)},
          {"bias", finite_or_null(s.bias)},
          {"empirical_variance", finite_or_null(s.empirical_variance)},
          {"mean_model_variance", optional_number(s.mean_model_variance)},
          {"coverage_normal", optional_number(s.coverage_normal)},
          {"coverage_t", optional_number(s.coverage_t)},
          {"coverage_bootstrap", optional_number(s.coverage_bootstrap)}};
}

json to_json(const sim::SimSummary& s) {
  json est = json::array();
  for (const auto& e : s.estimators) est.push_back(to_json(e));
  return {{"scenario", s.scenario},
          {"n_reps", s.n_reps},
          {"seed", s.seed},
          {"true_ate", s.true_ate},
          {"mean_pi_hat", s.mean_pi_hat},
          {"mean_selection_rate", s.mean_selection_rate},
          {"mean_misclassification_rate", s.mean_misclassification_rate},
          {"estimators", est}};
}

std::string format_estimate(const EstimateReport& r) {
  std::string s = format_fixed(r.tau_hat);
  if (r.interval) s += " (" + format_fixed(r.interval->lower) + ", " + format_fixed(r.interval->upper) + ")";
  return s;
}

void print_study_table(std::ostream& out, const sim::SimSummary& s) {
  out << "Scenario " << s.scenario << " (" << s.n_reps << " replicates, seed " << s.seed << ")\n";
  const char* head[] = {"Model", "True ATE", "Empirical Bias", "Empirical Variance", "C-Robust Variance",
                        "Coverage", "Corrected Coverage"};
  std::size_t label_w = 16;
  for (const auto& e : s.estimators) label_w = std::max(label_w, e.label.size() + 2);
  out << std::left << std::setw(static_cast<int>(label_w)) << head[0];
  for (int k = 1; k < 7; ++k) out << std::right << std::setw(20) << head[k];
  out << '\n';
  for (const auto& e : s.estimators) {
    auto cov = [](const std::optional<double>& c) { return c ? percent(*c) : std::string("-"); };
    out << std::left << std::setw(static_cast<int>(label_w)) << e.label << std::right << std::setw(20)
        << format_fixed(s.true_ate) << std::setw(20) << format_fixed(e.bias) << std::setw(20)
        << format_fixed(e.empirical_variance) << std::setw(20)
        << (e.mean_model_variance ? format_fixed(*e.mean_model_variance) : std::string("-")) << std::setw(20)
        << cov(e.coverage_normal) << std::setw(20) << cov(e.coverage_t) << '\n';
    if (e.coverage_bootstrap)
      out << std::left << std::setw(static_cast<int>(label_w)) << "" << "  bootstrap coverage "
          << percent(*e.coverage_bootstrap) << '\n';
    if (e.failure_rate > 0.0)
      out << std::left << std::setw(static_cast<int>(label_w)) << "" << "  failure rate " << percent(e.failure_rate, 2)
          << '\n';
  }
}

void print_classification_tables(std::ostream& out, const ClassificationTable& t) {
  for (int g : {1, 0, -1}) {
    const std::size_t total = group_total(t, g);
    auto cell = [&](int y, int ys) {
      const std::size_t n = group_count(t, g, y, ys);
      std::string s = std::to_string(n);
      if (total) s += " (" + percent(static_cast<double>(n) / static_cast<double>(total)) + ")";
      return s;
    };
    out << (g < 0 ? std::string("Overall") : "Arm A=" + std::to_string(g)) << " (validated " << total << ")\n";
    out << std::left << std::setw(10) << "" << std::setw(18) << "Y*=0" << std::setw(18) << "Y*=1" << '\n';
    for (int y = 0; y < 2; ++y)
      out << std::left << std::setw(10) << ("Y=" + std::to_string(y)) << std::setw(18) << cell(y, 0) << std::setw(18)
          << cell(y, 1) << '\n';
  }
}

void print_compare_table(std::ostream& out, const std::vector<EstimateReport>& reports) {
  out << std::left << std::setw(18) << "Estimator" << std::setw(30) << "ATE (CI)" << "Interval\n";
  for (const auto& r : reports) {
    std::string how = "-";
    if (r.interval) {
      how = interval_name(r.interval->method) + " " + format_fixed(100.0 * r.interval->level, 0) + "%";
      if (r.interval->df) how += " df=" + format_fixed(*r.interval->df, 0);
      if (r.interval->replicates) how += " B=" + std::to_string(*r.interval->replicates);
    }
    out << std::left << std::setw(18) << method_name(r.method) << std::setw(30)
        << (r.valid ? format_estimate(r) : std::string("invalid")) << how << '\n';
  }
}

void write_records_csv(std::ostream& out, const std::vector<sim::SimSummary>& studies) {
  out << "scenario,replicate,estimator,method,tau,variance,valid,true_ate,normal_lower,normal_upper,t_lower,t_upper,"
         "boot_lower,boot_upper,failure\n";
  for (const auto& s : studies)
    for (const auto& r : s.records) {
      const auto& e = s.estimators.at(r.estimator);
      auto lo = [](const std::optional<Interval>& iv) { return iv ? csv_number(iv->lower) : std::string("NA"); };
      auto hi = [](const std::optional<Interval>& iv) { return iv ? csv_number(iv->upper) : std::string("NA"); };
      out << csv_quote(s.scenario) << ',' << r.replicate << ',' << csv_quote(e.label) << ',' << method_name(e.method)
          << ',' << csv_number(r.tau) << ',' << csv_optional(r.variance) << ',' << (r.valid ? 1 : 0) << ','
          << csv_number(r.true_ate) << ',' << lo(r.normal) << ',' << hi(r.normal) << ',' << lo(r.t_corrected) << ','
          << hi(r.t_corrected) << ',' << lo(r.bootstrap) << ',' << hi(r.bootstrap) << ',' << csv_quote(r.failure)
          << '\n';
    }
}

void write_reports_csv(std::ostream& out, const std::vector<EstimateReport>& reports) {
  out << "method,tau_hat,mu1_hat,mu0_hat,variance,se,interval,level,lower,upper,df,valid,clusters,individuals\n";
  for (const auto& r : reports) {
    out << method_name(r.method) << ',' << csv_number(r.tau_hat) << ',' << csv_number(r.mu1_hat) << ','
        << csv_number(r.mu0_hat) << ',' << csv_optional(r.variance) << ',' << csv_optional(r.se()) << ',';
    if (r.interval)
      out << interval_name(r.interval->method) << ',' << csv_number(r.interval->level) << ','
          << csv_number(r.interval->lower) << ',' << csv_number(r.interval->upper) << ','
          << (r.interval->df ? csv_number(*r.interval->df) : "NA");
    else
      out << "NA,NA,NA,NA,NA";
    out << ',' << (r.valid ? 1 : 0) << ',' << r.clusters << ',' << r.individuals << '\n';
  }
}

}  // namespace ssw::report
