#include "ssw/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "ssw/csv.hpp"
#include "ssw/error.hpp"
#include "ssw/estimators.hpp"
#include "ssw/report.hpp"
#include "ssw/simulation.hpp"

namespace ssw::cli {

namespace {

using report::json;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct AnalyzeArgs {
  std::string input;
  std::string spec;
  std::string selection_spec;
  std::string estimators = "ssw,sso,ipsw";
  std::string interval = "auto";
  double level = 0.95;
  int boot_b = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out_json, out_csv;
  std::string cluster_col = "cluster_id", clinician_col, treatment_col = "a", silver_col = "y_star",
              selection_col = "v", gold_col = "y";
  std::string covariates, cluster_level;
};

struct SimulateArgs {
  std::string scenario;
  std::size_t reps = 1000;
  std::optional<std::uint64_t> seed;
  std::string suite = "auto";
  std::string interval = "auto";
  double level = 0.95;
  int boot_b = 0;
  unsigned threads = 0;
  std::string out_json, out_csv;
};

json analyze_config_json(const AnalyzeArgs& a) {
  return {{"input", a.input},
          {"spec", a.spec},
          {"selection_spec", a.selection_spec},
          {"estimators", a.estimators},
          {"interval", a.interval},
          {"level", a.level},
          {"boot_b", a.boot_b},
          {"seed", a.seed},
          {"columns",
           {{"cluster", a.cluster_col},
            {"clinician", a.clinician_col},
            {"treatment", a.treatment_col},
            {"silver", a.silver_col},
            {"selection", a.selection_col},
            {"gold", a.gold_col},
            {"covariates", a.covariates},
            {"cluster_level", a.cluster_level}}}};
}

json manifest(const std::string& command, const std::vector<std::string>& args, json config) {
  return {{"tool", "ssw"},
          {"version", report::kVersion},
          {"schema_version", report::kSchemaVersion},
          {"command", command},
          {"arguments", args},
          {"config", std::move(config)}};
}

void write_json(const json& doc, const std::string& path, std::ostream& err) {
  if (path.empty()) {
    err << doc.at("manifest").dump() << '\n';
    return;
  }
  std::ofstream f(path);
  if (!f) throw ArgumentError("cannot write '" + path + "'");
  f << doc.dump(2) << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ArgumentError("cannot write '" + path + "'");
  return f;
}

/// The default classification layout: saturated in (Y, A) plus every covariate main effect.
ModelSpec default_spec(const TrialDataset& data) {
  std::string text = "1,Y,A,Y:A";
  for (const auto& c : data.schema()) text += "," + c.name;
  return ModelSpec::parse(text, ModelRole::Classification);
}

Interval pick_interval(const std::string& kind, const EstimateReport& r, const TrialDataset& data,
                       const EstimatorConfig& config, const AnalyzeArgs& a, std::vector<std::string>& notes) {
  const bool has_variance = r.variance.has_value();
  std::string k = kind;
  if (k == "auto") k = has_variance ? (data.num_clusters() > 7 ? "t" : "normal") : "bootstrap";
  IntervalKind ik = parse_interval(k);
  if (ik != IntervalKind::BootstrapPercentile && !has_variance) {
    notes.push_back("no analytic variance for " + method_name(r.method) + "; using cluster bootstrap");
    ik = IntervalKind::BootstrapPercentile;
  }
  if (ik == IntervalKind::TCorrected && data.num_clusters() <= 7) {
    notes.push_back("t interval needs more than 7 clusters; using normal interval");
    ik = IntervalKind::Normal;
  }
  switch (ik) {
    case IntervalKind::Normal:
      return interval_normal(r, a.level);
    case IntervalKind::TCorrected:
      return interval_t(r, data.num_clusters(), a.level);
    case IntervalKind::BootstrapPercentile:
      break;
  }
  BootstrapResult b =
      cluster_bootstrap(data, make_point_estimator(config, r), a.boot_b, a.level, a.seed, a.threads);
  if (b.invalid) notes.push_back(std::to_string(b.invalid) + " bootstrap replicates were invalid and excluded");
  return b.interval;
}

int run_analyze(const AnalyzeArgs& a, bool compare_only, const std::vector<std::string>& args,
                std::ostream& out, std::ostream& err) {
  json doc{{"schema_version", report::kSchemaVersion},
           {"manifest", manifest(compare_only ? "compare" : "analyze", args, analyze_config_json(a))}};

  CsvSchema schema;
  schema.cluster = a.cluster_col;
  if (!a.clinician_col.empty()) schema.clinician = a.clinician_col;
  schema.treatment = a.treatment_col;
  schema.silver = a.silver_col;
  schema.selection = a.selection_col;
  schema.gold = a.gold_col;
  if (!a.covariates.empty()) schema.covariates = split_list(a.covariates);
  schema.cluster_level = split_list(a.cluster_level);

  std::optional<LoadResult> loaded;
  std::vector<EstimatorConfig> configs;
  try {
    if (a.level <= 0.0 || a.level >= 1.0) throw ArgumentError("--level must lie in (0, 1)");
    loaded = load_csv(a.input, schema);
    const TrialDataset& data = loaded->dataset;
    const ModelSpec spec = a.spec.empty() ? default_spec(data) : ModelSpec::parse(a.spec, ModelRole::Classification);
    std::optional<ModelSpec> sel;
    if (!a.selection_spec.empty()) sel = ModelSpec::parse(a.selection_spec, ModelRole::Selection);
    base_design(data, spec);  // surfaces unknown covariate names before any fitting
    if (sel) base_design(data, *sel);
    const auto names = split_list(a.estimators);
    if (names.empty()) throw ArgumentError("--estimators is empty");
    for (const auto& n : names) {
      EstimatorConfig c;
      c.method = parse_method(n);
      if (c.method == Method::SSW) c.classification_spec = spec;
      if (c.method == Method::IPSW) {
        c.classification_spec = spec;
        c.selection_spec = sel;
      }
      configs.push_back(std::move(c));
    }
    if (a.interval != "auto") parse_interval(a.interval);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  const TrialDataset& data = loaded->dataset;
  const ClassificationTable table = tabulate_classification(data);
  doc["dataset"] = {{"clusters", data.num_clusters()},
                    {"individuals", data.num_rows()},
                    {"validated", data.num_validated()},
                    {"pi_hat", data.pi_hat()},
                    {"covariates", [&] {
                       json c = json::array();
                       for (const auto& ci : data.schema()) c.push_back({{"name", ci.name}, {"cluster_level", ci.cluster_level}});
                       return c;
                     }()}};
  doc["exclusions"] = report::to_json(loaded->exclusions);
  doc["classification_tables"] = report::to_json(table);

  bool all_valid = true;
  std::vector<EstimateReport> reports;
  json jreports = json::array();
  for (const auto& c : configs) {
    try {
      EstimateReport r = estimate(data, c);
      if (r.valid) r.interval = pick_interval(a.interval, r, data, c, a, r.diagnostics.notes);
      all_valid = all_valid && r.valid;
      jreports.push_back(report::to_json(r));
      reports.push_back(std::move(r));
    } catch (const Error& e) {
      all_valid = false;
      err << "error: " << method_name(c.method) << ": " << e.what() << '\n';
      jreports.push_back({{"method", method_name(c.method)}, {"valid", false}, {"error", e.what()}});
    }
  }
  doc["reports"] = jreports;

  if (!compare_only) {
    out << "Clusters " << data.num_clusters() << ", individuals " << data.num_rows() << ", validated "
        << data.num_validated() << ", dropped " << loaded->exclusions.rows_dropped() << "\n\n";
    report::print_classification_tables(out, table);
    out << '\n';
  }
  report::print_compare_table(out, reports);

  try {
    write_json(doc, a.out_json, err);
    if (!a.out_csv.empty()) {
      auto f = open_out(a.out_csv);
      report::write_reports_csv(f, reports);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return all_valid ? kOk : kInvalidEstimate;
}

int run_simulate(const SimulateArgs& s, const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err) {
  std::vector<sim::SimSummary> studies;
  json scenarios = json::array();
  json config{{"scenario", s.scenario}, {"reps", s.reps},          {"suite", s.suite},  {"interval", s.interval},
              {"level", s.level},       {"boot_b", s.boot_b}};
  try {
    sim::StudyOptions opts;
    opts.level = s.level;
    opts.bootstrap_b = s.boot_b;
    opts.threads = s.threads;
    if (s.interval != "auto") {
      const IntervalKind k = parse_interval(s.interval);
      opts.normal = k == IntervalKind::Normal;
      opts.t_corrected = k == IntervalKind::TCorrected;
      if (k == IntervalKind::BootstrapPercentile && opts.bootstrap_b == 0) opts.bootstrap_b = 1000;
    }
    std::vector<sim::ScenarioConfig> cfgs;
    if (s.scenario == "figure2") {
      for (const char* n : {"figure2-sme-sv", "figure2-sme-lv", "figure2-lme-sv", "figure2-lme-lv"})
        cfgs.push_back(sim::preset(n));
    } else if (std::filesystem::exists(s.scenario)) {
      std::ifstream f(s.scenario);
      json j;
      try {
        f >> j;
      } catch (const json::exception& e) {
        throw ArgumentError("cannot parse scenario file '" + s.scenario + "': " + e.what());
      }
      cfgs.push_back(report::scenario_from_json(j));
    } else {
      cfgs.push_back(sim::preset(s.scenario));
    }
    for (auto& c : cfgs) {
      if (s.seed) c.seed = *s.seed;
      std::string suite = s.suite;
      if (suite == "auto") suite = c.parameter_set.rfind("figure2", 0) == 0 ? "figure2" : "table1";
      std::vector<sim::SuiteEntry> entries;
      if (suite == "table1") entries = sim::table1_suite();
      else if (suite == "figure2") entries = sim::figure2_suite();
      else throw ArgumentError("unknown suite '" + suite + "' (expected table1 or figure2)");
      studies.push_back(sim::run_study(c, s.reps, entries, opts));
      scenarios.push_back({{"config", report::to_json(c)}, {"suite", suite}, {"summary", report::to_json(studies.back())}});
    }
    config["seed"] = s.seed ? json(*s.seed) : json(nullptr);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  for (std::size_t k = 0; k < studies.size(); ++k) {
    if (k) out << '\n';
    report::print_study_table(out, studies[k]);
  }
  json doc{{"schema_version", report::kSchemaVersion},
           {"manifest", manifest("simulate", args, config)},
           {"scenarios", scenarios}};
  try {
    write_json(doc, s.out_json, err);
    if (!s.out_csv.empty()) {
      auto f = open_out(s.out_csv);
      report::write_records_csv(f, studies);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kOk;
}

void add_data_options(CLI::App* cmd, AnalyzeArgs& a) {
  cmd->add_option("--input,-i", a.input, "trial CSV file")->required();
  cmd->add_option("--spec", a.spec, "classification terms, e.g. 1,Y,A,Y:A,X1,X1:A");
  cmd->add_option("--selection-spec", a.selection_spec, "selection terms for IPSW, e.g. 1,A,X1");
  cmd->add_option("--estimators", a.estimators, "comma list of ssw, ssw-saturated, ssw-homogeneous, sso, ipsw")
      ->capture_default_str();
  cmd->add_option("--interval", a.interval, "auto, normal, t, bootstrap")->capture_default_str();
  cmd->add_option("--level", a.level, "confidence level")->capture_default_str();
  cmd->add_option("--boot-b", a.boot_b, "cluster bootstrap replicates")->capture_default_str();
  cmd->add_option("--seed", a.seed, "bootstrap seed")->capture_default_str();
  cmd->add_option("--threads", a.threads, "worker threads (0 = hardware)");
  cmd->add_option("--out-json", a.out_json, "JSON report path");
  cmd->add_option("--out-csv", a.out_csv, "per-estimator CSV path");
  cmd->add_option("--cluster-col", a.cluster_col)->capture_default_str();
  cmd->add_option("--clinician-col", a.clinician_col);
  cmd->add_option("--treatment-col", a.treatment_col)->capture_default_str();
  cmd->add_option("--silver-col", a.silver_col)->capture_default_str();
  cmd->add_option("--selection-col", a.selection_col)->capture_default_str();
  cmd->add_option("--gold-col", a.gold_col)->capture_default_str();
  cmd->add_option("--covariates", a.covariates, "comma list (default: all other columns)");
  cmd->add_option("--cluster-level", a.cluster_level, "comma list of cluster-level covariates");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Silver-standard weighting estimators for cluster-randomized trials", "ssw"};
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "key = value configuration file; command-line flags take precedence");
  app.set_version_flag("--version", std::string(report::kVersion));

  AnalyzeArgs analyze_args, compare_args;
  SimulateArgs sim_args;
  std::uint64_t sim_seed = 0;
  auto* analyze = app.add_subcommand("analyze", "estimate the ATE from a trial CSV");
  add_data_options(analyze, analyze_args);
  auto* compare = app.add_subcommand("compare", "side-by-side estimator table for a trial CSV");
  add_data_options(compare, compare_args);
  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo study");
  simulate->add_option("--scenario,-s", sim_args.scenario, "preset name, 'figure2', or JSON scenario file")->required();
  simulate->add_option("--reps", sim_args.reps, "replicates")->capture_default_str();
  auto* seed_opt = simulate->add_option("--seed", sim_seed, "base seed (default: the scenario's)");
  simulate->add_option("--suite", sim_args.suite, "auto, table1, figure2")->capture_default_str();
  simulate->add_option("--interval", sim_args.interval, "auto, normal, t, bootstrap")->capture_default_str();
  simulate->add_option("--level", sim_args.level)->capture_default_str();
  simulate->add_option("--boot-b", sim_args.boot_b, "bootstrap replicates per estimate (0 = off)")
      ->capture_default_str();
  simulate->add_option("--threads", sim_args.threads);
  simulate->add_option("--out-json", sim_args.out_json);
  simulate->add_option("--out-csv", sim_args.out_csv, "replicate-level tidy CSV");

  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kOk : kInputError;
  }

  if (analyze->parsed()) return run_analyze(analyze_args, false, args, out, err);
  if (compare->parsed()) return run_analyze(compare_args, true, args, out, err);
  if (seed_opt->count()) sim_args.seed = sim_seed;
  return run_simulate(sim_args, args, out, err);
}

}  // namespace ssw::cli
