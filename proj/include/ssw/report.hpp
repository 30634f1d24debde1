#ifndef SSW_REPORT_HPP
#define SSW_REPORT_HPP

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

#include "ssw/classification.hpp"
#include "ssw/csv.hpp"
#include "ssw/estimators.hpp"
#include "ssw/simulation.hpp"

namespace ssw::report {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::ordered_json;

json to_json(const Interval& iv);
json to_json(const EstimateDiagnostics& d);
json to_json(const EstimateReport& r);
json to_json(const ExclusionReport& e);
/// Counts with within-table percentages for A=1, A=0 and both arms pooled.
json to_json(const ClassificationTable& t);
json to_json(const sim::ScenarioConfig& c);
json to_json(const sim::EstimatorSummary& s);
/// Summary without replicate records.
json to_json(const sim::SimSummary& s);

sim::ScenarioConfig scenario_from_json(const json& j);

/// "0.111 (-0.013, 0.235)"
std::string format_estimate(const EstimateReport& r);
std::string format_fixed(double v, int decimals = 3);

/// Table-1 layout: Model | True ATE | Empirical Bias | Empirical Variance | C-Robust Variance | Coverage |
/// Corrected Coverage.
void print_study_table(std::ostream& out, const sim::SimSummary& s);
void print_classification_tables(std::ostream& out, const ClassificationTable& t);
void print_compare_table(std::ostream& out, const std::vector<EstimateReport>& reports);

/// replicate,estimator,label,tau,variance,valid,... one line per record.
void write_records_csv(std::ostream& out, const std::vector<sim::SimSummary>& studies);
void write_reports_csv(std::ostream& out, const std::vector<EstimateReport>& reports);

}  // namespace ssw::report

#endif  // SSW_REPORT_HPP
