#ifndef SSW_CSV_HPP
#define SSW_CSV_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssw/data_model.hpp"

namespace ssw {

/// Column-name mapping for trial CSV files.
struct CsvSchema {
  std::string cluster = "cluster_id";
  std::optional<std::string> clinician;  // defaults to "clinician_id" when that column exists
  std::string treatment = "a";
  std::string silver = "y_star";
  std::string selection = "v";
  std::string gold = "y";
  std::optional<std::vector<std::string>> covariates;  // default: every unmapped column
  std::vector<std::string> cluster_level;
};

/// Rows removed for missing treatment, silver outcome, or covariate values.
struct ExclusionReport {
  std::size_t rows_read = 0;
  std::size_t missing_treatment = 0;
  std::size_t missing_silver = 0;
  std::size_t missing_covariate = 0;
  std::vector<std::size_t> dropped_lines;  // 1-based file line numbers

  std::size_t rows_dropped() const { return dropped_lines.size(); }
};

struct LoadResult {
  TrialDataset dataset;
  ExclusionReport exclusions;
};

LoadResult load_csv(const std::string& path, const CsvSchema& schema = {});
LoadResult read_csv(std::istream& in, const CsvSchema& schema = {});

/// Writes the dataset with the default column names; covariates use schema names.
void write_csv(std::ostream& out, const TrialDataset& data);
void write_csv(const std::string& path, const TrialDataset& data);

}  // namespace ssw

#endif  // SSW_CSV_HPP
