#include "ssw/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "ssw/error.hpp"

namespace ssw {

namespace {

std::vector<std::string> split_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  if (quoted) throw DataError("unterminated quote on line " + std::to_string(line_no));
  out.push_back(std::move(field));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

int parse_binary(const std::string& cell, const std::string& column, std::size_t line_no) {
  if (cell == "0") return 0;
  if (cell == "1") return 1;
  throw DataError("non-binary value '" + cell + "' in column '" + column + "' on line " +
                  std::to_string(line_no));
}

std::optional<double> parse_real(const std::string& cell, const std::string& column, std::size_t line_no) {
  if (is_missing(cell)) return std::nullopt;
  std::istringstream in(cell);
  in.imbue(std::locale::classic());
  double value = 0.0;
  in >> value;
  if (in.fail() || !in.eof())
    throw DataError("non-numeric value '" + cell + "' in column '" + column + "' on line " +
                    std::to_string(line_no));
  return value;
}

}  // namespace

LoadResult read_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_line(line, line_no);
      break;
    }
  }
  if (header.empty()) throw DataError("CSV input has no header row");
  for (auto& h : header) h = trim(h);

  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t k = 0; k < header.size(); ++k)
    if (!column.emplace(header[k], k).second) throw DataError("duplicate column '" + header[k] + "'");
  auto require = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) throw DataError("missing required column '" + name + "'");
    return it->second;
  };
  const std::size_t c_cluster = require(schema.cluster);
  const std::size_t c_a = require(schema.treatment);
  const std::size_t c_ys = require(schema.silver);
  const std::size_t c_v = require(schema.selection);
  const std::size_t c_y = require(schema.gold);
  std::optional<std::size_t> c_clin;
  if (schema.clinician) {
    c_clin = require(*schema.clinician);
  } else if (auto it = column.find("clinician_id"); it != column.end()) {
    c_clin = it->second;
  }

  std::vector<std::string> cov_names;
  if (schema.covariates) {
    cov_names = *schema.covariates;
  } else {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (k != c_cluster && k != c_a && k != c_ys && k != c_v && k != c_y && (!c_clin || k != *c_clin))
        cov_names.push_back(header[k]);
  }
  std::vector<std::size_t> c_cov;
  CovariateSchema cov_schema;
  for (const auto& name : cov_names) {
    c_cov.push_back(require(name));
    const bool cl = std::find(schema.cluster_level.begin(), schema.cluster_level.end(), name) !=
                    schema.cluster_level.end();
    cov_schema.push_back({name, cl});
  }
  for (const auto& name : schema.cluster_level)
    if (std::find(cov_names.begin(), cov_names.end(), name) == cov_names.end())
      throw DataError("cluster-level covariate '" + name + "' is not a covariate column");

  std::vector<Observation> obs;
  ExclusionReport excl;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++excl.rows_read;
    std::vector<std::string> cells = split_line(line, line_no);
    if (cells.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(header.size()));
    for (auto& cell : cells) cell = trim(cell);

    if (is_missing(cells[c_cluster])) throw DataError("missing cluster id on line " + std::to_string(line_no));
    if (is_missing(cells[c_a])) {
      ++excl.missing_treatment;
      excl.dropped_lines.push_back(line_no);
      continue;
    }
    if (is_missing(cells[c_ys])) {
      ++excl.missing_silver;
      excl.dropped_lines.push_back(line_no);
      continue;
    }
    Observation o;
    bool cov_missing = false;
    o.x.reserve(c_cov.size());
    for (std::size_t k = 0; k < c_cov.size(); ++k) {
      auto value = parse_real(cells[c_cov[k]], cov_names[k], line_no);
      if (!value) {
        cov_missing = true;
        break;
      }
      o.x.push_back(*value);
    }
    if (cov_missing) {
      ++excl.missing_covariate;
      excl.dropped_lines.push_back(line_no);
      continue;
    }
    o.cluster_id = cells[c_cluster];
    if (c_clin && !is_missing(cells[*c_clin])) o.clinician_id = cells[*c_clin];
    o.a = parse_binary(cells[c_a], schema.treatment, line_no);
    o.y_star = parse_binary(cells[c_ys], schema.silver, line_no);
    if (is_missing(cells[c_v])) throw DataError("missing selection flag on line " + std::to_string(line_no));
    o.v = parse_binary(cells[c_v], schema.selection, line_no);
    if (!is_missing(cells[c_y])) o.y = parse_binary(cells[c_y], schema.gold, line_no);
    if (o.v == 1 && !o.y)
      throw DataError("gold outcome missing on validated row (line " + std::to_string(line_no) + ")");
    if (o.v == 0 && o.y)
      throw DataError("gold outcome present on non-validated row (line " + std::to_string(line_no) + ")");
    obs.push_back(std::move(o));
  }
  return {TrialDataset::from_observations(obs, std::move(cov_schema)), std::move(excl)};
}

LoadResult load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const TrialDataset& data) {
  out << "cluster_id";
  if (data.has_clinicians()) out << ",clinician_id";
  out << ",a,y_star,v,y";
  for (const auto& c : data.schema()) out << ',' << c.name;
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t r = 0; r < data.num_rows(); ++r) {
    out << data.cluster_label(static_cast<std::size_t>(data.cluster_of(r)));
    if (data.has_clinicians()) out << ',' << data.clinician_of(r).value_or("");
    out << ',' << data.a(r) << ',' << data.y_star(r) << ',' << data.v(r) << ',';
    if (data.y(r)) out << *data.y(r);
    else out << "NA";
    const auto row = static_cast<Eigen::Index>(r);
    for (Eigen::Index k = 0; k < data.covariates().cols(); ++k) out << ',' << data.covariates()(row, k);
    out << '\n';
  }
}

void write_csv(const std::string& path, const TrialDataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, data);
}

}  // namespace ssw
