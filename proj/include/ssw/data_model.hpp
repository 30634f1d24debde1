#ifndef SSW_DATA_MODEL_HPP
#define SSW_DATA_MODEL_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace ssw {

/// One individual record as seen by a reader or a user constructing data by hand.
struct Observation {
  std::string cluster_id;
  std::optional<std::string> clinician_id;
  int a = 0;
  int y_star = 0;
  int v = 0;
  std::optional<int> y;  // present iff v == 1
  std::vector<double> x;
};

struct CovariateInfo {
  std::string name;
  bool cluster_level = false;
};

using CovariateSchema = std::vector<CovariateInfo>;

/// Immutable, validated cluster-randomized trial data.
///
/// Rows are stored column-wise and grouped contiguously by cluster, in order
/// of first appearance of each cluster id.
class TrialDataset {
 public:
  /// Column-wise construction input. `cluster` and `clinician` index into the
  /// label tables; clinician may be empty (no nesting) or -1 per row.
  struct Columns {
    std::vector<std::string> cluster_labels;
    std::vector<int> cluster;
    std::vector<std::string> clinician_labels;
    std::vector<int> clinician;
    std::vector<int> a;
    std::vector<int> y_star;
    std::vector<int> v;
    std::vector<std::optional<int>> y;
    Eigen::MatrixXd x;  // N x P
  };

  TrialDataset(Columns columns, CovariateSchema schema);
  static TrialDataset from_observations(const std::vector<Observation>& obs,
                                        CovariateSchema schema);

  std::size_t num_clusters() const { return cluster_labels_.size(); }
  std::size_t num_rows() const { return a_.size(); }
  std::size_t num_validated() const { return num_validated_; }
  std::size_t cluster_size(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }
  std::size_t cluster_validated(std::size_t i) const { return validated_per_cluster_[i]; }
  std::size_t cluster_begin(std::size_t i) const { return offsets_[i]; }
  std::size_t cluster_end(std::size_t i) const { return offsets_[i + 1]; }
  const std::string& cluster_label(std::size_t i) const { return cluster_labels_[i]; }
  int cluster_treatment(std::size_t i) const { return a_[offsets_[i]]; }

  int a(std::size_t row) const { return a_[row]; }
  int y_star(std::size_t row) const { return y_star_[row]; }
  int v(std::size_t row) const { return v_[row]; }
  const std::optional<int>& y(std::size_t row) const { return y_[row]; }
  int cluster_of(std::size_t row) const { return cluster_[row]; }
  std::optional<std::string> clinician_of(std::size_t row) const;
  bool has_clinicians() const { return !clinician_labels_.empty(); }

  const Eigen::MatrixXd& covariates() const { return x_; }
  const CovariateSchema& schema() const { return schema_; }
  std::optional<std::size_t> covariate_index(const std::string& name) const;

  /// Empirical treated proportion over individuals.
  double pi_hat() const;
  Observation observation(std::size_t row) const;

  /// Copy whose clusters are `picks` (indices, repeats allowed). Each pick becomes
  /// a distinct cluster labelled "<label>#<k>".
  TrialDataset resample_clusters(const std::vector<std::size_t>& picks) const;
  /// Copy with selected fields replaced, re-validated.
  TrialDataset with_columns(const std::vector<int>* y_star, const std::vector<int>* v,
                            const std::vector<std::optional<int>>* y) const;

  Columns columns() const;

 private:
  void validate();

  std::vector<std::string> cluster_labels_;
  std::vector<int> cluster_;
  std::vector<std::string> clinician_labels_;
  std::vector<int> clinician_;
  std::vector<int> a_, y_star_, v_;
  std::vector<std::optional<int>> y_;
  Eigen::MatrixXd x_;
  CovariateSchema schema_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> validated_per_cluster_;
  std::size_t num_validated_ = 0;
};

enum class TermKind { Intercept, Gold, Treatment, GoldByTreatment, Covariate, CovariateByTreatment };

struct Term {
  TermKind kind;
  std::string covariate;  // only for Covariate / CovariateByTreatment

  bool uses_gold() const { return kind == TermKind::Gold || kind == TermKind::GoldByTreatment; }
  bool uses_treatment() const {
    return kind == TermKind::Treatment || kind == TermKind::GoldByTreatment ||
           kind == TermKind::CovariateByTreatment;
  }
  std::string label() const;
  bool operator==(const Term& other) const = default;
};

enum class ModelRole { Classification, Selection };

/// Ordered regressor layout for a classification or selection logistic model.
class ModelSpec {
 public:
  /// Classification model; must contain intercept, Y and A terms.
  static ModelSpec classification(std::vector<Term> terms);
  /// Classification model (1, Y): constant over treatment and covariates.
  static ModelSpec homogeneous_classification();
  /// Saturated classification model (1, Y, A, Y:A).
  static ModelSpec saturated_classification();
  /// Selection model; never contains Y terms.
  static ModelSpec selection(std::vector<Term> terms);
  /// Drops every Y-involving term and relabels as a selection model.
  ModelSpec to_selection() const;

  /// Parses "1,Y,A,Y:A,X1,X1:A" (commas or '+' separate terms).
  static ModelSpec parse(const std::string& text, ModelRole role);

  const std::vector<Term>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  ModelRole role() const { return role_; }
  bool homogeneous() const { return homogeneous_; }
  bool involves_gold() const;
  std::string to_string() const;

  /// Column-wise multiplier that turns the Y/A-free part of a row into D_{ya}.
  Eigen::VectorXd mask(int y, int a) const;

 private:
  ModelSpec(std::vector<Term> terms, ModelRole role, bool homogeneous);
  void validate() const;

  std::vector<Term> terms_;
  ModelRole role_;
  bool homogeneous_ = false;
};

struct RowProvenance {
  std::size_t observation = 0;
  int y = 0;
  int a = 0;
};

/// One design row plus the Y/A-free factors needed to form counterfactual rows.
struct DesignRow {
  Eigen::VectorXd values;
  Eigen::VectorXd base;
  Eigen::VectorXd gold_flags;       // 1 where the term involves Y
  Eigen::VectorXd treatment_flags;  // 1 where the term involves A
  RowProvenance provenance;
};

enum class Subset { All, ValidatedOnly };

/// Design rows for a subset, grouped by cluster.
struct DesignMatrix {
  Eigen::MatrixXd values;  // factual rows
  Eigen::MatrixXd base;    // Y/A-free factor per entry
  std::vector<RowProvenance> provenance;
  std::vector<std::size_t> cluster_offsets;  // num_clusters + 1 offsets into rows

  DesignRow row(const ModelSpec& spec, std::size_t k) const;
};

/// Y/A-free factor of every term for every row of the dataset (N x p).
Eigen::MatrixXd base_design(const TrialDataset& data, const ModelSpec& spec);

DesignMatrix build_design(const TrialDataset& data, const ModelSpec& spec, Subset subset);

/// D_{ya}: the row with Y set to y and A set to a.
DesignRow counterfactual_row(const DesignRow& row, int y, int a);

}  // namespace ssw

#endif  // SSW_DATA_MODEL_HPP
