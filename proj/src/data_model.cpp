#include "ssw/data_model.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "ssw/error.hpp"

namespace ssw {

namespace {

bool is_binary(int value) { return value == 0 || value == 1; }

std::string row_context(std::size_t row) { return " (row " + std::to_string(row + 1) + ")"; }

}  // namespace

TrialDataset::TrialDataset(Columns c, CovariateSchema schema)
    : cluster_labels_(std::move(c.cluster_labels)),
      clinician_labels_(std::move(c.clinician_labels)),
      schema_(std::move(schema)) {
  const std::size_t n = c.cluster.size();
  if (c.a.size() != n || c.y_star.size() != n || c.v.size() != n || c.y.size() != n ||
      static_cast<std::size_t>(c.x.rows()) != n)
    throw DataError("column lengths disagree");
  if (static_cast<std::size_t>(c.x.cols()) != schema_.size())
    throw DataError("covariate matrix has " + std::to_string(c.x.cols()) +
                    " columns but the schema names " + std::to_string(schema_.size()));
  if (!c.clinician.empty() && c.clinician.size() != n)
    throw DataError("clinician column length disagrees");
  for (std::size_t r = 0; r < n; ++r)
    if (c.cluster[r] < 0 || static_cast<std::size_t>(c.cluster[r]) >= cluster_labels_.size())
      throw DataError("cluster index out of range" + row_context(r));

  // Stable grouping by cluster index.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return c.cluster[l] < c.cluster[r]; });
  const bool identity = std::is_sorted(c.cluster.begin(), c.cluster.end());

  auto permute = [&](auto& src) {
    using T = std::decay_t<decltype(src)>;
    if (identity) return std::move(src);
    T out(src.size());
    for (std::size_t k = 0; k < n; ++k) out[k] = src[order[k]];
    return out;
  };
  cluster_ = permute(c.cluster);
  a_ = permute(c.a);
  y_star_ = permute(c.y_star);
  v_ = permute(c.v);
  y_ = permute(c.y);
  if (!c.clinician.empty()) clinician_ = permute(c.clinician);
  if (identity) {
    x_ = std::move(c.x);
  } else {
    x_.resize(c.x.rows(), c.x.cols());
    for (std::size_t k = 0; k < n; ++k) x_.row(static_cast<Eigen::Index>(k)) = c.x.row(order[k]);
  }
  validate();
}

void TrialDataset::validate() {
  const std::size_t n = a_.size();
  const std::size_t m = cluster_labels_.size();
  if (m < 2) throw DataError("at least two clusters are required");
  offsets_.assign(m + 1, 0);
  for (int ci : cluster_) ++offsets_[static_cast<std::size_t>(ci) + 1];
  for (std::size_t i = 0; i < m; ++i) {
    if (offsets_[i + 1] == 0) throw DataError("cluster '" + cluster_labels_[i] + "' has no rows");
    offsets_[i + 1] += offsets_[i];
  }
  validated_per_cluster_.assign(m, 0);
  num_validated_ = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!is_binary(a_[r])) throw DataError("treatment must be 0/1" + row_context(r));
    if (!is_binary(y_star_[r])) throw DataError("silver outcome must be 0/1" + row_context(r));
    if (!is_binary(v_[r])) throw DataError("selection flag must be 0/1" + row_context(r));
    if (v_[r] == 1 && !y_[r]) throw DataError("gold outcome missing on validated row" + row_context(r));
    if (v_[r] == 0 && y_[r]) throw DataError("gold outcome present on non-validated row" + row_context(r));
    if (y_[r] && !is_binary(*y_[r])) throw DataError("gold outcome must be 0/1" + row_context(r));
    if (!clinician_.empty() && clinician_[r] >= static_cast<int>(clinician_labels_.size()))
      throw DataError("clinician index out of range" + row_context(r));
    if (v_[r] == 1) {
      ++validated_per_cluster_[static_cast<std::size_t>(cluster_[r])];
      ++num_validated_;
    }
  }
  if (!x_.allFinite()) throw DataError("covariates must be finite");
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t b = offsets_[i];
    for (std::size_t r = b + 1; r < offsets_[i + 1]; ++r) {
      if (a_[r] != a_[b])
        throw DataError("cluster '" + cluster_labels_[i] + "' has mixed treatment values");
      for (std::size_t p = 0; p < schema_.size(); ++p)
        if (schema_[p].cluster_level && x_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) !=
                                            x_(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(p)))
          throw DataError("cluster-level covariate '" + schema_[p].name + "' varies within cluster '" +
                          cluster_labels_[i] + "'");
    }
  }
  const double pi = pi_hat();
  if (!(pi > 0.0 && pi < 1.0)) throw DataError("both treatment arms must be present");
}

TrialDataset TrialDataset::from_observations(const std::vector<Observation>& obs,
                                             CovariateSchema schema) {
  Columns c;
  std::unordered_map<std::string, int> cluster_index, clinician_index;
  const std::size_t n = obs.size();
  const std::size_t p = schema.size();
  c.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  bool any_clinician = false;
  for (const auto& o : obs) any_clinician = any_clinician || o.clinician_id.has_value();
  for (std::size_t r = 0; r < n; ++r) {
    const Observation& o = obs[r];
    auto [it, inserted] = cluster_index.try_emplace(o.cluster_id, static_cast<int>(c.cluster_labels.size()));
    if (inserted) c.cluster_labels.push_back(o.cluster_id);
    c.cluster.push_back(it->second);
    if (any_clinician) {
      if (o.clinician_id) {
        auto [ct, cins] = clinician_index.try_emplace(*o.clinician_id, static_cast<int>(c.clinician_labels.size()));
        if (cins) c.clinician_labels.push_back(*o.clinician_id);
        c.clinician.push_back(ct->second);
      } else {
        c.clinician.push_back(-1);
      }
    }
    c.a.push_back(o.a);
    c.y_star.push_back(o.y_star);
    c.v.push_back(o.v);
    c.y.push_back(o.y);
    if (o.x.size() != p)
      throw DataError("covariate vector length " + std::to_string(o.x.size()) + " differs from schema" +
                      row_context(r));
    for (std::size_t k = 0; k < p; ++k)
      c.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = o.x[k];
  }
  return TrialDataset(std::move(c), std::move(schema));
}

std::optional<std::string> TrialDataset::clinician_of(std::size_t row) const {
  if (clinician_.empty() || clinician_[row] < 0) return std::nullopt;
  return clinician_labels_[static_cast<std::size_t>(clinician_[row])];
}

std::optional<std::size_t> TrialDataset::covariate_index(const std::string& name) const {
  for (std::size_t k = 0; k < schema_.size(); ++k)
    if (schema_[k].name == name) return k;
  return std::nullopt;
}

double TrialDataset::pi_hat() const {
  const double treated = static_cast<double>(std::accumulate(a_.begin(), a_.end(), 0L));
  return treated / static_cast<double>(a_.size());
}

Observation TrialDataset::observation(std::size_t row) const {
  Observation o;
  o.cluster_id = cluster_labels_[static_cast<std::size_t>(cluster_[row])];
  o.clinician_id = clinician_of(row);
  o.a = a_[row];
  o.y_star = y_star_[row];
  o.v = v_[row];
  o.y = y_[row];
  const auto r = static_cast<Eigen::Index>(row);
  o.x.resize(schema_.size());
  for (std::size_t k = 0; k < schema_.size(); ++k) o.x[k] = x_(r, static_cast<Eigen::Index>(k));
  return o;
}

TrialDataset::Columns TrialDataset::columns() const {
  Columns c;
  c.cluster_labels = cluster_labels_;
  c.cluster = cluster_;
  c.clinician_labels = clinician_labels_;
  c.clinician = clinician_;
  c.a = a_;
  c.y_star = y_star_;
  c.v = v_;
  c.y = y_;
  c.x = x_;
  return c;
}

TrialDataset TrialDataset::resample_clusters(const std::vector<std::size_t>& picks) const {
  Columns c;
  std::size_t total = 0;
  for (std::size_t pick : picks) {
    if (pick >= num_clusters()) throw ArgumentError("resample index out of range");
    total += cluster_size(pick);
  }
  c.cluster.reserve(total);
  c.a.reserve(total);
  c.y_star.reserve(total);
  c.v.reserve(total);
  c.y.reserve(total);
  c.x.resize(static_cast<Eigen::Index>(total), x_.cols());
  c.clinician_labels = clinician_labels_;
  if (!clinician_.empty()) c.clinician.reserve(total);
  Eigen::Index out = 0;
  for (std::size_t k = 0; k < picks.size(); ++k) {
    const std::size_t i = picks[k];
    c.cluster_labels.push_back(cluster_labels_[i] + "#" + std::to_string(k));
    const std::size_t b = offsets_[i], e = offsets_[i + 1];
    for (std::size_t r = b; r < e; ++r) {
      c.cluster.push_back(static_cast<int>(k));
      c.a.push_back(a_[r]);
      c.y_star.push_back(y_star_[r]);
      c.v.push_back(v_[r]);
      c.y.push_back(y_[r]);
      if (!clinician_.empty()) c.clinician.push_back(clinician_[r]);
    }
    const auto len = static_cast<Eigen::Index>(e - b);
    c.x.middleRows(out, len) = x_.middleRows(static_cast<Eigen::Index>(b), len);
    out += len;
  }
  return TrialDataset(std::move(c), schema_);
}

TrialDataset TrialDataset::with_columns(const std::vector<int>* y_star, const std::vector<int>* v,
                                        const std::vector<std::optional<int>>* y) const {
  Columns c = columns();
  if (y_star) c.y_star = *y_star;
  if (v) c.v = *v;
  if (y) c.y = *y;
  return TrialDataset(std::move(c), schema_);
}

// ---------------------------------------------------------------------------

std::string Term::label() const {
  switch (kind) {
    case TermKind::Intercept: return "1";
    case TermKind::Gold: return "Y";
    case TermKind::Treatment: return "A";
    case TermKind::GoldByTreatment: return "Y:A";
    case TermKind::Covariate: return covariate;
    case TermKind::CovariateByTreatment: return covariate + ":A";
  }
  return "?";
}

ModelSpec::ModelSpec(std::vector<Term> terms, ModelRole role, bool homogeneous)
    : terms_(std::move(terms)), role_(role), homogeneous_(homogeneous) {
  validate();
}

void ModelSpec::validate() const {
  if (terms_.empty()) throw SpecError("model has no terms");
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const Term& t = terms_[i];
    if ((t.kind == TermKind::Covariate || t.kind == TermKind::CovariateByTreatment) && t.covariate.empty())
      throw SpecError("covariate term without a name");
    for (std::size_t j = 0; j < i; ++j)
      if (terms_[j] == t) throw SpecError("duplicate term '" + t.label() + "'");
  }
  auto has = [&](TermKind k) {
    return std::any_of(terms_.begin(), terms_.end(), [&](const Term& t) { return t.kind == k; });
  };
  if (role_ == ModelRole::Classification) {
    if (!has(TermKind::Intercept) || !has(TermKind::Gold))
      throw SpecError("classification model requires intercept and Y terms");
    if (!homogeneous_ && !has(TermKind::Treatment))
      throw SpecError("classification model requires a treatment (A) term");
  } else if (involves_gold()) {
    throw SpecError("selection model cannot contain Y terms");
  }
}

ModelSpec ModelSpec::classification(std::vector<Term> terms) {
  return ModelSpec(std::move(terms), ModelRole::Classification, false);
}

ModelSpec ModelSpec::homogeneous_classification() {
  return ModelSpec({{TermKind::Intercept, {}}, {TermKind::Gold, {}}}, ModelRole::Classification, true);
}

ModelSpec ModelSpec::saturated_classification() {
  return classification({{TermKind::Intercept, {}},
                         {TermKind::Gold, {}},
                         {TermKind::Treatment, {}},
                         {TermKind::GoldByTreatment, {}}});
}

ModelSpec ModelSpec::selection(std::vector<Term> terms) {
  return ModelSpec(std::move(terms), ModelRole::Selection, false);
}

ModelSpec ModelSpec::to_selection() const {
  std::vector<Term> kept;
  for (const Term& t : terms_)
    if (!t.uses_gold()) kept.push_back(t);
  return selection(std::move(kept));
}

bool ModelSpec::involves_gold() const {
  return std::any_of(terms_.begin(), terms_.end(), [](const Term& t) { return t.uses_gold(); });
}

ModelSpec ModelSpec::parse(const std::string& text, ModelRole role) {
  std::vector<Term> terms;
  std::string token;
  auto flush = [&] {
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string{};
      return s.substr(b, s.find_last_not_of(" \t") - b + 1);
    };
    std::string t = trim(token);
    token.clear();
    if (t.empty()) return;
    if (t == "1" || t == "intercept") {
      terms.push_back({TermKind::Intercept, {}});
    } else if (t == "Y") {
      terms.push_back({TermKind::Gold, {}});
    } else if (t == "A") {
      terms.push_back({TermKind::Treatment, {}});
    } else if (t == "Y:A" || t == "A:Y" || t == "YA") {
      terms.push_back({TermKind::GoldByTreatment, {}});
    } else {
      const auto colon = t.find(':');
      if (colon == std::string::npos) {
        terms.push_back({TermKind::Covariate, t});
      } else {
        std::string lhs = trim(t.substr(0, colon)), rhs = trim(t.substr(colon + 1));
        if (lhs == "A") std::swap(lhs, rhs);
        if (rhs != "A" || lhs.empty() || lhs.find(':') != std::string::npos)
          throw SpecError("unsupported term '" + t + "': only interactions with A are allowed");
        terms.push_back({TermKind::CovariateByTreatment, lhs});
      }
    }
  };
  for (char ch : text) {
    if (ch == ',' || ch == '+') flush();
    else token.push_back(ch);
  }
  flush();
  if (role == ModelRole::Selection) return selection(std::move(terms));
  const bool has_a = std::any_of(terms.begin(), terms.end(), [](const Term& t) { return t.uses_treatment(); });
  return ModelSpec(std::move(terms), role, !has_a);
}

std::string ModelSpec::to_string() const {
  std::string out;
  for (const Term& t : terms_) {
    if (!out.empty()) out += ",";
    out += t.label();
  }
  return out;
}

Eigen::VectorXd ModelSpec::mask(int y, int a) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(terms_.size()));
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    double f = 1.0;
    if (terms_[k].uses_gold()) f *= y;
    if (terms_[k].uses_treatment()) f *= a;
    out[static_cast<Eigen::Index>(k)] = f;
  }
  return out;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd base_design(const TrialDataset& data, const ModelSpec& spec) {
  const auto n = static_cast<Eigen::Index>(data.num_rows());
  Eigen::MatrixXd base(n, static_cast<Eigen::Index>(spec.size()));
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const Term& t = spec.terms()[k];
    const auto col = static_cast<Eigen::Index>(k);
    if (t.kind == TermKind::Covariate || t.kind == TermKind::CovariateByTreatment) {
      const auto idx = data.covariate_index(t.covariate);
      if (!idx) throw SpecError("model term references unknown covariate '" + t.covariate + "'");
      base.col(col) = data.covariates().col(static_cast<Eigen::Index>(*idx));
    } else {
      base.col(col).setOnes();
    }
  }
  return base;
}

DesignMatrix build_design(const TrialDataset& data, const ModelSpec& spec, Subset subset) {
  if (subset == Subset::All && spec.involves_gold() && data.num_validated() < data.num_rows())
    throw SpecError("model references Y but the subset contains non-validated rows");
  const Eigen::MatrixXd all = base_design(data, spec);
  const std::size_t n_rows = subset == Subset::All ? data.num_rows() : data.num_validated();
  DesignMatrix d;
  d.base.resize(static_cast<Eigen::Index>(n_rows), all.cols());
  d.values.resize(static_cast<Eigen::Index>(n_rows), all.cols());
  d.provenance.reserve(n_rows);
  d.cluster_offsets.reserve(data.num_clusters() + 1);
  d.cluster_offsets.push_back(0);
  Eigen::Index out = 0;
  for (std::size_t i = 0; i < data.num_clusters(); ++i) {
    for (std::size_t r = data.cluster_begin(i); r < data.cluster_end(i); ++r) {
      if (subset == Subset::ValidatedOnly && data.v(r) != 1) continue;
      const int y = data.y(r).value_or(0);
      const int a = data.a(r);
      d.base.row(out) = all.row(static_cast<Eigen::Index>(r));
      d.values.row(out) = all.row(static_cast<Eigen::Index>(r)).cwiseProduct(spec.mask(y, a).transpose());
      d.provenance.push_back({r, y, a});
      ++out;
    }
    d.cluster_offsets.push_back(static_cast<std::size_t>(out));
  }
  return d;
}

DesignRow DesignMatrix::row(const ModelSpec& spec, std::size_t k) const {
  DesignRow r;
  const auto idx = static_cast<Eigen::Index>(k);
  r.values = values.row(idx).transpose();
  r.base = base.row(idx).transpose();
  r.gold_flags.resize(static_cast<Eigen::Index>(spec.size()));
  r.treatment_flags.resize(static_cast<Eigen::Index>(spec.size()));
  for (std::size_t t = 0; t < spec.size(); ++t) {
    r.gold_flags[static_cast<Eigen::Index>(t)] = spec.terms()[t].uses_gold() ? 1.0 : 0.0;
    r.treatment_flags[static_cast<Eigen::Index>(t)] = spec.terms()[t].uses_treatment() ? 1.0 : 0.0;
  }
  r.provenance = provenance[k];
  return r;
}

DesignRow counterfactual_row(const DesignRow& row, int y, int a) {
  DesignRow out = row;
  for (Eigen::Index k = 0; k < row.base.size(); ++k) {
    double f = row.base[k];
    if (row.gold_flags[k] != 0.0) f *= y;
    if (row.treatment_flags[k] != 0.0) f *= a;
    out.values[k] = f;
  }
  out.provenance.y = y;
  out.provenance.a = a;
  return out;
}

}  // namespace ssw
