#include <doctest.h>

#include <sstream>

#include "ssw/csv.hpp"
#include "ssw/data_model.hpp"
#include "ssw/error.hpp"
#include "ssw/rng.hpp"
#include "ssw/simulation.hpp"
#include "support.hpp"

using namespace ssw;
using testing::obs;

namespace {

TrialDataset two_cluster_x(double x1_treated = 2.0, double x4 = 0.3) {
  std::vector<Observation> rows{obs("c1", 1, 1, 1, 0, {x1_treated, x4}), obs("c1", 1, 0, 0, std::nullopt, {1.0, x4}),
                                obs("c2", 0, 1, 1, 1, {-1.0, 0.7}), obs("c2", 0, 0, 1, 0, {0.5, 0.7})};
  return TrialDataset::from_observations(rows, {{"X1", false}, {"X4", true}});
}

std::string read_error(const std::string& text, const CsvSchema& schema = {}) {
  std::istringstream in(text);
  try {
    read_csv(in, schema);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("four-row CSV with two clusters") {
  std::istringstream in(
      "cluster_id,a,y_star,v,y,X1\n"
      "s1,1,1,1,1,0.5\n"
      "s1,1,0,0,,1.5\n"
      "s2,0,0,1,0,-0.5\n"
      "s2,0,1,0,NA,2\n");
  const LoadResult r = read_csv(in);
  CHECK(r.dataset.num_clusters() == 2);
  CHECK(r.dataset.num_rows() == 4);
  CHECK(r.dataset.num_validated() == 2);
  CHECK(r.exclusions.rows_dropped() == 0);
  REQUIRE(r.dataset.schema().size() == 1);
  CHECK(r.dataset.schema()[0].name == "X1");
  CHECK(r.dataset.pi_hat() == doctest::Approx(0.5));
  CHECK_FALSE(r.dataset.y(1).has_value());
}

TEST_CASE("CSV validation errors") {
  const std::string head = "cluster_id,a,y_star,v,y\n";
  CHECK(read_error(head + "s1,1,1,1,\ns2,0,0,0,\n").find("gold outcome missing on validated row") != std::string::npos);
  CHECK(read_error(head + "s1,1,1,0,1\ns2,0,0,0,\n").find("gold outcome present on non-validated row") !=
        std::string::npos);
  CHECK(read_error(head + "s1,2,1,0,\ns2,0,0,0,\n").find("non-binary value '2'") != std::string::npos);
  CHECK(read_error(head + "s1,1,1,0,\ns1,0,0,0,\ns2,0,0,0,\n").find("mixed treatment") != std::string::npos);
  CHECK(read_error("cluster_id,a,v,y\ns1,1,0,\n").find("missing required column 'y_star'") != std::string::npos);
  CHECK(read_error(head + "s1,1,1,0\n").find("line 2") != std::string::npos);
  CHECK(read_error(head + "s1,1,1,0,\ns1,1,0,0,\n").find("two clusters") != std::string::npos);
  CHECK(read_error(head + "s1,1,1,0,\ns2,1,0,0,\n").find("both treatment arms") != std::string::npos);
  CHECK(read_error("cluster_id,a,y_star,v,y,W\ns1,1,1,0,,1\ns1,1,1,0,,2\ns2,0,0,0,,1\n", [] {
          CsvSchema s;
          s.cluster_level = {"W"};
          return s;
        }()).find("varies within cluster") != std::string::npos);
}

TEST_CASE("rows missing treatment, silver outcome or covariates are dropped and counted") {
  std::istringstream in(
      "cluster_id,a,y_star,v,y,X1\n"
      "s1,1,1,0,,0.5\n"
      "s1,,1,0,,0.5\n"
      "s1,1,NA,0,,0.5\n"
      "s2,0,0,0,,\n"
      "s2,0,1,0,,1\n");
  const LoadResult r = read_csv(in);
  CHECK(r.dataset.num_rows() == 2);
  CHECK(r.exclusions.rows_read == 5);
  CHECK(r.exclusions.missing_treatment == 1);
  CHECK(r.exclusions.missing_silver == 1);
  CHECK(r.exclusions.missing_covariate == 1);
  CHECK(r.exclusions.dropped_lines == std::vector<std::size_t>{3, 4, 5});
}

TEST_CASE("custom column names and explicit covariate list") {
  std::istringstream in(
      "site,trt,silver,sel,gold,age,noise\n"
      "s1,1,1,1,1,30,x\n"
      "s2,0,0,0,,40,y\n");
  CsvSchema schema;
  schema.cluster = "site";
  schema.treatment = "trt";
  schema.silver = "silver";
  schema.selection = "sel";
  schema.gold = "gold";
  schema.covariates = std::vector<std::string>{"age"};
  const LoadResult r = read_csv(in, schema);
  CHECK(r.dataset.num_rows() == 2);
  CHECK(r.dataset.covariates()(1, 0) == 40.0);

  std::istringstream bad("site,trt,silver,sel,gold\ns1,1,1,1,1\n");
  CHECK_THROWS_WITH_AS(read_csv(bad, schema), doctest::Contains("age"), DataError);
}

TEST_CASE("CSV round trip of a large simulated trial preserves counts") {
  sim::ScenarioConfig c;
  c.name = "trial-shaped";
  c.m = 30;
  c.size_min = 1400;
  c.size_max = 1754;
  c.params = sim::table1_parameters(true);
  c.seed = 11;
  const sim::Replicate rep = sim::generate_replicate(c, 0);
  std::stringstream buf;
  write_csv(buf, rep.data);
  CsvSchema schema;
  schema.cluster_level = {"X4"};
  const LoadResult back = read_csv(buf, schema);
  const TrialDataset& d = back.dataset;
  CHECK(d.num_clusters() == 30);
  CHECK(d.num_rows() == rep.data.num_rows());
  CHECK(d.num_rows() > 40000);
  CHECK(d.num_validated() == rep.data.num_validated());
  for (std::size_t i = 0; i < d.num_clusters(); ++i) {
    CHECK(d.cluster_size(i) == rep.data.cluster_size(i));
    CHECK(d.cluster_validated(i) == rep.data.cluster_validated(i));
  }
  CHECK(d.covariates() == rep.data.covariates());
}

TEST_CASE("model spec parsing and invariants") {
  const ModelSpec s = ModelSpec::parse("1 + Y + A + Y:A + X1 + X1:A", ModelRole::Classification);
  CHECK(s.size() == 6);
  CHECK(s.to_string() == "1,Y,A,Y:A,X1,X1:A");
  CHECK(ModelSpec::parse("A:Y,1,Y,A", ModelRole::Classification).terms()[0].kind == TermKind::GoldByTreatment);
  CHECK_THROWS_AS(ModelSpec::parse("1,A,X1", ModelRole::Classification), SpecError);
  CHECK_THROWS_AS(ModelSpec::parse("1,Y,A,Y", ModelRole::Classification), SpecError);
  CHECK_THROWS_AS(ModelSpec::parse("1,A,Y", ModelRole::Selection), SpecError);
  CHECK_THROWS_AS(ModelSpec::parse("1,Y,A,X1:X2", ModelRole::Classification), SpecError);
  CHECK(ModelSpec::parse("1,Y", ModelRole::Classification).homogeneous());
  CHECK(s.to_selection().to_string() == "1,A,X1,X1:A");
  CHECK(ModelSpec::saturated_classification().to_string() == "1,Y,A,Y:A");
}

TEST_CASE("design rows follow the term order") {
  const TrialDataset d = two_cluster_x();
  const ModelSpec sat = ModelSpec::saturated_classification();
  // validated rows: (c1: Y=0,A=1), (c2: Y=1,A=0), (c2: Y=0,A=0)
  const DesignMatrix dm = build_design(d, sat, Subset::ValidatedOnly);
  REQUIRE(dm.values.rows() == 3);
  CHECK(dm.cluster_offsets == std::vector<std::size_t>{0, 1, 3});

  std::vector<Observation> one{obs("c1", 1, 1, 1, 1), obs("c2", 0, 0, 1, 0)};
  const TrialDataset d11 = TrialDataset::from_observations(one, {});
  const DesignRow r = build_design(d11, sat, Subset::ValidatedOnly).row(sat, 0);
  CHECK(r.values == Eigen::Vector4d(1, 1, 1, 1));
  CHECK(counterfactual_row(r, 0, 1).values == Eigen::Vector4d(1, 0, 1, 0));

  const ModelSpec s2 = ModelSpec::parse("1,Y,A,X1:A,X4", ModelRole::Classification);
  const DesignRow row = build_design(d, s2, Subset::ValidatedOnly).row(s2, 0);
  Eigen::VectorXd expected(5);
  expected << 1, 0, 1, 2.0, 0.3;
  CHECK(row.values == expected);
  Eigen::VectorXd cf(5);
  cf << 1, 1, 0, 0.0, 0.3;
  CHECK(counterfactual_row(row, 1, 0).values == cf);
  CHECK(row.provenance.observation == 0);

  CHECK_THROWS_WITH_AS(build_design(d, s2, Subset::All), doctest::Contains("non-validated"), SpecError);
  CHECK(build_design(d, s2.to_selection(), Subset::All).values.rows() == 4);
  CHECK_THROWS_WITH_AS(build_design(d, ModelSpec::parse("1,Y,A,Z", ModelRole::Classification), Subset::ValidatedOnly),
                       doctest::Contains("'Z'"), SpecError);
}

TEST_CASE("Model-1 layout on a generated replicate has one column per configured term") {
  const sim::Replicate rep = sim::generate_replicate(sim::preset("table1-dx-icc01-small"), 0);
  const ModelSpec m1 = sim::model1_spec();
  CHECK(m1.size() == 11);
  CHECK(build_design(rep.data, m1, Subset::ValidatedOnly).values.cols() == 11);
  CHECK(build_design(rep.data, m1, Subset::ValidatedOnly).values.rows() ==
        static_cast<Eigen::Index>(rep.data.num_validated()));
}

TEST_CASE("property: factual counterfactual rows equal the factual row") {
  const sim::Replicate rep = sim::generate_replicate(sim::preset("table1-dx-icc01-small"), 4);
  const ModelSpec spec = sim::model1_spec();
  const DesignMatrix dm = build_design(rep.data, spec, Subset::ValidatedOnly);
  Philox rng(3, 0, StreamRole::Design);
  for (int trial = 0; trial < 200; ++trial) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(dm.values.rows()) - 1));
    const DesignRow r = dm.row(spec, k);
    CHECK(counterfactual_row(r, r.provenance.y, r.provenance.a).values == r.values);
    // Only Y/A-involving entries may differ.
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a) {
        const Eigen::VectorXd diff = counterfactual_row(r, y, a).values - r.values;
        for (Eigen::Index j = 0; j < diff.size(); ++j)
          if (r.gold_flags(j) == 0 && r.treatment_flags(j) == 0) CHECK(diff(j) == 0.0);
      }
  }
}

TEST_CASE("build_design is deterministic and order-preserving") {
  const sim::Replicate rep = sim::generate_replicate(sim::preset("table1-ndx-icc01-small"), 1);
  const ModelSpec sel = sim::default_selection_spec();
  const DesignMatrix a = build_design(rep.data, sel, Subset::All);
  const DesignMatrix b = build_design(rep.data, sel, Subset::All);
  CHECK(a.values == b.values);
  for (std::size_t k = 0; k < a.provenance.size(); ++k) CHECK(a.provenance[k].observation == k);
}

TEST_CASE("cluster resampling relabels repeated clusters") {
  const TrialDataset d = two_cluster_x();
  const TrialDataset r = d.resample_clusters({1, 1, 0});
  CHECK(r.num_clusters() == 3);
  CHECK(r.num_rows() == 6);
  CHECK(r.cluster_label(0) != r.cluster_label(1));
  CHECK(r.cluster_treatment(0) == 0);
  CHECK(r.cluster_treatment(2) == 1);
}
