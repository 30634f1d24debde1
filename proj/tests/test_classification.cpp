#include <doctest.h>

#include <set>

#include "ssw/classification.hpp"
#include "ssw/error.hpp"
#include "ssw/logistic.hpp"
#include "ssw/simulation.hpp"
#include "support.hpp"

using namespace ssw;
using testing::add_cell;
using testing::obs;

namespace {

// p(0,0)=0.2, p(1,0)=0.8, p(0,1)=0.25, p(1,1)=0.9
TrialDataset planted_cells() {
  std::vector<Observation> rows;
  const std::vector<std::string> treated{"t1", "t2", "t3"}, control{"c1", "c2", "c3"};
  add_cell(rows, control, 0, 0, 2, 8);
  add_cell(rows, control, 0, 1, 8, 2);
  add_cell(rows, treated, 1, 0, 5, 15);
  add_cell(rows, treated, 1, 1, 9, 1);
  rows.push_back(obs("t1", 1, 1, 0, std::nullopt));
  rows.push_back(obs("c1", 0, 0, 0, std::nullopt));
  return TrialDataset::from_observations(rows, {});
}

double cell_fit(const ThetaEstimate& f, int y, int a) {
  Eigen::Vector4d d(1, y, a, y * a);
  return expit(d.dot(f.theta));
}

sim::Replicate large_ndx(std::uint64_t seed) {
  sim::ScenarioConfig c = sim::preset("table1-ndx-icc01-large");
  c.seed = seed;
  return sim::generate_replicate(c, 0);
}

}  // namespace

TEST_CASE("saturated fit reproduces cell ratios") {
  const TrialDataset d = planted_cells();
  const ThetaEstimate f = fit_gee_logistic(d, ModelSpec::saturated_classification(), Subset::ValidatedOnly);
  CHECK(f.n_used == 50);
  CHECK(std::abs(cell_fit(f, 0, 0) - 0.2) < 1e-8);
  CHECK(std::abs(cell_fit(f, 1, 0) - 0.8) < 1e-8);
  CHECK(std::abs(cell_fit(f, 0, 1) - 0.25) < 1e-8);
  CHECK(std::abs(cell_fit(f, 1, 1) - 0.9) < 1e-8);

  const ClassificationTable np = nonparametric_pv(d);
  for (int y = 0; y < 2; ++y)
    for (int a = 0; a < 2; ++a) CHECK(std::abs(cell_fit(f, y, a) - np.p(y, a)) < 1e-8);

  const DesignMatrix dm = build_design(d, f.spec, Subset::ValidatedOnly);
  DesignRow r11 = dm.row(f.spec, 0);
  r11 = counterfactual_row(r11, 1, 1);
  CHECK(predict_pv(f, r11) == doctest::Approx(0.9).epsilon(1e-8));
}

TEST_CASE("fitted score is below tolerance times n") {
  const sim::Replicate rep = sim::generate_replicate(sim::preset("table1-dx-icc01-small"), 2);
  const ThetaEstimate f = fit_gee_logistic(rep.data, sim::model1_spec(), Subset::ValidatedOnly);
  const DesignMatrix dm = build_design(rep.data, f.spec, Subset::ValidatedOnly);
  Eigen::VectorXd ys(dm.values.rows());
  for (Eigen::Index k = 0; k < ys.size(); ++k) ys(k) = rep.data.y_star(dm.provenance[static_cast<std::size_t>(k)].observation);
  const Eigen::VectorXd p = expit((dm.values * f.theta).array()).matrix();
  const Eigen::VectorXd score = dm.values.transpose() * (ys - p);
  CHECK(score.cwiseAbs().maxCoeff() <= 1e-10 * static_cast<double>(f.n_used));
  CHECK(f.theta.allFinite());
}

TEST_CASE("deterministic classification is separable") {
  std::vector<Observation> rows;
  for (int k = 0; k < 20; ++k) {
    const int y = k % 2;
    rows.push_back(obs(k < 10 ? "t" : "c", k < 10, y, 1, y));
  }
  const TrialDataset d = TrialDataset::from_observations(rows, {});
  try {
    fit_gee_logistic(d, ModelSpec::homogeneous_classification(), Subset::ValidatedOnly);
    FAIL("expected separation");
  } catch (const FitError& e) {
    CHECK(e.kind() == FitError::Kind::Separation);
  }
}

TEST_CASE("rank-deficient design is rejected") {
  std::vector<Observation> rows;
  for (int k = 0; k < 20; ++k) rows.push_back(obs(k < 10 ? "t" : "c", k < 10, k % 3 == 0, 1, k % 2, {1.0}));
  const TrialDataset d = TrialDataset::from_observations(rows, {{"X1", false}});
  try {
    fit_gee_logistic(d, ModelSpec::parse("1,Y,A,X1", ModelRole::Classification), Subset::ValidatedOnly);
    FAIL("expected rank deficiency");
  } catch (const FitError& e) {
    CHECK(e.kind() == FitError::Kind::RankDeficient);
  }
}

TEST_CASE("non-convergence is reported") {
  const TrialDataset d = planted_cells();
  FitOptions opt;
  opt.max_iter = 1;
  try {
    fit_gee_logistic(d, ModelSpec::saturated_classification(), Subset::ValidatedOnly, opt);
    FAIL("expected non-convergence");
  } catch (const FitError& e) {
    CHECK(e.kind() == FitError::Kind::NonConvergence);
  }
}

TEST_CASE("NDX intercept recovers the generating control/negative cell") {
  const sim::Replicate rep = large_ndx(5);
  const ThetaEstimate f = fit_gee_logistic(rep.data, ModelSpec::saturated_classification(), Subset::ValidatedOnly);
  const ClassificationTable t = tabulate_classification(rep.data);
  const double p = expit(-1.25);
  const double se = std::sqrt(p * (1 - p) / static_cast<double>(t.cell_total(0, 0)));
  CHECK(std::abs(expit(f.theta(0)) - p) < 4 * se);
}

TEST_CASE("predict_pv basics") {
  ThetaEstimate f{Eigen::VectorXd::Zero(4), ModelSpec::saturated_classification(), 0, 0.0, 0, {}};
  DesignRow r;
  r.values = Eigen::Vector4d(1, 1, 0, 0);
  CHECK(predict_pv(f, r) == 0.5);
  f.theta(0) = std::log(3.0);
  r.values = Eigen::Vector4d(1, 0, 0, 0);
  CHECK(predict_pv(f, r) == doctest::Approx(0.75).epsilon(1e-15));
  r.values = Eigen::Vector3d(1, 0, 0);
  CHECK_THROWS_AS(predict_pv(f, r), ArgumentError);
}

TEST_CASE("property: predict_pv is increasing in a coordinate with positive coefficient") {
  ThetaEstimate f{Eigen::VectorXd(3), ModelSpec::parse("1,Y,A", ModelRole::Classification), 0, 0.0, 0, {}};
  f.theta << -0.3, 1.7, -0.4;
  DesignRow r;
  r.values = Eigen::Vector3d(1, 0, 1);
  double prev = 0.0;
  for (int k = -40; k <= 40; ++k) {
    r.values(1) = 0.25 * k;
    const double p = predict_pv(f, r);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("expit stays finite for extreme arguments") {
  CHECK(expit(800.0) == 1.0);
  CHECK(expit(-800.0) == 0.0);
  CHECK(expit(-800.0) >= 0.0);
  CHECK(log1pexp(800.0) == doctest::Approx(800.0));
  CHECK(std::isfinite(log1pexp(-800.0)));
}

TEST_CASE("nonparametric classification probabilities") {
  SUBCASE("3/4 cell ratio") {
    std::vector<Observation> rows{obs("t", 1, 1, 1, 1), obs("t", 1, 1, 1, 1), obs("t", 1, 1, 1, 1),
                                  obs("t", 1, 0, 1, 1), obs("t", 1, 0, 1, 0), obs("c", 0, 0, 1, 0),
                                  obs("c", 0, 1, 1, 1)};
    const ClassificationTable t = nonparametric_pv(TrialDataset::from_observations(rows, {}));
    CHECK(t.p(1, 1) == 0.75);
    CHECK(t.total() == 7);
  }
  SUBCASE("treated-arm counts mirroring the published table") {
    std::vector<Observation> rows;
    add_cell(rows, {"t1", "t2"}, 1, 0, 306, 1062);
    add_cell(rows, {"t1", "t2"}, 1, 1, 679, 131);
    add_cell(rows, {"c1", "c2"}, 0, 0, 1, 3);
    add_cell(rows, {"c1", "c2"}, 0, 1, 3, 1);
    const ClassificationTable t = nonparametric_pv(TrialDataset::from_observations(rows, {}));
    CHECK(t.p(0, 1) == doctest::Approx(306.0 / 1368.0));
    CHECK(t.p(0, 1) == doctest::Approx(0.2237).epsilon(1e-3));
    CHECK(t.p(1, 1) == doctest::Approx(0.8383).epsilon(1e-3));
    CHECK(t.counts[1][0][0] == 1062);
    CHECK(t.total() == 2178 + 8);
  }
  SUBCASE("perfect classification") {
    std::vector<Observation> rows;
    add_cell(rows, {"t"}, 1, 0, 0, 5);
    add_cell(rows, {"t"}, 1, 1, 4, 0);
    add_cell(rows, {"c"}, 0, 0, 0, 3);
    add_cell(rows, {"c"}, 0, 1, 6, 0);
    const ClassificationTable t = nonparametric_pv(TrialDataset::from_observations(rows, {}));
    CHECK(t.p(1, 0) == 1.0);
    CHECK(t.p(1, 1) == 1.0);
    CHECK(t.p(0, 0) == 0.0);
    CHECK(t.p(0, 1) == 0.0);
  }
  SUBCASE("empty cell is named") {
    std::vector<Observation> rows;
    add_cell(rows, {"t"}, 1, 0, 1, 5);
    add_cell(rows, {"c"}, 0, 0, 2, 3);
    add_cell(rows, {"c"}, 0, 1, 6, 1);
    CHECK_THROWS_WITH_AS(nonparametric_pv(TrialDataset::from_observations(rows, {})),
                         doctest::Contains("Y=1"), IdentificationError);
  }
}

TEST_CASE("IA4 scan") {
  SUBCASE("well separated saturated fit") {
    const TrialDataset d = planted_cells();
    const ThetaEstimate f = fit_gee_logistic(d, ModelSpec::saturated_classification(), Subset::ValidatedOnly);
    CHECK(check_ia4(f, d, 0.05).empty());
  }
  SUBCASE("no dependence on Y flags every unit") {
    const TrialDataset d = planted_cells();
    ThetaEstimate f{Eigen::Vector4d(-0.5, 0.0, 0.3, 0.0), ModelSpec::saturated_classification(), 0, 0.0, 0, {}};
    const auto flags = check_ia4(f, d, 0.05);
    std::set<std::size_t> units;
    for (const auto& fl : flags) units.insert(fl.observation);
    CHECK(units.size() == d.num_rows());
  }
  SUBCASE("NDX simulation") {
    const sim::Replicate rep = large_ndx(9);
    const ThetaEstimate f = fit_gee_logistic(rep.data, sim::model1_spec(), Subset::ValidatedOnly);
    CHECK(check_ia4(f, rep.data, 0.05).empty());
  }
}

TEST_CASE("selection model fits V on every row") {
  const sim::Replicate rep = sim::generate_replicate(sim::preset("table1-ndx-icc01-small"), 0);
  const ThetaEstimate f = fit_gee_logistic(rep.data, sim::default_selection_spec(), Subset::All);
  CHECK(f.n_used == rep.data.num_rows());
}
