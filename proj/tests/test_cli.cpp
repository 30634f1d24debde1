#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssw/cli.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ssw");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = ssw::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ssw_test_cli";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

json load_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

/// counts[a] = {Y=0:Y*=0, Y=0:Y*=1, Y=1:Y*=0, Y=1:Y*=1}
struct Planted {
  std::array<std::array<int, 4>, 2> counts;
  int unvalidated_per_arm = 2000;
  int clusters_per_arm = 15;
};

/// Writes a trial CSV whose validated rows hit `p.counts` exactly.
fs::path write_planted(const std::string& name, const Planted& p) {
  const fs::path path = scratch(name);
  std::ofstream f(path);
  f << "cluster_id,a,y_star,v,y,X1\n";
  int serial = 0;
  for (int a : {1, 0}) {
    auto cluster = [&](int k) {
      return "c" + std::to_string(a == 1 ? 1 + k % p.clusters_per_arm : 1 + p.clusters_per_arm + k % p.clusters_per_arm);
    };
    int k = 0;
    const auto& c = p.counts[static_cast<std::size_t>(a)];
    for (int cell = 0; cell < 4; ++cell) {
      const int y = cell / 2, ys = cell % 2;
      for (int j = 0; j < c[static_cast<std::size_t>(cell)]; ++j, ++k, ++serial)
        f << cluster(k) << ',' << a << ',' << ys << ",1," << y << ',' << (serial % 7) * 0.25 << '\n';
    }
    for (int j = 0; j < p.unvalidated_per_arm; ++j, ++k, ++serial)
      f << cluster(k) << ',' << a << ',' << (j % 2) << ",0,NA," << (serial % 7) * 0.25 << '\n';
  }
  return path;
}

const Planted kPlanted{{{{1388, 375, 287, 393}, {1062, 306, 131, 679}}}};

}  // namespace

TEST_CASE("analyze reproduces planted classification tables") {
  const fs::path csv = write_planted("planted.csv", kPlanted);
  const fs::path out = scratch("planted.json");
  const Result r = run_cli({"analyze", "-i", csv.string(), "--spec", "1,Y,A,Y:A", "--out-json", out.string()});
  INFO(r.err);
  REQUIRE(r.code == ssw::cli::kOk);

  CHECK(r.out.find("Clusters 30, individuals 8621, validated 4621, dropped 0") != std::string::npos);
  CHECK(r.out.find("1062 (48.8%)") != std::string::npos);
  CHECK(r.out.find("306 (14.0%)") != std::string::npos);
  CHECK(r.out.find("131 (6.0%)") != std::string::npos);
  CHECK(r.out.find("679 (31.2%)") != std::string::npos);
  CHECK(r.out.find("1388 (56.8%)") != std::string::npos);
  CHECK(r.out.find("375 (15.3%)") != std::string::npos);
  CHECK(r.out.find("287 (11.7%)") != std::string::npos);
  CHECK(r.out.find("393 (16.1%)") != std::string::npos);
  // pooled: 2450, 681, 418, 1072 of 4621
  CHECK(r.out.find("2450 (53.0%)") != std::string::npos);
  CHECK(r.out.find("681 (14.7%)") != std::string::npos);
  CHECK(r.out.find("418 (9.0%)") != std::string::npos);
  CHECK(r.out.find("1072 (23.2%)") != std::string::npos);

  const json doc = load_json(out);
  CHECK(doc["schema_version"] == 1);
  CHECK(doc["manifest"]["command"] == "analyze");
  const auto& tables = doc["classification_tables"];
  REQUIRE(tables.size() == 3);
  CHECK(tables[0]["arm"] == 1);
  CHECK(tables[0]["validated"] == 2178);
  CHECK(tables[0]["cells"][0]["count"] == 1062);
  CHECK(tables[0]["cells"][3]["count"] == 679);
  CHECK(tables[0]["classification_probabilities"]["p_ystar1_given_y1"].get<double>() ==
        doctest::Approx(679.0 / 810.0).epsilon(1e-12));
  CHECK(tables[1]["arm"] == 0);
  CHECK(tables[1]["cells"][1]["count"] == 375);
  CHECK(tables[2]["arm"] == "overall");
  CHECK(tables[2]["validated"] == 4621);

  const auto& reports = doc["reports"];
  REQUIRE(reports.size() == 3);
  CHECK(reports[0]["method"] == "SSW");
  CHECK(reports[0]["interval"]["method"] == "t_corrected");
  CHECK(reports[0]["interval"]["df"] == 23);
  CHECK(reports[1]["method"] == "SSO");
  CHECK(reports[2]["method"] == "IPSW");
  for (const auto& rep : reports) CHECK(rep["valid"] == true);

  // SSO is the Y* difference in means over all rows; unvalidated rows carry Y* = 1 half the time.
  const double sso = (985.0 + 1000.0) / 4178.0 - (768.0 + 1000.0) / 4443.0;
  CHECK(reports[1]["tau_hat"].get<double>() == doctest::Approx(sso).epsilon(1e-12));
}

TEST_CASE("manifest goes to stderr without --out-json") {
  const fs::path csv = write_planted("planted.csv", kPlanted);
  const Result r = run_cli({"compare", "-i", csv.string(), "--estimators", "sso"});
  REQUIRE(r.code == ssw::cli::kOk);
  const json m = json::parse(r.err);
  CHECK(m["tool"] == "ssw");
  CHECK(m["command"] == "compare");
  CHECK(m["config"]["estimators"] == "sso");
}

TEST_CASE("compare prints one row per estimator and nothing else") {
  const fs::path csv = write_planted("planted.csv", kPlanted);
  const Result r = run_cli({"compare", "-i", csv.string(), "--spec", "1,Y,A,Y:A"});
  REQUIRE(r.code == ssw::cli::kOk);
  CHECK(r.out.find("Clusters") == std::string::npos);
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line))
    if (!line.empty()) rows.push_back(line);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].rfind("Estimator", 0) == 0);
  CHECK(rows[1].rfind("SSW", 0) == 0);
  CHECK(rows[2].rfind("SSO", 0) == 0);
  CHECK(rows[3].rfind("IPSW", 0) == 0);
}

TEST_CASE("perfect classification collapses SSW onto SSO") {
  Planted p{{{{900, 0, 0, 300}, {700, 0, 0, 500}}}};
  const fs::path csv = write_planted("perfect.csv", p);
  const fs::path out = scratch("perfect.json");
  const Result r = run_cli({"compare", "-i", csv.string(), "--estimators", "ssw-saturated,sso", "--interval", "normal",
                            "--out-json", out.string()});
  INFO(r.err);
  REQUIRE(r.code == ssw::cli::kOk);
  const json doc = load_json(out);
  const double ssw = doc["reports"][0]["tau_hat"].get<double>();
  const double sso = doc["reports"][1]["tau_hat"].get<double>();
  CHECK(ssw == doctest::Approx(sso).epsilon(1e-9));
  CHECK(sso == doctest::Approx(1500.0 / 3200.0 - 1300.0 / 3200.0).epsilon(1e-12));
}

TEST_CASE("IPSW with every row validated is the gold difference in means") {
  Planted p = kPlanted;
  p.unvalidated_per_arm = 0;
  const fs::path csv = write_planted("allvalid.csv", p);
  const fs::path out = scratch("allvalid.json");
  const Result r = run_cli({"analyze", "-i", csv.string(), "--estimators", "ipsw", "--interval", "normal",
                            "--selection-spec", "1,A", "--out-json", out.string()});
  INFO(r.err);
  REQUIRE(r.code == ssw::cli::kOk);
  const json doc = load_json(out);
  CHECK(doc["reports"][0]["tau_hat"].get<double>() == doctest::Approx(810.0 / 2178.0 - 680.0 / 2443.0).epsilon(1e-9));
}

TEST_CASE("input errors exit with code 2") {
  const fs::path csv = write_planted("planted.csv", kPlanted);
  SUBCASE("unknown covariate in spec") {
    const Result r = run_cli({"analyze", "-i", csv.string(), "--spec", "1,Y,A,Y:A,X9"});
    CHECK(r.code == ssw::cli::kInputError);
    CHECK(r.err.find("X9") != std::string::npos);
  }
  SUBCASE("missing file") {
    const Result r = run_cli({"analyze", "-i", scratch("nope.csv").string()});
    CHECK(r.code == ssw::cli::kInputError);
  }
  SUBCASE("unknown estimator") {
    const Result r = run_cli({"analyze", "-i", csv.string(), "--estimators", "ssw,magic"});
    CHECK(r.code == ssw::cli::kInputError);
    CHECK(r.err.find("magic") != std::string::npos);
  }
  SUBCASE("unknown preset") {
    const Result r = run_cli({"simulate", "-s", "no-such-preset", "--reps", "2"});
    CHECK(r.code == ssw::cli::kInputError);
  }
  SUBCASE("bad level") {
    const Result r = run_cli({"analyze", "-i", csv.string(), "--level", "1.5"});
    CHECK(r.code == ssw::cli::kInputError);
  }
}

TEST_CASE("an estimator failure exits with code 1") {
  // Y* carries no information about Y in either arm: p11 == p01.
  Planted p{{{{400, 400, 200, 200}, {300, 300, 250, 250}}}};
  const fs::path csv = write_planted("uninformative.csv", p);
  const Result r = run_cli({"analyze", "-i", csv.string(), "--spec", "1,Y,A,Y:A", "--estimators", "ssw,sso"});
  CHECK(r.code == ssw::cli::kInvalidEstimate);
  CHECK(r.err.find("SSW") != std::string::npos);
}

TEST_CASE("config file supplies defaults that flags override") {
  const fs::path csv = write_planted("planted.csv", kPlanted);
  const fs::path ini = scratch("run.ini");
  {
    std::ofstream f(ini);
    f << "[analyze]\ninput=" << csv.string() << "\nestimators=sso,ipsw\nlevel=0.9\n";
  }
  const fs::path out = scratch("cfg.json");
  const Result r = run_cli({"--config", ini.string(), "analyze", "--estimators", "sso", "--interval", "normal",
                            "--out-json", out.string()});
  INFO(r.err);
  REQUIRE(r.code == ssw::cli::kOk);
  const json doc = load_json(out);
  REQUIRE(doc["reports"].size() == 1);
  CHECK(doc["reports"][0]["interval"]["level"].get<double>() == doctest::Approx(0.9));
  CHECK(doc["manifest"]["config"]["level"].get<double>() == doctest::Approx(0.9));
}

TEST_CASE("simulate prints the study table and is reproducible") {
  const std::vector<std::string> args{"simulate", "-s", "table1-ndx-icc01-small", "--reps", "30", "--seed", "7"};
  const fs::path j1 = scratch("sim1.json");
  auto a1 = args, a2 = args;
  a1.insert(a1.end(), {"--out-json", j1.string()});
  a2.insert(a2.end(), {"--out-json", j1.string()});
  const Result r1 = run_cli(a1);
  const std::string first = slurp(j1);
  const Result r2 = run_cli(a2);
  INFO(r1.err);
  REQUIRE(r1.code == ssw::cli::kOk);
  REQUIRE(r2.code == ssw::cli::kOk);
  CHECK(r1.out == r2.out);
  CHECK(first == slurp(j1));
  for (const char* col : {"Model", "True ATE", "Empirical Bias", "Empirical Variance", "C-Robust Variance", "Coverage",
                          "Corrected Coverage", "Model 1", "Model 2"})
    CHECK(r1.out.find(col) != std::string::npos);
  const json doc = load_json(j1);
  REQUIRE(doc["scenarios"].size() == 1);
  CHECK(doc["scenarios"][0]["config"]["seed"] == 7);
  CHECK(doc["scenarios"][0]["summary"]["estimators"].size() == 2);
}

TEST_CASE("simulate figure2 writes a tidy CSV covering the grid") {
  const fs::path csv = scratch("fig2.csv");
  const Result r = run_cli({"simulate", "-s", "figure2", "--reps", "3", "--out-csv", csv.string()});
  INFO(r.err);
  REQUIRE(r.code == ssw::cli::kOk);
  std::ifstream f(csv);
  std::string line;
  std::getline(f, line);
  CHECK(line.rfind("scenario,replicate,estimator", 0) == 0);
  std::size_t rows = 0;
  std::set<std::string> scenarios;
  while (std::getline(f, line)) {
    ++rows;
    scenarios.insert(line.substr(0, line.find(',')));
  }
  CHECK(rows == 4 * 4 * 3);
  CHECK(scenarios.size() == 4);
}

TEST_CASE("simulate accepts a JSON scenario file") {
  const fs::path sc = scratch("scenario.json");
  {
    std::ofstream f(sc);
    f << R"({"preset": "table1-ndx-icc01-small", "m": 20, "seed": 3})";
  }
  const fs::path out = scratch("scenario_out.json");
  const Result r = run_cli({"simulate", "-s", sc.string(), "--reps", "5", "--out-json", out.string()});
  INFO(r.err);
  REQUIRE(r.code == ssw::cli::kOk);
  const json doc = load_json(out);
  CHECK(doc["scenarios"][0]["config"]["m"] == 20);
  CHECK(doc["scenarios"][0]["config"]["seed"] == 3);

  std::ofstream(sc) << R"({"m": -4})";
  CHECK(run_cli({"simulate", "-s", sc.string(), "--reps", "2"}).code == ssw::cli::kInputError);
}

TEST_CASE("version flag") {
  const Result r = run_cli({"--version"});
  CHECK(r.code == ssw::cli::kOk);
  CHECK(r.out.find("0.1.0") != std::string::npos);
}
