#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bll/experiment.hpp"

using namespace bll;

namespace {

ExperimentSpec small_spec(std::size_t n, std::size_t seeds) {
  ExperimentSpec s{validate_params(1.0, 1.0, static_cast<long long>(n)),
                   InitialCondition::point_mass(1.0), SchemeConfig{}, {0.0, 0.5, 1.0}, 2,
                   seed_range(1, seeds)};
  s.scheme.dt = 1e-2;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("seed ranges and spec validation") {
  CHECK(seed_range(5, 3) == std::vector<std::uint64_t>{5, 6, 7});
  auto s = small_spec(10, 2);
  CHECK_NOTHROW(s.validate());
  s.grid = {0.5, 1.0};
  CHECK_THROWS(s.validate());
  s = small_spec(10, 0);
  CHECK_THROWS(s.validate());
  s = small_spec(10, 2);
  s.K = 0;
  CHECK_THROWS(s.validate());
}

TEST_CASE("exact initial moments") {
  const auto a = exact_initial_moments(InitialCondition::uniform(2.0), 3);
  CHECK(a == std::vector<Rational>{1, 1, Rational(4, 3), 2});
  const auto d = exact_initial_moments(InitialCondition::point_mass(0.5), 2);
  CHECK(d == std::vector<Rational>{1, Rational(1, 2), Rational(1, 4)});
}

TEST_CASE("CSV output is stable across reruns and thread counts") {
  const auto spec = small_spec(20, 4);
  const auto first = format_csv(metric_rows(run_experiment(spec), "r"));
  CHECK(first.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
  CHECK(format_csv(metric_rows(run_experiment(spec), "r")) == first);
  const char* old = std::getenv("BLL_THREADS");
  const std::string saved = old ? old : "";
  setenv("BLL_THREADS", "1", 1);
  const auto serial = format_csv(metric_rows(run_experiment(spec), "r"));
  if (old) setenv("BLL_THREADS", saved.c_str(), 1); else unsetenv("BLL_THREADS");
  CHECK(serial == first);
}

TEST_CASE("a failing replica is recorded and the run continues") {
  auto spec = small_spec(20, 3);
  spec.scheme.max_substeps = 1;
  spec.scheme.step_fraction = 1e-12;  // every step is rejected
  const auto report = run_experiment(spec);
  CHECK(report.failed_replicas() == 3);
  CHECK_FALSE(report.pass);
  for (const auto& r : report.replicas) CHECK_FALSE(r.error.empty());
}

TEST_CASE("convergence report structure") {
  const auto report = run_experiment(small_spec(50, 3));
  CHECK(report.failed_replicas() == 0);
  CHECK(report.bound.size() == 3);
  CHECK(report.exact.grid == report.spec.grid);
  CHECK(report.pass_fraction.size() == 3);
  const auto j = to_json(report);
  CHECK(j.contains("spec"));
  CHECK(j.contains("tolerances"));
  CHECK(j["tolerances"]["sup_fraction_of_bound"] == 0.05);
  CHECK(j["spec"]["alpha"] == 1.0);
}

TEST_CASE("the initial condition is forgotten") {
  // two starts with different a_k end near the same S_1 at large t
  auto a = small_spec(5, 40);
  a.grid = {0.0, 8.0};
  auto b = a;
  b.init = InitialCondition::point_mass(4.0);
  const auto ra = run_experiment(a), rb = run_experiment(b);
  double ma = 0.0, mb = 0.0;
  for (const auto& r : ra.replicas) ma += r.trace.values[1].back() / 40.0;
  for (const auto& r : rb.replicas) mb += r.trace.values[1].back() / 40.0;
  CHECK(std::abs(ma - mb) < 0.4);
  CHECK(std::abs(ra.exact.values[1].back() - rb.exact.values[1].back()) < 2e-3);
}

TEST_CASE("moment bracket gap of two quadratures of the same measure is small") {
  const auto coarse = quadrature_from_jacobi(build_jacobi(1.0, 1.0, 6), 6);
  const auto fine = quadrature_from_jacobi(build_jacobi(1.0, 1.0, 400), 400);
  CHECK(moment_bracket_gap(fine, coarse) < 1e-9);
  const auto far = DiscreteMeasure::empirical(std::vector<double>{100.0});
  CHECK(moment_bracket_gap(far, coarse) > 0.5);
}

TEST_CASE("output files") {
  const auto dir = std::filesystem::temp_directory_path() / "bll_test_output";
  std::filesystem::remove_all(dir);
  std::vector<MetricRow> rows{{"x", 1, 10, std::nullopt, "median_error", 0.5},
                              {"x", 1, 10, 3, "sup_error", 0.25}};
  Json summary{{"pass", true}};
  emit_results(rows, summary, OutputFormat::both, dir);
  CHECK(slurp(dir / "results.csv") ==
        "run_id,k,N,seed,metric,value\nx,1,10,,median_error,0.5\nx,1,10,3,sup_error,0.25\n");
  CHECK(Json::parse(slurp(dir / "summary.json"))["pass"] == true);
  CHECK(parse_output_format("json") == OutputFormat::json);
  CHECK_THROWS(parse_output_format("xml"));

  std::ofstream(dir / "blocker") << "";
  try {
    emit_results(rows, summary, OutputFormat::csv, dir / "blocker" / "sub");
    FAIL("expected an I/O error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("blocker") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}
