#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bll/core_model.hpp"
#include "bll/limit_spectrum.hpp"
#include "bll/moment_hierarchy.hpp"
#include "bll/sde_engine.hpp"

namespace bll {

using Json = nlohmann::ordered_json;

// Every pass/fail threshold used by the experiments and the acceptance suite.
struct Tolerances {
  double sup_fraction = 0.05;            // sup-norm error allowed, as a fraction of Lambda_k
  double required_pass_fraction = 0.95;  // of seeds that must meet sup_fraction
  double martingale_factor = 2.0;        // max/min of N Var(M_1(T)) across N
  double longtime_relative = 0.05;       // |time average - u_k| / u_k
  double kolmogorov = 0.05;              // empirical vs limit quadrature CDF
  double carleman_threshold = 5.0;       // partial sum that counts as divergent
  int carleman_order = 10000;            // number of Carleman terms summed
  double hankel = 1e-8;                  // min eigenvalue >= -hankel * trace / n
  double quadrature_relative = 1e-9;     // quadrature vs u_k
  double float_relative = 1e-10;         // floating routes vs exact integers
  double resolvent_relative = 0.01;      // S(z) vs -1/z - u_1/z^2 at |z| = 1e3

  Json to_json() const;
};

struct ExperimentSpec {
  ModelParams params;
  InitialCondition init;
  SchemeConfig scheme;
  std::vector<double> grid;
  int K = 3;
  std::vector<std::uint64_t> seeds;
  // When positive, the empirical measure at the final time is compared with
  // the n-point quadrature of mu_T built from the exact moments.
  int measure_nodes = 0;

  std::size_t replicas() const { return seeds.size(); }
  void validate() const;
  Json to_json() const;
};

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count);

// a_0..a_K in exact arithmetic. Doubles convert to rationals without rounding.
std::vector<Rational> exact_initial_moments(const InitialCondition& init, int K);

struct ReplicaOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<double> sup_error;           // index k = 0..K
  std::vector<double> martingale_final;    // M_k(T), index k = 0..martingale order
  std::vector<double> quadratic_variation; // (2k^2/N) int S_{2k-1}, same indexing
  std::optional<double> bracket_gap;       // see moment_bracket_gap
  StepStats stats;
  MomentTrace trace;
  std::vector<double> final_lambdas;
};

struct ConvergenceReport {
  ConvergenceReport(ExperimentSpec s, Tolerances t) : spec(std::move(s)), tol(t) {}

  ExperimentSpec spec;
  Tolerances tol;
  MomentTrace exact;                  // m_k on the spec grid
  std::vector<double> bound;          // Lambda_k, index k (entry 0 is 1)
  std::vector<double> pass_fraction;  // per k
  std::vector<double> median_error;   // per k
  int martingale_order = 0;           // residuals computed for 1..martingale_order
  std::vector<double> martingale_mean;
  std::vector<double> martingale_scaled_variance;  // N Var(M_k(T)) across replicas
  std::vector<double> quadratic_variation_mean;    // mean of (2k^2/N) int S_{2k-1}, times N
  double carleman_partial_sum = 0.0;
  bool moments_pass = false;
  std::optional<bool> measure_pass;
  std::vector<ReplicaOutcome> replicas;
  std::vector<std::string> anomalies;
  bool pass = false;

  std::size_t failed_replicas() const;
};

// Simulates every seed and compares S_k with the exact m_k on the spec grid.
// Replica failures are recorded in the report and do not abort the run.
ConvergenceReport run_experiment(const ExperimentSpec& spec, const Tolerances& tol = {});

// Distance between the empirical CDF and the interval that the
// Chebyshev-Markov-Stieltjes inequalities allow for any measure sharing the
// first 2n moments of the quadrature, evaluated at the quadrature nodes. It is
// a lower bound on the Kolmogorov distance to every such measure.
double moment_bracket_gap(const DiscreteMeasure& empirical, const DiscreteMeasure& quadrature);

struct LongtimeReport {
  LongtimeReport(ExperimentSpec s, Tolerances t) : spec(std::move(s)), tol(t) {}

  ExperimentSpec spec;
  Tolerances tol;
  double t_long = 0.0;
  double window = 0.0;
  int quadrature_nodes = 0;
  std::vector<double> target;        // u_k
  std::vector<double> time_average;  // replica mean of the window averages
  std::vector<double> relative_error;
  std::vector<std::vector<double>> replica_average;  // [replica][k]
  std::vector<double> kolmogorov;    // per replica, at t_long
  double carleman_partial_sum = 0.0;
  bool moments_pass = false;
  bool measure_pass = false;
  std::vector<std::string> replica_errors;
  std::vector<std::string> anomalies;
  bool pass = false;
};

// Time-averaged S_k over [t_long - window, t_long] against u_k, and the
// Kolmogorov distance between the empirical measure at t_long and the
// quadrature of nu_{alpha,c}.
LongtimeReport longtime_check(const ExperimentSpec& spec, double t_long, const Tolerances& tol = {},
                              double window = 3.0, int quadrature_nodes = 400,
                              double sample_spacing = 0.01);

struct MetricRow {
  std::string run_id;
  int k = 0;
  std::size_t n = 0;
  std::optional<std::uint64_t> seed;  // empty for aggregates
  std::string metric;
  double value = 0.0;
};

std::vector<MetricRow> metric_rows(const ConvergenceReport& report, const std::string& run_id);
std::vector<MetricRow> metric_rows(const LongtimeReport& report, const std::string& run_id);

Json to_json(const ConvergenceReport& report);
Json to_json(const LongtimeReport& report);

inline constexpr const char* kCsvHeader = "run_id,k,N,seed,metric,value";

std::string format_csv(const std::vector<MetricRow>& rows);

enum class OutputFormat { csv, json, both };
OutputFormat parse_output_format(const std::string& name);

// Writes <dir>/results.csv and/or <dir>/summary.json. The summary object must
// carry "pass"; "results" is filled by the caller. Throws std::runtime_error
// naming the path on I/O failure.
void emit_results(const std::vector<MetricRow>& rows, const Json& summary, OutputFormat format,
                  const std::filesystem::path& dir);

// ---- acceptance suite ----

struct CheckResult {
  std::string name;
  std::string title;
  bool pass = false;
  std::string summary;
  Json detail = Json::object();
  std::vector<MetricRow> rows;
};

struct AcceptanceCheck {
  std::string name;
  std::string title;
  std::function<CheckResult(const Tolerances&)> run;
};

const std::vector<AcceptanceCheck>& acceptance_checks();

CheckResult check_worked_example(const Tolerances& tol);
CheckResult check_triple_agreement(const Tolerances& tol);
CheckResult check_ode_residual(const Tolerances& tol);
CheckResult check_monte_carlo_convergence(const Tolerances& tol);
CheckResult check_martingale_scaling(const Tolerances& tol);
CheckResult check_longtime_stationarity(const Tolerances& tol);
CheckResult check_stieltjes_structure(const Tolerances& tol);
CheckResult check_resolvent(const Tolerances& tol);

}  // namespace bll
