#include "bll/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bll/parallel.hpp"

namespace bll {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return NAN;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return NAN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double carleman_partial(const ExperimentSpec& spec, const Tolerances& tol) {
  const auto a = spec.init.target_moments(tol.carleman_order);
  const auto bounds =
      lambda_bounds(spec.params.alpha(), spec.params.c(), a, tol.carleman_order);
  return carleman_diagnostic(bounds).back();
}

SchemeConfig config_for(const ExperimentSpec& spec, std::size_t r) {
  SchemeConfig config = spec.scheme;
  config.seed = spec.seeds[r];
  return config;
}

Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json json_array(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(json_number(x));
  return out;
}

}  // namespace

Json Tolerances::to_json() const {
  return Json{{"sup_fraction_of_bound", sup_fraction},
              {"required_pass_fraction", required_pass_fraction},
              {"martingale_factor", martingale_factor},
              {"longtime_relative", longtime_relative},
              {"kolmogorov", kolmogorov},
              {"carleman_threshold", carleman_threshold},
              {"carleman_order", carleman_order},
              {"hankel", hankel},
              {"quadrature_relative", quadrature_relative},
              {"float_relative", float_relative},
              {"resolvent_relative", resolvent_relative}};
}

void ExperimentSpec::validate() const {
  scheme.validate();
  if (K < 1) throw DomainError("experiment needs K >= 1");
  if (seeds.empty()) throw DomainError("experiment needs at least one seed");
  if (measure_nodes < 0) throw DomainError("measure_nodes must be nonnegative");
  if (grid.empty() || grid.front() != 0.0) throw DomainError("time grid must start at 0");
  for (std::size_t j = 1; j < grid.size(); ++j) {
    if (!(grid[j] > grid[j - 1])) throw DomainError("time grid must be strictly increasing");
  }
  if (init.explicit_lambdas && init.explicit_lambdas->size() != params.n_particles()) {
    throw DomainError("explicit initial state has " +
                      std::to_string(init.explicit_lambdas->size()) + " particles, expected " +
                      std::to_string(params.n_particles()));
  }
  const auto a = init.target_moments(std::min(K, 10));
  if (!hankel_psd_check(a).pass) {
    throw DomainError("initial moments " + init.describe() + " are not a Stieltjes sequence");
  }
}

Json ExperimentSpec::to_json() const {
  Json seed_list = Json::array();
  for (auto s : seeds) seed_list.push_back(s);
  return Json{{"alpha", params.alpha()},
              {"c", params.c()},
              {"n_particles", params.n_particles()},
              {"beta", params.beta()},
              {"init", init.describe()},
              {"scheme", to_string(scheme.scheme)},
              {"dt", scheme.dt},
              {"denom_epsilon", scheme.denom_epsilon},
              {"max_substeps", scheme.max_substeps},
              {"step_fraction", scheme.step_fraction},
              {"pair_flow", scheme.pair_flow},
              {"milstein", scheme.milstein},
              {"refinement", scheme.refinement},
              {"grid", grid},
              {"K", K},
              {"replicas", replicas()},
              {"seeds", seed_list},
              {"measure_nodes", measure_nodes}};
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  std::iota(seeds.begin(), seeds.end(), first);
  return seeds;
}

std::vector<Rational> exact_initial_moments(const InitialCondition& init, int K) {
  std::vector<Rational> a(static_cast<std::size_t>(K) + 1, Rational(1));
  if (init.explicit_lambdas) {
    const auto& xs = *init.explicit_lambdas;
    std::vector<Rational> power(xs.size(), Rational(1));
    std::vector<Rational> base(xs.begin(), xs.end());
    for (int k = 1; k <= K; ++k) {
      Rational s = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        power[i] *= base[i];
        s += power[i];
      }
      a[k] = s / static_cast<long long>(xs.size());
    }
    return a;
  }
  const Rational x(init.location);
  Rational p = 1;
  for (int k = 1; k <= K; ++k) {
    p *= x;
    a[k] = init.distribution == InitialCondition::Distribution::point_mass ? p : p / (k + 1);
  }
  return a;
}

std::size_t ConvergenceReport::failed_replicas() const {
  return static_cast<std::size_t>(
      std::count_if(replicas.begin(), replicas.end(), [](const auto& r) { return !r.ok; }));
}

double moment_bracket_gap(const DiscreteMeasure& empirical, const DiscreteMeasure& quadrature) {
  double gap = 0.0;
  double below = 0.0;
  for (std::size_t j = 0; j < quadrature.nodes.size(); ++j) {
    const double x = quadrature.nodes[j];
    const double upto = below + quadrature.weights[j];
    const auto lo = std::lower_bound(empirical.nodes.begin(), empirical.nodes.end(), x);
    const auto hi = std::upper_bound(empirical.nodes.begin(), empirical.nodes.end(), x);
    const double f_left = std::accumulate(empirical.weights.begin(),
                                          empirical.weights.begin() + (lo - empirical.nodes.begin()), 0.0);
    const double f_right = std::accumulate(empirical.weights.begin(),
                                           empirical.weights.begin() + (hi - empirical.nodes.begin()), 0.0);
    gap = std::max({gap, below - f_left, f_right - upto});
    below = upto;
  }
  return gap;
}

ConvergenceReport run_experiment(const ExperimentSpec& spec, const Tolerances& tol) {
  spec.validate();
  const int K = spec.K;
  const int solve_order = std::max(K, 2 * spec.measure_nodes);
  const auto a = exact_initial_moments(spec.init, solve_order);
  const auto hierarchy = solve_hierarchy(Rational(spec.params.alpha()), Rational(spec.params.c()),
                                         std::span<const Rational>(a), solve_order);

  ConvergenceReport report(spec, tol);
  const auto bounds = lambda_bounds(spec.params.alpha(), spec.params.c(),
                                    spec.init.target_moments(K), K);
  report.bound.assign(static_cast<std::size_t>(K) + 1, 1.0);
  for (int k = 1; k <= K; ++k) report.bound[k] = bounds.value(k);
  report.martingale_order = (K + 1) / 2;

  report.exact.grid = spec.grid;
  report.exact.values.resize(static_cast<std::size_t>(K) + 1);
  for (int k = 0; k <= K; ++k) {
    for (double t : spec.grid) report.exact.values[k].push_back(eval_moment(hierarchy.m[k], t));
  }
  const auto& exact = report.exact.values;
  std::optional<DiscreteMeasure> final_measure;
  if (spec.measure_nodes > 0) {
    final_measure = measure_at_time(hierarchy, spec.grid.back(), spec.measure_nodes);
  }

  report.replicas.resize(spec.replicas());
  parallel_for(spec.replicas(), [&](std::size_t r) {
    ReplicaOutcome& out = report.replicas[r];
    out.seed = spec.seeds[r];
    try {
      auto path = simulate_path(spec.params, spec.init, spec.grid, config_for(spec, r), K, 0, true);
      out.stats = path.stats;
      const auto last = path.states.back().lambdas();
      out.final_lambdas.assign(last.begin(), last.end());
      path.states.clear();
      out.sup_error.assign(static_cast<std::size_t>(K) + 1, 0.0);
      for (int k = 1; k <= K; ++k) {
        const auto s = path.trace.order(k);
        for (std::size_t j = 0; j < s.size(); ++j) {
          out.sup_error[k] = std::max(out.sup_error[k], std::abs(s[j] - exact[k][j]));
        }
      }
      out.martingale_final.assign(static_cast<std::size_t>(report.martingale_order) + 1, 0.0);
      out.quadratic_variation.assign(out.martingale_final.size(), 0.0);
      for (int k = 1; k <= report.martingale_order; ++k) {
        out.martingale_final[k] = martingale_residual(path.trace, spec.params, k).back();
        out.quadratic_variation[k] = quadratic_variation(path.trace, spec.params, k);
      }
      if (final_measure) {
        out.bracket_gap = moment_bracket_gap(DiscreteMeasure::empirical(out.final_lambdas), *final_measure);
      }
      out.trace = std::move(path.trace);
      out.ok = true;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  });

  const double n = static_cast<double>(spec.params.n_particles());
  const double total = static_cast<double>(spec.replicas());
  report.pass_fraction.assign(static_cast<std::size_t>(K) + 1, 1.0);
  report.median_error.assign(static_cast<std::size_t>(K) + 1, 0.0);
  for (int k = 1; k <= K; ++k) {
    std::vector<double> errors;
    std::size_t within = 0;
    for (const auto& r : report.replicas) {
      if (!r.ok) continue;
      errors.push_back(r.sup_error[k]);
      if (r.sup_error[k] <= tol.sup_fraction * report.bound[k]) ++within;
    }
    report.pass_fraction[k] = static_cast<double>(within) / total;
    report.median_error[k] = median(errors);
  }
  const auto mo = static_cast<std::size_t>(report.martingale_order) + 1;
  report.martingale_mean.assign(mo, 0.0);
  report.martingale_scaled_variance.assign(mo, 0.0);
  report.quadratic_variation_mean.assign(mo, 0.0);
  for (std::size_t k = 1; k < mo; ++k) {
    std::vector<double> finals, qv;
    for (const auto& r : report.replicas) {
      if (!r.ok) continue;
      finals.push_back(r.martingale_final[k]);
      qv.push_back(r.quadratic_variation[k]);
    }
    report.martingale_mean[k] = mean_of(finals);
    report.martingale_scaled_variance[k] = n * sample_variance(finals);
    report.quadratic_variation_mean[k] = n * mean_of(qv);
  }

  report.carleman_partial_sum = carleman_partial(spec, tol);
  report.moments_pass = report.failed_replicas() == 0;
  for (int k = 1; k <= K; ++k) {
    report.moments_pass = report.moments_pass && report.pass_fraction[k] >= tol.required_pass_fraction;
  }
  if (final_measure) {
    bool ok = report.failed_replicas() == 0;
    for (const auto& r : report.replicas) ok = ok && r.bracket_gap && *r.bracket_gap <= tol.kolmogorov;
    report.measure_pass = ok;
    if (report.moments_pass && report.carleman_partial_sum > tol.carleman_threshold && !ok) {
      report.anomalies.push_back(
          "moment errors pass and the Carleman sum diverges, but the measure-level check at t=" +
          std::to_string(spec.grid.back()) + " fails");
    }
  }
  report.pass = report.moments_pass && report.measure_pass.value_or(true);
  return report;
}

LongtimeReport longtime_check(const ExperimentSpec& spec, double t_long, const Tolerances& tol,
                              double window, int quadrature_nodes, double sample_spacing) {
  if (!(t_long >= 10.0)) throw DomainError("longtime_check needs T_long >= 10");
  if (!(window > 0.0 && window < t_long)) throw DomainError("averaging window must lie in (0, T_long)");
  if (!(sample_spacing > 0.0)) throw DomainError("sample spacing must be positive");
  if (quadrature_nodes < 1) throw DomainError("quadrature_nodes must be positive");

  ExperimentSpec run = spec;
  run.grid = {0.0};
  const double start = t_long - window;
  const auto samples = static_cast<int>(std::llround(window / sample_spacing));
  for (int i = 0; i <= samples; ++i) run.grid.push_back(start + window * i / samples);
  run.validate();

  LongtimeReport report(run, tol);
  report.t_long = t_long;
  report.window = window;
  report.quadrature_nodes = quadrature_nodes;
  const int K = run.K;
  const auto u = convolutive_recursion(Rational(run.params.alpha()), Rational(run.params.c()), K);
  for (int k = 0; k <= K; ++k) report.target.push_back(to_double(u.values[k]));
  const auto limit = quadrature_from_jacobi(
      build_jacobi(run.params.alpha(), run.params.c(), quadrature_nodes), quadrature_nodes);

  const std::size_t R = run.replicas();
  report.replica_average.assign(R, {});
  report.kolmogorov.assign(R, NAN);
  std::vector<std::string> errors(R);
  parallel_for(R, [&](std::size_t r) {
    try {
      const auto path = simulate_path(run.params, run.init, run.grid, config_for(run, r), K, 0, true);
      std::vector<double> avg(static_cast<std::size_t>(K) + 1, 0.0);
      for (int k = 0; k <= K; ++k) {
        const auto s = path.trace.order(k);
        double integral = 0.0;
        for (std::size_t j = 2; j < s.size(); ++j) {
          integral += 0.5 * (run.grid[j] - run.grid[j - 1]) * (s[j] + s[j - 1]);
        }
        avg[k] = integral / window;
      }
      report.replica_average[r] = std::move(avg);
      report.kolmogorov[r] =
          kolmogorov_distance(DiscreteMeasure::empirical(path.states.back().lambdas()), limit);
    } catch (const std::exception& e) {
      errors[r] = "seed " + std::to_string(run.seeds[r]) + ": " + e.what();
    }
  });
  for (auto& e : errors) {
    if (!e.empty()) report.replica_errors.push_back(std::move(e));
  }

  report.time_average.assign(static_cast<std::size_t>(K) + 1, 0.0);
  report.relative_error.assign(static_cast<std::size_t>(K) + 1, 0.0);
  report.moments_pass = report.replica_errors.empty();
  for (int k = 0; k <= K; ++k) {
    std::vector<double> values;
    for (const auto& avg : report.replica_average) {
      if (!avg.empty()) values.push_back(avg[k]);
    }
    report.time_average[k] = mean_of(values);
    report.relative_error[k] = std::abs(report.time_average[k] - report.target[k]) / report.target[k];
    report.moments_pass = report.moments_pass && report.relative_error[k] <= tol.longtime_relative;
  }
  report.measure_pass = report.replica_errors.empty();
  for (double d : report.kolmogorov) {
    report.measure_pass = report.measure_pass && std::isfinite(d) && d <= tol.kolmogorov;
  }
  report.carleman_partial_sum = carleman_partial(run, tol);
  if (report.moments_pass && report.carleman_partial_sum > tol.carleman_threshold &&
      !report.measure_pass) {
    report.anomalies.push_back(
        "time-averaged moments match u_k and the Carleman sum diverges, but the Kolmogorov "
        "distance to the limit measure exceeds tolerance");
  }
  report.pass = report.moments_pass && report.measure_pass;
  return report;
}

std::vector<MetricRow> metric_rows(const ConvergenceReport& report, const std::string& run_id) {
  std::vector<MetricRow> rows;
  const std::size_t n = report.spec.params.n_particles();
  for (const auto& r : report.replicas) {
    rows.push_back({run_id, 0, n, r.seed, "replica_ok", r.ok ? 1.0 : 0.0});
    if (!r.ok) continue;
    rows.push_back({run_id, 0, n, r.seed, "substeps_accepted", static_cast<double>(r.stats.accepted)});
    rows.push_back({run_id, 0, n, r.seed, "substeps_rejected", static_cast<double>(r.stats.rejected)});
    for (int k = 1; k <= report.spec.K; ++k) {
      rows.push_back({run_id, k, n, r.seed, "sup_error", r.sup_error[k]});
    }
    for (int k = 1; k <= report.martingale_order; ++k) {
      rows.push_back({run_id, k, n, r.seed, "martingale_final", r.martingale_final[k]});
      rows.push_back({run_id, k, n, r.seed, "quadratic_variation", r.quadratic_variation[k]});
    }
    if (r.bracket_gap) rows.push_back({run_id, 0, n, r.seed, "moment_bracket_gap", *r.bracket_gap});
  }
  for (int k = 1; k <= report.spec.K; ++k) {
    rows.push_back({run_id, k, n, std::nullopt, "bound", report.bound[k]});
    rows.push_back({run_id, k, n, std::nullopt, "pass_fraction", report.pass_fraction[k]});
    rows.push_back({run_id, k, n, std::nullopt, "median_sup_error", report.median_error[k]});
  }
  for (int k = 1; k <= report.martingale_order; ++k) {
    rows.push_back({run_id, k, n, std::nullopt, "n_var_martingale", report.martingale_scaled_variance[k]});
    rows.push_back({run_id, k, n, std::nullopt, "n_mean_quadratic_variation",
                    report.quadratic_variation_mean[k]});
  }
  return rows;
}

std::vector<MetricRow> metric_rows(const LongtimeReport& report, const std::string& run_id) {
  std::vector<MetricRow> rows;
  const std::size_t n = report.spec.params.n_particles();
  for (std::size_t r = 0; r < report.replica_average.size(); ++r) {
    const auto seed = report.spec.seeds[r];
    if (report.replica_average[r].empty()) continue;
    for (int k = 1; k <= report.spec.K; ++k) {
      rows.push_back({run_id, k, n, seed, "time_average", report.replica_average[r][k]});
    }
    rows.push_back({run_id, 0, n, seed, "kolmogorov", report.kolmogorov[r]});
  }
  for (int k = 1; k <= report.spec.K; ++k) {
    rows.push_back({run_id, k, n, std::nullopt, "target", report.target[k]});
    rows.push_back({run_id, k, n, std::nullopt, "time_average", report.time_average[k]});
    rows.push_back({run_id, k, n, std::nullopt, "relative_error", report.relative_error[k]});
  }
  return rows;
}

Json to_json(const ConvergenceReport& report) {
  Json orders = Json::array();
  for (int k = 1; k <= report.spec.K; ++k) {
    orders.push_back({{"k", k},
                      {"bound", report.bound[k]},
                      {"tolerance", report.tol.sup_fraction * report.bound[k]},
                      {"pass_fraction", report.pass_fraction[k]},
                      {"median_sup_error", json_number(report.median_error[k])}});
  }
  Json martingale = Json::array();
  for (int k = 1; k <= report.martingale_order; ++k) {
    martingale.push_back({{"k", k},
                          {"mean", json_number(report.martingale_mean[k])},
                          {"n_var", json_number(report.martingale_scaled_variance[k])},
                          {"n_mean_quadratic_variation", json_number(report.quadratic_variation_mean[k])}});
  }
  Json failures = Json::array();
  for (const auto& r : report.replicas) {
    if (!r.ok) failures.push_back({{"seed", r.seed}, {"error", r.error}});
  }
  Json out{{"kind", "convergence"},
           {"spec", report.spec.to_json()},
           {"tolerances", report.tol.to_json()},
           {"orders", orders},
           {"martingale", martingale},
           {"carleman_partial_sum", report.carleman_partial_sum},
           {"moments_pass", report.moments_pass},
           {"measure_pass", report.measure_pass ? Json(*report.measure_pass) : Json(nullptr)},
           {"failed_replicas", failures},
           {"anomalies", report.anomalies},
           {"pass", report.pass}};
  return out;
}

Json to_json(const LongtimeReport& report) {
  Json orders = Json::array();
  for (int k = 1; k <= report.spec.K; ++k) {
    orders.push_back({{"k", k},
                      {"target", report.target[k]},
                      {"time_average", json_number(report.time_average[k])},
                      {"relative_error", json_number(report.relative_error[k])}});
  }
  return Json{{"kind", "longtime"},
              {"spec", report.spec.to_json()},
              {"tolerances", report.tol.to_json()},
              {"t_long", report.t_long},
              {"window", report.window},
              {"quadrature_nodes", report.quadrature_nodes},
              {"orders", orders},
              {"kolmogorov", json_array(report.kolmogorov)},
              {"carleman_partial_sum", report.carleman_partial_sum},
              {"moments_pass", report.moments_pass},
              {"measure_pass", report.measure_pass},
              {"replica_errors", report.replica_errors},
              {"anomalies", report.anomalies},
              {"pass", report.pass}};
}

std::string format_csv(const std::vector<MetricRow>& rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  char number[64];
  for (const auto& r : rows) {
    std::snprintf(number, sizeof number, "%.17g", r.value);
    out += r.run_id + "," + std::to_string(r.k) + "," + std::to_string(r.n) + "," +
           (r.seed ? std::to_string(*r.seed) : std::string()) + "," + r.metric + "," + number + "\n";
  }
  return out;
}

OutputFormat parse_output_format(const std::string& name) {
  if (name == "csv") return OutputFormat::csv;
  if (name == "json") return OutputFormat::json;
  if (name == "both") return OutputFormat::both;
  throw DomainError("unknown output format '" + name + "' (expected csv, json or both)");
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << body;
  out.close();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void emit_results(const std::vector<MetricRow>& rows, const Json& summary, OutputFormat format,
                  const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
  if (format != OutputFormat::json) write_file(dir / "results.csv", format_csv(rows));
  if (format != OutputFormat::csv) write_file(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace bll
