#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bll/experiment.hpp"
#include "bll/limit_spectrum.hpp"
#include "bll/moment_hierarchy.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct Options {
  std::string alpha = "1";
  std::string c = "1";
  long long n_particles = 1000;
  double dt = 1e-3;
  double t_max = 3.0;
  std::optional<int> k_max;
  std::size_t replicas = 20;
  std::uint64_t seed = 1;
  std::string scheme = "direct_lambda";
  std::string out;
  std::string format = "both";
  std::string init = "point:1";

  // simulate
  double grid_step = 1.0;
  int measure_nodes = 0;
  bool longtime = false;
  double window = 3.0;
  // moments
  std::vector<double> at;
  bool bounds = false;
  // limit
  int nodes = 400;
  int depth = 400;
  // verify
  std::vector<std::string> only;
  // report
  std::string input;
};

bll::InitialCondition parse_init(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const double value = colon == std::string::npos ? 1.0 : std::stod(text.substr(colon + 1));
  if (kind == "point") return bll::InitialCondition::point_mass(value);
  if (kind == "uniform") return bll::InitialCondition::uniform(value);
  throw bll::DomainError("unknown initial condition '" + text + "' (expected point:x or uniform:b)");
}

std::vector<bll::Rational> exact_init(const std::string& text, int K) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const bll::Rational x = colon == std::string::npos ? bll::Rational(1)
                                                     : bll::parse_rational(text.substr(colon + 1));
  if (kind != "point" && kind != "uniform") parse_init(text);
  std::vector<bll::Rational> a(static_cast<std::size_t>(K) + 1, bll::Rational(1));
  bll::Rational p = 1;
  for (int k = 1; k <= K; ++k) {
    p *= x;
    a[k] = kind == "point" ? p : p / (k + 1);
  }
  return a;
}

double parse_real(const std::string& text) { return bll::to_double(bll::parse_rational(text)); }

void maybe_emit(const Options& opt, const std::vector<bll::MetricRow>& rows, const bll::Json& summary) {
  if (opt.out.empty()) return;
  bll::emit_results(rows, summary, bll::parse_output_format(opt.format), opt.out);
  std::cout << "results written to " << opt.out << "\n";
}

bll::Json wrap_summary(bll::Json spec, bll::Json results, bool pass, bll::Json anomalies,
                       const bll::Tolerances& tol) {
  return bll::Json{{"spec", std::move(spec)},
                   {"tolerances", tol.to_json()},
                   {"results", std::move(results)},
                   {"anomalies", std::move(anomalies)},
                   {"pass", pass}};
}

void write_traces(const Options& opt, const bll::ConvergenceReport& report) {
  if (opt.out.empty()) return;
  std::ostringstream traces;
  traces << "seed,t,k,S_k,m_k\n";
  char buf[96];
  for (const auto& r : report.replicas) {
    if (!r.ok) continue;
    for (std::size_t j = 0; j < r.trace.grid.size(); ++j) {
      for (int k = 1; k <= r.trace.max_order(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g", r.trace.grid[j], k,
                      r.trace.values[k][j], report.exact.values[k][j]);
        traces << r.seed << "," << buf << "\n";
      }
    }
  }
  std::ostringstream states;
  states << "seed,index,lambda\n";
  for (const auto& r : report.replicas) {
    for (std::size_t i = 0; i < r.final_lambdas.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r.final_lambdas[i]);
      states << r.seed << "," << i << "," << buf << "\n";
    }
  }
  for (const auto& [name, body] : {std::pair{"traces.csv", traces.str()}, std::pair{"final_states.csv", states.str()}}) {
    const auto path = std::filesystem::path(opt.out) / name;
    std::ofstream file(path, std::ios::binary);
    if (!(file << body)) throw std::runtime_error("failed writing " + path.string());
  }
}

bll::ExperimentSpec make_spec(const Options& opt, int K) {
  bll::SchemeConfig scheme;
  scheme.dt = opt.dt;
  scheme.scheme = bll::parse_scheme(opt.scheme);
  if (opt.replicas < 1) throw bll::DomainError("--replicas must be at least 1");
  bll::ExperimentSpec spec{bll::validate_params(parse_real(opt.alpha), parse_real(opt.c), opt.n_particles),
                           parse_init(opt.init), scheme, {}, K, bll::seed_range(opt.seed, opt.replicas),
                           opt.measure_nodes};
  if (!(opt.grid_step > 0.0) || !(opt.t_max > 0.0)) {
    throw bll::DomainError("--t-max and --grid-step must be positive");
  }
  spec.grid = bll::uniform_grid(opt.t_max, std::min(opt.grid_step, opt.t_max));
  return spec;
}

int run_simulate(const Options& opt) {
  const int K = opt.k_max.value_or(3);
  auto spec = make_spec(opt, K);
  const bll::Tolerances tol;
  if (opt.longtime) {
    const auto report = bll::longtime_check(spec, opt.t_max, tol, opt.window);
    std::cout << "long-time check: alpha=" << spec.params.alpha() << " c=" << spec.params.c()
              << " N=" << spec.params.n_particles() << " T=" << opt.t_max << " window=" << opt.window
              << " replicas=" << spec.replicas() << "\n";
    for (int k = 1; k <= K; ++k) {
      std::printf("  k=%d  time average %.6g  u_k %.6g  relative error %.4g\n", k,
                  report.time_average[k], report.target[k], report.relative_error[k]);
    }
    for (std::size_t r = 0; r < report.kolmogorov.size(); ++r) {
      std::printf("  seed %llu  Kolmogorov distance %.4g\n",
                  static_cast<unsigned long long>(spec.seeds[r]), report.kolmogorov[r]);
    }
    for (const auto& e : report.replica_errors) std::cout << "  replica failure: " << e << "\n";
    for (const auto& a : report.anomalies) std::cout << "  ANOMALY: " << a << "\n";
    std::cout << "  verdict: " << (report.pass ? "within tolerance" : "outside tolerance") << "\n";
    maybe_emit(opt, bll::metric_rows(report, "longtime"),
               wrap_summary(report.spec.to_json(), bll::Json::array({bll::to_json(report)}), report.pass,
                            report.anomalies, tol));
    return kExitOk;
  }
  const auto report = bll::run_experiment(spec, tol);
  std::cout << "simulate: alpha=" << spec.params.alpha() << " c=" << spec.params.c()
            << " N=" << spec.params.n_particles() << " beta=" << spec.params.beta()
            << " init=" << spec.init.describe() << " scheme=" << opt.scheme << " dt=" << opt.dt
            << " replicas=" << spec.replicas() << "\n";
  std::cout << "  k    Lambda_k     tolerance    pass fraction  median sup error\n";
  for (int k = 1; k <= K; ++k) {
    std::printf("  %-3d  %-11.6g  %-11.6g  %-13.3f  %.6g\n", k, report.bound[k],
                tol.sup_fraction * report.bound[k], report.pass_fraction[k], report.median_error[k]);
  }
  for (int k = 1; k <= report.martingale_order; ++k) {
    std::printf("  martingale k=%d: mean M(T) %.4g, N Var M(T) %.4g, N E[<M>_T] %.4g\n", k,
                report.martingale_mean[k], report.martingale_scaled_variance[k],
                report.quadratic_variation_mean[k]);
  }
  for (const auto& r : report.replicas) {
    if (!r.ok) std::cout << "  replica seed " << r.seed << " failed: " << r.error << "\n";
  }
  for (const auto& a : report.anomalies) std::cout << "  ANOMALY: " << a << "\n";
  maybe_emit(opt, bll::metric_rows(report, "simulate"),
             wrap_summary(report.spec.to_json(), bll::Json::array({bll::to_json(report)}), report.pass,
                          report.anomalies, tol));
  write_traces(opt, report);
  return kExitOk;
}

int run_moments(const Options& opt) {
  const int K = opt.k_max.value_or(5);
  if (K < 1) throw bll::DomainError("--k-max must be at least 1");
  const auto alpha = bll::parse_rational(opt.alpha);
  const auto c = bll::parse_rational(opt.c);
  if (!(alpha > bll::Rational(1, 2)) || !(c > 0)) throw bll::DomainError("need alpha > 1/2 and c > 0");
  const auto a = exact_init(opt.init, K);
  const auto h = bll::solve_hierarchy(alpha, c, std::span<const bll::Rational>(a), K);
  std::cout << "limiting moment processes for alpha=" << alpha.str() << ", c=" << c.str()
            << ", init=" << opt.init << "\n";
  for (int k = 1; k <= K; ++k) {
    std::cout << "m_" << k << "(t) = " << bll::format_exp_polynomial(h.m[k]) << "\n";
  }
  const bool worked_case = alpha == 1 && c == 1 && opt.init == "point:1" && K >= 4;
  if (worked_case) {
    std::cout << "note: the constant term of m_4 is 296. A printed value of 96 is a misprint: "
                 "96 - 592 + 256 + 112 - 71 = -199 contradicts m_4(0) = 1, and the limit "
                 "recursion gives u_4 = 296.\n";
  }
  std::vector<bll::Json> evaluations;
  for (double t : opt.at) {
    std::cout << "t=" << t << ":";
    for (int k = 1; k <= K; ++k) std::printf(" m_%d=%.12g", k, bll::eval_moment(h.m[k], t));
    std::cout << "\n";
  }
  std::vector<double> a_double;
  for (const auto& v : a) a_double.push_back(bll::to_double(v));
  const auto bounds = bll::lambda_bounds(bll::to_double(alpha), bll::to_double(c), a_double, K);
  if (opt.bounds) {
    const auto carleman = bll::carleman_diagnostic(bounds);
    for (int k = 1; k <= K; ++k) {
      std::printf("Lambda_%d = %.10g, Carleman partial sum %.6f\n", k, bounds.value(k), carleman[k - 1]);
    }
    std::printf("max_t m_k(t) / Lambda_k over the conformance grid: %.6f\n",
                bll::bound_conformance_ratio(h, bounds));
  }
  if (!opt.out.empty()) {
    std::vector<bll::MetricRow> rows;
    bll::Json polys = bll::Json::array();
    for (int k = 1; k <= K; ++k) {
      bll::Json coeffs = bll::Json::array();
      for (std::size_t i = 0; i < h.m[k].coeffs.size(); ++i) {
        coeffs.push_back(h.m[k].coeffs[i].str());
        rows.push_back({"moments", k, 0, std::nullopt, "coefficient_" + std::to_string(i),
                        bll::to_double(h.m[k].coeffs[i])});
      }
      polys.push_back({{"k", k}, {"text", bll::format_exp_polynomial(h.m[k])}, {"coefficients", coeffs},
                       {"bound", bounds.value(k)}});
    }
    bll::Json spec{{"command", "moments"}, {"alpha", alpha.str()}, {"c", c.str()}, {"init", opt.init},
                   {"k_max", K}};
    maybe_emit(opt, rows, wrap_summary(spec, polys, true, bll::Json::array(), bll::Tolerances{}));
  }
  return kExitOk;
}

int run_limit(const Options& opt) {
  const int K = opt.k_max.value_or(5);
  if (K < 0) throw bll::DomainError("--k-max must be nonnegative");
  const auto alpha = bll::parse_rational(opt.alpha);
  const auto c = bll::parse_rational(opt.c);
  const double a = bll::to_double(alpha), cc = bll::to_double(c);
  const auto J = bll::build_jacobi(a, cc, std::max(opt.nodes, opt.depth));
  const auto u = bll::self_convolutive_moments(alpha, c, K);
  std::string line;
  for (int k = 0; k <= K; ++k) line += (k ? "," : "") + u.values[k].str();
  std::cout << line << "\n";
  const auto q = bll::quadrature_from_jacobi(J, opt.nodes);
  std::printf("quadrature (n=%d): mean %.10g, variance %.10g, nodes in [%.6g, %.6g]\n", opt.nodes, q.mean(),
              q.variance(), q.nodes.front(), q.nodes.back());
  for (const std::complex<double> z : {std::complex<double>(0, 1), std::complex<double>(1, 1),
                                       std::complex<double>(5, 0.5), std::complex<double>(-1, 1)}) {
    const auto s = bll::stieltjes_resolvent(a, cc, z, opt.depth);
    std::printf("S(%g%+gi) = %.12g%+.12gi\n", z.real(), z.imag(), s.real(), s.imag());
  }
  if (!opt.out.empty()) {
    std::vector<bll::MetricRow> rows;
    bll::Json moments = bll::Json::array();
    for (int k = 0; k <= K; ++k) {
      rows.push_back({"limit", k, 0, std::nullopt, "u", bll::to_double(u.values[k])});
      moments.push_back(u.values[k].str());
    }
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      rows.push_back({"limit", static_cast<int>(i), static_cast<std::size_t>(opt.nodes), std::nullopt,
                      "node", q.nodes[i]});
      rows.push_back({"limit", static_cast<int>(i), static_cast<std::size_t>(opt.nodes), std::nullopt,
                      "weight", q.weights[i]});
    }
    bll::Json spec{{"command", "limit"}, {"alpha", alpha.str()}, {"c", c.str()}, {"k_max", K},
                   {"nodes", opt.nodes}, {"depth", opt.depth}};
    maybe_emit(opt, rows, wrap_summary(spec, bll::Json::array({{{"u", moments}}}), true, bll::Json::array(),
                                       bll::Tolerances{}));
  }
  return kExitOk;
}

int run_verify(const Options& opt) {
  const bll::Tolerances tol;
  const auto& checks = bll::acceptance_checks();
  for (const auto& name : opt.only) {
    const bool known = std::any_of(checks.begin(), checks.end(), [&](const auto& c) { return c.name == name; });
    if (!known) throw bll::DomainError("unknown check '" + name + "'");
  }
  bool all = true;
  bll::Json results = bll::Json::array();
  bll::Json anomalies = bll::Json::array();
  std::vector<bll::MetricRow> rows;
  bll::Json names = bll::Json::array();
  for (const auto& check : checks) {
    if (!opt.only.empty() && std::find(opt.only.begin(), opt.only.end(), check.name) == opt.only.end()) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    const auto r = check.run(tol);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %-24s %s (%.1f s)\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.summary.c_str(), secs);
    std::fflush(stdout);
    all = all && r.pass;
    names.push_back(r.name);
    results.push_back({{"name", r.name}, {"title", r.title}, {"pass", r.pass}, {"summary", r.summary},
                       {"detail", r.detail}});
    if (r.detail.contains("anomalies")) {
      for (const auto& a : r.detail["anomalies"]) anomalies.push_back(a);
    }
    rows.insert(rows.end(), r.rows.begin(), r.rows.end());
  }
  std::cout << (all ? "all checks passed" : "some checks failed") << "\n";
  maybe_emit(opt, rows, wrap_summary({{"command", "verify"}, {"checks", names}}, results, all, anomalies, tol));
  return all ? kExitOk : kExitFailed;
}

int run_report(const Options& opt) {
  std::filesystem::path path = opt.input;
  if (std::filesystem::is_directory(path)) path /= "summary.json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  bll::Json summary;
  try {
    summary = bll::Json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error("cannot parse " + path.string() + ": " + e.what());
  }
  std::cout << "report: " << path.string() << "\n";
  std::cout << "spec: " << summary.value("spec", bll::Json::object()).dump() << "\n";
  for (const auto& r : summary.value("results", bll::Json::array())) {
    if (r.contains("name")) {
      std::printf("[%s] %-24s %s\n", r.value("pass", false) ? "PASS" : "FAIL",
                  r.value("name", std::string()).c_str(), r.value("summary", std::string()).c_str());
    } else if (r.contains("orders")) {
      std::cout << r.value("kind", std::string("result")) << ":\n";
      for (const auto& o : r["orders"]) std::cout << "  " << o.dump() << "\n";
      if (r.contains("martingale")) {
        for (const auto& m : r["martingale"]) std::cout << "  martingale " << m.dump() << "\n";
      }
    } else {
      std::cout << "  " << r.dump() << "\n";
    }
  }
  for (const auto& a : summary.value("anomalies", bll::Json::array())) std::cout << "ANOMALY: " << a.dump() << "\n";
  std::cout << "pass: " << (summary.value("pass", false) ? "true" : "false") << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beta Laguerre high-temperature laboratory"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key = value configuration file; command-line flags take precedence");

  Options opt;
  app.add_option("--alpha", opt.alpha, "alpha > 1/2 (rational literals such as 3/2 allowed)")->capture_default_str();
  app.add_option("--c", opt.c, "c > 0 (rational literals allowed)")->capture_default_str();
  app.add_option("--n-particles", opt.n_particles, "number of particles N")->capture_default_str();
  app.add_option("--dt", opt.dt, "base time step")->capture_default_str();
  app.add_option("--t-max", opt.t_max, "final time")->capture_default_str();
  app.add_option("--k-max", opt.k_max, "highest moment order (default 3 for simulate, 5 otherwise)");
  app.add_option("--replicas", opt.replicas, "number of Monte Carlo replicas")->capture_default_str();
  app.add_option("--seed", opt.seed, "first seed; replicas use seed, seed+1, ...")->capture_default_str();
  app.add_option("--scheme", opt.scheme, "direct_lambda or radial_square")->capture_default_str();
  app.add_option("--init", opt.init, "initial law: point:x or uniform:b")->capture_default_str();
  app.add_option("--out", opt.out, "output directory for results.csv / summary.json");
  app.add_option("--format", opt.format, "csv, json or both")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "simulate replicas and compare moments with the exact limit");
  simulate->add_option("--grid-step", opt.grid_step, "spacing of the comparison grid")->capture_default_str();
  simulate->add_option("--measure-nodes", opt.measure_nodes,
                       "compare the final empirical CDF with the n-point quadrature of mu_T (0 = off)");
  simulate->add_flag("--longtime", opt.longtime, "run the long-time stationarity check ending at --t-max");
  simulate->add_option("--window", opt.window, "averaging window of --longtime")->capture_default_str();

  auto* moments = app.add_subcommand("moments", "solve the moment hierarchy exactly");
  moments->add_option("--at", opt.at, "evaluate m_k at these times");
  moments->add_flag("--bounds", opt.bounds, "print Lambda_k and Carleman partial sums");

  auto* limit = app.add_subcommand("limit", "moments, quadrature and Stieltjes transform of the limit measure");
  limit->add_option("--nodes", opt.nodes, "quadrature size")->capture_default_str();
  limit->add_option("--depth", opt.depth, "continued-fraction depth")->capture_default_str();

  auto* verify = app.add_subcommand("verify", "run the acceptance suite");
  verify->add_option("--only", opt.only, "run only the named checks");

  auto* report = app.add_subcommand("report", "re-render saved results");
  report->add_option("input", opt.input, "summary.json or the directory holding it")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*simulate) return run_simulate(opt);
    if (*moments) return run_moments(opt);
    if (*limit) return run_limit(opt);
    if (*verify) return run_verify(opt);
    if (*report) return run_report(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
