#include "bll/sde_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

namespace bll {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_open(std::uint64_t bits) {
  // (0, 1): 53 random bits, offset by half an ulp.
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// s_i = sum_{j != i} 1 / reg(y_i - y_j), reg(d) = sign(d) max(|d|, eps).
void pair_inverse_sums(std::span<const double> y, double eps, std::span<double> out) {
  const std::size_t n = y.size();
  std::fill(out.begin(), out.end(), 0.0);
  const double inv_eps = 1.0 / eps;
  for (std::size_t i = 0; i < n; ++i) {
    const double yi = y[i];
    double acc = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = yi - y[j];
      double inv;
      if (std::abs(d) >= eps) {
        inv = 1.0 / d;
      } else if (d == 0.0) {
        inv = 0.0;
      } else {
        inv = std::copysign(inv_eps, d);
      }
      acc += inv;
      out[j] -= inv;
    }
    out[i] += acc;
  }
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

void lambda_drift_into(std::span<const double> lam, const ModelParams& params,
                       double relative_epsilon, std::span<double> out) {
  pair_inverse_sums(lam, effective_denom_epsilon(lam, relative_epsilon), out);
  const double alpha = params.alpha();
  const double beta = params.beta();
  for (std::size_t i = 0; i < lam.size(); ++i) {
    const double l = std::max(lam[i], 0.0);
    out[i] = -l + alpha + beta * l * out[i];
  }
}

void radial_drift_into(std::span<const double> x, const ModelParams& params,
                       double relative_epsilon, std::vector<double>& squares,
                       std::span<double> out) {
  squares.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) squares[i] = x[i] * x[i];
  const double eps = effective_denom_epsilon(squares, relative_epsilon);
  pair_inverse_sums(squares, eps, out);
  const double k1 = params.k1();
  const double k2 = params.k2();
  const double x_floor = std::sqrt(eps);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = k1 / std::max(x[i], x_floor) + 2.0 * k2 * x[i] * out[i] - 0.5 * x[i];
  }
}

// Advances `x` over a step of length h driven by Brownian increments dw.
// A rejected proposal is replaced by two half steps whose increments are the
// Brownian bridge split of dw; node ids follow heap numbering (root = 1).
class BridgeRefiner {
 public:
  BridgeRefiner(const NoiseStream& noise, std::uint64_t step, int max_depth, StepStats* stats)
      : noise_(noise), step_(step), max_depth_(max_depth), stats_(stats) {}

  template <class Propose>
  std::vector<double> advance(std::vector<double> x, double h, const std::vector<double>& dw,
                              std::uint64_t node, int depth, Propose& propose) {
    if (auto next = propose(x, h, dw)) {
      if (stats_) ++stats_->accepted;
      return std::move(*next);
    }
    if (stats_) {
      ++stats_->rejected;
      stats_->deepest_halving = std::max(stats_->deepest_halving, depth + 1);
    }
    if (depth >= max_depth_) {
      std::ostringstream msg;
      msg << "step " << step_ << " still rejected after " << max_depth_ << " halvings (h=" << h
          << ")";
      throw IntegrationError(msg.str());
    }
    auto [first, second] = split(h, dw, node);
    x = advance(std::move(x), 0.5 * h, first, 2 * node, depth + 1, propose);
    return advance(std::move(x), 0.5 * h, second, 2 * node + 1, depth + 1, propose);
  }

  // Splits the step into 2^levels equal substeps along the bridge before any
  // acceptance test, so refined paths share the Brownian path of coarser ones.
  template <class Propose>
  std::vector<double> refine(std::vector<double> x, double h, const std::vector<double>& dw,
                             std::uint64_t node, int depth, int levels, Propose& propose) {
    if (levels == 0) return advance(std::move(x), h, dw, node, depth, propose);
    auto [first, second] = split(h, dw, node);
    x = refine(std::move(x), 0.5 * h, first, 2 * node, depth + 1, levels - 1, propose);
    return refine(std::move(x), 0.5 * h, second, 2 * node + 1, depth + 1, levels - 1, propose);
  }

 private:
  std::pair<std::vector<double>, std::vector<double>> split(double h, const std::vector<double>& dw,
                                                            std::uint64_t node) const {
    const double half_sd = 0.5 * std::sqrt(h);
    std::vector<double> first(dw.size());
    std::vector<double> second(dw.size());
    for (std::size_t i = 0; i < dw.size(); ++i) {
      const double mid = 0.5 * dw[i] + half_sd * noise_.gaussian(step_, 2 * node, i);
      first[i] = mid;
      second[i] = dw[i] - mid;
    }
    return {std::move(first), std::move(second)};
  }

  const NoiseStream& noise_;
  std::uint64_t step_;
  int max_depth_;
  StepStats* stats_;
};

std::vector<double> root_increments(const NoiseStream& noise, std::uint64_t step, double h,
                                    std::size_t n) {
  std::vector<double> dw(n);
  const double sd = std::sqrt(h);
  for (std::size_t i = 0; i < n; ++i) dw[i] = sd * noise.gaussian(step, 1, i);
  return dw;
}

std::vector<double> advance_lambda(std::vector<double> lam, const ModelParams& params,
                                   const SchemeConfig& config, const NoiseStream& noise,
                                   std::uint64_t step_index, double h, StepStats* stats) {
  std::vector<double> drift(lam.size());
  auto propose = [&](const std::vector<double>& x, double dt,
                     const std::vector<double>& dw) -> std::optional<std::vector<double>> {
    if (config.pair_flow) {
      drift = pair_flow_increment_lambda(x, params.beta(), dt);
      for (std::size_t i = 0; i < x.size(); ++i) {
        drift[i] = drift[i] / dt + params.alpha() - std::max(x[i], 0.0);
      }
    } else {
      lambda_drift_into(x, params, config.denom_epsilon, drift);
    }
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double xp = std::max(x[i], 0.0);
      double next = x[i] + drift[i] * dt + std::sqrt(2.0 * xp) * dw[i];
      if (config.milstein) next += 0.5 * (dw[i] * dw[i] - dt);
      if (!std::isfinite(next) || next < -kClampTolerance ||
          std::abs(next - x[i]) > config.step_fraction * (1.0 + xp)) {
        return std::nullopt;
      }
      y[i] = std::max(next, 0.0);
    }
    return y;
  };
  BridgeRefiner refiner(noise, step_index, config.max_substeps + config.refinement, stats);
  auto dw = root_increments(noise, step_index, h, lam.size());
  return refiner.refine(std::move(lam), h, dw, 1, 0, config.refinement, propose);
}

std::vector<double> advance_radial(std::vector<double> xs, const ModelParams& params,
                                   const SchemeConfig& config, const NoiseStream& noise,
                                   std::uint64_t step_index, double h, StepStats* stats) {
  std::vector<double> drift(xs.size());
  std::vector<double> squares;
  auto propose = [&](const std::vector<double>& x, double dt,
                     const std::vector<double>& dw) -> std::optional<std::vector<double>> {
    std::vector<double> y(x.size());
    if (config.pair_flow) {
      // Interaction and the k1 / X barrier by their exact flows, -X/2 by Euler.
      y = pair_flow_increment_radial(x, params.k2(), dt);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double barrier = 2.0 * params.k1() * dt;
        y[i] += barrier / (std::sqrt(x[i] * x[i] + barrier) + x[i]) - 0.5 * x[i] * dt;
        drift[i] = y[i] / dt;
      }
    } else {
      radial_drift_into(x, params, config.denom_epsilon, squares, drift);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double next = std::abs(x[i] + drift[i] * dt + dw[i]);
      if (!std::isfinite(next) || std::abs(next - x[i]) > config.step_fraction * (1.0 + x[i])) {
        return std::nullopt;
      }
      y[i] = next;
    }
    return y;
  };
  BridgeRefiner refiner(noise, step_index, config.max_substeps + config.refinement, stats);
  auto dw = root_increments(noise, step_index, h, xs.size());
  return refiner.refine(std::move(xs), h, dw, 1, 0, config.refinement, propose);
}

void record_moments(std::span<const double> lam, int K, MomentTrace& trace, std::size_t j) {
  std::vector<double> sums(static_cast<std::size_t>(K) + 1, 0.0);
  for (double l : lam) {
    double p = 1.0;
    for (int k = 0; k <= K; ++k) {
      sums[k] += p;
      p *= l;
    }
  }
  const double n = static_cast<double>(lam.size());
  trace.values[0][j] = 1.0;
  for (int k = 1; k <= K; ++k) trace.values[k][j] = sums[k] / n;
}

double trapezoid_step(double t0, double t1, double f0, double f1) {
  return 0.5 * (t1 - t0) * (f0 + f1);
}

}  // namespace

std::string to_string(Scheme scheme) {
  return scheme == Scheme::direct_lambda ? "direct_lambda" : "radial_square";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "direct_lambda") return Scheme::direct_lambda;
  if (name == "radial_square") return Scheme::radial_square;
  throw DomainError("unknown scheme '" + name + "' (expected direct_lambda or radial_square)");
}

void SchemeConfig::validate() const {
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  if (!(denom_epsilon > 0.0)) throw DomainError("denom_epsilon must be positive");
  if (max_substeps < 1) throw DomainError("max_substeps must be at least 1");
  if (!(step_fraction > 0.0)) throw DomainError("step_fraction must be positive");
  if (refinement < 0 || refinement > 16) throw DomainError("refinement must lie in [0, 16]");
}

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL))) {}

double NoiseStream::gaussian(std::uint64_t step, std::uint64_t node,
                             std::uint64_t particle) const {
  const std::uint64_t base = splitmix64(splitmix64(splitmix64(key_ ^ step) ^ node) ^ particle);
  const double u1 = unit_open(splitmix64(base));
  const double u2 = unit_open(splitmix64(base ^ 0x632be59bd9b4e019ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double NoiseStream::next() {
  const double z = gaussian(~0ULL, 0, position_);
  ++position_;
  return z;
}

RadialState radial_from_lambda(const EnsembleState& state) {
  RadialState out;
  out.time = state.time();
  out.x.reserve(state.size());
  for (double l : state.lambdas()) out.x.push_back(std::sqrt(2.0 * l));
  return out;
}

EnsembleState lambda_from_radial(const RadialState& state) {
  std::vector<double> lam;
  lam.reserve(state.x.size());
  for (double x : state.x) lam.push_back(0.5 * x * x);
  return normalize_state(std::move(lam), state.time);
}

double effective_denom_epsilon(std::span<const double> values, double relative_epsilon) {
  return relative_epsilon * (1.0 + std::abs(mean_of(values)));
}

// Both two-body flows reduce to the same row kernel: for the gap d = y - v[j]
// and g = scale * (y + v[j]) + offset, the gap moves by
// sign(d) (sqrt(d^2 + g) - |d|) / 2. Rounding in the difference costs at most an
// ulp of |d|, the resolution of the positions themselves. Exact ties contribute
// nothing.
#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__)
#define BLL_KERNEL_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define BLL_KERNEL_CLONES
#endif

BLL_KERNEL_CLONES
static void pair_row(const double* __restrict v, double* __restrict row, std::size_t count,
                     double y, double scale, double offset) {
  for (std::size_t j = 0; j < count; ++j) {
    const double d = y - v[j];
    const double g = scale * (y + v[j]) + offset;
    const double q = 0.5 * (std::sqrt(d * d + g) - std::abs(d));
    row[j] = std::copysign(q, d) * static_cast<double>(d != 0.0);
  }
}

// Subtracts row from inc and returns the row sum, with eight partial sums so
// the reduction vectorizes.
BLL_KERNEL_CLONES
static double scatter_row(const double* __restrict row, double* __restrict inc,
                          std::size_t count) {
  double part[8] = {};
  std::size_t j = 0;
  for (; j + 8 <= count; j += 8) {
    for (int l = 0; l < 8; ++l) {
      part[l] += row[j + l];
      inc[j + l] -= row[j + l];
    }
  }
  double tail = 0.0;
  for (; j < count; ++j) {
    tail += row[j];
    inc[j] -= row[j];
  }
  return ((part[0] + part[1]) + (part[2] + part[3])) + ((part[4] + part[5]) + (part[6] + part[7])) +
         tail;
}

std::vector<double> pair_flow_increment_lambda(std::span<const double> lambdas, double beta,
                                               double h) {
  // Two-body flow: s = l_i + l_j grows at rate beta and d = l_i - l_j obeys
  // (d^2)' = 2 beta s, so d(h) = sign(d) sqrt(d^2 + 2 beta s h + beta^2 h^2).
  const std::size_t n = lambdas.size();
  std::vector<double> inc(n, 0.0);
  const double shift = 0.5 * beta * h;
  const double bh = beta * h;
  std::vector<double> pos(n), row(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = std::max(lambdas[i], 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    pair_row(pos.data() + i + 1, row.data() + i + 1, n - i - 1, pos[i], 2.0 * bh, bh * bh);
    inc[i] += scatter_row(row.data() + i + 1, inc.data() + i + 1, n - i - 1);
  }
  for (auto& v : inc) v += shift * static_cast<double>(n - 1);
  return inc;
}

std::vector<double> pair_flow_increment_radial(std::span<const double> xs, double k2, double h) {
  // In squares: v = X_i^2 + X_j^2 grows at rate 4 k2 and u = X_i^2 - X_j^2
  // obeys (u^2)' = 8 k2 v. Increments are accumulated on X_i^2 first.
  const std::size_t n = xs.size();
  std::vector<double> sq_inc(n, 0.0), sq(n), row(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = xs[i] * xs[i];
  const double kh = 8.0 * k2 * h;
  for (std::size_t i = 0; i < n; ++i) {
    pair_row(sq.data() + i + 1, row.data() + i + 1, n - i - 1, sq[i], kh, kh * 2.0 * k2 * h);
    sq_inc[i] += scatter_row(row.data() + i + 1, sq_inc.data() + i + 1, n - i - 1);
  }
  std::vector<double> inc(n);
  const double shift = 2.0 * k2 * h * static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double target = std::max(xs[i] * xs[i] + sq_inc[i] + shift, 0.0);
    inc[i] = std::sqrt(target) - xs[i];
  }
  return inc;
}

std::vector<double> drift_lambda(const EnsembleState& state, const ModelParams& params,
                                 double relative_epsilon) {
  std::vector<double> out(state.size());
  lambda_drift_into(state.lambdas(), params, relative_epsilon, out);
  return out;
}

std::vector<double> drift_radial(const RadialState& state, const ModelParams& params,
                                 double relative_epsilon) {
  std::vector<double> out(state.x.size());
  std::vector<double> squares;
  radial_drift_into(state.x, params, relative_epsilon, squares, out);
  return out;
}

EnsembleState step_lambda(const EnsembleState& state, const ModelParams& params,
                          const SchemeConfig& config, const NoiseStream& noise,
                          std::uint64_t step_index, double h, StepStats* stats) {
  if (h <= 0.0) h = config.dt;
  std::vector<double> lam(state.lambdas().begin(), state.lambdas().end());
  lam = advance_lambda(std::move(lam), params, config, noise, step_index, h, stats);
  return normalize_state(std::move(lam), state.time() + h);
}

RadialState step_radial(const RadialState& state, const ModelParams& params,
                        const SchemeConfig& config, const NoiseStream& noise,
                        std::uint64_t step_index, double h, StepStats* stats) {
  if (h <= 0.0) h = config.dt;
  RadialState out;
  out.x = advance_radial(state.x, params, config, noise, step_index, h, stats);
  std::sort(out.x.begin(), out.x.end());
  out.time = state.time + h;
  return out;
}

PathResult simulate_path(const ModelParams& params, const InitialCondition& init,
                         std::span<const double> grid, const SchemeConfig& config, int K,
                         std::uint64_t replica, bool keep_states) {
  config.validate();
  if (K < 0) throw DomainError("moment order K must be nonnegative");
  if (grid.empty() || grid.front() != 0.0) throw DomainError("time grid must start at 0");
  for (std::size_t j = 1; j < grid.size(); ++j) {
    if (!(grid[j] > grid[j - 1])) throw DomainError("time grid must be strictly increasing");
  }

  PathResult result;
  result.trace.grid.assign(grid.begin(), grid.end());
  result.trace.values.assign(static_cast<std::size_t>(K) + 1,
                             std::vector<double>(grid.size(), 0.0));

  const NoiseStream noise(config.seed, replica);
  EnsembleState state = init.realize(params.n_particles());
  RadialState radial;
  if (config.scheme == Scheme::radial_square) radial = radial_from_lambda(state);

  record_moments(state.lambdas(), K, result.trace, 0);
  if (keep_states) result.states.push_back(state);

  std::uint64_t step_index = 0;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double span = grid[j] - grid[j - 1];
    const auto n_steps =
        static_cast<std::uint64_t>(std::max(1.0, std::ceil(span / config.dt - 1e-9)));
    const double h = span / static_cast<double>(n_steps);
    for (std::uint64_t s = 0; s < n_steps; ++s, ++step_index) {
      if (config.scheme == Scheme::direct_lambda) {
        state = step_lambda(state, params, config, noise, step_index, h, &result.stats);
      } else {
        radial = step_radial(radial, params, config, noise, step_index, h, &result.stats);
      }
    }
    if (config.scheme == Scheme::radial_square) {
      radial.time = grid[j];
      state = lambda_from_radial(radial);
    } else {
      state = normalize_state({state.lambdas().begin(), state.lambdas().end()}, grid[j]);
    }
    record_moments(state.lambdas(), K, result.trace, j);
    if (keep_states) result.states.push_back(state);
  }
  return result;
}

double drift_functional(std::span<const double> s, const ModelParams& params, int k) {
  if (k < 1 || static_cast<int>(s.size()) < k) {
    throw DomainError("drift functional of order " + std::to_string(k) + " needs S_0..S_" +
                      std::to_string(k - 1));
  }
  const double kk = k;
  const double n = static_cast<double>(params.n_particles());
  double conv = 0.0;
  for (int i = 0; i < k; ++i) conv += s[i] * s[k - 1 - i];
  return (kk * (params.alpha() + kk - 1.0) - params.c() * kk * kk / n) * s[k - 1] +
         params.c() * kk * conv;
}

std::vector<double> martingale_residual(const MomentTrace& trace, const ModelParams& params,
                                        int k) {
  if (k < 1 || trace.max_order() < k) {
    throw DomainError("martingale residual of order " + std::to_string(k) +
                      " needs a trace with orders up to " + std::to_string(k));
  }
  const auto& grid = trace.grid;
  const auto sk = trace.order(k);
  std::vector<double> column(static_cast<std::size_t>(k));
  auto f_at = [&](std::size_t j) {
    for (int i = 0; i < k; ++i) column[i] = trace.values[i][j];
    return drift_functional(column, params, k);
  };

  std::vector<double> residual(grid.size(), 0.0);
  double int_s = 0.0;
  double int_f = 0.0;
  double f_prev = f_at(0);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double f_now = f_at(j);
    int_s += trapezoid_step(grid[j - 1], grid[j], sk[j - 1], sk[j]);
    int_f += trapezoid_step(grid[j - 1], grid[j], f_prev, f_now);
    residual[j] = sk[j] - sk[0] + k * int_s - int_f;
    f_prev = f_now;
  }
  return residual;
}

double quadratic_variation(const MomentTrace& trace, const ModelParams& params, int k) {
  const int order = 2 * k - 1;
  if (k < 1 || trace.max_order() < order) {
    throw DomainError("quadratic variation of M_" + std::to_string(k) + " needs order " +
                      std::to_string(order));
  }
  const auto s = trace.order(order);
  double integral = 0.0;
  for (std::size_t j = 1; j < trace.grid.size(); ++j) {
    integral += trapezoid_step(trace.grid[j - 1], trace.grid[j], s[j - 1], s[j]);
  }
  return 2.0 * k * k / static_cast<double>(params.n_particles()) * integral;
}

std::vector<double> uniform_grid(double t_max, double spacing) {
  if (!(t_max > 0.0) || !(spacing > 0.0)) throw DomainError("grid needs t_max, spacing > 0");
  const auto n = static_cast<std::size_t>(std::llround(std::ceil(t_max / spacing - 1e-9)));
  std::vector<double> grid(n + 1);
  for (std::size_t j = 0; j <= n; ++j) grid[j] = t_max * static_cast<double>(j) / n;
  return grid;
}

}  // namespace bll
