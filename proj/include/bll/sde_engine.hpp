#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bll/core_model.hpp"

namespace bll {

enum class Scheme { direct_lambda, radial_square };

std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);

struct SchemeConfig {
  double dt = 1e-3;
  Scheme scheme = Scheme::direct_lambda;
  // Relative regularization of pairwise denominators: the effective floor on
  // |lambda_i - lambda_j| is denom_epsilon * (1 + mean lambda).
  double denom_epsilon = 1e-12;
  // Maximum number of successive halvings of a rejected step.
  int max_substeps = 24;
  // A substep is rejected when a particle moves more than step_fraction * (1 + x_i).
  double step_fraction = 0.5;
  // Integrate each pairwise repulsion with its exact two-body flow instead of
  // an explicit Euler kick. Euler kicks overshoot particle gaps when beta is small.
  bool pair_flow = true;
  // Milstein correction for the sqrt(2 lambda) noise of the direct scheme:
  // (sqrt(lambda) + dW / sqrt(2))^2 + (alpha - 1/2) h stays nonnegative for
  // alpha >= 1/2, where Euler undershoots zero at the Feller boundary.
  bool milstein = true;
  // Each noise step of size dt is integrated as 2^refinement substeps whose
  // Brownian increments come from bridge interpolation of the coarse one.
  int refinement = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Counter-based Gaussian source: the value is a pure function of
// (seed, stream, step, node, particle), so a path does not depend on how
// replicas are scheduled.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed, std::uint64_t stream = 0);

  double gaussian(std::uint64_t step, std::uint64_t node, std::uint64_t particle) const;

  // Sequential access, for callers that only need a stream of draws.
  double next();
  std::uint64_t position() const { return position_; }

 private:
  std::uint64_t key_;
  std::uint64_t position_ = 0;
};

// Positive particle configuration of the radial type-B Dunkl process,
// sorted ascending; lambda_i = X_i^2 / 2.
struct RadialState {
  double time = 0.0;
  std::vector<double> x;
};

RadialState radial_from_lambda(const EnsembleState& state);
EnsembleState lambda_from_radial(const RadialState& state);

// Floor applied to pairwise denominators for a given configuration.
double effective_denom_epsilon(std::span<const double> values, double relative_epsilon);

// -lambda_i + alpha + (beta/2) sum_{j != i} 2 lambda_i / (lambda_i - lambda_j),
// each denominator replaced by sign(d) * max(|d|, eps). Exact ties have
// sign 0 and contribute nothing.
std::vector<double> drift_lambda(const EnsembleState& state, const ModelParams& params,
                                 double relative_epsilon = SchemeConfig{}.denom_epsilon);

// k1/X_i + k2 sum_{j != i} 2 X_i / (X_i^2 - X_j^2) - X_i / 2, same regularization.
std::vector<double> drift_radial(const RadialState& state, const ModelParams& params,
                                 double relative_epsilon = SchemeConfig{}.denom_epsilon);

// Bookkeeping of accepted and rejected substeps along a path.
struct StepStats {
  std::uint64_t accepted = 0;
  std::uint64_t rejected = 0;
  int deepest_halving = 0;
};

// Increment of the pure interaction flow over time h,
//   d lambda_i = beta sum_{j != i} lambda_i / (lambda_i - lambda_j) dt,
// built by superposing the exact solution of every two-particle subsystem.
// For separated pairs it agrees with the Euler kick to O(h^2).
std::vector<double> pair_flow_increment_lambda(std::span<const double> lambdas, double beta,
                                               double h);

// Same for d X_i = k2 sum_{j != i} 2 X_i / (X_i^2 - X_j^2) dt.
std::vector<double> pair_flow_increment_radial(std::span<const double> xs, double k2, double h);

// One full-truncation Euler-Maruyama step of size h = config.dt (or `h` when
// given). Rejected substeps are split in two along a Brownian bridge, so the
// refined path still uses the same Brownian increment over the step.
EnsembleState step_lambda(const EnsembleState& state, const ModelParams& params,
                          const SchemeConfig& config, const NoiseStream& noise,
                          std::uint64_t step_index, double h = 0.0, StepStats* stats = nullptr);

// Euler-Maruyama for the radial SDE with unit additive noise; nonpositive
// proposals are reflected to |X'|.
RadialState step_radial(const RadialState& state, const ModelParams& params,
                        const SchemeConfig& config, const NoiseStream& noise,
                        std::uint64_t step_index, double h = 0.0, StepStats* stats = nullptr);

struct PathResult {
  MomentTrace trace;
  std::vector<EnsembleState> states;  // one per grid time when requested
  StepStats stats;
};

// Simulates one replica on `grid` (grid[0] == 0, strictly increasing) and
// records S_0..S_K at every grid time. Steps between grid points are uniform
// and no longer than config.dt.
PathResult simulate_path(const ModelParams& params, const InitialCondition& init,
                         std::span<const double> grid, const SchemeConfig& config, int K,
                         std::uint64_t replica = 0, bool keep_states = false);

// F_k = (k(alpha + k - 1) - c k^2 / N) S_{k-1} + c k sum_{i<k} S_i S_{k-1-i}
double drift_functional(std::span<const double> s, const ModelParams& params, int k);

// M_k(t) = S_k(t) - S_k(0) + k int_0^t S_k - int_0^t F_k, trapezoid on the grid.
std::vector<double> martingale_residual(const MomentTrace& trace, const ModelParams& params,
                                        int k);

// (2 k^2 / N) int_0^T S_{2k-1} ds along the trace, the quadratic variation of M_k.
double quadratic_variation(const MomentTrace& trace, const ModelParams& params, int k);

std::vector<double> uniform_grid(double t_max, double spacing);

}  // namespace bll
