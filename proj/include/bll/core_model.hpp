#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bll {

// Entries of a particle configuration may dip below zero by at most this much
// (round-off from the truncated Euler step) before being clamped to 0.
inline constexpr double kClampTolerance = 1e-10;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Raised when a numerical integration step cannot be completed.
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// (alpha, c, N) with beta = 2c/N. Only constructible through validate_params.
class ModelParams {
 public:
  double alpha() const { return alpha_; }
  double c() const { return c_; }
  std::size_t n_particles() const { return n_; }
  double beta() const { return beta_; }

  // Type-B multiplicities of the radial Dunkl picture: alpha = k1 + 1/2, beta = 2 k2.
  double k1() const { return alpha_ - 0.5; }
  double k2() const { return beta_ / 2.0; }

 private:
  friend ModelParams validate_params(double alpha, double c, long long n);
  ModelParams(double alpha, double c, std::size_t n)
      : alpha_(alpha), c_(c), n_(n), beta_(2.0 * c / static_cast<double>(n)) {}

  double alpha_;
  double c_;
  std::size_t n_;
  double beta_;
};

ModelParams validate_params(double alpha, double c, long long n);

// Time-stamped configuration 0 <= lambda_1 <= ... <= lambda_N.
class EnsembleState {
 public:
  double time() const { return time_; }
  std::span<const double> lambdas() const { return lambdas_; }
  std::size_t size() const { return lambdas_.size(); }

  // (1/N) sum lambda_i^k
  double power_sum_mean(int k) const;

 private:
  friend EnsembleState normalize_state(std::vector<double> raw, double t);
  EnsembleState(double t, std::vector<double> lambdas)
      : time_(t), lambdas_(std::move(lambdas)) {}

  double time_;
  std::vector<double> lambdas_;
};

// Clamps round-off negatives (|x| <= kClampTolerance) to zero and sorts.
// Throws IntegrationError on genuine negativity, DomainError on non-finite input.
EnsembleState normalize_state(std::vector<double> raw, double t);

// Initial data: either an explicit configuration, or N draws from a named
// distribution whose moments a_k are known in closed form.
struct InitialCondition {
  enum class Distribution { point_mass, uniform };

  std::optional<std::vector<double>> explicit_lambdas;
  Distribution distribution = Distribution::point_mass;
  // point_mass: location; uniform: support [0, location].
  double location = 1.0;

  static InitialCondition point_mass(double at);
  static InitialCondition uniform(double upper);
  static InitialCondition explicit_state(std::vector<double> lambdas);

  // a_0..a_K of the limiting initial measure mu_0. For an explicit state these
  // are its empirical moments.
  std::vector<double> target_moments(int K) const;

  // Deterministic N-particle configuration. uniform uses midpoint quantiles so
  // that the empirical moments converge to the target ones.
  EnsembleState realize(std::size_t n) const;

  std::string describe() const;
};

// S_k (or m_k) on a time grid; values[k][j] is order k at grid[j].
struct MomentTrace {
  std::vector<double> grid;
  std::vector<std::vector<double>> values;

  int max_order() const { return static_cast<int>(values.size()) - 1; }
  std::span<const double> order(int k) const;
};

// Checks the MomentTrace invariants (increasing grid, row 0 == 1, values >= 0).
void check_trace(const MomentTrace& trace);

}  // namespace bll
