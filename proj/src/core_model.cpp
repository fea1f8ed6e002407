#include "bll/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bll {

ModelParams validate_params(double alpha, double c, long long n) {
  if (!std::isfinite(alpha) || !(alpha > 0.5)) {
    throw DomainError("alpha must exceed 1/2, got " + std::to_string(alpha));
  }
  if (!std::isfinite(c) || !(c > 0.0)) {
    throw DomainError("c must be positive, got " + std::to_string(c));
  }
  if (n < 1) {
    throw DomainError("n_particles must be at least 1, got " + std::to_string(n));
  }
  return ModelParams(alpha, c, static_cast<std::size_t>(n));
}

double EnsembleState::power_sum_mean(int k) const {
  if (lambdas_.empty()) return 0.0;
  double sum = 0.0;
  for (double x : lambdas_) sum += std::pow(x, k);
  return sum / static_cast<double>(lambdas_.size());
}

EnsembleState normalize_state(std::vector<double> raw, double t) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    double& x = raw[i];
    if (!std::isfinite(x)) {
      throw DomainError("non-finite particle position at index " + std::to_string(i));
    }
    if (x < 0.0) {
      if (x < -kClampTolerance) {
        std::ostringstream msg;
        msg << "particle " << i << " is negative (" << x << ") at t=" << t;
        throw IntegrationError(msg.str());
      }
      x = 0.0;
    }
  }
  std::sort(raw.begin(), raw.end());
  return EnsembleState(t, std::move(raw));
}

InitialCondition InitialCondition::point_mass(double at) {
  if (!(at >= 0.0)) throw DomainError("point mass location must be nonnegative");
  InitialCondition init;
  init.distribution = Distribution::point_mass;
  init.location = at;
  return init;
}

InitialCondition InitialCondition::uniform(double upper) {
  if (!(upper > 0.0)) throw DomainError("uniform support bound must be positive");
  InitialCondition init;
  init.distribution = Distribution::uniform;
  init.location = upper;
  return init;
}

InitialCondition InitialCondition::explicit_state(std::vector<double> lambdas) {
  if (lambdas.empty()) throw DomainError("explicit initial state is empty");
  for (double x : lambdas) {
    if (!(x >= 0.0)) throw DomainError("explicit initial state has a negative entry");
  }
  if (!std::is_sorted(lambdas.begin(), lambdas.end())) {
    throw DomainError("explicit initial state must be sorted ascending");
  }
  InitialCondition init;
  init.explicit_lambdas = std::move(lambdas);
  return init;
}

std::vector<double> InitialCondition::target_moments(int K) const {
  std::vector<double> a(static_cast<std::size_t>(K) + 1, 1.0);
  if (explicit_lambdas) {
    const auto& xs = *explicit_lambdas;
    for (int k = 1; k <= K; ++k) {
      double s = 0.0;
      for (double x : xs) s += std::pow(x, k);
      a[k] = s / static_cast<double>(xs.size());
    }
    return a;
  }
  for (int k = 1; k <= K; ++k) {
    const double p = std::pow(location, k);
    a[k] = distribution == Distribution::point_mass ? p : p / (k + 1);
  }
  return a;
}

EnsembleState InitialCondition::realize(std::size_t n) const {
  if (explicit_lambdas) {
    if (explicit_lambdas->size() != n) {
      throw DomainError("explicit initial state has " + std::to_string(explicit_lambdas->size()) +
                        " particles, expected " + std::to_string(n));
    }
    return normalize_state(*explicit_lambdas, 0.0);
  }
  std::vector<double> xs(n, location);
  if (distribution == Distribution::uniform) {
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = location * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    }
  }
  return normalize_state(std::move(xs), 0.0);
}

std::string InitialCondition::describe() const {
  std::ostringstream out;
  if (explicit_lambdas) {
    out << "explicit(" << explicit_lambdas->size() << ")";
  } else if (distribution == Distribution::point_mass) {
    out << "point_mass(" << location << ")";
  } else {
    out << "uniform(0," << location << ")";
  }
  return out.str();
}

std::span<const double> MomentTrace::order(int k) const {
  if (k < 0 || k > max_order()) {
    throw DomainError("moment trace has no order " + std::to_string(k));
  }
  return values[static_cast<std::size_t>(k)];
}

void check_trace(const MomentTrace& trace) {
  if (trace.values.empty()) throw DomainError("moment trace has no rows");
  for (std::size_t j = 1; j < trace.grid.size(); ++j) {
    if (!(trace.grid[j] > trace.grid[j - 1])) {
      throw DomainError("moment trace grid is not strictly increasing");
    }
  }
  for (const auto& row : trace.values) {
    if (row.size() != trace.grid.size()) throw DomainError("moment trace row length mismatch");
    for (double v : row) {
      if (!(v >= 0.0)) throw DomainError("moment trace has a negative value");
    }
  }
  for (double v : trace.values.front()) {
    if (v != 1.0) throw DomainError("moment trace row 0 is not identically 1");
  }
}

}  // namespace bll
