#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "bll/sde_engine.hpp"

using namespace bll;

namespace {

SchemeConfig config_with(Scheme scheme, double dt, std::uint64_t seed) {
  SchemeConfig cfg;
  cfg.scheme = scheme;
  cfg.dt = dt;
  cfg.seed = seed;
  return cfg;
}

double final_s(const PathResult& r, int k) { return r.trace.values[k].back(); }

}  // namespace

TEST_CASE("lambda drift examples") {
  const auto one = validate_params(1.0, 1.0, 1);
  const auto d1 = drift_lambda(normalize_state({3.0}, 0.0), one);
  REQUIRE(d1.size() == 1);
  CHECK(d1[0] == doctest::Approx(-2.0));

  const auto two = validate_params(1.0, 1.0, 2);
  const auto d2 = drift_lambda(normalize_state({1.0, 2.0}, 0.0), two);
  CHECK(d2[0] == doctest::Approx(-1.0));
  CHECK(d2[1] == doctest::Approx(1.0));

  const auto tie = drift_lambda(normalize_state({1.5, 1.5}, 0.0), two);
  for (double v : tie) {
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(-0.5));
  }
}

TEST_CASE("radial drift vanishes at sqrt(2 k1) for one particle") {
  const auto p = validate_params(1.7, 1.0, 1);
  RadialState s{0.0, {std::sqrt(2.0 * p.k1())}};
  CHECK(std::abs(drift_radial(s, p)[0]) < 1e-14);
}

TEST_CASE("radial and lambda coordinates") {
  const auto e = lambda_from_radial(RadialState{0.25, {1.0, 2.0}});
  CHECK(e.lambdas()[0] == doctest::Approx(0.5));
  CHECK(e.lambdas()[1] == doctest::Approx(2.0));
  CHECK(e.time() == 0.25);
  const auto back = radial_from_lambda(e);
  CHECK(back.x[0] == doctest::Approx(1.0));
  CHECK(back.x[1] == doctest::Approx(2.0));
}

TEST_CASE("pair flow matches an Euler kick for a separated pair") {
  const std::vector<double> v{1.0, 3.0};
  const double beta = 0.5, h = 1e-5;
  const auto inc = pair_flow_increment_lambda(v, beta, h);
  CHECK(inc[0] == doctest::Approx(h * beta * 1.0 / (1.0 - 3.0)).epsilon(1e-4));
  CHECK(inc[1] == doctest::Approx(h * beta * 3.0 / (3.0 - 1.0)).epsilon(1e-4));
  // the exact two-body flow never crosses particles, even for a huge step
  const auto big = pair_flow_increment_lambda(v, beta, 100.0);
  CHECK(v[0] + big[0] >= 0.0);
  CHECK(v[0] + big[0] < v[1] + big[1]);
}

TEST_CASE("noise stream is deterministic with unit variance") {
  const NoiseStream a(42), b(42), c(43);
  CHECK(a.gaussian(5, 1, 7) == b.gaussian(5, 1, 7));
  CHECK(a.gaussian(5, 1, 7) != c.gaussian(5, 1, 7));
  CHECK(a.gaussian(5, 1, 7) != a.gaussian(5, 1, 8));
  NoiseStream s(9);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = s.next();
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(s.position() == static_cast<std::uint64_t>(n));
}

TEST_CASE("scheme config validation") {
  SchemeConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.dt = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.refinement = 17;
  CHECK_THROWS(cfg.validate());
  CHECK(parse_scheme(to_string(Scheme::radial_square)) == Scheme::radial_square);
  CHECK_THROWS(parse_scheme("leapfrog"));
}

TEST_CASE("same seed gives a bit-identical path") {
  const auto p = validate_params(1.0, 1.0, 50);
  const auto grid = uniform_grid(1.0, 0.25);
  for (Scheme s : {Scheme::direct_lambda, Scheme::radial_square}) {
    const auto cfg = config_with(s, 1e-2, 11);
    const auto a = simulate_path(p, InitialCondition::point_mass(1.0), grid, cfg, 3, 2);
    const auto b = simulate_path(p, InitialCondition::point_mass(1.0), grid, cfg, 3, 2);
    CHECK(a.trace.values == b.trace.values);
    const auto other = simulate_path(p, InitialCondition::point_mass(1.0), grid, cfg, 3, 3);
    CHECK(other.trace.values != a.trace.values);
  }
}

TEST_CASE("paths stay nonnegative and ordered") {
  const auto p = validate_params(0.55, 2.0, 40);
  const auto grid = uniform_grid(2.0, 0.5);
  for (Scheme s : {Scheme::direct_lambda, Scheme::radial_square}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto r = simulate_path(p, InitialCondition::uniform(0.2), grid,
                                   config_with(s, 1e-2, seed), 2, 0, true);
      REQUIRE(r.states.size() == grid.size());
      for (const auto& st : r.states) {
        const auto l = st.lambdas();
        CHECK(std::is_sorted(l.begin(), l.end()));
        CHECK(l.front() >= 0.0);
      }
      CHECK_NOTHROW(check_trace(r.trace));
    }
  }
}

TEST_CASE("power sums satisfy the correlation inequality S_i S_j <= S_{i+j}") {
  const auto p = validate_params(1.0, 1.0, 30);
  const auto grid = uniform_grid(1.0, 0.5);
  const auto r = simulate_path(p, InitialCondition::uniform(3.0), grid,
                               config_with(Scheme::direct_lambda, 1e-2, 4), 4);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    for (int a = 1; a <= 2; ++a) {
      for (int b = a; a + b <= 4; ++b) {
        CHECK(r.trace.values[a][j] * r.trace.values[b][j] <=
              r.trace.values[a + b][j] * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("refining the step along the same Brownian path converges") {
  // Strong convergence is only fast while particles cannot collide (beta >= 1),
  // so this uses one and two particles.
  const std::vector<double> grid{0.0, 1.0};
  for (auto [alpha, c, n] : {std::tuple{3.0, 1.0, 1LL}, std::tuple{1.0, 1.0, 2LL}}) {
    const auto p = validate_params(alpha, c, n);
    std::vector<double> gap(3, 0.0);
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
      std::vector<double> s1;
      for (int level = 0; level <= 3; ++level) {
        auto cfg = config_with(Scheme::direct_lambda, 0.05, seed);
        cfg.refinement = level;
        s1.push_back(final_s(simulate_path(p, InitialCondition::point_mass(1.0), grid, cfg, 1), 1));
      }
      for (int l = 0; l < 3; ++l) gap[l] += std::abs(s1[l] - s1[l + 1]);
    }
    CHECK(gap[2] < 0.6 * gap[0]);
  }
}

TEST_CASE("a single particle relaxes at the Laguerre rate") {
  // N = 1, alpha = 1: d E lambda = (alpha + c - c/N - E lambda) dt, so from 3
  // the mean is 1 + 2 e^{-t}.
  const auto p = validate_params(1.0, 1.0, 1);
  const std::vector<double> grid{0.0, 0.5, 1.0};
  const int replicas = 4000;
  std::vector<double> mean(grid.size(), 0.0);
  for (int r = 0; r < replicas; ++r) {
    const auto path = simulate_path(p, InitialCondition::point_mass(3.0), grid,
                                    config_with(Scheme::direct_lambda, 1e-2, 5), 1, r);
    for (std::size_t j = 0; j < grid.size(); ++j) mean[j] += path.trace.values[1][j] / replicas;
  }
  for (std::size_t j = 0; j < grid.size(); ++j) {
    // sd of lambda(t) is below 2 here, so 5 standard errors is about 0.16
    CHECK(std::abs(mean[j] - (1.0 + 2.0 * std::exp(-grid[j]))) < 0.16);
  }
}

TEST_CASE("both schemes agree in mean") {
  const auto p = validate_params(1.0, 1.0, 100);
  const std::vector<double> grid{0.0, 1.0};
  double direct = 0.0, radial = 0.0;
  const int replicas = 30;
  for (int r = 0; r < replicas; ++r) {
    direct += final_s(simulate_path(p, InitialCondition::point_mass(1.0), grid,
                                    config_with(Scheme::direct_lambda, 1e-2, 1), 2, r), 2) / replicas;
    radial += final_s(simulate_path(p, InitialCondition::point_mass(1.0), grid,
                                    config_with(Scheme::radial_square, 1e-2, 2), 2, r), 2) / replicas;
  }
  CHECK(direct == doctest::Approx(radial).epsilon(0.08));
}

TEST_CASE("relabelling the initial particles does not change the law") {
  // The state is sorted on entry, so a permuted explicit start is the same start.
  const auto p = validate_params(1.0, 1.0, 3);
  const std::vector<double> grid{0.0, 0.5};
  const auto cfg = config_with(Scheme::direct_lambda, 1e-2, 3);
  const auto a = simulate_path(p, InitialCondition::explicit_state({0.5, 1.0, 2.0}), grid, cfg, 2);
  const auto s = normalize_state({2.0, 0.5, 1.0}, 0.0);
  const auto b = simulate_path(
      p, InitialCondition::explicit_state({s.lambdas().begin(), s.lambdas().end()}), grid, cfg, 2);
  CHECK(a.trace.values == b.trace.values);
}

TEST_CASE("drift functional and martingale residual") {
  const auto p = validate_params(1.0, 1.0, 10);
  const std::vector<double> ones{1.0, 1.0, 1.0};
  CHECK(drift_functional(ones, p, 1) == doctest::Approx(1.0 + 1.0 - 0.1));

  // S_1 solving the mean ODE exactly: S_1' = -S_1 + F_1 with F_1 constant.
  const double f1 = drift_functional(ones, p, 1);
  MomentTrace t;
  t.grid = uniform_grid(2.0, 1e-3);
  t.values.assign(2, std::vector<double>(t.grid.size(), 1.0));
  for (std::size_t j = 0; j < t.grid.size(); ++j) {
    t.values[1][j] = f1 + (1.0 - f1) * std::exp(-t.grid[j]);
  }
  const auto m = martingale_residual(t, p, 1);
  for (double v : m) CHECK(std::abs(v) < 1e-6);
  CHECK(quadratic_variation(t, p, 1) > 0.0);
}

TEST_CASE("uniform grid") {
  const auto g = uniform_grid(1.0, 0.25);
  REQUIRE(g.size() == 5);
  CHECK(g.back() == 1.0);
}
