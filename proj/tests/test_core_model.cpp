#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "bll/core_model.hpp"

using namespace bll;

TEST_CASE("validate_params derives beta = 2c/N") {
  const auto p = validate_params(1.0, 1.0, 100);
  CHECK(p.beta() == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(p.n_particles() == 100);
  CHECK(p.k1() == doctest::Approx(0.5));
  CHECK(p.k2() == doctest::Approx(0.01));
  CHECK(validate_params(1.0, 1.0, 1).beta() == 2.0);
}

TEST_CASE("validate_params rejects out-of-range inputs") {
  CHECK_THROWS_AS(validate_params(0.5, 1.0, 10), DomainError);
  CHECK_THROWS_AS(validate_params(0.2, 1.0, 10), DomainError);
  CHECK_THROWS_AS(validate_params(1.0, 0.0, 10), DomainError);
  CHECK_THROWS_AS(validate_params(1.0, -1.0, 10), DomainError);
  CHECK_THROWS_AS(validate_params(1.0, 1.0, 0), DomainError);
  CHECK_THROWS_AS(validate_params(std::nan(""), 1.0, 10), DomainError);
  CHECK_NOTHROW(validate_params(0.5000001, 1e-9, 1));
}

TEST_CASE("beta * N equals 2c to one rounding unit") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> alpha(0.51, 10.0), c(1e-3, 50.0);
  std::uniform_int_distribution<long long> n(1, 100000);
  for (int i = 0; i < 1000; ++i) {
    const auto p = validate_params(alpha(rng), c(rng), n(rng));
    const double product = p.beta() * static_cast<double>(p.n_particles());
    CHECK(std::abs(product - 2.0 * p.c()) <= 2.0 * std::numeric_limits<double>::epsilon() * 2.0 * p.c());
  }
}

TEST_CASE("normalize_state sorts and clamps round-off") {
  const auto s = normalize_state({2.0, 1.0, 3.0}, 0.0);
  CHECK(std::vector<double>(s.lambdas().begin(), s.lambdas().end()) == std::vector<double>{1, 2, 3});
  const auto z = normalize_state({-1e-15, 1.0}, 0.5);
  CHECK(z.lambdas()[0] == 0.0);
  CHECK(z.lambdas()[1] == 1.0);
  CHECK(z.time() == 0.5);
  CHECK_THROWS_AS(normalize_state({-0.5, 1.0}, 0.0), IntegrationError);
  CHECK_THROWS_AS(normalize_state({std::nan(""), 1.0}, 0.0), DomainError);
  CHECK_THROWS_AS(normalize_state({INFINITY}, 0.0), DomainError);
}

TEST_CASE("normalize_state is idempotent") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e-11, 5.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> raw(37);
    for (auto& x : raw) x = u(rng);
    const auto once = normalize_state(raw, 1.0);
    const auto twice = normalize_state({once.lambdas().begin(), once.lambdas().end()}, 1.0);
    CHECK(std::equal(once.lambdas().begin(), once.lambdas().end(), twice.lambdas().begin()));
  }
}

TEST_CASE("power sums of a state") {
  const auto s = normalize_state({1.0, 2.0, 3.0}, 0.0);
  CHECK(s.power_sum_mean(0) == 1.0);
  CHECK(s.power_sum_mean(1) == doctest::Approx(2.0));
  CHECK(s.power_sum_mean(2) == doctest::Approx(14.0 / 3.0));
}

TEST_CASE("initial conditions") {
  const auto delta = InitialCondition::point_mass(1.0);
  const auto s = delta.realize(5);
  for (double x : s.lambdas()) CHECK(x == 1.0);
  CHECK(delta.target_moments(3) == std::vector<double>{1, 1, 1, 1});

  const auto flat = InitialCondition::uniform(2.0);
  const auto a = flat.target_moments(3);
  CHECK(a[1] == doctest::Approx(1.0));
  CHECK(a[2] == doctest::Approx(4.0 / 3.0));
  CHECK(a[3] == doctest::Approx(2.0));
  const auto spread = flat.realize(1000);
  CHECK(spread.lambdas().front() > 0.0);
  CHECK(spread.lambdas().back() < 2.0);
  CHECK(spread.power_sum_mean(2) == doctest::Approx(4.0 / 3.0).epsilon(1e-5));

  const auto expl = InitialCondition::explicit_state({1.0, 2.0, 3.0});
  const auto e = expl.realize(3);
  CHECK(e.lambdas()[2] == 3.0);
  CHECK(expl.target_moments(1)[1] == doctest::Approx(2.0));
  CHECK_THROWS_AS(expl.realize(4), DomainError);
  CHECK_THROWS_AS(InitialCondition::explicit_state({-1.0}), DomainError);
  CHECK_THROWS_AS(InitialCondition::explicit_state({2.0, 1.0}), DomainError);
}

TEST_CASE("moment trace invariants") {
  MomentTrace t;
  t.grid = {0.0, 1.0};
  t.values = {{1.0, 1.0}, {1.0, 1.5}};
  CHECK_NOTHROW(check_trace(t));
  CHECK(t.max_order() == 1);
  CHECK(t.order(1)[1] == 1.5);
  CHECK_THROWS_AS(t.order(2), DomainError);
  t.values[0][1] = 0.9;
  CHECK_THROWS(check_trace(t));
  t.values[0][1] = 1.0;
  t.values[1][0] = -1.0;
  CHECK_THROWS(check_trace(t));
  t.values[1][0] = 1.0;
  t.grid = {0.0, 0.0};
  CHECK_THROWS(check_trace(t));
}
