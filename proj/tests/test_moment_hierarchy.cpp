#include "doctest.h"

#include <cmath>
#include <vector>

#include "bll/moment_hierarchy.hpp"

using namespace bll;

namespace {

Hierarchy delta_one(int K, Rational alpha = 1, Rational c = 1) {
  std::vector<Rational> a(K + 1, Rational(1));
  return solve_hierarchy(alpha, c, std::span<const Rational>(a), K);
}

}  // namespace

TEST_CASE("closed forms for alpha = c = 1 from a point mass at 1") {
  const auto h = delta_one(4);
  CHECK(format_exp_polynomial(h.m[1]) == "2 - e^{-t}");
  CHECK(format_exp_polynomial(h.m[2]) == "8 - 8 e^{-t} + e^{-2t}");
  CHECK(format_exp_polynomial(h.m[3]) == "44 - 66 e^{-t} + 18 e^{-2t} + 5 e^{-3t}");
  CHECK(format_exp_polynomial(h.m[4]) ==
        "296 - 592 e^{-t} + 256 e^{-2t} + 112 e^{-3t} - 71 e^{-4t}");
  for (int k = 0; k <= 4; ++k) CHECK(h.m[k].at_zero() == 1);
}

TEST_CASE("evaluation") {
  const auto h = delta_one(2);
  CHECK(eval_moment(h.m[2], std::log(2.0)) == doctest::Approx(4.25).epsilon(1e-14));
  CHECK(eval_moment(h.m[1], 0.0) == 1.0);
  CHECK(static_cast<double>(eval_moment_high(h.m[2], HighReal(0))) == 1.0);
}

TEST_CASE("the residual of the solved hierarchy is identically zero") {
  for (auto [alpha, c] : {std::pair<Rational, Rational>{1, 1}, {Rational(3, 2), Rational(1, 3)},
                          {Rational(7, 10), 5}}) {
    const auto h = delta_one(10, alpha, c);
    for (int k = 1; k <= 10; ++k) CHECK(ode_residual(h, k).is_zero());
  }
}

TEST_CASE("c = 0 reduces to independent Laguerre moments") {
  // with no interaction the stationary law is Gamma(alpha): u_k = (alpha)_k
  const auto u = convolutive_recursion(Rational(2), Rational(0), 4);
  CHECK(u.values == std::vector<Rational>{1, 2, 6, 24, 120});
  const auto h = delta_one(3, 2, 0);
  CHECK(h.m[1].coeffs == std::vector<Rational>{2, -1});
}

TEST_CASE("limiting constants equal the self-convolutive sequence") {
  const auto h = delta_one(6);
  const auto u = limiting_constants(h);
  CHECK(u.values == std::vector<Rational>{1, 2, 8, 44, 296, 2312, 20384});
}

TEST_CASE("moment bounds") {
  const std::vector<double> a{1, 1, 1, 1};
  const auto b = lambda_bounds(1.0, 1.0, a, 3);
  CHECK(b.value(1) == doctest::Approx(2.0));
  CHECK(b.value(2) == doctest::Approx(8.0));
  CHECK(b.value(3) == doctest::Approx(48.0));
  const auto carleman = carleman_diagnostic(b);
  REQUIRE(carleman.size() == 3);
  CHECK(carleman[0] == doctest::Approx(0.70711).epsilon(1e-4));
  CHECK(carleman[1] - carleman[0] == doctest::Approx(0.59460).epsilon(1e-4));
  CHECK(carleman[2] - carleman[1] == doctest::Approx(0.52456).epsilon(1e-4));
  CHECK(carleman[2] == doctest::Approx(1.82627).epsilon(1e-4));

  const std::vector<double> big(10001, 1.0);
  const auto far = carleman_diagnostic(lambda_bounds(1.0, 1.0, big, 10000));
  CHECK(far.back() > 5.0);

  // an initial moment larger than the recursion takes over
  const std::vector<double> heavy{1, 10, 1};
  CHECK(lambda_bounds(1.0, 1.0, heavy, 2).value(1) == doctest::Approx(10.0));
}

TEST_CASE("exact moments stay under their bounds") {
  const auto h = delta_one(8);
  const std::vector<double> a(9, 1.0);
  const double ratio = bound_conformance_ratio(h, lambda_bounds(1.0, 1.0, a, 8));
  CHECK(ratio <= 1.0);
  CHECK(ratio > 0.0);
}

TEST_CASE("product bound m_i m_j <= m_{i+j} along the solution") {
  const auto h = delta_one(8);
  for (double t : conformance_grid()) {
    for (int i = 1; i <= 4; ++i) {
      for (int j = i; i + j <= 8; ++j) {
        CHECK(eval_moment(h.m[i], t) * eval_moment(h.m[j], t) <=
              eval_moment(h.m[i + j], t) * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("conformance grid") {
  const auto g = conformance_grid();
  CHECK(g.size() == 256);
  CHECK(g.front() >= 0.0);
  CHECK(g.back() == doctest::Approx(15.0));
  CHECK(std::is_sorted(g.begin(), g.end()));
}

TEST_CASE("Hankel positivity") {
  const std::vector<double> dirac{1, 1, 1, 1, 1};
  CHECK(hankel_psd_check(dirac).pass);
  const std::vector<double> bad{1, 0, -1};
  CHECK_FALSE(hankel_psd_check(bad).pass);
  const auto u = convolutive_recursion(1.0, 1.0, 16);
  const auto r = hankel_psd_check(u);
  CHECK(r.pass);
  CHECK(r.hankel_order == 8);
}

TEST_CASE("rational parsing") {
  CHECK(parse_rational("3/2") == Rational(3, 2));
  CHECK(parse_rational("2") == Rational(2));
  CHECK(parse_rational("0.25") == Rational(1, 4));
  CHECK(parse_rational("-1.5") == Rational(-3, 2));
  CHECK(parse_rational("010") == Rational(10));
  CHECK(parse_rational("0") == Rational(0));
  CHECK(parse_rational("0.0625") == Rational(1, 16));
  CHECK_THROWS(parse_rational("abc"));
  CHECK_THROWS(parse_rational("1/0"));
  CHECK(to_double(Rational(1, 3)) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("invalid hierarchy inputs") {
  std::vector<Rational> a{1, 1};
  CHECK_THROWS_AS(solve_hierarchy(Rational(1), Rational(1), std::span<const Rational>(a), 3),
                  DomainError);
  a[0] = 2;
  CHECK_THROWS_AS(solve_hierarchy(Rational(1), Rational(1), std::span<const Rational>(a), 1),
                  DomainError);
}
