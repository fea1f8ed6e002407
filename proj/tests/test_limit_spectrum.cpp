#include "doctest.h"

#include <cmath>
#include <complex>

#include "bll/limit_spectrum.hpp"

using namespace bll;

TEST_CASE("Jacobi entries for alpha = c = 1") {
  const auto J = build_jacobi(1.0, 1.0, 3);
  CHECK(J.diag == std::vector<double>{2.0, 5.0, 7.0});
  CHECK(J.offdiag[0] == doctest::Approx(2.0));
  CHECK(J.offdiag[1] == doctest::Approx(3.0));
  CHECK(J.truncated(2).size() == 2);
}

TEST_CASE("walk moments of J reproduce the recursion") {
  const auto J = build_jacobi(1.0, 1.0, 6);
  const auto u = self_convolutive_moments(1.0, 1.0, 11);
  for (int k = 0; k <= 11; ++k) CHECK(jacobi_moment(J, k) == doctest::Approx(u[k]).epsilon(1e-13));
  CHECK_THROWS(jacobi_moment(J, 12));
  const auto exact = self_convolutive_moments(Rational(3, 2), Rational(1, 3), 15);
  for (int k = 0; k <= 15; ++k) {
    CHECK(jacobi_moment_exact(Rational(3, 2), Rational(1, 3), k) == exact[k]);
  }
}

TEST_CASE("Gauss quadrature") {
  const auto one = quadrature_from_jacobi(build_jacobi(1.0, 1.0, 1), 1);
  REQUIRE(one.nodes.size() == 1);
  CHECK(one.nodes[0] == doctest::Approx(2.0));
  CHECK(one.weights[0] == doctest::Approx(1.0));

  const auto q = quadrature_from_jacobi(build_jacobi(2.0, 0.5, 8), 8);
  const auto u = self_convolutive_moments(2.0, 0.5, 15);
  for (int k = 0; k <= 15; ++k) CHECK(q.moment(k) == doctest::Approx(u[k]).epsilon(1e-10));
  CHECK(q.nodes.front() > 0.0);
  CHECK(q.mean() == doctest::Approx(2.5));
  CHECK(q.cdf(q.nodes.back()) == doctest::Approx(1.0));
  CHECK(q.cdf(0.0) == 0.0);
}

TEST_CASE("resolvent") {
  const auto z = std::complex<double>(1.0, 1.0);
  const auto s = stieltjes_resolvent(1.0, 1.0, z, 400);
  CHECK(s.imag() > 0.0);
  const auto s_deeper = stieltjes_resolvent(1.0, 1.0, z, 800);
  CHECK(std::abs(s - s_deeper) < 1e-8);

  // against the quadrature of the same truncation
  const auto J = build_jacobi(1.0, 1.0, 60);
  const auto q = quadrature_from_jacobi(J, 60);
  std::complex<double> sum = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) sum += q.weights[i] / (q.nodes[i] - z);
  CHECK(std::abs(sum - resolvent(J, z)) < 1e-10);

  const auto far = stieltjes_resolvent(1.0, 1.0, {1e3, 1e3}, 400);
  const std::complex<double> w(1e3, 1e3);
  CHECK(std::abs(far - (-1.0 / w - 2.0 / (w * w))) < 1e-2 * std::abs(2.0 / (w * w)));
}

TEST_CASE("recurrence from moments") {
  MomentSequence<double> dirac{{1.0, 1.0, 1.0}};
  const auto r = recurrence_from_moments(dirac);
  REQUIRE(r.jacobi.size() == 1);
  CHECK(r.jacobi.diag[0] == doctest::Approx(1.0));

  for (int n = 1; n <= 8; ++n) {
    const auto u = self_convolutive_moments(HighReal(1), HighReal(1), 2 * n);
    const auto back = recurrence_from_moments(u).jacobi;
    const auto J = build_jacobi(1.0, 1.0, n);
    REQUIRE(back.size() == n);
    for (int i = 0; i < n; ++i) CHECK(back.diag[i] == doctest::Approx(J.diag[i]).epsilon(1e-6));
    for (int i = 0; i + 1 < n; ++i) {
      CHECK(back.offdiag[i] == doctest::Approx(J.offdiag[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("mu_t approaches nu as t grows") {
  std::vector<Rational> a(17, Rational(1));
  const auto h = solve_hierarchy(Rational(1), Rational(1), std::span<const Rational>(a), 16);
  const auto late = measure_at_time(h, 15.0, 8);
  const auto nu8 = quadrature_from_jacobi(build_jacobi(1.0, 1.0, 8), 8);
  // nearby atoms still give Kolmogorov jumps, so compare the atoms themselves
  REQUIRE(late.nodes.size() == nu8.nodes.size());
  for (std::size_t i = 0; i < late.nodes.size(); ++i) {
    CHECK(late.nodes[i] == doctest::Approx(nu8.nodes[i]).epsilon(1e-3));
    CHECK(late.weights[i] == doctest::Approx(nu8.weights[i]).epsilon(1e-3));
  }
  const auto mid = measure_at_time(h, 1.0, 8);
  CHECK(mid.mean() == doctest::Approx(2.0 - std::exp(-1.0)));
  const auto early = measure_at_time(h, 0.0, 1);
  CHECK(early.nodes[0] == doctest::Approx(1.0));
  CHECK_THROWS(measure_at_time(h, 1.0, 9));
}

TEST_CASE("empirical measures and Kolmogorov distance") {
  const std::vector<double> xs{3.0, 1.0, 2.0, 2.0};
  const auto e = DiscreteMeasure::empirical(xs);
  CHECK(e.cdf(1.0) == doctest::Approx(0.25));
  CHECK(e.cdf(2.0) == doctest::Approx(0.75));
  CHECK(e.mean() == doctest::Approx(2.0));
  CHECK(e.variance() == doctest::Approx(0.5));
  CHECK(kolmogorov_distance(e, e) == 0.0);
  const auto shifted = DiscreteMeasure::empirical(std::vector<double>{10.0});
  CHECK(kolmogorov_distance(e, shifted) == doctest::Approx(1.0));
}

TEST_CASE("smoothed density integrates to about one") {
  const auto q = quadrature_from_jacobi(build_jacobi(1.0, 1.0, 100), 100);
  std::vector<double> xs;
  for (double x = -5.0; x <= 60.0; x += 0.01) xs.push_back(x);
  const auto f = smoothed_density(q, xs);
  double mass = 0.0;
  for (double v : f) {
    CHECK(v >= 0.0);
    mass += v * 0.01;
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(0.02));
}
