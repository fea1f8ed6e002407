#pragma once

#include <complex>
#include <span>
#include <vector>

#include "bll/moment_hierarchy.hpp"

namespace bll {

// Symmetric tridiagonal truncation: diag[0..n-1], offdiag[0..n-2] > 0.
struct JacobiOperator {
  std::vector<double> diag;
  std::vector<double> offdiag;

  int size() const { return static_cast<int>(diag.size()); }
  JacobiOperator truncated(int n) const;
};

// Atoms x_i >= 0 with weights w_i >= 0, sum w = 1, nodes sorted ascending.
struct DiscreteMeasure {
  std::vector<double> nodes;
  std::vector<double> weights;

  double moment(int k) const;
  double cdf(double x) const;
  double mean() const;
  double variance() const;
  static DiscreteMeasure empirical(std::span<const double> sample);
};

// Moments u_k of the limit measure nu_{alpha,c} from the self-convolutive
// recursion u_k = (alpha + k - 1) u_{k-1} + c sum_{i<k} u_i u_{k-1-i}.
template <class T>
MomentSequence<T> self_convolutive_moments(const T& alpha, const T& c, int K) {
  if (K < 0) throw DomainError("moment order must be nonnegative");
  return convolutive_recursion(alpha, c, K);
}

// J = L L^T with L lower bidiagonal, L[k][k] = sqrt(alpha + c + k),
// L[k+1][k] = sqrt(c + k + 1) (0-based).
JacobiOperator build_jacobi(double alpha, double c, int n);

// (J^k)(1,1) by repeated application to e_1. Needs k <= 2 J.size() - 1,
// i.e. the truncation must not be felt by the walk.
double jacobi_moment(const JacobiOperator& J, int k);

// Exact (J_{alpha,c}^k)(1,1): the walk only sees diagonal entries and squared
// off-diagonals, both rational when alpha and c are.
Rational jacobi_moment_exact(const Rational& alpha, const Rational& c, int k);

// Gauss quadrature of the n x n truncation: eigenvalues and squared first
// eigenvector components.
DiscreteMeasure quadrature_from_jacobi(const JacobiOperator& J, int n);

// (J - z)^{-1}(1,1) of a truncation by the bottom-up continued fraction.
std::complex<double> resolvent(const JacobiOperator& J, std::complex<double> z);

// Approximates S(z) = int nu_{alpha,c}(dx) / (x - z) with a depth-n truncation.
std::complex<double> stieltjes_resolvent(double alpha, double c, std::complex<double> z, int depth);

struct RecurrenceResult {
  JacobiOperator jacobi;
  double digits_lost = 0.0;  // worst cancellation in the Hankel Cholesky pivots
};

// Three-term recurrence coefficients from m_0..m_{2n} by Cholesky factorization
// of the (n+1) x (n+1) Hankel matrix in extended precision. `input_digits` is the
// number of trustworthy decimal digits in the inputs; the call fails when the
// factorization cancels that many. Returns an n x n operator.
RecurrenceResult recurrence_from_moments(const MomentSequence<HighReal>& m,
                                         double input_digits = 48.0);
RecurrenceResult recurrence_from_moments(const MomentSequence<double>& m);

// Quadrature of mu_t, the measure with moments m_k(t), from a solved hierarchy
// of order >= 2n.
DiscreteMeasure measure_at_time(const Hierarchy& h, double t, int n);

// sup_x |F_a(x) - F_b(x)| for two discrete measures (right-continuous CDFs).
double kolmogorov_distance(const DiscreteMeasure& a, const DiscreteMeasure& b);

// Gaussian-kernel smoothing of a quadrature with bandwidth 1.06 sigma n^{-1/5}.
std::vector<double> smoothed_density(const DiscreteMeasure& mu, std::span<const double> xs);

}  // namespace bll
