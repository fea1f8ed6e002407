#include "bll/limit_spectrum.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace bll {

JacobiOperator JacobiOperator::truncated(int n) const {
  if (n < 1 || n > size()) throw DomainError("truncation size out of range");
  JacobiOperator out;
  out.diag.assign(diag.begin(), diag.begin() + n);
  out.offdiag.assign(offdiag.begin(), offdiag.begin() + (n - 1));
  return out;
}

double DiscreteMeasure::moment(int k) const {
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * std::pow(nodes[i], k);
  return s;
}

double DiscreteMeasure::cdf(double x) const {
  const auto end = std::upper_bound(nodes.begin(), nodes.end(), x);
  return std::accumulate(weights.begin(), weights.begin() + (end - nodes.begin()), 0.0);
}

double DiscreteMeasure::mean() const { return moment(1); }

double DiscreteMeasure::variance() const {
  const double mu = mean();
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * (nodes[i] - mu) * (nodes[i] - mu);
  return s;
}

DiscreteMeasure DiscreteMeasure::empirical(std::span<const double> sample) {
  if (sample.empty()) throw DomainError("empirical measure of an empty sample");
  DiscreteMeasure mu;
  mu.nodes.assign(sample.begin(), sample.end());
  std::sort(mu.nodes.begin(), mu.nodes.end());
  mu.weights.assign(mu.nodes.size(), 1.0 / static_cast<double>(mu.nodes.size()));
  return mu;
}

JacobiOperator build_jacobi(double alpha, double c, int n) {
  if (!(alpha > 0.5)) throw DomainError("build_jacobi needs alpha > 1/2");
  if (!(c > 0.0)) throw DomainError("build_jacobi needs c > 0");
  if (n < 1) throw DomainError("build_jacobi needs n >= 1");
  JacobiOperator J;
  J.diag.resize(n);
  J.offdiag.resize(n - 1);
  for (int k = 0; k < n; ++k) {
    const double main_sq = alpha + c + k;  // L[k][k]^2
    const double sub_sq = k > 0 ? c + k : 0.0;  // L[k][k-1]^2
    J.diag[k] = main_sq + sub_sq;
    if (k + 1 < n) J.offdiag[k] = std::sqrt(c + k + 1) * std::sqrt(main_sq);
  }
  return J;
}

double jacobi_moment(const JacobiOperator& J, int k) {
  if (k < 0) throw DomainError("moment order must be nonnegative");
  if (k > 2 * J.size() - 1 && k > 0) {
    throw DomainError("Jacobi truncation of size " + std::to_string(J.size()) +
                      " is too small for moment " + std::to_string(k));
  }
  const int n = J.size();
  std::vector<double> v(n, 0.0), w(n, 0.0);
  v[0] = 1.0;
  // After j applications v is supported on the first j+1 coordinates.
  for (int step = 0; step < k; ++step) {
    const int reach = std::min(n, step + 2);
    for (int i = 0; i < reach; ++i) {
      double s = J.diag[i] * v[i];
      if (i > 0) s += J.offdiag[i - 1] * v[i - 1];
      if (i + 1 < n) s += J.offdiag[i] * v[i + 1];
      w[i] = s;
    }
    std::swap(v, w);
  }
  return v[0];
}

Rational jacobi_moment_exact(const Rational& alpha, const Rational& c, int k) {
  if (k < 0) throw DomainError("moment order must be nonnegative");
  // D J D^{-1} with D = diag(prod of off-diagonals) has upper entries b_i^2 and
  // unit lower entries; (1,1) entries of powers are unchanged.
  const int n = k / 2 + 1;
  std::vector<Rational> diag(n), upper_sq(n > 1 ? n - 1 : 0);
  for (int i = 0; i < n; ++i) {
    diag[i] = alpha + c + i + (i > 0 ? Rational(c + i) : Rational(0));
    if (i + 1 < n) upper_sq[i] = (c + (i + 1)) * (alpha + c + i);
  }
  std::vector<Rational> v(n, Rational(0)), w(n);
  v[0] = 1;
  for (int step = 0; step < k; ++step) {
    for (int i = 0; i < n; ++i) {
      Rational s = diag[i] * v[i];
      if (i > 0) s += v[i - 1];
      if (i + 1 < n) s += upper_sq[i] * v[i + 1];
      w[i] = s;
    }
    std::swap(v, w);
  }
  return v[0];
}

DiscreteMeasure quadrature_from_jacobi(const JacobiOperator& J, int n) {
  if (n < 1 || n > J.size()) throw DomainError("quadrature size out of range");
  Eigen::VectorXd diag(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int i = 0; i < n; ++i) diag[i] = J.diag[i];
  for (int i = 0; i + 1 < n; ++i) sub[i] = J.offdiag[i];
  DiscreteMeasure mu;
  if (n == 1) {
    mu.nodes = {diag[0]};
    mu.weights = {1.0};
    return mu;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("tridiagonal eigensolver failed for size " + std::to_string(n));
  }
  mu.nodes.resize(n);
  mu.weights.resize(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    mu.nodes[i] = solver.eigenvalues()[i];
    const double v0 = solver.eigenvectors()(0, i);
    mu.weights[i] = v0 * v0;
    total += mu.weights[i];
  }
  for (auto& w : mu.weights) w /= total;
  return mu;
}

std::complex<double> resolvent(const JacobiOperator& J, std::complex<double> z) {
  std::complex<double> g = 0.0;
  for (int k = J.size() - 1; k >= 0; --k) {
    const double b_sq = k + 1 < J.size() ? J.offdiag[k] * J.offdiag[k] : 0.0;
    g = 1.0 / (J.diag[k] - z - b_sq * g);
  }
  return g;
}

std::complex<double> stieltjes_resolvent(double alpha, double c, std::complex<double> z,
                                         int depth) {
  if (z.imag() == 0.0) throw DomainError("Stieltjes transform needs Im z != 0");
  return resolvent(build_jacobi(alpha, c, depth), z);
}

RecurrenceResult recurrence_from_moments(const MomentSequence<HighReal>& m, double input_digits) {
  const int len = static_cast<int>(m.size());
  if (len < 3 || len % 2 == 0) {
    throw DomainError("recurrence_from_moments needs m_0..m_{2n} (odd length >= 3)");
  }
  const int n = (len - 1) / 2;
  const int dim = n + 1;

  // Upper-triangular R with H = R^T R, H[i][j] = m_{i+j}.
  std::vector<std::vector<HighReal>> r(dim, std::vector<HighReal>(dim, HighReal(0)));
  double digits_lost = 0.0;
  for (int i = 0; i < dim; ++i) {
    HighReal pivot = m[2 * i];
    for (int k = 0; k < i; ++k) pivot -= r[k][i] * r[k][i];
    // Cancellation in the pivot relative to the Hankel diagonal. The last
    // pivot is only a positivity check and is not used by the recurrence.
    const HighReal scale = abs(m[2 * i]);
    if (i < n) {
      if (!(pivot > 0)) {
        std::ostringstream msg;
        msg << "Hankel factorization lost all significant digits at order " << i
            << " (pivot " << static_cast<double>(pivot) << ")";
        throw std::runtime_error(msg.str());
      }
      const double lost = static_cast<double>(log10(scale / pivot));
      digits_lost = std::max(digits_lost, lost);
      if (lost >= input_digits) {
        std::ostringstream msg;
        msg << "Hankel factorization lost " << lost << " of " << input_digits
            << " digits at order " << i;
        throw std::runtime_error(msg.str());
      }
    } else if (pivot < -scale * pow(HighReal(10), HighReal(digits_lost + 1.0 - input_digits))) {
      throw std::runtime_error("moment sequence is not positive at the final Hankel order");
    }
    if (i == n) break;
    r[i][i] = sqrt(pivot);
    for (int j = i + 1; j < dim; ++j) {
      HighReal s = m[i + j];
      for (int k = 0; k < i; ++k) s -= r[k][i] * r[k][j];
      r[i][j] = s / r[i][i];
    }
  }

  RecurrenceResult out;
  out.digits_lost = digits_lost;
  out.jacobi.diag.resize(n);
  out.jacobi.offdiag.resize(n - 1);
  for (int j = 0; j < n; ++j) {
    HighReal a = r[j][j + 1] / r[j][j];
    if (j > 0) a -= r[j - 1][j] / r[j - 1][j - 1];
    out.jacobi.diag[j] = static_cast<double>(a);
    if (j + 1 < n) out.jacobi.offdiag[j] = static_cast<double>(r[j + 1][j + 1] / r[j][j]);
  }
  return out;
}

RecurrenceResult recurrence_from_moments(const MomentSequence<double>& m) {
  MomentSequence<HighReal> high;
  for (double v : m.values) high.values.emplace_back(v);
  return recurrence_from_moments(high, std::numeric_limits<double>::digits10);
}

DiscreteMeasure measure_at_time(const Hierarchy& h, double t, int n) {
  if (h.max_order() < 2 * n) {
    throw DomainError("measure_at_time needs a hierarchy of order >= " + std::to_string(2 * n));
  }
  MomentSequence<HighReal> m;
  const HighReal th(t);
  for (int k = 0; k <= 2 * n; ++k) m.values.push_back(eval_moment_high(h.m[k], th));
  const auto rec = recurrence_from_moments(m);
  return quadrature_from_jacobi(rec.jacobi, rec.jacobi.size());
}

double kolmogorov_distance(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  // Walk both atom lists in order; the CDF difference only changes at atoms.
  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0, worst = 0.0;
  while (i < a.nodes.size() || j < b.nodes.size()) {
    const double xa = i < a.nodes.size() ? a.nodes[i] : INFINITY;
    const double xb = j < b.nodes.size() ? b.nodes[j] : INFINITY;
    const double x = std::min(xa, xb);
    while (i < a.nodes.size() && a.nodes[i] == x) fa += a.weights[i++];
    while (j < b.nodes.size() && b.nodes[j] == x) fb += b.weights[j++];
    worst = std::max(worst, std::abs(fa - fb));
  }
  return worst;
}

std::vector<double> smoothed_density(const DiscreteMeasure& mu, std::span<const double> xs) {
  const double n = static_cast<double>(mu.nodes.size());
  const double bandwidth = 1.06 * std::sqrt(mu.variance()) * std::pow(n, -0.2);
  const double norm = 1.0 / (bandwidth * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.nodes.size(); ++i) {
      const double u = (x - mu.nodes[i]) / bandwidth;
      s += mu.weights[i] * std::exp(-0.5 * u * u);
    }
    out.push_back(norm * s);
  }
  return out;
}

}  // namespace bll
