#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bll/core_model.hpp"

namespace bll {

using Rational = boost::multiprecision::cpp_rational;
// ~166 significant bits; used where exact rationals are unavailable or where
// floating evaluation would cancel catastrophically.
using HighReal = boost::multiprecision::cpp_bin_float_50;

// t -> sum_i coeffs[i] e^{-i t}. coeffs[0] is the t -> infinity limit.
template <class T>
struct BasicExpPolynomial {
  std::vector<T> coeffs;

  int order() const { return static_cast<int>(coeffs.size()) - 1; }

  T at_zero() const {
    T sum = 0;
    for (const auto& c : coeffs) sum += c;
    return sum;
  }

  BasicExpPolynomial derivative() const {
    BasicExpPolynomial d{coeffs};
    for (std::size_t i = 0; i < d.coeffs.size(); ++i) d.coeffs[i] *= -static_cast<int>(i);
    return d;
  }

  bool is_zero() const {
    return std::all_of(coeffs.begin(), coeffs.end(), [](const T& c) { return c == 0; });
  }

  BasicExpPolynomial& operator+=(const BasicExpPolynomial& rhs) {
    if (rhs.coeffs.size() > coeffs.size()) coeffs.resize(rhs.coeffs.size(), T(0));
    for (std::size_t i = 0; i < rhs.coeffs.size(); ++i) coeffs[i] += rhs.coeffs[i];
    return *this;
  }
  BasicExpPolynomial& operator*=(const T& s) {
    for (auto& c : coeffs) c *= s;
    return *this;
  }
  friend BasicExpPolynomial operator+(BasicExpPolynomial a, const BasicExpPolynomial& b) {
    return a += b;
  }
  friend BasicExpPolynomial operator*(BasicExpPolynomial a, const T& s) { return a *= s; }
  friend BasicExpPolynomial operator*(const BasicExpPolynomial& a, const BasicExpPolynomial& b) {
    BasicExpPolynomial out;
    if (a.coeffs.empty() || b.coeffs.empty()) return out;
    out.coeffs.assign(a.coeffs.size() + b.coeffs.size() - 1, T(0));
    for (std::size_t i = 0; i < a.coeffs.size(); ++i) {
      for (std::size_t j = 0; j < b.coeffs.size(); ++j) out.coeffs[i + j] += a.coeffs[i] * b.coeffs[j];
    }
    return out;
  }
};

using ExpPolynomial = BasicExpPolynomial<Rational>;

// m_0..m_K solving m_k' = -k m_k + k[(alpha + k - 1) m_{k-1} + c sum_{i<k} m_i m_{k-1-i}],
// m_k(0) = a_k, together with the parameters that produced them.
template <class T>
struct BasicHierarchy {
  T alpha;
  T c;
  std::vector<BasicExpPolynomial<T>> m;

  int max_order() const { return static_cast<int>(m.size()) - 1; }
};

using Hierarchy = BasicHierarchy<Rational>;

// Finite moment sequence, values[0] = 1.
template <class T>
struct MomentSequence {
  std::vector<T> values;

  std::size_t size() const { return values.size(); }
  const T& operator[](std::size_t k) const { return values[k]; }
};

// Lambda_1 = max(alpha + c, a_1), Lambda_k = max((alpha + k - 1 + c k) Lambda_{k-1}, a_k).
// Stored as logarithms since Lambda_k grows like (1 + c)^k k!.
struct BoundSequence {
  std::vector<double> log_lambda;  // index k = 1..K; entry 0 unused (0)

  int max_order() const { return static_cast<int>(log_lambda.size()) - 1; }
  double value(int k) const;
};

struct HankelReport {
  bool pass = false;
  int hankel_order = -1;   // largest n with (m_{i+j})_{0<=i,j<=n} tested
  int shifted_order = -1;  // largest n with (m_{i+j+1})_{0<=i,j<=n} tested
  double hankel_min_eigenvalue = 0.0;
  double hankel_threshold = 0.0;
  double shifted_min_eigenvalue = 0.0;
  double shifted_threshold = 0.0;
};

// Inputs to the forcing term of order k given m_0..m_{k-1}.
template <class T>
BasicExpPolynomial<T> hierarchy_forcing(const std::vector<BasicExpPolynomial<T>>& m, const T& alpha,
                                        const T& c, int k) {
  BasicExpPolynomial<T> conv{{T(0)}};
  for (int i = 0; i < k; ++i) conv += m[i] * m[k - 1 - i];
  BasicExpPolynomial<T> f = m[k - 1] * T(alpha + (k - 1));
  f += conv * c;
  f *= T(k);
  return f;
}

// Termwise solution of y' = -k y + sum_{i<k} f_i e^{-i t}, y(0) = a:
// y = sum_i f_i / (k - i) e^{-i t} + (a - sum_i f_i / (k - i)) e^{-k t}.
template <class T>
BasicExpPolynomial<T> solve_linear_exp_ode(int k, const BasicExpPolynomial<T>& forcing,
                                           const T& initial) {
  if (forcing.order() >= k) {
    throw std::logic_error("forcing frequency resonates with the decay rate e^{-kt}");
  }
  BasicExpPolynomial<T> y;
  y.coeffs.assign(static_cast<std::size_t>(k) + 1, T(0));
  T particular_at_zero = 0;
  for (int i = 0; i <= forcing.order(); ++i) {
    y.coeffs[i] = forcing.coeffs[i] / T(k - i);
    particular_at_zero += y.coeffs[i];
  }
  y.coeffs[k] = initial - particular_at_zero;
  return y;
}

// Exact when T is Rational. `initial` holds a_0..a_K with a_0 = 1.
template <class T>
BasicHierarchy<T> solve_hierarchy(const T& alpha, const T& c, std::span<const T> initial, int K) {
  if (K < 1) throw DomainError("hierarchy order K must be at least 1");
  if (static_cast<int>(initial.size()) < K + 1) {
    throw DomainError("need initial moments a_0..a_" + std::to_string(K) + ", got " +
                      std::to_string(initial.size()));
  }
  if (initial[0] != 1) throw DomainError("initial moment a_0 must equal 1");
  BasicHierarchy<T> h{alpha, c, {}};
  h.m.push_back(BasicExpPolynomial<T>{{T(1)}});
  for (int k = 1; k <= K; ++k) {
    h.m.push_back(solve_linear_exp_ode(k, hierarchy_forcing(h.m, alpha, c, k), initial[k]));
  }
  return h;
}

// m_k' + k m_k - forcing_k as an exponential polynomial; identically zero for
// an exact solution.
template <class T>
BasicExpPolynomial<T> ode_residual(const BasicHierarchy<T>& h, int k) {
  if (k < 1 || k > h.max_order()) throw DomainError("residual order out of range");
  BasicExpPolynomial<T> r = h.m[k].derivative();
  r += h.m[k] * T(k);
  r += hierarchy_forcing(h.m, h.alpha, h.c, k) * T(-1);
  return r;
}

// u_0 = 1, u_k = (alpha + k - 1) u_{k-1} + c sum_{i<k} u_i u_{k-1-i}.
template <class T>
MomentSequence<T> convolutive_recursion(const T& alpha, const T& c, int K) {
  MomentSequence<T> u{{T(1)}};
  for (int k = 1; k <= K; ++k) {
    T conv = 0;
    for (int i = 0; i < k; ++i) conv += u.values[i] * u.values[k - 1 - i];
    u.values.push_back(T(alpha + (k - 1)) * u.values[k - 1] + c * conv);
  }
  return u;
}

// C_{k,0} read off the solved hierarchy, cross-checked against the direct
// recursion. Throws std::logic_error when the two disagree.
template <class T>
MomentSequence<T> limiting_constants(const BasicHierarchy<T>& h) {
  MomentSequence<T> out;
  for (const auto& p : h.m) out.values.push_back(p.coeffs.front());
  const auto direct = convolutive_recursion(h.alpha, h.c, h.max_order());
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    if (out.values[k] != direct.values[k]) {
      throw std::logic_error("limiting constant C_{" + std::to_string(k) +
                             ",0} disagrees with the direct recursion");
    }
  }
  return out;
}

double eval_moment(const ExpPolynomial& p, double t);
HighReal eval_moment_high(const ExpPolynomial& p, const HighReal& t);

std::string format_exp_polynomial(const ExpPolynomial& p);

// Rational parsing: "3/2", "2", "0.25" (finite decimals only).
Rational parse_rational(const std::string& text);
double to_double(const Rational& q);

Hierarchy solve_hierarchy(const Rational& alpha, const Rational& c,
                          std::span<const Rational> initial, int K);

BoundSequence lambda_bounds(double alpha, double c, std::span<const double> initial, int K);

// Largest ratio max_t m_k(t) / Lambda_k over the conformance grid and k.
double bound_conformance_ratio(const Hierarchy& h, const BoundSequence& bounds);

// Partial sums of Lambda_k^{-1/(2k)}, k = 1..K.
std::vector<double> carleman_diagnostic(const BoundSequence& bounds);

// 256 points on [0, 15]: 128 uniform and 128 geometric (1e-3 .. 15), merged.
std::vector<double> conformance_grid();

// Largest Hankel and shifted-Hankel blocks available from `m`, each tested for
// min eigenvalue >= -tol * trace / size.
HankelReport hankel_psd_check(std::span<const double> m, double tol = 1e-8);

template <class T>
HankelReport hankel_psd_check(const MomentSequence<T>& m, double tol = 1e-8) {
  std::vector<double> v;
  v.reserve(m.size());
  for (const auto& x : m.values) v.push_back(static_cast<double>(x));
  return hankel_psd_check(v, tol);
}

}  // namespace bll
