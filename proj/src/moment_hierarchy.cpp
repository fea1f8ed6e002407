#include "bll/moment_hierarchy.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace bll {

double BoundSequence::value(int k) const {
  if (k < 1 || k > max_order()) throw DomainError("bound order out of range");
  return std::exp(log_lambda[k]);
}

HighReal eval_moment_high(const ExpPolynomial& p, const HighReal& t) {
  const HighReal decay = exp(-t);
  HighReal power = 1;
  HighReal sum = 0;
  for (const auto& c : p.coeffs) {
    sum += HighReal(c) * power;
    power *= decay;
  }
  return sum;
}

double eval_moment(const ExpPolynomial& p, double t) {
  if (t < 0.0) throw DomainError("moment processes are evaluated at t >= 0");
  return static_cast<double>(eval_moment_high(p, HighReal(t)));
}

std::string format_exp_polynomial(const ExpPolynomial& p) {
  std::ostringstream out;
  bool first = true;
  for (int i = 0; i <= p.order(); ++i) {
    const Rational& c = p.coeffs[i];
    if (c == 0 && !(i == 0 && p.order() == 0)) continue;
    const Rational mag = abs(c);
    if (first) {
      if (c < 0) out << "-";
    } else {
      out << (c < 0 ? " - " : " + ");
    }
    first = false;
    const bool unit = mag == 1 && i > 0;
    if (!unit) out << mag.str();
    if (i == 1) out << (unit ? "" : " ") << "e^{-t}";
    if (i > 1) out << (unit ? "" : " ") << "e^{-" << i << "t}";
  }
  if (first) out << "0";
  return out.str();
}

Rational parse_rational(const std::string& text) {
  if (text.empty()) throw DomainError("empty rational literal");
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    Rational num = parse_rational(text.substr(0, slash));
    Rational den = parse_rational(text.substr(slash + 1));
    if (den == 0) throw DomainError("zero denominator in '" + text + "'");
    return num / den;
  }
  std::string digits;
  bool negative = false;
  bool seen_point = false;
  int decimals = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (i == 0 && (ch == '-' || ch == '+')) {
      negative = ch == '-';
    } else if (ch == '.' && !seen_point) {
      seen_point = true;
    } else if (ch >= '0' && ch <= '9') {
      digits += ch;
      if (seen_point) ++decimals;
    } else {
      throw DomainError("not a rational literal: '" + text + "'");
    }
  }
  if (digits.empty()) throw DomainError("not a rational literal: '" + text + "'");
  // cpp_int reads a leading 0 as an octal prefix
  digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size() - 1));
  boost::multiprecision::cpp_int num(digits);
  boost::multiprecision::cpp_int den = pow(boost::multiprecision::cpp_int(10), decimals);
  Rational q(num, den);
  return negative ? Rational(-q) : q;
}

double to_double(const Rational& q) { return q.convert_to<double>(); }

Hierarchy solve_hierarchy(const Rational& alpha, const Rational& c,
                          std::span<const Rational> initial, int K) {
  return solve_hierarchy<Rational>(alpha, c, initial, K);
}

BoundSequence lambda_bounds(double alpha, double c, std::span<const double> initial, int K) {
  if (K < 1) throw DomainError("bound order K must be at least 1");
  if (static_cast<int>(initial.size()) < K + 1) {
    throw DomainError("need initial moments a_0..a_" + std::to_string(K));
  }
  auto log_or_floor = [](double a) { return a > 0.0 ? std::log(a) : -INFINITY; };
  BoundSequence b;
  b.log_lambda.assign(static_cast<std::size_t>(K) + 1, 0.0);
  b.log_lambda[1] = std::max(std::log(alpha + c), log_or_floor(initial[1]));
  for (int k = 2; k <= K; ++k) {
    const double growth = std::log(alpha + k - 1 + c * k) + b.log_lambda[k - 1];
    b.log_lambda[k] = std::max(growth, log_or_floor(initial[k]));
  }
  return b;
}

std::vector<double> conformance_grid() {
  constexpr int kHalf = 128;
  constexpr double kEnd = 15.0;
  std::vector<double> grid;
  grid.reserve(2 * kHalf);
  for (int j = 0; j < kHalf; ++j) grid.push_back(kEnd * j / (kHalf - 1));
  const double lo = std::log(1e-3);
  const double hi = std::log(kEnd);
  for (int j = 0; j < kHalf; ++j) grid.push_back(std::exp(lo + (hi - lo) * j / (kHalf - 1)));
  std::sort(grid.begin(), grid.end());
  return grid;
}

double bound_conformance_ratio(const Hierarchy& h, const BoundSequence& bounds) {
  const int K = std::min(h.max_order(), bounds.max_order());
  const auto grid = conformance_grid();
  double worst = 0.0;
  for (int k = 1; k <= K; ++k) {
    double peak = 0.0;
    for (double t : grid) peak = std::max(peak, eval_moment(h.m[k], t));
    worst = std::max(worst, peak / bounds.value(k));
  }
  return worst;
}

std::vector<double> carleman_diagnostic(const BoundSequence& bounds) {
  std::vector<double> partial;
  partial.reserve(bounds.log_lambda.size());
  double sum = 0.0;
  for (int k = 1; k <= bounds.max_order(); ++k) {
    sum += std::exp(-bounds.log_lambda[k] / (2.0 * k));
    partial.push_back(sum);
  }
  return partial;
}

namespace {

double min_eigenvalue(const Eigen::MatrixXd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("Hankel eigensolver failed");
  return solver.eigenvalues().minCoeff();
}

Eigen::MatrixXd hankel_block(std::span<const double> m, int n, int shift) {
  Eigen::MatrixXd h(n + 1, n + 1);
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) h(i, j) = m[i + j + shift];
  }
  return h;
}

}  // namespace

HankelReport hankel_psd_check(std::span<const double> m, double tol) {
  HankelReport r;
  const int last = static_cast<int>(m.size()) - 1;
  if (last < 0) return r;
  bool ok = true;
  r.hankel_order = last / 2;
  {
    const auto h = hankel_block(m, r.hankel_order, 0);
    r.hankel_min_eigenvalue = min_eigenvalue(h);
    r.hankel_threshold = -tol * std::abs(h.trace()) / static_cast<double>(h.rows());
    ok = ok && r.hankel_min_eigenvalue >= r.hankel_threshold;
  }
  if (last >= 1) {
    r.shifted_order = (last - 1) / 2;
    const auto h = hankel_block(m, r.shifted_order, 1);
    r.shifted_min_eigenvalue = min_eigenvalue(h);
    r.shifted_threshold = -tol * std::abs(h.trace()) / static_cast<double>(h.rows());
    ok = ok && r.shifted_min_eigenvalue >= r.shifted_threshold;
  }
  r.pass = ok;
  return r;
}

}  // namespace bll
