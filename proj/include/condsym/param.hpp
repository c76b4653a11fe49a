// Coefficient field of the expression kernel: rational functions over Q in
// the named model parameters (k, l, lambda1, ...).
//
// Parameters never appear as atoms of an Expr. They live in term
// coefficients and in exponents, which keeps u^k * u^(-k) == 1 and
// (k+1) * 1/(k+1) == 1 exact.
#pragma once

#include <gmpxx.h>

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace condsym {

using Rational = mpq_class;

/// Multivariate polynomial over Q in parameter names.
class ParamPoly {
 public:
  /// Sorted (name, exponent>0) pairs.
  using Mono = std::vector<std::pair<std::string, int>>;

  ParamPoly() = default;
  explicit ParamPoly(const Rational& c);
  static ParamPoly variable(const std::string& name);

  const std::map<Mono, Rational>& terms() const { return terms_; }

  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  Rational constant_value() const;  // 0 if not constant term-free
  std::set<std::string> variables() const;
  bool has(const std::string& var) const;
  int degree(const std::string& var) const;

  ParamPoly operator+(const ParamPoly& o) const;
  ParamPoly operator-(const ParamPoly& o) const;
  ParamPoly operator*(const ParamPoly& o) const;
  ParamPoly operator-() const;
  ParamPoly scaled(const Rational& c) const;
  bool operator==(const ParamPoly& o) const { return terms_ == o.terms_; }
  int compare(const ParamPoly& o) const;

  /// Coefficient of the lexicographically leading monomial.
  Rational leading_coefficient() const;
  ParamPoly derivative(const std::string& var) const;
  double evaluate(const std::map<std::string, double>& values) const;

  /// Coefficients as a univariate polynomial in `var` (index = power).
  std::vector<ParamPoly> coefficients_in(const std::string& var) const;
  static ParamPoly from_coefficients(const std::string& var,
                                     const std::vector<ParamPoly>& coeffs);

  /// Exact quotient a / b, or nullopt when b does not divide a.
  static std::optional<ParamPoly> divide_exact(const ParamPoly& a, const ParamPoly& b);
  /// Greatest common divisor with leading coefficient 1 (1 for coprime inputs).
  static ParamPoly gcd(const ParamPoly& a, const ParamPoly& b);

  std::string to_string() const;

 private:
  void add_term(const Mono& m, const Rational& c);
  std::map<Mono, Rational> terms_;
};

/// Reduced fraction of parameter polynomials. Pure rationals take a fast path
/// that never allocates polynomial storage.
class ParamFrac {
 public:
  ParamFrac() : c_(0) {}
  ParamFrac(long v) : c_(v) {}  // NOLINT(google-explicit-constructor)
  ParamFrac(const Rational& c) : c_(c) { c_.canonicalize(); }  // NOLINT
  ParamFrac(const ParamPoly& num, const ParamPoly& den);
  static ParamFrac parameter(const std::string& name);

  bool is_rational() const { return !poly_; }
  const Rational& rational() const { return c_; }  // valid when is_rational()
  bool is_zero() const { return !poly_ && c_ == 0; }
  bool is_one() const { return !poly_ && c_ == 1; }
  bool is_integer() const { return !poly_ && c_.get_den() == 1; }
  /// Integer value; requires is_integer() and a value fitting in long.
  long to_long() const;

  ParamPoly numerator() const;
  ParamPoly denominator() const;
  std::set<std::string> parameters() const;

  ParamFrac operator+(const ParamFrac& o) const;
  ParamFrac operator-(const ParamFrac& o) const;
  ParamFrac operator*(const ParamFrac& o) const;
  ParamFrac operator/(const ParamFrac& o) const;
  ParamFrac operator-() const;
  ParamFrac& operator+=(const ParamFrac& o) { return *this = *this + o; }
  ParamFrac inverse() const;
  ParamFrac pow(long n) const;

  int compare(const ParamFrac& o) const;
  bool operator==(const ParamFrac& o) const { return compare(o) == 0; }
  bool operator!=(const ParamFrac& o) const { return compare(o) != 0; }
  bool operator<(const ParamFrac& o) const { return compare(o) < 0; }

  ParamFrac derivative(const std::string& param) const;
  double evaluate(const std::map<std::string, double>& values) const;
  /// Simultaneous replacement of parameters by parameter fractions.
  ParamFrac substitute(const std::map<std::string, ParamFrac>& values) const;

  /// Rendered in the input grammar; `atomic` wraps non-trivial forms in parentheses.
  std::string to_string(bool atomic = false) const;

 private:
  Rational c_;
  std::shared_ptr<const std::pair<ParamPoly, ParamPoly>> poly_;
};

inline ParamFrac operator+(long a, const ParamFrac& b) { return ParamFrac(a) + b; }
inline ParamFrac operator-(long a, const ParamFrac& b) { return ParamFrac(a) - b; }
inline ParamFrac operator*(long a, const ParamFrac& b) { return ParamFrac(a) * b; }
inline ParamFrac operator/(long a, const ParamFrac& b) { return ParamFrac(a) / b; }

std::string rational_to_string(const Rational& q);

}  // namespace condsym
