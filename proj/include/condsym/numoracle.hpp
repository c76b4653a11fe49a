// Random-point numeric evaluation of symbolic expressions.
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "condsym/expr.hpp"

namespace condsym {

/// Concrete stand-in for an opaque function; derivatives are taken exactly.
struct FunctionSample {
  std::string name;
  FunctionTemplate tmpl;
};

struct NumericPoint {
  std::map<Atom, double> values;  // independent variables, jets, sampled function atoms
  std::map<std::string, double> params;
  std::uint64_t seed = 0;
};

struct Interval {
  double lo = 0;
  double hi = 1;
  double min_abs = 0;  // values with |v| < min_abs are rejected
};

struct SamplingDomain {
  Interval time{0.1, 1.0};
  Interval space{1.0, 2.0};
  Interval dependent{0.5, 2.0};     // jets of order zero
  Interval derivative{-2.0, 2.0, 0.1};
  /// Function atoms without a sample are drawn from this interval.
  Interval function_value{-2.0, 2.0, 0.1};
  std::map<std::string, Interval> per_dependent;  // overrides by variable name
};

/// Evaluates expressions at points; caches exact derivatives of samples.
class Evaluator {
 public:
  explicit Evaluator(std::vector<FunctionSample> samples = {});

  double eval(const Expr& e, const NumericPoint& pt);
  /// Value and the largest absolute value of an additive term.
  std::pair<double, double> eval_scaled(const Expr& e, const NumericPoint& pt);

 private:
  double atom_value(const Atom& a, const NumericPoint& pt, std::map<Atom, double>& memo);
  double expr_value(const Expr& e, const NumericPoint& pt, std::map<Atom, double>& memo, double* scale);
  const Expr& sample_derivative(const FunctionSample& s, const std::vector<int>& deriv);

  std::map<std::string, FunctionSample> samples_;
  std::map<std::pair<std::string, std::vector<int>>, Expr> derivs_;
};

double eval(const Expr& e, const NumericPoint& pt, const std::vector<FunctionSample>& samples = {});

/// Degree <= 3 polynomial in `arity` slots with nonzero random rational coefficients in [-2, 2].
FunctionSample random_polynomial_sample(const std::string& name, std::size_t arity, std::mt19937_64& rng);

struct CheckReport {
  std::string claim;
  int n_points = 0;
  double tol = 0;
  double max_violation = 0;
  std::string status;  // "pass", "fail", "confirmed-fail"
  std::uint64_t seed = 0;
  int resamples = 0;
  std::map<std::string, double> worst_point;

  bool pass() const { return status == "pass"; }
  bool confirmed_fail() const { return status == "confirmed-fail"; }
};

struct CheckOptions {
  int n_points = 100;
  double tol = 1e-9;
  std::uint64_t seed = 20090601;
  SamplingDomain domain;
  std::map<std::string, double> params;
  int max_retries = 1000;
  /// A failure counts as confirmed when the violation exceeds this multiple of tol.
  double confirm_factor = 1e3;
};

/// Pass iff |value| <= tol * (1 + largest term) for every expression at every point.
CheckReport residual_check(const std::vector<Expr>& exprs, const CheckOptions& opt,
                           const std::vector<FunctionSample>& samples = {},
                           const std::string& claim = "residual");

/// residual_check on a - b with the term scale of both sides.
bool check_identity(const Expr& a, const Expr& b, const CheckOptions& opt,
                    const std::vector<FunctionSample>& samples = {});

/// Draws a point covering every atom of `exprs` that is not provided by `samples`.
NumericPoint sample_point(const std::vector<Expr>& exprs, const SamplingDomain& dom,
                          const std::map<std::string, double>& params,
                          const std::vector<FunctionSample>& samples, std::mt19937_64& rng);

}  // namespace condsym
