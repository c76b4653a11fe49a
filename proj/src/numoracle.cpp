#include "condsym/numoracle.hpp"

#include <algorithm>
#include <cmath>

#include "condsym/error.hpp"
#include "condsym/pdeparse.hpp"

namespace condsym {

Evaluator::Evaluator(std::vector<FunctionSample> samples) {
  for (auto& s : samples) samples_[s.name] = std::move(s);
}

const Expr& Evaluator::sample_derivative(const FunctionSample& s, const std::vector<int>& deriv) {
  auto key = std::make_pair(s.name, deriv);
  auto it = derivs_.find(key);
  if (it != derivs_.end()) return it->second;
  Expr body = s.tmpl.body;
  for (std::size_t j = 0; j < deriv.size(); ++j) {
    for (int k = 0; k < deriv[j]; ++k) body = diff(body, Atom::slot(static_cast<int>(j)));
  }
  return derivs_.emplace(key, body).first->second;
}

double Evaluator::atom_value(const Atom& a, const NumericPoint& pt, std::map<Atom, double>& memo) {
  if (auto it = pt.values.find(a); it != pt.values.end()) return it->second;
  if (auto it = memo.find(a); it != memo.end()) return it->second;
  double v = 0;
  switch (a.kind()) {
    case AtomKind::Func: {
      std::vector<double> args;
      for (const auto& x : a.args()) args.push_back(expr_value(x, pt, memo, nullptr));
      if (a.is_exp()) {
        v = std::exp(args[0]);
        break;
      }
      auto s = samples_.find(a.name());
      if (s == samples_.end()) throw PreconditionError("uncovered atom " + to_string(a));
      if (s->second.tmpl.arity != args.size()) throw PreconditionError("sample arity mismatch for " + a.name());
      const Expr& body = sample_derivative(s->second, a.deriv());
      NumericPoint local;
      local.params = pt.params;
      for (std::size_t j = 0; j < args.size(); ++j) local.values[Atom::slot(static_cast<int>(j))] = args[j];
      std::map<Atom, double> inner;
      v = expr_value(body, local, inner, nullptr);
      break;
    }
    case AtomKind::Base:
      v = expr_value(a.base_expr(), pt, memo, nullptr);
      break;
    default:
      throw PreconditionError("uncovered atom " + to_string(a));
  }
  memo.emplace(a, v);
  return v;
}

double Evaluator::expr_value(const Expr& e, const NumericPoint& pt, std::map<Atom, double>& memo,
                             double* scale) {
  double sum = 0;
  for (const auto& t : e.terms()) {
    double term = t.coeff.evaluate(pt.params);
    for (const auto& [a, n] : t.mono.factors) {
      double b = atom_value(a, pt, memo);
      double p;
      if (n.is_integer()) {
        long k = n.to_long();
        if (b == 0 && k < 0) throw DomainError("domain violation");
        p = std::pow(b, static_cast<double>(k));
      } else {
        double x = n.evaluate(pt.params);
        double r = std::round(x);
        bool integral = std::fabs(x - r) < 1e-12;
        if (b < 0 && !integral) throw DomainError("domain violation");
        if (b == 0 && x < 0) throw DomainError("domain violation");
        p = std::pow(b, integral ? r : x);
      }
      term *= p;
    }
    if (!std::isfinite(term)) throw DomainError("domain violation");
    if (scale) *scale = std::max(*scale, std::fabs(term));
    sum += term;
  }
  return sum;
}

double Evaluator::eval(const Expr& e, const NumericPoint& pt) {
  std::map<Atom, double> memo;
  return expr_value(e, pt, memo, nullptr);
}

std::pair<double, double> Evaluator::eval_scaled(const Expr& e, const NumericPoint& pt) {
  std::map<Atom, double> memo;
  double scale = 0;
  double v = expr_value(e, pt, memo, &scale);
  return {v, scale};
}

double eval(const Expr& e, const NumericPoint& pt, const std::vector<FunctionSample>& samples) {
  return Evaluator(samples).eval(e, pt);
}

namespace {

Rational random_rational(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> den(1, 4);
  for (;;) {
    int q = den(rng);
    std::uniform_int_distribution<int> num(-2 * q, 2 * q);
    int p = num(rng);
    if (p != 0) {
      Rational r(p, q);
      r.canonicalize();
      return r;
    }
  }
}

double draw(const Interval& iv, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(iv.lo, iv.hi);
  for (;;) {
    double v = d(rng);
    if (std::fabs(v) >= iv.min_abs) return v;
  }
}

void exponents_upto(std::size_t arity, int degree, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (cur.size() == arity) {
    out.push_back(cur);
    return;
  }
  for (int e = 0; e <= degree; ++e) {
    cur.push_back(e);
    exponents_upto(arity, degree - e, cur, out);
    cur.pop_back();
  }
}

std::string point_key(const Atom& a) { return to_string(a); }

}  // namespace

FunctionSample random_polynomial_sample(const std::string& name, std::size_t arity, std::mt19937_64& rng) {
  std::vector<std::vector<int>> exps;
  std::vector<int> cur;
  exponents_upto(arity, 3, cur, exps);
  Expr body;
  for (const auto& e : exps) {
    Expr m(random_rational(rng));
    for (std::size_t j = 0; j < e.size(); ++j) {
      if (e[j]) m *= pow(Expr(Atom::slot(static_cast<int>(j))), ParamFrac(e[j]));
    }
    body += m;
  }
  return {name, {arity, body}};
}

NumericPoint sample_point(const std::vector<Expr>& exprs, const SamplingDomain& dom,
                          const std::map<std::string, double>& params,
                          const std::vector<FunctionSample>& samples, std::mt19937_64& rng) {
  std::set<std::string> sampled;
  for (const auto& s : samples) sampled.insert(s.name);
  std::set<Atom> need;
  for (const auto& e : exprs) {
    for (auto k : {AtomKind::Indep, AtomKind::Jet, AtomKind::Func}) {
      for (const auto& a : atoms_of_kind(e, k)) {
        if (k == AtomKind::Func && (a.is_exp() || sampled.count(a.name()))) continue;
        need.insert(a);
      }
    }
  }
  NumericPoint pt;
  pt.params = params;
  for (const auto& a : need) {
    double v;
    if (a.kind() == AtomKind::Indep) {
      v = draw(a.name() == kTime ? dom.time : dom.space, rng);
    } else if (a.kind() == AtomKind::Jet) {
      if (a.order() == 0) {
        auto it = dom.per_dependent.find(a.name());
        v = draw(it == dom.per_dependent.end() ? dom.dependent : it->second, rng);
      } else {
        v = draw(dom.derivative, rng);
      }
    } else {
      v = draw(dom.function_value, rng);
    }
    pt.values[a] = v;
  }
  return pt;
}

namespace {

CheckReport run_check(const std::vector<std::pair<Expr, Expr>>& pairs, const CheckOptions& opt,
                      const std::vector<FunctionSample>& samples, const std::string& claim) {
  if (opt.n_points < 1) throw PreconditionError("n_points must be at least 1");
  if (!(opt.tol > 0)) throw PreconditionError("tolerance must be positive");
  CheckReport rep;
  rep.claim = claim;
  rep.n_points = opt.n_points;
  rep.tol = opt.tol;
  rep.seed = opt.seed;
  std::vector<Expr> all;
  for (const auto& [a, b] : pairs) {
    all.push_back(a);
    all.push_back(b);
  }
  std::mt19937_64 rng(opt.seed);
  Evaluator ev(samples);
  int retries = 0;
  for (int i = 0; i < opt.n_points;) {
    NumericPoint pt = sample_point(all, opt.domain, opt.params, samples, rng);
    pt.seed = opt.seed;
    double worst = 0;
    try {
      for (const auto& [a, b] : pairs) {
        auto [va, sa] = ev.eval_scaled(a, pt);
        auto [vb, sb] = ev.eval_scaled(b, pt);
        double viol = std::fabs(va - vb) / (1.0 + std::max(sa, sb));
        if (std::isnan(viol)) throw DomainError("domain violation");
        worst = std::max(worst, viol);
      }
    } catch (const DomainError&) {
      if (++retries > opt.max_retries) throw DomainError("domain violation: sampling retries exhausted");
      ++rep.resamples;
      continue;
    }
    if (worst > rep.max_violation || rep.worst_point.empty()) {
      rep.max_violation = worst;
      rep.worst_point.clear();
      for (const auto& [a, v] : pt.values) rep.worst_point[point_key(a)] = v;
    }
    ++i;
  }
  if (rep.max_violation <= opt.tol) {
    rep.status = "pass";
  } else if (rep.max_violation > opt.confirm_factor * opt.tol) {
    rep.status = "confirmed-fail";
  } else {
    rep.status = "fail";
  }
  return rep;
}

}  // namespace

CheckReport residual_check(const std::vector<Expr>& exprs, const CheckOptions& opt,
                           const std::vector<FunctionSample>& samples, const std::string& claim) {
  std::vector<std::pair<Expr, Expr>> pairs;
  for (const auto& e : exprs) pairs.emplace_back(e, Expr());
  return run_check(pairs, opt, samples, claim);
}

bool check_identity(const Expr& a, const Expr& b, const CheckOptions& opt,
                    const std::vector<FunctionSample>& samples) {
  return run_check({{a, b}}, opt, samples, "identity").pass();
}

}  // namespace condsym
