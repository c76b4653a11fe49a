#include "condsym/kirchhoff.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "condsym/error.hpp"
#include "condsym/numoracle.hpp"

namespace condsym {

namespace {

std::string lowered(const std::string& s) {
  std::string out = s;
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

AtomMap dep_map(const TransformRecord& rec) {
  AtomMap m;
  for (std::size_t a = 0; a < rec.original_deps.size(); ++a) {
    if (rec.inverse[a]) m.atoms.emplace(Atom::jet(rec.original_deps[a], 0, 0), *rec.inverse[a]);
  }
  return m;
}

// Composition with the inverse maps; only variables that actually occur need one.
Expr compose(const Expr& e, const TransformRecord& rec, const AtomMap& m) {
  for (std::size_t a = 0; a < rec.original_deps.size(); ++a) {
    if (!rec.inverse[a] && contains_atom(e, Atom::jet(rec.original_deps[a], 0, 0)))
      throw PreconditionError("inverse map unavailable symbolically");
  }
  return substitute(e, m);
}

double eval_in(const Expr& e, const std::string& dep, double value, const std::map<std::string, double>& params) {
  NumericPoint pt;
  pt.values[Atom::jet(dep, 0, 0)] = value;
  pt.params = params;
  return eval(e, pt);
}

}  // namespace

bool TransformRecord::closed_form() const {
  for (const auto& i : inverse) {
    if (!i) return false;
  }
  return true;
}

double TransformRecord::forward_value(std::size_t a, double U, const std::map<std::string, double>& params) const {
  return eval_in(forward.at(a), original_deps.at(a), U, params);
}

double TransformRecord::inverse_value(std::size_t a, double u, const std::map<std::string, double>& params) const {
  if (inverse.at(a)) return eval_in(*inverse[a], canonical_deps.at(a), u, params);
  double a_lo = lo, a_hi = hi;
  double f_lo = forward_value(a, a_lo, params) - u;
  double f_hi = forward_value(a, a_hi, params) - u;
  if (f_lo * f_hi > 0) throw DomainError("numeric inverse: value outside the bracketed range");
  while (a_hi - a_lo > tol * std::max(1.0, std::abs(a_lo))) {
    double mid = 0.5 * (a_lo + a_hi);
    double f_mid = forward_value(a, mid, params) - u;
    if ((f_mid < 0) == (f_lo < 0)) {
      a_lo = mid;
      f_lo = f_mid;
    } else {
      a_hi = mid;
    }
  }
  return 0.5 * (a_lo + a_hi);
}

Expr power_antiderivative(const Expr& d, const Atom& var) {
  std::vector<Term> out;
  for (const auto& t : d.terms()) {
    ParamFrac n = 0;
    for (const auto& [a, e] : t.mono.factors) {
      if (a != var) throw PreconditionError("diffusivity is not a sum of powers of " + to_string(Expr(var)));
      n = e;
    }
    ParamFrac n1 = n + ParamFrac(1);
    if (n1.is_zero()) {
      throw PreconditionError("unsupported diffusivity: power -1 needs a logarithmic antiderivative");
    }
    Monomial m;
    m.factors.emplace_back(var, n1);
    out.push_back(Term{m, t.coeff / n1});
  }
  if (out.empty()) throw PreconditionError("zero diffusivity");
  return Expr::from_terms(std::move(out));
}

KirchhoffResult to_canonical(const RDOriginal& orig, const Declarations& decls, bool numeric_fallback) {
  KirchhoffResult res;
  TransformRecord& rec = res.record;
  rec.original_deps = orig.deps;
  res.decls = decls;
  res.decls.deps.clear();
  for (const auto& dep : orig.deps) {
    std::string c = lowered(dep);
    if (c == dep || decls.is_dep(c) || decls.is_param(c)) {
      throw PreconditionError("cannot name the canonical variable for '" + dep + "'");
    }
    rec.canonical_deps.push_back(c);
    res.decls.deps.push_back(c);
  }
  for (std::size_t a = 0; a < orig.deps.size(); ++a) {
    Atom U = Atom::jet(orig.deps[a], 0, 0);
    Expr u = Expr::jet(rec.canonical_deps[a]);
    Expr D = orig.diffusivity[a];
    Expr F = power_antiderivative(D, U);
    rec.diffusivity.push_back(D);
    rec.forward.push_back(F);
    if (F.size() == 1) {
      const Term& t = F.terms()[0];
      ParamFrac b = t.mono.factors[0].second;
      rec.inverse.push_back(pow(u * Expr(t.coeff.inverse()), b.inverse()));
    } else if (numeric_fallback) {
      rec.inverse.push_back(std::nullopt);
    } else {
      throw PreconditionError("antiderivative of " + to_string(D) + " has no closed-form inverse");
    }
  }
  // Without a closed form the coefficients go through an opaque inverse Uinv(u).
  std::vector<bool> opaque(orig.deps.size(), false);
  for (std::size_t a = 0; a < orig.deps.size(); ++a) {
    if (rec.inverse[a]) continue;
    std::string n = orig.deps[a] + "inv";
    res.decls.add_function({n, {rec.canonical_deps[a]}});
    rec.inverse[a] = Expr(Atom::func(n, {rec.canonical_deps[a]}, {Expr::jet(rec.canonical_deps[a])}, {0}));
    opaque[a] = true;
  }
  AtomMap m = dep_map(rec);
  for (std::size_t a = 0; a < orig.deps.size(); ++a) {
    res.canonical.d.push_back(substitute(pow(orig.diffusivity[a], -1), m));
    res.canonical.c.push_back(-substitute(orig.reaction[a], m));
  }
  for (std::size_t a = 0; a < orig.deps.size(); ++a) {
    if (opaque[a]) rec.inverse[a].reset();
  }
  res.canonical.deps = rec.canonical_deps;
  return res;
}

VectorField transform_operator(const VectorField& q_star, const TransformRecord& rec) {
  if (q_star.deps != rec.original_deps) throw PreconditionError("operator and record use different variables");
  AtomMap m = dep_map(rec);
  VectorField q;
  q.deps = rec.canonical_deps;
  q.xi0 = compose(q_star.xi0, rec, m);
  q.xi1 = compose(q_star.xi1, rec, m);
  for (std::size_t a = 0; a < q_star.eta.size(); ++a) {
    q.eta.push_back(compose(rec.diffusivity[a] * q_star.eta[a], rec, m));
  }
  return q;
}

std::string render(const KirchhoffResult& k, const VectorField* op) {
  std::ostringstream os;
  const Declarations& d = k.decls;
  if (!d.params.empty()) {
    os << "[params]\n";
    for (std::size_t i = 0; i < d.params.size(); ++i) os << (i ? ", " : "") << d.params[i];
    os << "\n";
  }
  os << "[variables]\n";
  for (std::size_t i = 0; i < d.deps.size(); ++i) os << (i ? ", " : "") << d.deps[i];
  os << "\n";
  if (!d.functions.empty()) {
    os << "[functions]\n";
    for (const auto& f : d.functions) {
      os << f.name << "(";
      for (std::size_t i = 0; i < f.args.size(); ++i) os << (i ? ", " : "") << f.args[i];
      os << ")\n";
    }
  }
  os << "[system]\n";
  for (std::size_t a = 0; a < k.canonical.deps.size(); ++a) {
    const std::string& u = k.canonical.deps[a];
    os << u << "_xx = (" << to_string(k.canonical.d[a]) << ")*" << u << "_t + " << to_string(k.canonical.c[a])
       << "\n";
  }
  if (op) {
    os << "[operator]\n";
    os << "xi0 = " << to_string(op->xi0) << "\n";
    os << "xi1 = " << to_string(op->xi1) << "\n";
    for (std::size_t a = 0; a < op->eta.size(); ++a) {
      os << "eta" << a + 1 << " = " << to_string(op->eta[a]) << "\n";
    }
  }
  os << "[inverse]\n";
  for (std::size_t a = 0; a < k.record.original_deps.size(); ++a) {
    os << k.record.original_deps[a] << " = ";
    if (k.record.inverse[a]) {
      os << to_string(*k.record.inverse[a]) << "\n";
    } else {
      os << k.record.original_deps[a] << "inv(" << k.record.canonical_deps[a] << ")\n";
    }
  }
  return os.str();
}

}  // namespace condsym
