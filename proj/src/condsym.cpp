#include "condsym/condsym.hpp"

#include <algorithm>
#include <future>
#include <sstream>

#include "condsym/error.hpp"

namespace condsym {

namespace {

/// Solves the linear equation eq = 0 for `jet`.
Expr solve_for(const Expr& eq, const Atom& jet) {
  auto parts = collect(eq, {jet});
  Expr lin, rest;
  for (const auto& [m, c] : parts) {
    if (m.empty()) {
      rest = c;
    } else if (m.factors.size() == 1 && m.factors[0].second.is_one()) {
      lin = c;
    } else {
      throw PreconditionError("equation is not linear in " + to_string(jet));
    }
  }
  if (lin.is_zero()) throw PreconditionError("equation does not contain " + to_string(jet));
  return -rest / lin;
}

bool is_negative_rational(const ParamFrac& n) { return n.is_rational() && n.rational() < 0; }

/// Multiplies by the smallest monomial that removes all negative rational exponents.
Expr clear_denominators(const Expr& e, Monomial* used = nullptr) {
  std::map<Atom, Rational> need;
  for (const auto& t : e.terms()) {
    for (const auto& [a, n] : t.mono.factors) {
      if (!is_negative_rational(n)) continue;
      Rational k = -n.rational();
      auto it = need.find(a);
      if (it == need.end() || it->second < k) need[a] = k;
    }
  }
  Monomial m;
  for (const auto& [a, k] : need) m.factors.emplace_back(a, ParamFrac(k));
  if (used) *used = m;
  if (m.empty()) return e;
  return e * Expr(Term{m, ParamFrac(1)});
}

/// Integer-primitive scaling with positive leading coefficient; sign only for parametric coefficients.
Expr scale_integral(const Expr& e) {
  if (e.is_zero()) return e;
  bool rational = true;
  mpz_class num_gcd = 0, den_lcm = 1;
  for (const auto& t : e.terms()) {
    if (!t.coeff.is_rational()) {
      rational = false;
      break;
    }
    mpz_gcd(num_gcd.get_mpz_t(), num_gcd.get_mpz_t(), t.coeff.rational().get_num_mpz_t());
    mpz_lcm(den_lcm.get_mpz_t(), den_lcm.get_mpz_t(), t.coeff.rational().get_den_mpz_t());
  }
  if (!rational) {
    const auto& c = e.terms().front().coeff;
    bool neg = c.numerator().leading_coefficient() < 0;
    return neg ? -e : e;
  }
  Rational s(den_lcm, num_gcd);
  s.canonicalize();
  if (e.terms().front().coeff.rational() < 0) s = -s;
  return e * Expr(s);
}

/// Quotient by a divisor c*A + r linear in some atom A (c a monomial free of A),
/// by synthetic division in A; nullopt when not exact or no such atom exists.
std::optional<Expr> divide_linear(const Expr& e, const Expr& d) {
  for (const auto& t : d.terms()) {
    for (const auto& [a, n] : t.mono.factors) {
      if (!n.is_one() || a.kind() == AtomKind::Base) continue;
      Expr c, r;
      bool ok = true;
      for (const auto& s : d.terms()) {
        ParamFrac k = s.mono.exponent_of(a);
        if (k.is_one()) {
          if (!c.is_zero()) ok = false;
          Monomial rest;
          for (const auto& f : s.mono.factors) {
            if (f.first != a) rest.factors.push_back(f);
          }
          c = Expr(Term{rest, s.coeff});
        } else if (k.is_zero()) {
          r += Expr(s);
        } else {
          ok = false;
        }
      }
      if (!ok || contains_atom(c, a) || contains_atom(r, a)) continue;
      std::map<Monomial, Expr> parts;
      try {
        parts = collect(e, {a});
      } catch (const PreconditionError&) {
        return std::nullopt;
      }
      std::map<long, Expr> coeff;
      long top = 0;
      for (const auto& [m, v] : parts) {
        long deg = m.empty() ? 0 : m.factors[0].second.to_long();
        coeff[deg] = v;
        top = std::max(top, deg);
      }
      if (top == 0) return std::nullopt;
      Expr inv = pow(c, ParamFrac(-1));
      std::vector<Expr> q(static_cast<std::size_t>(top));
      Expr carry = coeff[top];
      for (long k = top - 1; k >= 0; --k) {
        q[static_cast<std::size_t>(k)] = carry * inv;
        carry = coeff[k] - r * q[static_cast<std::size_t>(k)];
      }
      if (!carry.is_zero()) return std::nullopt;
      Expr out;
      for (long k = 0; k < top; ++k) out += q[static_cast<std::size_t>(k)] * pow(Expr(a), ParamFrac(k));
      return out;
    }
  }
  return std::nullopt;
}

bool same_up_to_sign(const Expr& a, const Expr& b) { return a == b || a == -b; }

bool derivative_of(const Atom& a, const Atom& g) {
  if (!a.is_func() || !g.is_func() || a.is_exp() || g.is_exp()) return false;
  if (a.name() != g.name() || a.args() != g.args()) return false;
  const auto& da = a.deriv();
  const auto& dg = g.deriv();
  if (da.size() != dg.size()) return false;
  for (std::size_t i = 0; i < da.size(); ++i) {
    if (da[i] < dg[i]) return false;
  }
  return true;
}

std::optional<Atom> single_unknown(const Expr& p, const std::set<std::string>& unknowns) {
  if (p.size() != 1) return std::nullopt;
  const auto& f = p.terms()[0].mono.factors;
  if (f.size() != 1) return std::nullopt;
  const auto& [a, n] = f[0];
  if (!a.is_func() || a.is_exp() || !unknowns.count(a.name())) return std::nullopt;
  if (!n.is_rational() || n.rational() <= 0) return std::nullopt;
  return a;
}

std::vector<Atom> minimal(const std::vector<Atom>& gens) {
  std::vector<Atom> out;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < gens.size() && !dominated; ++j) {
      if (i == j || gens[i] == gens[j]) continue;
      dominated = derivative_of(gens[i], gens[j]);
    }
    for (const auto& o : out) dominated = dominated || o == gens[i];
    if (!dominated) out.push_back(gens[i]);
  }
  return out;
}

using Row = std::map<Monomial, ParamFrac>;

Row row_of(const Expr& e) {
  Row r;
  for (const auto& t : e.terms()) r.emplace(t.mono, t.coeff);
  return r;
}

class Echelon {
 public:
  /// Reduces r against the stored rows; true if it reduced to zero.
  bool reduce(Row& r) const {
    for (const auto& [piv, row] : rows_) {
      auto it = r.find(piv);
      if (it == r.end()) continue;
      ParamFrac c = it->second;
      for (const auto& [m, v] : row) {
        ParamFrac nv = r[m] - c * v;
        if (nv.is_zero()) {
          r.erase(m);
        } else {
          r[m] = nv;
        }
      }
    }
    return r.empty();
  }

  void add(Row r) {
    if (reduce(r)) return;
    Monomial piv = r.begin()->first;
    ParamFrac inv = r.begin()->second.inverse();
    for (auto& [m, v] : r) v = v * inv;
    rows_.emplace_back(piv, std::move(r));
  }

 private:
  std::vector<std::pair<Monomial, Row>> rows_;
};

bool spans(const std::vector<Expr>& basis, const std::vector<Expr>& targets) {
  Echelon ech;
  for (const auto& b : basis) ech.add(row_of(b));
  for (const auto& t : targets) {
    Row r = row_of(t);
    if (!ech.reduce(r)) return false;
  }
  return true;
}

const FunctionDecl& need_function(const Declarations& d, const std::string& name) {
  const FunctionDecl* f = d.function(name);
  if (!f) throw PreconditionError("undeclared function '" + name + "'");
  return *f;
}

/// name(#0, ..., #n-1) with the declared slot names, optionally permuted.
Expr slot_call(const FunctionDecl& f, const std::string& name, const std::vector<int>& perm = {}) {
  std::vector<Expr> args;
  for (std::size_t i = 0; i < f.args.size(); ++i) {
    args.push_back(Expr(Atom::slot(perm.empty() ? static_cast<int>(i) : perm[i])));
  }
  return Expr(Atom::func(name, f.args, std::move(args), std::vector<int>(f.args.size(), 0)));
}

std::vector<std::string> relation_texts(const std::vector<Relation>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(r.text.empty() ? to_string(r.expr) + (r.nonzero ? " != 0" : " = 0") : r.text);
  return out;
}

std::vector<LabeledEquation> numbered(const std::vector<Expr>& eqs, const std::string& prefix = "") {
  std::vector<LabeledEquation> out;
  for (std::size_t i = 0; i < eqs.size(); ++i) out.push_back({prefix + std::to_string(i + 1), eqs[i]});
  return out;
}

std::vector<Expr> exprs_of(const DeterminingSystem& ds) {
  std::vector<Expr> out;
  for (const auto& e : ds.equations) out.push_back(e.expr);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifolds and residuals

std::vector<Atom> Manifold::eliminated() const {
  std::vector<Atom> out;
  for (const auto& [a, v] : plan) out.push_back(a);
  return out;
}

Expr Manifold::restrict(const Expr& e) const {
  Expr r = e;
  for (std::size_t pass = 0; pass <= plan.size() + 1; ++pass) {
    for (const auto& [a, v] : plan) {
      if (!contains_atom(r, a)) continue;
      AtomMap m;
      m.atoms.emplace(a, v);
      r = substitute(r, m);
    }
    bool done = true;
    for (const auto& [a, v] : plan) done = done && !contains_atom(r, a);
    if (done) return r;
  }
  throw PreconditionError("elimination plan is not triangular");
}

Manifold build_manifold(const PdeSystem& sys, const VectorField& q, const std::vector<std::size_t>& indices,
                        bool diff_consequences) {
  const std::size_t m = sys.deps.size();
  if (sys.equations.size() != m) throw PreconditionError("system needs one equation per dependent variable");
  if (q.deps != sys.deps) throw PreconditionError("operator and system have different dependent variables");
  for (auto i : indices) {
    if (i < 1 || i > m) throw PreconditionError("index " + std::to_string(i) + " out of range");
  }
  const bool by_x = q.xi0.is_zero();
  if (!indices.empty() && by_x && q.xi1.is_zero()) throw PreconditionError("surface condition without derivatives");
  if (diff_consequences && by_x) throw PreconditionError("xi0-zero branch unsupported");

  Manifold man;
  man.indices = indices;
  std::sort(man.indices.begin(), man.indices.end());
  man.indices.erase(std::unique(man.indices.begin(), man.indices.end()), man.indices.end());
  man.diff_consequences = diff_consequences;

  std::vector<std::pair<Atom, Expr>> consequences, tops, surfaces;
  for (std::size_t a = 0; a < m; ++a) {
    const Expr& s = sys.equations[a];
    man.constraints.push_back(s);
    std::optional<Atom> top;
    for (const auto& j : jets_in(s)) {
      if (j.name() == sys.deps[a] && j.nt() == 0 && j.nx() > 0 && (!top || j.nx() > top->nx())) top = j;
    }
    if (!top) throw PreconditionError("no spatial derivative of " + sys.deps[a] + " to solve for");
    tops.emplace_back(*top, solve_for(s, *top));
  }
  for (auto i : man.indices) {
    Expr qi = q.surface_condition(i - 1);
    man.constraints.push_back(qi);
    const std::string& dep = sys.deps[i - 1];
    Atom lead = by_x ? Atom::jet(dep, 0, 1) : Atom::jet(dep, 1, 0);
    surfaces.emplace_back(lead, solve_for(qi, lead));
    if (diff_consequences) {
      Expr dt = total_derivative(qi, 't');
      Expr dx = total_derivative(qi, 'x');
      man.constraints.push_back(dt);
      man.constraints.push_back(dx);
      consequences.emplace_back(Atom::jet(dep, 2, 0), solve_for(dt, Atom::jet(dep, 2, 0)));
      consequences.emplace_back(Atom::jet(dep, 1, 1), solve_for(dx, Atom::jet(dep, 1, 1)));
    }
  }
  for (auto* part : {&consequences, &tops, &surfaces}) {
    man.plan.insert(man.plan.end(), part->begin(), part->end());
  }
  return man;
}

Residuals invariance_residuals(const PdeSystem& sys, const VectorField& q, const Manifold& man,
                               ProlongationCache* cache) {
  validate(q);
  int order = sys.max_order();
  std::shared_ptr<const ProlongedField> pf =
      cache ? cache->get(q, order) : std::make_shared<const ProlongedField>(prolong(q, order));

  std::optional<Atom> xi0_atom;
  if (q.xi0.size() == 1 && q.xi0.terms()[0].mono.factors.size() == 1) {
    xi0_atom = q.xi0.terms()[0].mono.factors[0].first;
  }

  std::vector<std::future<std::pair<Expr, Monomial>>> jobs;
  for (const auto& s : sys.equations) {
    jobs.push_back(std::async(std::launch::async, [&pf, &man, s] {
      Expr r = man.restrict(apply_prolonged(*pf, s));
      Monomial used;
      r = clear_denominators(r, &used);
      return std::make_pair(r, used);
    }));
  }
  Residuals out;
  for (auto& j : jobs) {
    auto [r, used] = j.get();
    out.exprs.push_back(r);
    if (xi0_atom) {
      ParamFrac n = used.exponent_of(*xi0_atom);
      if (n.is_integer()) out.xi0_power = std::max<int>(out.xi0_power, static_cast<int>(n.to_long()));
    }
  }
  return out;
}

DeterminingSystem split_determining(const std::vector<Expr>& residuals, std::vector<Atom> free_jets) {
  if (free_jets.empty()) {
    std::set<Atom> all;
    for (const auto& r : residuals) {
      for (const auto& j : jets_in(r)) {
        if (j.order() > 0) all.insert(j);
      }
    }
    free_jets.assign(all.begin(), all.end());
  }
  DeterminingSystem ds;
  ds.basis = free_jets;
  std::vector<Expr> eqs;
  for (const auto& r : residuals) {
    for (const auto& [m, c] : collect(r, free_jets)) {
      Expr e = scale_integral(c);
      if (e.is_zero()) continue;
      bool dup = false;
      for (const auto& o : eqs) dup = dup || same_up_to_sign(o, e);
      if (!dup) eqs.push_back(e);
    }
  }
  ds.equations = numbered(eqs);
  return ds;
}

DeterminingSystem generate(const SourceFile& src, const GenerateRequest& req) {
  ParsedSystem ps = parse_system(src);
  VectorField q = operator_of(src);
  validate(q);
  Manifold man = build_manifold(ps.pde, q, req.indices, req.diff_consequences);
  Residuals res = invariance_residuals(ps.pde, q, man);
  DeterminingSystem ds = split_determining(res.exprs);
  ds.decls = src.decls;
  ds.assumptions = src.assumptions;
  ds.xi0_power = res.xi0_power;
  for (const Expr* c : {&q.xi0, &q.xi1}) {
    for (const auto& f : top_level_funcs(*c)) ds.unknowns.insert(f.name());
  }
  for (const auto& c : q.eta) {
    for (const auto& f : top_level_funcs(c)) ds.unknowns.insert(f.name());
  }
  if (!req.indices.empty() && !q.xi0.is_constant()) {
    bool have = false;
    for (const auto& a : ds.assumptions) have = have || (a.nonzero && a.expr == q.xi0);
    if (!have) ds.assumptions.push_back({q.xi0, true, to_string(q.xi0) + " != 0"});
  }
  std::ostringstream d;
  if (req.indices.empty()) {
    d << "Lie determining system";
  } else {
    d << "conditional determining system, surface conditions on";
    for (auto i : man.indices) d << " " << ps.pde.deps[i - 1];
    if (req.diff_consequences) d << ", with differential consequences";
  }
  ds.description = d.str();
  return ds;
}

DeterminingSystem determining_from_source(const SourceFile& src) {
  DeterminingSystem ds;
  ds.decls = src.decls;
  ds.equations = src.equations;
  ds.assumptions = src.assumptions;
  auto it = src.meta.find("unknowns");
  if (it != src.meta.end()) {
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok.erase(0, tok.find_first_not_of(" \t"));
      tok.erase(tok.find_last_not_of(" \t") + 1);
      if (!tok.empty()) ds.unknowns.insert(tok);
    }
  } else {
    for (const auto& f : src.decls.functions) {
      if (f.name.rfind("xi", 0) == 0 || f.name.rfind("eta", 0) == 0) ds.unknowns.insert(f.name);
    }
  }
  auto d = src.meta.find("description");
  if (d != src.meta.end()) ds.description = d->second;
  return ds;
}

std::string render(const DeterminingSystem& ds) {
  return render_equations(ds.decls, ds.equations, relation_texts(ds.assumptions), ds.description);
}

// ---------------------------------------------------------------------------
// Reduction

ReductionContext context_of(const DeterminingSystem& ds) {
  ReductionContext ctx;
  ctx.unknowns = ds.unknowns;
  for (const auto& a : ds.assumptions) {
    if (a.nonzero) ctx.nonzero.push_back(a.expr);
  }
  return ctx;
}

Expr primitive(const Expr& e, const std::vector<Expr>& nonzero) {
  if (e.is_zero()) return e;
  Expr r = e;
  for (const auto& nz : nonzero) {
    if (nz.size() != 1) continue;
    for (const auto& [atom, n] : nz.terms()[0].mono.factors) {
      std::optional<Rational> lo;
      for (const auto& t : r.terms()) {
        ParamFrac k = t.mono.exponent_of(atom);
        if (!k.is_rational()) {
          lo.reset();
          break;
        }
        if (!lo || k.rational() < *lo) lo = k.rational();
      }
      if (lo && *lo != 0) r = r * pow(Expr(atom), ParamFrac(Rational(-*lo)));
    }
  }
  for (const auto& nz : nonzero) {
    if (nz.size() < 2) continue;
    for (int guard = 0; guard < 16; ++guard) {
      auto q = divide_linear(r, nz);
      if (!q) break;
      r = *q;
    }
  }
  return r * Expr(r.terms().front().coeff.inverse());
}

std::vector<Atom> Reduced::generator_atoms() const {
  std::vector<Atom> out;
  for (const auto& [a, i] : generators) out.push_back(a);
  return out;
}

std::vector<Expr> Reduced::remaining_exprs() const {
  std::vector<Expr> out;
  for (const auto& [e, i] : remaining) out.push_back(e);
  return out;
}

bool implied_by(const Atom& a, const std::vector<Atom>& generators) {
  for (const auto& g : generators) {
    if (derivative_of(a, g)) return true;
  }
  return false;
}

Expr apply_vanishing(const Expr& e, const std::vector<Atom>& generators) {
  if (generators.empty()) return e;
  return map_atoms(e, [&](const Atom& a) -> std::optional<Expr> {
    if (implied_by(a, generators)) return Expr(0);
    return std::nullopt;
  });
}

Reduced reduce(const std::vector<Expr>& eqs, const ReductionContext& ctx, const std::vector<Atom>& vanishing) {
  constexpr std::size_t kImposed = static_cast<std::size_t>(-1);
  std::vector<std::pair<Atom, std::size_t>> gens;
  for (const auto& v : vanishing) gens.emplace_back(v, kImposed);
  std::vector<std::pair<Expr, std::size_t>> cur;
  for (std::size_t i = 0; i < eqs.size(); ++i) cur.emplace_back(eqs[i], i);

  auto atoms = [&] {
    std::vector<Atom> out;
    for (const auto& [a, i] : gens) out.push_back(a);
    return out;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<Atom> g = atoms();
    std::vector<std::pair<Expr, std::size_t>> next;
    for (const auto& [e, i] : cur) {
      Expr r = apply_vanishing(e, g);
      if (!r.is_zero()) next.emplace_back(primitive(r, ctx.nonzero), i);
    }
    cur = std::move(next);
    for (const auto& [e, i] : cur) {
      auto a = single_unknown(e, ctx.unknowns);
      if (a && !implied_by(*a, atoms())) {
        gens.emplace_back(*a, i);
        changed = true;
      }
    }
  }

  Reduced red;
  std::vector<Atom> keep = minimal(atoms());
  for (const auto& [a, i] : gens) {
    bool listed = false;
    for (const auto& o : red.generators) listed = listed || o.first == a;
    if (!listed && std::find(keep.begin(), keep.end(), a) != keep.end()) red.generators.emplace_back(a, i);
  }
  for (const auto& [e, i] : cur) {
    bool dup = false;
    for (const auto& o : red.remaining) dup = dup || o.first == e;
    if (!dup) red.remaining.emplace_back(e, i);
  }
  return red;
}

// ---------------------------------------------------------------------------
// Comparison

namespace {

struct Key {
  enum class Kind { Implied, Generator, Equation } kind = Kind::Equation;
  std::optional<Atom> atom;
  Expr expr;
};

Key key_of(const Expr& e, const ReductionContext& ctx, const std::vector<Atom>& gens) {
  Key k;
  Expr p = primitive(e, ctx.nonzero);
  if (auto a = single_unknown(p, ctx.unknowns)) {
    bool lower = false;
    for (const auto& g : gens) lower = lower || (g != *a && derivative_of(*a, g));
    k.kind = lower ? Key::Kind::Implied : Key::Kind::Generator;
    k.atom = a;
    return k;
  }
  Expr r = apply_vanishing(e, gens);
  if (r.is_zero()) {
    k.kind = Key::Kind::Implied;
    return k;
  }
  p = primitive(r, ctx.nonzero);
  if (auto a = single_unknown(p, ctx.unknowns)) {
    k.kind = Key::Kind::Generator;
    k.atom = a;
    return k;
  }
  k.expr = p;
  return k;
}

}  // namespace

CompareReport compare_systems(const DeterminingSystem& a, const DeterminingSystem& b) {
  ReductionContext ctx = context_of(a);
  for (const auto& u : b.unknowns) ctx.unknowns.insert(u);
  for (const auto& r : b.assumptions) {
    if (r.nonzero && std::find(ctx.nonzero.begin(), ctx.nonzero.end(), r.expr) == ctx.nonzero.end()) {
      ctx.nonzero.push_back(r.expr);
    }
  }
  CompareReport rep;
  for (const auto& s : relation_texts(a.assumptions)) rep.assumptions.push_back(s);
  for (const auto& s : relation_texts(b.assumptions)) {
    if (std::find(rep.assumptions.begin(), rep.assumptions.end(), s) == rep.assumptions.end()) {
      rep.assumptions.push_back(s);
    }
  }
  const std::size_t na = a.equations.size(), nb = b.equations.size();
  auto pair_of = [&](std::size_t i, std::size_t j, const char* level) {
    return MatchedPair{i, j, a.equations[i].label, b.equations[j].label, level};
  };

  std::vector<Expr> pa, pb;
  for (const auto& e : a.equations) pa.push_back(primitive(e.expr, ctx.nonzero));
  for (const auto& e : b.equations) pb.push_back(primitive(e.expr, ctx.nonzero));
  {
    std::vector<bool> used(nb, false);
    std::vector<MatchedPair> pairs;
    for (std::size_t i = 0; i < na; ++i) {
      for (std::size_t j = 0; j < nb; ++j) {
        if (!used[j] && pa[i] == pb[j]) {
          used[j] = true;
          pairs.push_back(pair_of(i, j, "raw"));
          break;
        }
      }
    }
    if (na == nb && pairs.size() == na) {
      rep.status = "identical";
      rep.matched_pairs = std::move(pairs);
      rep.reduced_identical = true;
      return rep;
    }
  }

  Reduced ra = reduce(exprs_of(a), ctx);
  Reduced rb = reduce(exprs_of(b), ctx);
  std::vector<Atom> ga = ra.generator_atoms(), gb = rb.generator_atoms();
  bool gens_equal = true;
  for (const auto& g : ga) gens_equal = gens_equal && implied_by(g, gb);
  for (const auto& g : gb) gens_equal = gens_equal && implied_by(g, ga);
  std::vector<Expr> ea = ra.remaining_exprs(), eb = rb.remaining_exprs();
  bool rem_equal = ea.size() == eb.size();
  for (const auto& e : ea) rem_equal = rem_equal && std::find(eb.begin(), eb.end(), e) != eb.end();
  rep.reduced_identical = gens_equal && rem_equal;
  bool equivalent = rep.reduced_identical || (gens_equal && spans(ea, eb) && spans(eb, ea));
  rep.status = equivalent ? "equivalent-up-to-combination" : "mismatch";

  std::vector<Atom> g = ga;
  for (const auto& x : gb) {
    if (!implied_by(x, g)) g.push_back(x);
  }
  std::vector<Key> ka, kb;
  for (const auto& e : a.equations) ka.push_back(key_of(e.expr, ctx, g));
  for (const auto& e : b.equations) kb.push_back(key_of(e.expr, ctx, g));

  auto source_of = [](const Reduced& r, const Atom& x) -> std::optional<std::size_t> {
    for (const auto& [gen, i] : r.generators) {
      if (derivative_of(x, gen) && i != static_cast<std::size_t>(-1)) return i;
    }
    return std::nullopt;
  };
  std::vector<bool> used_b(nb, false), done_a(na, false);
  // exact key matches first, one to one
  for (std::size_t i = 0; i < na; ++i) {
    if (ka[i].kind == Key::Kind::Implied) continue;
    for (std::size_t j = 0; j < nb; ++j) {
      if (used_b[j] || kb[j].kind != ka[i].kind) continue;
      bool same = ka[i].kind == Key::Kind::Generator ? *ka[i].atom == *kb[j].atom : ka[i].expr == kb[j].expr;
      if (!same) continue;
      used_b[j] = true;
      done_a[i] = true;
      rep.matched_pairs.push_back(pair_of(i, j, ka[i].kind == Key::Kind::Generator ? "generator" : "reduced"));
      break;
    }
  }
  // generators implied by a generator of the other side
  for (std::size_t i = 0; i < na; ++i) {
    if (done_a[i] || ka[i].kind != Key::Kind::Generator) continue;
    if (auto j = source_of(rb, *ka[i].atom); j && !used_b[*j]) {
      used_b[*j] = true;
      done_a[i] = true;
      rep.matched_pairs.push_back(pair_of(i, *j, "generator"));
    }
  }
  for (std::size_t j = 0; j < nb; ++j) {
    if (used_b[j] || kb[j].kind != Key::Kind::Generator) continue;
    if (auto i = source_of(ra, *kb[j].atom); i && !done_a[*i]) {
      used_b[j] = true;
      done_a[*i] = true;
      rep.matched_pairs.push_back(pair_of(*i, j, "generator"));
    }
  }
  for (std::size_t i = 0; i < na; ++i) {
    if (done_a[i]) continue;
    if (ka[i].kind == Key::Kind::Implied) {
      rep.implied_a.push_back(i);
    } else {
      rep.unmatched_a.push_back(i);
      rep.unmatched_a_text.push_back(to_string(ka[i].atom ? Expr(*ka[i].atom) : ka[i].expr));
    }
  }
  for (std::size_t j = 0; j < nb; ++j) {
    if (used_b[j]) continue;
    if (kb[j].kind == Key::Kind::Implied) {
      rep.implied_b.push_back(j);
    } else {
      rep.unmatched_b.push_back(j);
      rep.unmatched_b_text.push_back(to_string(kb[j].atom ? Expr(*kb[j].atom) : kb[j].expr));
    }
  }
  std::sort(rep.matched_pairs.begin(), rep.matched_pairs.end(),
            [](const MatchedPair& x, const MatchedPair& y) { return x.a < y.a; });
  return rep;
}

DeterminingSystem reduced_system(const DeterminingSystem& ds, const std::vector<Atom>& vanishing) {
  Reduced r = reduce(exprs_of(ds), context_of(ds), vanishing);
  DeterminingSystem out = ds;
  out.equations.clear();
  std::vector<Atom> gens;
  for (const auto& [a, i] : r.generators)
    if (a.is_func() && ds.unknowns.count(a.name())) gens.push_back(a);
  std::vector<Expr> rest;
  for (const auto& [e, i] : r.remaining) rest.push_back(scale_integral(e));
  std::sort(gens.begin(), gens.end());
  std::sort(rest.begin(), rest.end());
  std::size_t n = 0;
  for (const auto& a : gens) out.equations.push_back({"g" + std::to_string(++n), Expr(a)});
  n = 0;
  for (const auto& e : rest) out.equations.push_back({"r" + std::to_string(++n), e});
  return out;
}

// ---------------------------------------------------------------------------
// xi0 normalization

VectorField normalize_xi0(const VectorField& q) {
  if (q.xi0.is_zero()) throw PreconditionError("xi0-zero branch unsupported");
  VectorField out = q;
  out.xi0 = Expr(1);
  out.xi1 = q.xi1 / q.xi0;
  for (auto& e : out.eta) e = e / q.xi0;
  return out;
}

Xi0Normalization normalize_xi0(const DeterminingSystem& ds) {
  const FunctionDecl& x0 = need_function(ds.decls, "xi0");
  const FunctionDecl& x1 = need_function(ds.decls, "xi1");
  AtomMap m;
  Expr xi0 = slot_call(x0, "xi0");
  m.functions["xi1"] = {x1.args.size(), xi0 * slot_call(x1, "xi")};
  std::set<std::string> unknowns{"xi0", "xi"};
  for (const auto& f : ds.decls.functions) {
    if (f.name.rfind("eta", 0) == 0) {
      m.functions[f.name] = {f.args.size(), xi0 * slot_call(f, f.name)};
      unknowns.insert(f.name);
    }
  }
  DeterminingSystem sub = ds;
  sub.unknowns = unknowns;
  sub.decls.functions.clear();
  for (const auto& f : ds.decls.functions) {
    if (f.name == "xi1") {
      sub.decls.functions.push_back({"xi", f.args});
    } else {
      sub.decls.functions.push_back(f);
    }
  }
  for (auto& e : sub.equations) e.expr = substitute(e.expr, m);

  Reduced red = reduce(exprs_of(sub), context_of(sub));
  Xi0Normalization out;
  out.xi0_eliminated_exactly = true;
  for (const auto& [e, i] : red.remaining) {
    for (const auto& f : top_level_funcs(e)) {
      if (f.name() == "xi0") out.xi0_eliminated_exactly = false;
    }
  }
  AtomMap one;
  one.functions["xi0"] = {x0.args.size(), Expr(1)};
  DeterminingSystem res = sub;
  res.equations.clear();
  res.unknowns.erase("xi0");
  res.decls.functions.erase(std::remove_if(res.decls.functions.begin(), res.decls.functions.end(),
                                           [](const FunctionDecl& f) { return f.name == "xi0"; }),
                            res.decls.functions.end());
  res.assumptions.erase(std::remove_if(res.assumptions.begin(), res.assumptions.end(),
                                       [](const Relation& r) {
                                         for (const auto& f : top_level_funcs(r.expr)) {
                                           if (f.name() == "xi0") return true;
                                         }
                                         return false;
                                       }),
                        res.assumptions.end());
  std::vector<Expr> eqs;
  for (const auto& [a, i] : red.generators) {
    if (a.name() != "xi0") eqs.push_back(Expr(a));
  }
  for (const auto& [e, i] : red.remaining) {
    Expr r = substitute(e, one);
    if (r.is_zero()) continue;
    r = scale_integral(primitive(r, context_of(res).nonzero));
    if (std::find(eqs.begin(), eqs.end(), r) == eqs.end()) eqs.push_back(r);
  }
  res.equations = numbered(eqs);
  res.description = ds.description + (ds.description.empty() ? "" : ", ") + "normalized by xi0";
  out.system = std::move(res);
  return out;
}

// ---------------------------------------------------------------------------
// The restricted example

ExampleResult restrict_example(const SourceFile& generic, ExampleKind kind, const std::vector<Atom>& extra) {
  GenerateRequest req;
  req.indices = kind == ExampleKind::FirstType ? std::vector<std::size_t>{1} : std::vector<std::size_t>{1, 2};
  DeterminingSystem ds = generate(generic, req);
  const Declarations& d = ds.decls;
  std::vector<Atom> van = extra;
  van.push_back(*d.apply_declared("xi1").as_atom());
  van.push_back(*d.apply_declared("eta1", {0, 0, 0, 1}).as_atom());
  van.push_back(*d.apply_declared("eta2", {0, 0, 1, 0}).as_atom());

  Reduced red = reduce(exprs_of(ds), context_of(ds), van);
  ExampleResult out;
  out.system = ds;
  out.system.equations.clear();
  std::size_t n = 0;
  for (const auto& [e, i] : red.remaining) out.system.equations.push_back({std::to_string(++n), scale_integral(e)});
  out.system.description = std::string(kind == ExampleKind::FirstType ? "first-type" : "non-classical") +
                           " system with xi1 = eta1_v = eta2_u = 0";
  for (const auto& [a, i] : red.generators) {
    if (ds.unknowns.count(a.name())) out.generators.push_back(a);
  }

  // xi0 = c(t), eta1 = r1(t) u + p1(t,x), eta2 = r2(t) v + p2(t,x)
  FunctionDecl c{"c", {"t"}}, r1{"r1", {"t"}}, r2{"r2", {"t"}}, p1{"p1", {"t", "x"}}, p2{"p2", {"t", "x"}};
  auto call = [](const FunctionDecl& f, std::vector<int> slots) {
    std::vector<Expr> args;
    for (int s : slots) args.push_back(Expr(Atom::slot(s)));
    return Expr(Atom::func(f.name, f.args, std::move(args), std::vector<int>(slots.size(), 0)));
  };
  AtomMap ansatz;
  ansatz.functions["xi0"] = {4, call(c, {0})};
  ansatz.functions["xi1"] = {4, Expr(0)};
  ansatz.functions["eta1"] = {4, call(r1, {0}) * Expr(Atom::slot(2)) + call(p1, {0, 1})};
  ansatz.functions["eta2"] = {4, call(r2, {0}) * Expr(Atom::slot(3)) + call(p2, {0, 1})};
  out.ansatz_solves_generators = true;
  for (const auto& g : out.generators) {
    if (!substitute(Expr(g), ansatz).is_zero()) out.ansatz_solves_generators = false;
  }
  return out;
}

DeterminingSystem ExampleResult::full() const {
  DeterminingSystem out = system;
  out.equations.clear();
  std::size_t n = 0;
  for (const auto& g : generators) out.equations.push_back({"g" + std::to_string(++n), Expr(g)});
  out.equations.insert(out.equations.end(), system.equations.begin(), system.equations.end());
  return out;
}

// ---------------------------------------------------------------------------
// Component swap

DeterminingSystem swap_components(const DeterminingSystem& ds) {
  if (ds.decls.deps.size() != 2) throw PreconditionError("component swap needs two dependent variables");
  const std::string u = ds.decls.deps[0], v = ds.decls.deps[1];
  AtomMap m;
  for (const auto& e : ds.equations) {
    for (const auto& j : jets_in(e.expr)) {
      if (j.name() == u) m.atoms.emplace(j, Expr::jet(v, j.nt(), j.nx()));
      if (j.name() == v) m.atoms.emplace(j, Expr::jet(u, j.nt(), j.nx()));
    }
  }
  m.atoms.emplace(Atom::jet(u, 0, 0), Expr::jet(v));
  m.atoms.emplace(Atom::jet(v, 0, 0), Expr::jet(u));
  auto swap_of = [&](const FunctionDecl& f) {
    std::vector<int> perm;
    for (std::size_t i = 0; i < f.args.size(); ++i) {
      int k = static_cast<int>(i);
      if (f.args[i] == u || f.args[i] == v) {
        const std::string& other = f.args[i] == u ? v : u;
        auto it = std::find(f.args.begin(), f.args.end(), other);
        if (it != f.args.end()) k = static_cast<int>(it - f.args.begin());
      }
      perm.push_back(k);
    }
    return perm;
  };
  std::map<std::string, std::string> partner{{"d1", "d2"}, {"d2", "d1"},     {"C1", "C2"},
                                             {"C2", "C1"}, {"eta1", "eta2"}, {"eta2", "eta1"}};
  for (const auto& f : ds.decls.functions) {
    auto p = partner.find(f.name);
    std::string target = p == partner.end() ? f.name : p->second;
    const FunctionDecl& tf = need_function(ds.decls, target);
    if (tf.args.size() != f.args.size()) throw PreconditionError("cannot swap '" + f.name + "'");
    m.functions[f.name] = {f.args.size(), slot_call(tf, target, swap_of(tf))};
  }
  DeterminingSystem out = ds;
  for (auto& e : out.equations) e.expr = substitute(e.expr, m);
  for (auto& r : out.assumptions) {
    r.expr = substitute(r.expr, m);
    r.text.clear();
  }
  return out;
}

}  // namespace condsym
