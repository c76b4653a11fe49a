#include "condsym/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "condsym/condsym.hpp"
#include "condsym/error.hpp"

#ifndef CONDSYM_DATA_DIR
#define CONDSYM_DATA_DIR "data"
#endif

namespace condsym {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// Parameter names accept the same Unicode spellings as the file grammar.
std::string ascii_name(const std::string& s) {
  static const std::vector<std::pair<std::string, std::string>> reps = {
      {"λ", "lambda"}, {"α", "alpha"}, {"₀", "0"}, {"₁", "1"}, {"₂", "2"},
      {"₃", "3"},      {"₄", "4"},     {"₅", "5"}, {"₆", "6"}, {"₇", "7"}};
  std::string out = s;
  for (const auto& [from, to] : reps) {
    for (std::size_t p = out.find(from); p != std::string::npos; p = out.find(from, p + to.size()))
      out.replace(p, from.size(), to);
  }
  return out;
}

std::map<std::string, ParamFrac> as_params(const std::map<std::string, Rational>& p) {
  std::map<std::string, ParamFrac> out;
  for (const auto& [k, v] : p) out.emplace(k, ParamFrac(v));
  return out;
}

Expr concrete(const Expr& e, const AtomMap& m) { return m.empty() ? e : substitute(e, m); }

std::optional<Rational> constant_of(const Expr& e) {
  auto c = e.constant();
  if (!c || !c->is_rational()) return std::nullopt;
  return c->rational();
}

// Rule right-hand side written in slot #0 for the unary function `name`.
Expr slot_form(const OdeRule& r, const Declarations& decls) {
  const FunctionDecl* f = decls.function(r.function);
  Atom arg = f && !f->args.empty() ? Atom::indep(f->args[0]) : space_atom();
  AtomMap m;
  m.atoms.emplace(arg, Expr(Atom::slot(0)));
  return substitute(r.rhs, m);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string params_text(const std::map<std::string, Rational>& p) {
  std::string out;
  for (const auto& [k, v] : p) {
    if (!out.empty()) out += ", ";
    out += k + "=" + rational_to_string(v);
  }
  return out;
}

}  // namespace

std::string data_dir() {
  if (const char* env = std::getenv("CONDSYM_DATA"); env && *env) return env;
  return CONDSYM_DATA_DIR;
}

std::map<std::string, Rational> parse_assignments(const std::string& text) {
  std::map<std::string, Rational> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ParseError("expected name=value in '" + trim(item) + "'");
    std::string name = ascii_name(trim(item.substr(0, eq)));
    Expr v = parse_expr(trim(item.substr(eq + 1)));
    auto q = constant_of(v);
    if (name.empty() || !q) throw ParseError("parameter value must be a rational number in '" + trim(item) + "'");
    out[name] = *q;
  }
  return out;
}

CatalogEntry read_entry(const std::string& path) {
  CatalogEntry e;
  e.path = path;
  e.source = load_source(path);
  if (auto r = e.source.meta.find("row"); r != e.source.meta.end()) e.row = std::stoi(r->second);
  if (auto t = e.source.meta.find("title"); t != e.source.meta.end()) e.title = t->second;
  if (auto d = e.source.meta.find("defaults"); d != e.source.meta.end()) e.defaults = parse_assignments(d->second);
  return e;
}

std::vector<CatalogEntry> list_entries(const std::string& dir) {
  std::vector<CatalogEntry> out;
  if (!std::filesystem::is_directory(dir)) throw PreconditionError("catalog directory not found: " + dir);
  for (const auto& de : std::filesystem::directory_iterator(dir)) {
    if (de.path().extension() != ".sys") continue;
    CatalogEntry e = read_entry(de.path().string());
    if (e.row > 0) out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.row < b.row; });
  return out;
}

CatalogEntry load_entry(int row, const std::string& dir) {
  for (auto& e : list_entries(dir))
    if (e.row == row) return e;
  throw PreconditionError("no catalog row " + std::to_string(row));
}

std::string pretty(const std::string& text) {
  static const char* subs[] = {"₀", "₁", "₂", "₃", "₄", "₅", "₆", "₇", "₈", "₉"};
  std::string out;
  for (std::size_t i = 0; i < text.size();) {
    if (text.compare(i, 6, "lambda") == 0) {
      out += "λ";
      i += 6;
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) out += subs[text[i++] - '0'];
    } else if (text.compare(i, 5, "alpha") == 0) {
      out += "α";
      i += 5;
    } else if (text.compare(i, 2, "!=") == 0) {
      out += "≠";
      i += 2;
    } else if (text[i] == ' ') {
      ++i;
    } else {
      out += text[i++];
    }
  }
  return out;
}

Expr apply_rules(const Expr& e, const std::vector<OdeRule>& rules) {
  if (rules.empty()) return e;
  Expr cur = e;
  for (int guard = 0; guard < 64; ++guard) {
    bool changed = false;
    Expr next = map_atoms(cur, [&](const Atom& a) -> std::optional<Expr> {
      if (!a.is_func() || a.args().size() != 1 || a.deriv_order() < 2) return std::nullopt;
      for (const auto& r : rules) {
        if (r.function != a.name()) continue;
        Expr body = r.rhs;
        for (int k = 2; k < a.deriv_order(); ++k) body = diff(body, Atom::slot(0));
        AtomMap m;
        m.atoms.emplace(Atom::slot(0), a.args()[0]);
        changed = true;
        return substitute(body, m);
      }
      return std::nullopt;
    });
    cur = next;
    if (!changed) return cur;
  }
  throw DomainError("rewrite rules did not terminate");
}

Instance instantiate(const CatalogEntry& entry, const InstantiateOptions& opt) {
  const SourceFile& src = entry.source;
  Instance inst;
  inst.row = entry.row;
  inst.params = entry.defaults;
  for (const auto& [k, v] : opt.params) {
    if (!src.decls.is_param(k)) throw PreconditionError("row " + std::to_string(entry.row) + " has no parameter " + k);
    inst.params[k] = v;
  }
  for (const auto& p : src.decls.params)
    if (!inst.params.count(p)) throw PreconditionError("parameter " + p + " needs a value");

  AtomMap pm;
  pm.params = as_params(inst.params);

  if (opt.enforce_restrictions) {
    for (const auto& disj : src.restrictions) {
      bool ok = false;
      for (const auto& rel : disj) {
        auto v = constant_of(concrete(rel.expr, pm));
        if (!v) throw PreconditionError("restriction " + pretty(rel.text) + " is not constant");
        if ((*v != 0) == rel.nonzero) ok = true;
      }
      if (!ok) {
        std::string text;
        for (const auto& rel : disj) text += (text.empty() ? "" : " or ") + pretty(rel.text);
        throw PreconditionError("restriction " + text + " violated");
      }
    }
  }

  std::vector<OdeRule> rules;
  for (const auto& r : src.ode_rules) {
    OdeRule c = r;
    c.rhs = slot_form(r, src.decls);
    c.rhs = concrete(c.rhs, pm);
    rules.push_back(c);
  }

  AtomMap full = pm;
  if (opt.p_sample) {
    if (rules.empty()) throw PreconditionError("row " + std::to_string(entry.row) + " has no p(x)");
    const OdeRule& r = rules.front();
    Expr p = *opt.p_sample;
    Expr lhs = diff(diff(p, Atom::slot(0)), Atom::slot(0));
    AtomMap fm;
    fm.functions[r.function] = FunctionTemplate{1, p};
    Expr rhs = substitute(r.rhs, fm);
    Expr defect = lhs - rhs;
    if (!defect.is_zero()) {
      CheckOptions co;
      co.tol = opt.constraint_tol;
      co.n_points = 100;
      co.domain.space = {0.5, 2.0};
      AtomMap toX;
      toX.atoms.emplace(Atom::slot(0), Expr(space_atom()));
      if (!check_identity(substitute(lhs, toX), substitute(rhs, toX), co))
        throw PreconditionError("p sample fails constraint " + pretty(r.text));
    }
    full.functions[r.function] = FunctionTemplate{1, p};
    rules.clear();
  }
  inst.rules = rules;

  ParsedSystem ps = parse_system(src);
  if (!ps.original || !ps.evolution) throw PreconditionError("catalog row is not a reaction-diffusion system");
  inst.original.deps = ps.original->deps;
  for (const auto& d : ps.original->diffusivity) inst.original.diffusivity.push_back(concrete(d, full));
  for (const auto& f : ps.original->reaction) inst.original.reaction.push_back(concrete(f, full));
  inst.evolution.deps = ps.evolution->deps;
  for (const auto& r : ps.evolution->rhs) inst.evolution.rhs.push_back(apply_rules(concrete(r, full), rules));

  VectorField q = operator_of(src);
  inst.op.deps = q.deps;
  inst.op.xi0 = concrete(q.xi0, full);
  inst.op.xi1 = concrete(q.xi1, full);
  for (const auto& e : q.eta) inst.op.eta.push_back(concrete(e, full));

  inst.decls = src.decls;
  inst.decls.params.erase(std::remove_if(inst.decls.params.begin(), inst.decls.params.end(),
                                         [&](const std::string& p) { return inst.params.count(p) > 0; }),
                          inst.decls.params.end());
  inst.decls.derived.clear();
  return inst;
}

Classification expected_classification(const CatalogEntry& entry, const std::map<std::string, Rational>& params) {
  InstantiateOptions io;
  io.params = params;
  io.enforce_restrictions = false;
  Instance inst = instantiate(entry, io);
  Classification c;
  c.trace.push_back("row " + std::to_string(entry.row) + " with " + params_text(inst.params));
  c.trace.push_back("nonclassical: listed in the catalog");

  KirchhoffResult k = to_canonical(inst.original, inst.decls, true);
  VectorField q = transform_operator(inst.op, k.record);
  const auto& deps = k.canonical.deps;
  for (std::size_t a = 0; a < deps.size(); ++a) {
    Expr d_u = diff(k.canonical.d[a], Atom::jet(deps[a], 0, 0));
    Expr prod = apply_rules(q.eta[a] * d_u, inst.rules);
    std::string n = std::to_string(a + 1);
    c.trace.push_back("d" + n + " = " + to_string(k.canonical.d[a]));
    c.trace.push_back("eta" + n + " = " + to_string(q.eta[a]));
    c.trace.push_back("eta" + n + "*d" + n + "_" + deps[a] + " = " + to_string(prod));
    if (prod.is_zero()) c.first_type = true;
  }
  c.trace.push_back(std::string("first type: ") + (c.first_type ? "eta^a*d^a_(u^a) vanishes for some a"
                                                                   : "eta^a*d^a_(u^a) is nonzero for every a"));
  if (entry.row == 2) {
    auto get = [&](const char* n) { return inst.params.at(n); };
    c.lie_degenerate = get("lambda1") == 0 && get("l") == 0;
    if (c.lie_degenerate) c.trace.push_back("lambda1 = l = 0: Lie symmetry operator");
  }
  return c;
}

std::string kind_name(CheckKind k) {
  switch (k) {
    case CheckKind::Lie:
      return "lie";
    case CheckKind::FirstType:
      return "first-type";
    case CheckKind::NonClassical:
      return "nonclassical";
  }
  return {};
}

std::vector<Expr> instance_residuals(const Instance& inst, const std::vector<std::size_t>& indices) {
  PdeSystem sys = inst.pde();
  Manifold man = build_manifold(sys, inst.op, indices);
  Residuals r = invariance_residuals(sys, inst.op, man);
  std::vector<Expr> out;
  for (const auto& e : r.exprs) out.push_back(apply_rules(e, inst.rules));
  return out;
}

VerifyResult verify_instance(const Instance& inst, CheckKind kind, const std::vector<std::size_t>& indices,
                             const VerifyOptions& opt) {
  VerifyResult vr;
  vr.kind = kind;
  vr.indices = indices;
  if (kind == CheckKind::Lie) vr.indices.clear();
  if (kind == CheckKind::NonClassical && vr.indices.empty())
    for (std::size_t i = 1; i <= inst.evolution.deps.size(); ++i) vr.indices.push_back(i);
  vr.claim = "row " + std::to_string(inst.row) + " " + kind_name(kind);
  if (kind == CheckKind::FirstType) {
    vr.claim += " Q(";
    for (std::size_t i : vr.indices) vr.claim += inst.evolution.deps.at(i - 1);
    vr.claim += ")";
  }
  std::vector<Expr> res = instance_residuals(inst, vr.indices);
  vr.symbolic_zero = std::all_of(res.begin(), res.end(), [](const Expr& e) { return e.is_zero(); });

  std::set<std::string> fnames;
  for (const auto& e : res)
    for (const auto& a : atoms_of_kind(e, AtomKind::Func))
      if (!a.is_exp() && a.args().size() == 1) fnames.insert(a.name());
  for (const auto& r : inst.rules) fnames.erase(r.function);

  vr.report.claim = vr.claim;
  vr.report.tol = opt.check.tol;
  vr.report.seed = opt.check.seed;
  vr.report.status = "pass";
  int n = std::max(1, opt.n_samples);
  for (int s = 0; s < n; ++s) {
    std::uint64_t seed = mix(opt.check.seed, static_cast<std::uint64_t>(s));
    std::mt19937_64 rng(seed);
    std::vector<FunctionSample> samples;
    for (const auto& f : fnames) samples.push_back(random_polynomial_sample(f, 1, rng));
    CheckOptions co = opt.check;
    co.seed = seed;
    CheckReport cr = residual_check(res, co, samples, vr.claim + " sample " + std::to_string(s + 1));
    vr.report.n_points += cr.n_points;
    vr.report.resamples += cr.resamples;
    if (cr.max_violation >= vr.report.max_violation) {
      vr.report.max_violation = cr.max_violation;
      vr.report.worst_point = cr.worst_point;
    }
    if (cr.confirmed_fail())
      vr.report.status = "confirmed-fail";
    else if (!cr.pass() && vr.report.status == "pass")
      vr.report.status = "fail";
    vr.per_sample.push_back(std::move(cr));
  }
  return vr;
}

std::string FirstTypeResult::status() const {
  if (with_u.report.pass() || with_v.report.pass()) return "pass";
  if (with_u.report.confirmed_fail() && with_v.report.confirmed_fail()) return "confirmed-fail";
  return "fail";
}

FirstTypeResult verify_first_type(const Instance& inst, const VerifyOptions& opt) {
  FirstTypeResult r;
  r.with_u = verify_instance(inst, CheckKind::FirstType, {1}, opt);
  r.with_v = verify_instance(inst, CheckKind::FirstType, {2}, opt);
  return r;
}

}  // namespace condsym
