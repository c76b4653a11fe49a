#include "condsym/expr.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

#include "condsym/error.hpp"

namespace condsym {

struct AtomNode {
  AtomKind kind = AtomKind::Indep;
  std::string name;
  int nt = 0;
  int nx = 0;
  std::vector<std::string> slots;
  std::vector<Expr> args;
  std::vector<int> deriv;
  Expr base;
};

namespace {

template <class T>
int cmp3(const T& a, const T& b) {
  if (a < b) return -1;
  if (b < a) return 1;
  return 0;
}

const std::shared_ptr<const std::vector<Term>>& empty_terms() {
  static const auto e = std::make_shared<const std::vector<Term>>();
  return e;
}

bool is_positive_integer(const ParamFrac& n) { return n.is_integer() && n.rational() > 0; }

Term scale_term(const Term& t, const ParamFrac& c) { return Term{t.mono, t.coeff * c}; }

// Splits c^n into an exact coefficient and, when no exact root exists, a power factor.
std::pair<ParamFrac, Monomial> coeff_pow(const ParamFrac& c, const ParamFrac& n) {
  if (c.is_one()) return {ParamFrac(1), {}};
  if (n.is_integer()) return {c.pow(n.to_long()), {}};
  if (c.is_rational() && c.rational() > 0 && n.is_rational()) {
    const Rational& q = n.rational();
    if (q.get_den().fits_ulong_p() && q.get_num().fits_slong_p()) {
      unsigned long root = q.get_den().get_ui();
      mpz_class rn, rd;
      bool exact_n = mpz_root(rn.get_mpz_t(), c.rational().get_num().get_mpz_t(), root) != 0;
      bool exact_d = mpz_root(rd.get_mpz_t(), c.rational().get_den().get_mpz_t(), root) != 0;
      if (exact_n && exact_d) {
        ParamFrac r(Rational(rn, rd));
        return {r.pow(q.get_num().get_si()), {}};
      }
    }
  }
  Monomial m;
  m.factors.emplace_back(Atom::base(Expr(c)), n);
  return {ParamFrac(1), m};
}

std::vector<Term> merge_sorted(std::vector<Term> plain) {
  std::sort(plain.begin(), plain.end(),
            [](const Term& a, const Term& b) { return a.mono.compare(b.mono) < 0; });
  std::vector<Term> out;
  out.reserve(plain.size());
  for (auto& t : plain) {
    if (!out.empty() && out.back().mono == t.mono) {
      out.back().coeff += t.coeff;
    } else {
      out.push_back(std::move(t));
    }
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](const Term& t) { return t.coeff.is_zero(); }),
            out.end());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Atom

Atom Atom::indep(const std::string& name) {
  auto n = std::make_shared<AtomNode>();
  n->kind = AtomKind::Indep;
  n->name = name;
  return Atom(n);
}

Atom Atom::jet(const std::string& dep, int nt, int nx) {
  if (nt < 0 || nx < 0) throw PreconditionError("negative jet order");
  auto n = std::make_shared<AtomNode>();
  n->kind = AtomKind::Jet;
  n->name = dep;
  n->nt = nt;
  n->nx = nx;
  return Atom(n);
}

Atom Atom::slot(int index) {
  auto n = std::make_shared<AtomNode>();
  n->kind = AtomKind::Slot;
  n->nt = index;
  n->name = "#" + std::to_string(index);
  return Atom(n);
}

Atom Atom::func(const std::string& name, std::vector<std::string> slots, std::vector<Expr> args,
                std::vector<int> deriv) {
  if (deriv.empty()) deriv.assign(args.size(), 0);
  if (deriv.size() != args.size()) throw PreconditionError("derivative index arity mismatch");
  if (slots.empty()) {
    for (std::size_t i = 0; i < args.size(); ++i) slots.push_back("#" + std::to_string(i));
  }
  auto n = std::make_shared<AtomNode>();
  n->kind = AtomKind::Func;
  n->name = name;
  n->slots = std::move(slots);
  n->args = std::move(args);
  n->deriv = std::move(deriv);
  return Atom(n);
}

Atom Atom::exp(const Expr& arg) { return func(kExpName, {"#0"}, {arg}, {0}); }

Atom Atom::base(const Expr& b) {
  auto n = std::make_shared<AtomNode>();
  n->kind = AtomKind::Base;
  n->base = b;
  return Atom(n);
}

AtomKind Atom::kind() const { return n_->kind; }
const std::string& Atom::name() const { return n_->name; }
int Atom::nt() const { return n_->kind == AtomKind::Jet ? n_->nt : 0; }
int Atom::nx() const { return n_->nx; }
int Atom::slot_index() const { return n_->nt; }
const std::vector<Expr>& Atom::args() const { return n_->args; }
const std::vector<std::string>& Atom::slots() const { return n_->slots; }
const std::vector<int>& Atom::deriv() const { return n_->deriv; }
const Expr& Atom::base_expr() const { return n_->base; }
bool Atom::is_exp() const { return n_->kind == AtomKind::Func && n_->name == kExpName; }

int Atom::deriv_order() const {
  int s = 0;
  for (int d : n_->deriv) s += d;
  return s;
}

Atom Atom::with_deriv(std::vector<int> deriv) const {
  auto n = std::make_shared<AtomNode>(*n_);
  n->deriv = std::move(deriv);
  return Atom(n);
}

Atom Atom::with_args(std::vector<Expr> args) const {
  auto n = std::make_shared<AtomNode>(*n_);
  n->args = std::move(args);
  return Atom(n);
}

Atom Atom::bumped(int dt, int dx) const {
  if (n_->kind != AtomKind::Jet) throw PreconditionError("bumped() on non-jet atom");
  return jet(n_->name, n_->nt + dt, n_->nx + dx);
}

int Atom::compare(const Atom& o) const {
  if (n_ == o.n_) return 0;
  const AtomNode& a = *n_;
  const AtomNode& b = *o.n_;
  if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
  switch (a.kind) {
    case AtomKind::Indep:
      return cmp3(a.name, b.name);
    case AtomKind::Slot:
      return cmp3(a.nt, b.nt);
    case AtomKind::Jet:
      if (int c = cmp3(a.name, b.name)) return c;
      if (int c = cmp3(a.nt + a.nx, b.nt + b.nx)) return c;
      return cmp3(b.nt, a.nt);
    case AtomKind::Func: {
      if (int c = cmp3(a.name, b.name)) return c;
      if (int c = cmp3(a.args.size(), b.args.size())) return c;
      if (int c = cmp3(a.deriv, b.deriv)) return c;
      for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (int c = a.args[i].compare(b.args[i])) return c;
      }
      return cmp3(a.slots, b.slots);
    }
    case AtomKind::Base:
      return a.base.compare(b.base);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Monomial

ParamFrac Monomial::exponent_of(const Atom& a) const {
  for (const auto& [atom, e] : factors) {
    if (atom == a) return e;
  }
  return ParamFrac(0);
}

Monomial Monomial::operator*(const Monomial& o) const {
  Monomial out;
  out.factors.reserve(factors.size() + o.factors.size());
  std::size_t i = 0, j = 0;
  while (i < factors.size() || j < o.factors.size()) {
    int c = i == factors.size()     ? 1
            : j == o.factors.size() ? -1
                                    : factors[i].first.compare(o.factors[j].first);
    if (c < 0) {
      out.factors.push_back(factors[i++]);
    } else if (c > 0) {
      out.factors.push_back(o.factors[j++]);
    } else {
      ParamFrac e = factors[i].second + o.factors[j].second;
      if (!e.is_zero()) out.factors.emplace_back(factors[i].first, e);
      ++i;
      ++j;
    }
  }
  return out;
}

Monomial Monomial::inverse() const {
  Monomial out = *this;
  for (auto& f : out.factors) f.second = -f.second;
  return out;
}

int Monomial::compare(const Monomial& o) const {
  std::size_t n = std::min(factors.size(), o.factors.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (int c = factors[i].first.compare(o.factors[i].first)) return c;
    if (int c = factors[i].second.compare(o.factors[i].second)) return c;
  }
  return cmp3(factors.size(), o.factors.size());
}

// ---------------------------------------------------------------------------
// Expr

Expr::Expr() : t_(empty_terms()) {}
Expr::Expr(long v) : Expr(ParamFrac(v)) {}
Expr::Expr(const Rational& q) : Expr(ParamFrac(q)) {}

Expr::Expr(const ParamFrac& c) {
  if (c.is_zero()) {
    t_ = empty_terms();
  } else {
    t_ = std::make_shared<const std::vector<Term>>(std::vector<Term>{Term{Monomial{}, c}});
  }
}

Expr::Expr(const Atom& a) {
  Monomial m;
  m.factors.emplace_back(a, ParamFrac(1));
  if (a.kind() == AtomKind::Base) {
    *this = from_terms({Term{m, ParamFrac(1)}});
  } else {
    t_ = std::make_shared<const std::vector<Term>>(std::vector<Term>{Term{m, ParamFrac(1)}});
  }
}

Expr::Expr(const Term& t) : Expr(from_terms({t})) {}

Expr Expr::from_terms(std::vector<Term> terms) {
  std::vector<Term> plain;
  plain.reserve(terms.size());
  std::vector<Expr> extra;
  for (auto& t : terms) {
    if (t.coeff.is_zero()) continue;
    auto it = std::find_if(t.mono.factors.begin(), t.mono.factors.end(), [](const auto& f) {
      return f.first.kind() == AtomKind::Base && is_positive_integer(f.second);
    });
    if (it == t.mono.factors.end()) {
      plain.push_back(std::move(t));
      continue;
    }
    Expr b = it->first.base_expr();
    ParamFrac n = it->second;
    t.mono.factors.erase(it);
    extra.push_back(Expr(t) * pow(b, n));
  }
  Expr r(std::make_shared<const std::vector<Term>>(merge_sorted(std::move(plain))));
  for (const auto& e : extra) r = r + e;
  return r;
}

const std::vector<Term>& Expr::terms() const { return *t_; }

std::optional<ParamFrac> Expr::constant() const {
  if (t_->empty()) return ParamFrac(0);
  if (t_->size() == 1 && (*t_)[0].mono.empty()) return (*t_)[0].coeff;
  return std::nullopt;
}

std::optional<Atom> Expr::as_atom() const {
  if (t_->size() != 1) return std::nullopt;
  const Term& t = (*t_)[0];
  if (!t.coeff.is_one() || t.mono.factors.size() != 1 || !t.mono.factors[0].second.is_one())
    return std::nullopt;
  return t.mono.factors[0].first;
}

Expr Expr::operator+(const Expr& o) const {
  if (o.is_zero()) return *this;
  if (is_zero()) return o;
  const auto& a = *t_;
  const auto& b = *o.t_;
  std::vector<Term> out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    int c = a[i].mono.compare(b[j].mono);
    if (c < 0) {
      out.push_back(a[i++]);
    } else if (c > 0) {
      out.push_back(b[j++]);
    } else {
      ParamFrac s = a[i].coeff + b[j].coeff;
      if (!s.is_zero()) out.push_back(Term{a[i].mono, s});
      ++i;
      ++j;
    }
  }
  for (; i < a.size(); ++i) out.push_back(a[i]);
  for (; j < b.size(); ++j) out.push_back(b[j]);
  return Expr(std::make_shared<const std::vector<Term>>(std::move(out)));
}

Expr Expr::operator-() const {
  if (is_zero()) return *this;
  std::vector<Term> out;
  out.reserve(t_->size());
  for (const auto& t : *t_) out.push_back(Term{t.mono, -t.coeff});
  return Expr(std::make_shared<const std::vector<Term>>(std::move(out)));
}

Expr Expr::operator-(const Expr& o) const { return *this + (-o); }

Expr Expr::operator*(const Expr& o) const {
  if (is_zero() || o.is_zero()) return Expr();
  auto scale = [](const Expr& e, const ParamFrac& c) {
    if (c.is_one()) return e;
    std::vector<Term> out;
    out.reserve(e.size());
    for (const auto& t : e.terms()) out.push_back(scale_term(t, c));
    return Expr(std::make_shared<const std::vector<Term>>(std::move(out)));
  };
  if (auto c = constant()) return scale(o, *c);
  if (auto c = o.constant()) return scale(*this, *c);
  std::vector<Term> prod;
  prod.reserve(size() * o.size());
  for (const auto& a : *t_) {
    for (const auto& b : *o.t_) prod.push_back(Term{a.mono * b.mono, a.coeff * b.coeff});
  }
  return from_terms(std::move(prod));
}

Expr Expr::operator/(const Expr& o) const {
  if (o.is_zero()) throw DomainError("zero denominator");
  if (o.size() == 1) {
    const Term& t = o.terms()[0];
    return *this * Expr::from_terms({Term{t.mono.inverse(), t.coeff.inverse()}});
  }
  if (auto q = divide_exact(*this, o)) return *q;
  return *this * pow(o, ParamFrac(-1));
}

namespace {

// Lexicographic group order on rational exponent vectors; atoms earlier in
// atom order are more significant. Nullopt when an exponent is parametric.
std::optional<int> lex_term_cmp(const Monomial& a, const Monomial& b) {
  std::size_t i = 0, j = 0;
  while (i < a.factors.size() || j < b.factors.size()) {
    int c = i == a.factors.size()   ? 1
            : j == b.factors.size() ? -1
                                    : a.factors[i].first.compare(b.factors[j].first);
    Rational ea = 0, eb = 0;
    if (c <= 0) {
      if (!a.factors[i].second.is_rational()) return std::nullopt;
      ea = a.factors[i].second.rational();
    }
    if (c >= 0) {
      if (!b.factors[j].second.is_rational()) return std::nullopt;
      eb = b.factors[j].second.rational();
    }
    if (ea != eb) return ea > eb ? 1 : -1;
    if (c <= 0) ++i;
    if (c >= 0) ++j;
  }
  return 0;
}

struct Extremes {
  const Term* high = nullptr;
  const Term* low = nullptr;
};

std::optional<Extremes> extremes(const Expr& e) {
  Extremes x;
  for (const auto& t : e.terms()) {
    if (!x.high) {
      x.high = x.low = &t;
      continue;
    }
    auto h = lex_term_cmp(t.mono, x.high->mono);
    auto l = lex_term_cmp(t.mono, x.low->mono);
    if (!h || !l) return std::nullopt;
    if (*h > 0) x.high = &t;
    if (*l < 0) x.low = &t;
  }
  return x;
}

}  // namespace

std::optional<Expr> divide_exact(const Expr& a, const Expr& b) {
  if (b.is_zero()) throw DomainError("zero denominator");
  if (a.is_zero()) return Expr();
  auto xb = extremes(b);
  auto xa = extremes(a);
  if (!xb || !xa) return std::nullopt;
  const Term lead_b = *xb->high;
  Monomial floor = xa->low->mono * xb->low->mono.inverse();
  Expr r = a;
  std::vector<Term> q;
  for (int guard = 0; guard < 100000 && !r.is_zero(); ++guard) {
    auto xr = extremes(r);
    if (!xr) return std::nullopt;
    Term qt{xr->high->mono * lead_b.mono.inverse(), xr->high->coeff / lead_b.coeff};
    auto below = lex_term_cmp(qt.mono, floor);
    if (!below || *below < 0) return std::nullopt;
    if (std::any_of(qt.mono.factors.begin(), qt.mono.factors.end(), [](const auto& f) {
          return f.first.kind() == AtomKind::Base && is_positive_integer(f.second);
        })) {
      return std::nullopt;
    }
    q.push_back(qt);
    std::vector<Term> sub;
    sub.reserve(b.size());
    for (const auto& t : b.terms()) sub.push_back(Term{qt.mono * t.mono, -(qt.coeff * t.coeff)});
    r = r + Expr::from_terms(std::move(sub));
  }
  if (!r.is_zero()) return std::nullopt;
  return Expr::from_terms(std::move(q));
}

int Expr::compare(const Expr& o) const {
  if (t_ == o.t_) return 0;
  const auto& a = *t_;
  const auto& b = *o.t_;
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (int c = a[i].mono.compare(b[i].mono)) return c;
    if (int c = a[i].coeff.compare(b[i].coeff)) return c;
  }
  return cmp3(a.size(), b.size());
}

Expr pow(const Expr& e, const ParamFrac& n) {
  if (n.is_zero()) return Expr(1);
  if (e.is_zero()) {
    if (n.is_rational() && n.rational() > 0) return Expr();
    throw DomainError("zero denominator");
  }
  if (n.is_one()) return e;
  if (e.size() == 1) {
    const Term& t = e.terms()[0];
    Monomial m;
    for (const auto& [a, k] : t.mono.factors) m.factors.emplace_back(a, k * n);
    auto [c, extra] = coeff_pow(t.coeff, n);
    return Expr::from_terms({Term{m * extra, c}});
  }
  if (is_positive_integer(n)) {
    long k = n.to_long();
    Expr result(1);
    Expr b = e;
    while (k > 0) {
      if (k & 1) result = result * b;
      k >>= 1;
      if (k > 0) b = b * b;
    }
    return result;
  }
  Expr inner = e;
  ParamFrac content(1);
  const ParamFrac& lc = e.terms()[0].coeff;
  if (lc.is_rational() && lc.rational() > 0 && !lc.is_one()) {
    content = lc;
    inner = e * Expr(lc.inverse());
  }
  auto [c, extra] = coeff_pow(content, n);
  Monomial m;
  m.factors.emplace_back(Atom::base(inner), n);
  return Expr::from_terms({Term{m * extra, c}});
}

Expr exp(const Expr& arg) {
  if (arg.is_zero()) return Expr(1);
  return Expr(Atom::exp(arg));
}

// ---------------------------------------------------------------------------
// Rendering

std::string to_string(const Atom& a) {
  switch (a.kind()) {
    case AtomKind::Indep:
    case AtomKind::Slot:
      return a.name();
    case AtomKind::Jet: {
      std::string s = a.name();
      if (a.order() > 0) s += "_" + std::string(a.nt(), 't') + std::string(a.nx(), 'x');
      return s;
    }
    case AtomKind::Func: {
      std::string s = a.name();
      if (a.deriv_order() > 0) {
        if (a.args().size() == 1) {
          s += std::string(static_cast<std::size_t>(a.deriv()[0]), '\'');
        } else {
          s += "_";
          for (std::size_t j = 0; j < a.deriv().size(); ++j) {
            for (int k = 0; k < a.deriv()[j]; ++k) s += a.slots()[j];
          }
        }
      }
      s += "(";
      for (std::size_t j = 0; j < a.args().size(); ++j) {
        if (j) s += ", ";
        s += to_string(a.args()[j]);
      }
      return s + ")";
    }
    case AtomKind::Base:
      return "(" + to_string(a.base_expr()) + ")";
  }
  return {};
}

std::string to_string(const Expr& e) {
  if (e.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& t : e.terms()) {
    bool negative = t.coeff.is_rational() && t.coeff.rational() < 0;
    ParamFrac mag = negative ? -t.coeff : t.coeff;
    if (first) {
      if (negative) os << "-";
    } else {
      os << (negative ? " - " : " + ");
    }
    first = false;
    bool wrote = false;
    if (!mag.is_one() || t.mono.empty()) {
      os << (t.mono.empty() && mag.is_rational() ? mag.to_string() : mag.to_string(true));
      wrote = true;
    }
    for (const auto& [a, n] : t.mono.factors) {
      if (wrote) os << "*";
      os << to_string(a);
      if (!n.is_one()) {
        if (is_positive_integer(n)) {
          os << "^" << n.to_string();
        } else {
          os << "^(" << n.to_string() << ")";
        }
      }
      wrote = true;
    }
  }
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Expr& e) { return os << to_string(e); }

// ---------------------------------------------------------------------------
// Differentiation

namespace {

class Differ {
 public:
  explicit Differ(const Atom& var) : var_(var) {}
  explicit Differ(std::string param) : param_(std::move(param)) {}
  explicit Differ(const std::function<Expr(const Atom&)>& leaf) : leaf_(&leaf) {}

  Expr run(const Expr& e) {
    std::vector<Term> out;
    for (const auto& t : e.terms()) {
      if (param_) {
        ParamFrac dc = t.coeff.derivative(*param_);
        if (!dc.is_zero()) out.push_back(Term{t.mono, dc});
      }
      for (std::size_t i = 0; i < t.mono.factors.size(); ++i) {
        const auto& [a, n] = t.mono.factors[i];
        if (param_ && n.parameters().count(*param_)) {
          throw PreconditionError("parameter '" + *param_ + "' occurs in an exponent");
        }
        const Expr& da = atom_derivative(a);
        if (da.is_zero()) continue;
        Monomial rest = t.mono;
        ParamFrac m = n - ParamFrac(1);
        if (m.is_zero()) {
          rest.factors.erase(rest.factors.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
          rest.factors[i].second = m;
        }
        ParamFrac c = t.coeff * n;
        for (const auto& s : da.terms()) out.push_back(Term{rest * s.mono, c * s.coeff});
      }
    }
    return Expr::from_terms(std::move(out));
  }

 private:
  const Expr& atom_derivative(const Atom& a) {
    auto it = memo_.find(a);
    if (it != memo_.end()) return it->second;
    Expr d;
    switch (a.kind()) {
      case AtomKind::Indep:
      case AtomKind::Slot:
      case AtomKind::Jet:
        if (leaf_) {
          d = (*leaf_)(a);
        } else if (var_ && a == *var_) {
          d = Expr(1);
        }
        break;
      case AtomKind::Func:
        if (a.is_exp()) {
          d = Expr(a) * run(a.args()[0]);
        } else {
          for (std::size_t j = 0; j < a.args().size(); ++j) {
            Expr darg = run(a.args()[j]);
            if (darg.is_zero()) continue;
            std::vector<int> dv = a.deriv();
            ++dv[j];
            d += darg * Expr(a.with_deriv(std::move(dv)));
          }
        }
        break;
      case AtomKind::Base:
        d = run(a.base_expr());
        break;
    }
    return memo_.emplace(a, std::move(d)).first->second;
  }

  std::optional<Atom> var_;
  std::optional<std::string> param_;
  const std::function<Expr(const Atom&)>* leaf_ = nullptr;
  std::map<Atom, Expr> memo_;
};

}  // namespace

Expr diff(const Expr& e, const Atom& a) {
  if (a.kind() == AtomKind::Func || a.kind() == AtomKind::Base) {
    throw PreconditionError("differentiation variable must be an independent variable, jet or slot");
  }
  return Differ(a).run(e);
}

Expr diff_param(const Expr& e, const std::string& param) { return Differ(param).run(e); }

Expr derive(const Expr& e, const std::function<Expr(const Atom&)>& leaf) { return Differ(leaf).run(e); }

// ---------------------------------------------------------------------------
// Substitution

namespace {

class Substituter {
 public:
  explicit Substituter(const AtomMap& m) : m_(m) {}

  Expr run(const Expr& e) {
    std::vector<Term> out;
    for (const auto& t : e.terms()) {
      ParamFrac c = m_.params.empty() ? t.coeff : t.coeff.substitute(m_.params);
      if (c.is_zero()) continue;
      Monomial kept;
      Expr changed(1);
      for (const auto& [a, n] : t.mono.factors) {
        ParamFrac n2 = m_.params.empty() ? n : n.substitute(m_.params);
        const auto& [value, is_changed] = atom(a);
        if (!is_changed) {
          if (!n2.is_zero()) kept.factors.emplace_back(a, n2);
        } else {
          changed = changed * pow(value, n2);
          if (changed.is_zero()) break;
        }
      }
      if (changed.is_zero()) continue;
      Term base{kept, c};
      if (changed.constant() && changed.constant()->is_one()) {
        out.push_back(std::move(base));
        continue;
      }
      for (const auto& s : changed.terms()) out.push_back(Term{kept * s.mono, c * s.coeff});
    }
    return Expr::from_terms(std::move(out));
  }

 private:
  const std::pair<Expr, bool>& atom(const Atom& a) {
    auto it = memo_.find(a);
    if (it != memo_.end()) return it->second;
    std::pair<Expr, bool> r{Expr(), false};
    switch (a.kind()) {
      case AtomKind::Indep:
      case AtomKind::Slot:
      case AtomKind::Jet: {
        auto f = m_.atoms.find(a);
        if (f != m_.atoms.end()) r = {f->second, true};
        break;
      }
      case AtomKind::Func: {
        std::vector<Expr> args;
        bool args_changed = false;
        for (const auto& x : a.args()) {
          Expr y = run(x);
          args_changed = args_changed || y != x;
          args.push_back(std::move(y));
        }
        auto f = a.is_exp() ? m_.functions.end() : m_.functions.find(a.name());
        if (f != m_.functions.end()) {
          if (f->second.arity != args.size()) {
            throw PreconditionError("function '" + a.name() + "' substituted with wrong arity");
          }
          Expr body = f->second.body;
          for (std::size_t j = 0; j < a.deriv().size(); ++j) {
            for (int k = 0; k < a.deriv()[j]; ++k) body = diff(body, Atom::slot(static_cast<int>(j)));
          }
          AtomMap slots;
          for (std::size_t j = 0; j < args.size(); ++j) {
            slots.atoms.emplace(Atom::slot(static_cast<int>(j)), args[j]);
          }
          r = {substitute(body, slots), true};
        } else if (args_changed) {
          r = {a.is_exp() ? exp(args[0]) : Expr(a.with_args(std::move(args))), true};
        }
        break;
      }
      case AtomKind::Base: {
        Expr b = run(a.base_expr());
        if (b != a.base_expr()) r = {b, true};
        break;
      }
    }
    return memo_.emplace(a, std::move(r)).first->second;
  }

  const AtomMap& m_;
  std::map<Atom, std::pair<Expr, bool>> memo_;
};

void walk_atoms(const Expr& e, const std::function<void(const Atom&)>& f) {
  for (const auto& t : e.terms()) {
    for (const auto& [a, n] : t.mono.factors) {
      f(a);
      if (a.kind() == AtomKind::Func) {
        for (const auto& x : a.args()) walk_atoms(x, f);
      } else if (a.kind() == AtomKind::Base) {
        walk_atoms(a.base_expr(), f);
      }
    }
  }
}

}  // namespace

Expr substitute(const Expr& e, const AtomMap& m) {
  if (m.empty()) return e;
  return Substituter(m).run(e);
}

std::map<Monomial, Expr> collect(const Expr& e, const std::vector<Atom>& basis) {
  std::set<Atom> bset(basis.begin(), basis.end());
  std::map<Monomial, std::vector<Term>> parts;
  for (const auto& t : e.terms()) {
    Monomial key, rest;
    for (const auto& f : t.mono.factors) {
      if (bset.count(f.first)) {
        if (!is_positive_integer(f.second)) throw PreconditionError("non-polynomial in basis");
        key.factors.push_back(f);
      } else {
        rest.factors.push_back(f);
      }
    }
    parts[key].push_back(Term{rest, t.coeff});
  }
  std::map<Monomial, Expr> out;
  for (auto& [k, ts] : parts) {
    Expr c = Expr::from_terms(std::move(ts));
    for (const auto& b : bset) {
      if (contains_atom(c, b)) throw PreconditionError("non-polynomial in basis");
    }
    if (!c.is_zero()) out.emplace(k, std::move(c));
  }
  return out;
}

bool equal_canonical(const Expr& a, const Expr& b) { return a == b; }

Expr monomial_expr(const Monomial& m) { return Expr::from_terms({Term{m, ParamFrac(1)}}); }

std::set<Atom> atoms_of_kind(const Expr& e, AtomKind kind) {
  std::set<Atom> out;
  walk_atoms(e, [&](const Atom& a) {
    if (a.kind() == kind) out.insert(a);
  });
  return out;
}

std::set<Atom> jets_in(const Expr& e) { return atoms_of_kind(e, AtomKind::Jet); }

std::set<Atom> top_level_funcs(const Expr& e) {
  std::set<Atom> out;
  for (const auto& t : e.terms()) {
    for (const auto& [a, n] : t.mono.factors) {
      if (a.kind() == AtomKind::Func) out.insert(a);
    }
  }
  return out;
}

bool contains_atom(const Expr& e, const Atom& a) {
  bool found = false;
  walk_atoms(e, [&](const Atom& x) { found = found || x == a; });
  return found;
}

std::set<std::string> parameters_in(const Expr& e) {
  std::set<std::string> out;
  auto add = [&](const Expr& x) {
    for (const auto& t : x.terms()) {
      for (const auto& p : t.coeff.parameters()) out.insert(p);
      for (const auto& [a, n] : t.mono.factors) {
        for (const auto& p : n.parameters()) out.insert(p);
      }
    }
  };
  add(e);
  walk_atoms(e, [&](const Atom& a) {
    if (a.kind() == AtomKind::Func) {
      for (const auto& x : a.args()) add(x);
    } else if (a.kind() == AtomKind::Base) {
      add(a.base_expr());
    }
  });
  return out;
}

Expr map_atoms(const Expr& e, const std::function<std::optional<Expr>(const Atom&)>& f) {
  std::map<Atom, std::optional<Expr>> memo;
  std::vector<Term> out;
  for (const auto& t : e.terms()) {
    Monomial kept;
    Expr changed(1);
    for (const auto& [a, n] : t.mono.factors) {
      auto it = memo.find(a);
      if (it == memo.end()) it = memo.emplace(a, f(a)).first;
      if (it->second) {
        changed = changed * pow(*it->second, n);
      } else {
        kept.factors.emplace_back(a, n);
      }
    }
    for (const auto& s : changed.terms()) out.push_back(Term{kept * s.mono, t.coeff * s.coeff});
  }
  return Expr::from_terms(std::move(out));
}

// ---------------------------------------------------------------------------
// Trees

TreePtr Tree::make_number(const Rational& q) {
  auto t = std::make_shared<Tree>();
  t->kind = Kind::Number;
  t->number = q;
  return t;
}

TreePtr Tree::make_param(const std::string& name) {
  auto t = std::make_shared<Tree>();
  t->kind = Kind::Param;
  t->name = name;
  return t;
}

TreePtr Tree::make_leaf(const Atom& a) {
  auto t = std::make_shared<Tree>();
  t->kind = Kind::Leaf;
  t->leaf = a;
  return t;
}

TreePtr Tree::make(Kind k, std::vector<TreePtr> children) {
  auto t = std::make_shared<Tree>();
  t->kind = k;
  t->children = std::move(children);
  return t;
}

Expr normalize(const Tree& t, const TotalDerivativeHook& hook) {
  auto sub = [&](std::size_t i) { return normalize(*t.children.at(i), hook); };
  switch (t.kind) {
    case Tree::Kind::Number:
      return Expr(t.number);
    case Tree::Kind::Param:
      return Expr::parameter(t.name);
    case Tree::Kind::Leaf:
      return Expr(*t.leaf);
    case Tree::Kind::Apply: {
      std::vector<Expr> args;
      for (std::size_t i = 0; i < t.children.size(); ++i) args.push_back(sub(i));
      if (t.name == kExpName) {
        if (args.size() != 1) throw ParseError("exp takes one argument", t.line, t.column);
        return exp(args[0]);
      }
      return Expr(Atom::func(t.name, t.slots, std::move(args), t.deriv));
    }
    case Tree::Kind::Sum: {
      Expr s;
      for (std::size_t i = 0; i < t.children.size(); ++i) s += sub(i);
      return s;
    }
    case Tree::Kind::Product: {
      Expr p(1);
      for (std::size_t i = 0; i < t.children.size(); ++i) p *= sub(i);
      return p;
    }
    case Tree::Kind::Neg:
      return -sub(0);
    case Tree::Kind::Div:
      return sub(0) / sub(1);
    case Tree::Kind::Power: {
      Expr b = sub(0);
      Expr e = sub(1);
      auto c = e.constant();
      if (!c) {
        throw PreconditionError("exponent must be a rational function of parameters");
      }
      return pow(b, *c);
    }
    case Tree::Kind::TotalDeriv:
      if (!hook) throw PreconditionError("total derivative outside a system context");
      return hook(sub(0), t.direction);
  }
  return Expr();
}

namespace {

TreePtr poly_tree(const ParamPoly& p) {
  std::vector<TreePtr> terms;
  for (const auto& [m, c] : p.terms()) {
    std::vector<TreePtr> factors{Tree::make_number(c)};
    for (const auto& [v, e] : m) {
      factors.push_back(Tree::make(Tree::Kind::Power,
                                   {Tree::make_param(v), Tree::make_number(Rational(e))}));
    }
    terms.push_back(Tree::make(Tree::Kind::Product, std::move(factors)));
  }
  return Tree::make(Tree::Kind::Sum, std::move(terms));
}

TreePtr frac_tree(const ParamFrac& c) {
  if (c.is_rational()) return Tree::make_number(c.rational());
  return Tree::make(Tree::Kind::Div, {poly_tree(c.numerator()), poly_tree(c.denominator())});
}

TreePtr atom_tree(const Atom& a) {
  switch (a.kind()) {
    case AtomKind::Func: {
      auto t = std::make_shared<Tree>();
      t->kind = Tree::Kind::Apply;
      t->name = a.name();
      t->slots = a.slots();
      t->deriv = a.deriv();
      for (const auto& x : a.args()) t->children.push_back(to_tree(x));
      return t;
    }
    case AtomKind::Base:
      return to_tree(a.base_expr());
    default:
      return Tree::make_leaf(a);
  }
}

}  // namespace

TreePtr to_tree(const Expr& e) {
  std::vector<TreePtr> terms;
  for (const auto& t : e.terms()) {
    std::vector<TreePtr> factors{frac_tree(t.coeff)};
    for (const auto& [a, n] : t.mono.factors) {
      factors.push_back(Tree::make(Tree::Kind::Power, {atom_tree(a), frac_tree(n)}));
    }
    terms.push_back(Tree::make(Tree::Kind::Product, std::move(factors)));
  }
  return Tree::make(Tree::Kind::Sum, std::move(terms));
}

}  // namespace condsym
