#include "condsym/param.hpp"

#include "condsym/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace condsym {

namespace {

using Mono = ParamPoly::Mono;

// Lexicographic monomial order; variables earlier in name order dominate.
int lex_cmp(const Mono& a, const Mono& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size()) return 1;
    if (i == a.size()) return -1;
    if (a[i].first < b[j].first) return 1;
    if (b[j].first < a[i].first) return -1;
    if (a[i].second != b[j].second) return a[i].second > b[j].second ? 1 : -1;
    ++i;
    ++j;
  }
  return 0;
}

Mono mono_mul(const Mono& a, const Mono& b) {
  Mono out;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
      out.push_back(a[i++]);
    } else if (i == a.size() || b[j].first < a[i].first) {
      out.push_back(b[j++]);
    } else {
      out.emplace_back(a[i].first, a[i].second + b[j].second);
      ++i;
      ++j;
    }
  }
  return out;
}

std::optional<Mono> mono_div(const Mono& a, const Mono& b) {
  Mono out;
  std::size_t i = 0;
  for (const auto& [var, e] : b) {
    while (i < a.size() && a[i].first < var) out.push_back(a[i++]);
    if (i == a.size() || a[i].first != var || a[i].second < e) return std::nullopt;
    if (a[i].second > e) out.emplace_back(var, a[i].second - e);
    ++i;
  }
  while (i < a.size()) out.push_back(a[i++]);
  return out;
}

const std::pair<const Mono, Rational>& leading(const ParamPoly& p) {
  const auto* best = &*p.terms().begin();
  for (const auto& t : p.terms()) {
    if (lex_cmp(t.first, best->first) > 0) best = &t;
  }
  return *best;
}

ParamPoly monic(const ParamPoly& p) {
  if (p.is_zero()) return p;
  Rational lc = p.leading_coefficient();
  return p.scaled(Rational(1) / lc);
}

std::vector<ParamPoly> trim(std::vector<ParamPoly> v) {
  while (!v.empty() && v.back().is_zero()) v.pop_back();
  return v;
}

ParamPoly content_in(const std::vector<ParamPoly>& coeffs) {
  ParamPoly g;
  for (const auto& c : coeffs) {
    if (c.is_zero()) continue;
    g = g.is_zero() ? monic(c) : ParamPoly::gcd(g, c);
    if (g.is_constant()) return ParamPoly(Rational(1));
  }
  return g.is_zero() ? ParamPoly(Rational(1)) : g;
}

std::vector<ParamPoly> primitive_part(const std::vector<ParamPoly>& coeffs) {
  ParamPoly c = content_in(coeffs);
  std::vector<ParamPoly> out;
  out.reserve(coeffs.size());
  for (const auto& a : coeffs) out.push_back(*ParamPoly::divide_exact(a, c));
  return out;
}

// Pseudo-remainder of univariate polynomials with polynomial coefficients.
std::vector<ParamPoly> pseudo_remainder(std::vector<ParamPoly> a,
                                        const std::vector<ParamPoly>& b) {
  const std::size_t n = b.size() - 1;
  const ParamPoly& lc = b.back();
  a = trim(std::move(a));
  while (!a.empty() && a.size() - 1 >= n) {
    ParamPoly lead = a.back();
    std::size_t shift = a.size() - 1 - n;
    for (auto& c : a) c = c * lc;
    for (std::size_t i = 0; i < b.size(); ++i) a[i + shift] = a[i + shift] - lead * b[i];
    a = trim(std::move(a));
  }
  return a;
}

}  // namespace

ParamPoly::ParamPoly(const Rational& c) {
  if (c != 0) terms_[{}] = c;
}

ParamPoly ParamPoly::variable(const std::string& name) {
  ParamPoly p;
  p.terms_[{{name, 1}}] = 1;
  return p;
}

void ParamPoly::add_term(const Mono& m, const Rational& c) {
  if (c == 0) return;
  auto [it, inserted] = terms_.emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

bool ParamPoly::is_constant() const {
  return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty());
}

Rational ParamPoly::constant_value() const {
  auto it = terms_.find({});
  return it == terms_.end() ? Rational(0) : it->second;
}

std::set<std::string> ParamPoly::variables() const {
  std::set<std::string> out;
  for (const auto& [m, c] : terms_)
    for (const auto& [v, e] : m) out.insert(v);
  return out;
}

bool ParamPoly::has(const std::string& var) const { return degree(var) > 0; }

int ParamPoly::degree(const std::string& var) const {
  int d = 0;
  for (const auto& [m, c] : terms_)
    for (const auto& [v, e] : m)
      if (v == var) d = std::max(d, e);
  return d;
}

ParamPoly ParamPoly::operator+(const ParamPoly& o) const {
  ParamPoly r = *this;
  for (const auto& [m, c] : o.terms_) r.add_term(m, c);
  return r;
}

ParamPoly ParamPoly::operator-(const ParamPoly& o) const {
  ParamPoly r = *this;
  for (const auto& [m, c] : o.terms_) r.add_term(m, -c);
  return r;
}

ParamPoly ParamPoly::operator*(const ParamPoly& o) const {
  ParamPoly r;
  for (const auto& [ma, ca] : terms_)
    for (const auto& [mb, cb] : o.terms_) r.add_term(mono_mul(ma, mb), ca * cb);
  return r;
}

ParamPoly ParamPoly::operator-() const { return scaled(Rational(-1)); }

ParamPoly ParamPoly::scaled(const Rational& c) const {
  ParamPoly r;
  if (c == 0) return r;
  for (const auto& [m, a] : terms_) r.terms_[m] = a * c;
  return r;
}

int ParamPoly::compare(const ParamPoly& o) const {
  auto i = terms_.begin();
  auto j = o.terms_.begin();
  for (; i != terms_.end() && j != o.terms_.end(); ++i, ++j) {
    if (i->first != j->first) return i->first < j->first ? -1 : 1;
    int c = cmp(i->second, j->second);
    if (c != 0) return c < 0 ? -1 : 1;
  }
  if (i == terms_.end() && j == o.terms_.end()) return 0;
  return i == terms_.end() ? -1 : 1;
}

Rational ParamPoly::leading_coefficient() const {
  if (terms_.empty()) return 0;
  return leading(*this).second;
}

ParamPoly ParamPoly::derivative(const std::string& var) const {
  ParamPoly r;
  for (const auto& [m, c] : terms_) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i].first != var) continue;
      Mono d = m;
      int e = d[i].second;
      if (e == 1) {
        d.erase(d.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        d[i].second = e - 1;
      }
      r.add_term(d, c * e);
    }
  }
  return r;
}

double ParamPoly::evaluate(const std::map<std::string, double>& values) const {
  double s = 0;
  for (const auto& [m, c] : terms_) {
    double t = c.get_d();
    for (const auto& [v, e] : m) {
      auto it = values.find(v);
      if (it == values.end()) throw PreconditionError("no value for parameter '" + v + "'");
      t *= std::pow(it->second, e);
    }
    s += t;
  }
  return s;
}

std::vector<ParamPoly> ParamPoly::coefficients_in(const std::string& var) const {
  std::vector<ParamPoly> out(static_cast<std::size_t>(degree(var)) + 1);
  for (const auto& [m, c] : terms_) {
    Mono rest;
    int e = 0;
    for (const auto& f : m) {
      if (f.first == var) {
        e = f.second;
      } else {
        rest.push_back(f);
      }
    }
    out[static_cast<std::size_t>(e)].add_term(rest, c);
  }
  return out;
}

ParamPoly ParamPoly::from_coefficients(const std::string& var,
                                       const std::vector<ParamPoly>& coeffs) {
  ParamPoly r;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    if (coeffs[i].is_zero()) continue;
    if (i == 0) {
      r = r + coeffs[i];
      continue;
    }
    ParamPoly xi;
    xi.terms_[{{var, static_cast<int>(i)}}] = 1;
    r = r + coeffs[i] * xi;
  }
  return r;
}

std::optional<ParamPoly> ParamPoly::divide_exact(const ParamPoly& a, const ParamPoly& b) {
  if (b.is_zero()) throw DomainError("zero denominator");
  ParamPoly q;
  ParamPoly r = a;
  const auto& lb = leading(b);
  while (!r.is_zero()) {
    const auto& lr = leading(r);
    auto m = mono_div(lr.first, lb.first);
    if (!m) return std::nullopt;
    ParamPoly t;
    t.terms_[*m] = lr.second / lb.second;
    q = q + t;
    r = r - t * b;
  }
  return q;
}

ParamPoly ParamPoly::gcd(const ParamPoly& a, const ParamPoly& b) {
  if (a.is_zero()) return monic(b);
  if (b.is_zero()) return monic(a);
  if (a.is_constant() || b.is_constant()) return ParamPoly(Rational(1));
  std::set<std::string> vars = a.variables();
  for (const auto& v : b.variables()) vars.insert(v);
  const std::string var = *vars.begin();
  if (!a.has(var)) return gcd(a, content_in(b.coefficients_in(var)));
  if (!b.has(var)) return gcd(content_in(a.coefficients_in(var)), b);

  auto ca = a.coefficients_in(var);
  auto cb = b.coefficients_in(var);
  ParamPoly g = gcd(content_in(ca), content_in(cb));
  auto pa = primitive_part(ca);
  auto pb = primitive_part(cb);
  if (pa.size() < pb.size()) std::swap(pa, pb);
  while (!pb.empty()) {
    auto r = pseudo_remainder(pa, pb);
    pa = std::move(pb);
    pb = r.empty() ? r : primitive_part(r);
    if (pb.size() == 1) {
      pa = {ParamPoly(Rational(1))};
      break;
    }
  }
  return monic(g * from_coefficients(var, primitive_part(pa)));
}

std::string ParamPoly::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  std::vector<const std::pair<const Mono, Rational>*> order;
  for (const auto& t : terms_) order.push_back(&t);
  std::sort(order.begin(), order.end(),
            [](auto* a, auto* b) { return lex_cmp(a->first, b->first) > 0; });
  bool first = true;
  for (const auto* t : order) {
    const auto& [m, c] = *t;
    Rational mag = abs(c);
    if (first) {
      if (c < 0) os << "-";
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    first = false;
    bool wrote = false;
    if (mag != 1 || m.empty()) {
      os << mag.get_str();
      wrote = true;
    }
    for (const auto& [v, e] : m) {
      if (wrote) os << "*";
      os << v;
      if (e != 1) os << "^" << e;
      wrote = true;
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------

ParamFrac::ParamFrac(const ParamPoly& num, const ParamPoly& den) {
  if (den.is_zero()) throw DomainError("zero denominator");
  if (num.is_zero()) {
    c_ = 0;
    return;
  }
  if (num.is_constant() && den.is_constant()) {
    c_ = num.constant_value() / den.constant_value();
    return;
  }
  ParamPoly n = num;
  ParamPoly d = den;
  if (!d.is_constant()) {
    ParamPoly g = ParamPoly::gcd(n, d);
    if (!g.is_constant()) {
      n = *ParamPoly::divide_exact(n, g);
      d = *ParamPoly::divide_exact(d, g);
    }
  }
  Rational lc = d.leading_coefficient();
  n = n.scaled(Rational(1) / lc);
  d = d.scaled(Rational(1) / lc);
  if (n.is_constant() && d.is_constant()) {
    c_ = n.constant_value();
    return;
  }
  c_ = 0;
  poly_ = std::make_shared<const std::pair<ParamPoly, ParamPoly>>(std::move(n), std::move(d));
}

ParamFrac ParamFrac::parameter(const std::string& name) {
  return ParamFrac(ParamPoly::variable(name), ParamPoly(Rational(1)));
}

long ParamFrac::to_long() const {
  if (!is_integer() || !c_.get_num().fits_slong_p()) throw DomainError("not a machine integer");
  return c_.get_num().get_si();
}

ParamPoly ParamFrac::numerator() const { return poly_ ? poly_->first : ParamPoly(c_); }
ParamPoly ParamFrac::denominator() const {
  return poly_ ? poly_->second : ParamPoly(Rational(1));
}

std::set<std::string> ParamFrac::parameters() const {
  if (!poly_) return {};
  auto s = poly_->first.variables();
  for (const auto& v : poly_->second.variables()) s.insert(v);
  return s;
}

ParamFrac ParamFrac::operator+(const ParamFrac& o) const {
  if (!poly_ && !o.poly_) return ParamFrac(Rational(c_ + o.c_));
  if (o.is_zero()) return *this;
  if (is_zero()) return o;
  ParamPoly n1 = numerator(), d1 = denominator(), n2 = o.numerator(), d2 = o.denominator();
  if (d1 == d2) return ParamFrac(n1 + n2, d1);
  return ParamFrac(n1 * d2 + n2 * d1, d1 * d2);
}

ParamFrac ParamFrac::operator-(const ParamFrac& o) const { return *this + (-o); }

ParamFrac ParamFrac::operator*(const ParamFrac& o) const {
  if (!poly_ && !o.poly_) return ParamFrac(Rational(c_ * o.c_));
  if (is_zero() || o.is_zero()) return ParamFrac(0L);
  if (is_one()) return o;
  if (o.is_one()) return *this;
  return ParamFrac(numerator() * o.numerator(), denominator() * o.denominator());
}

ParamFrac ParamFrac::operator/(const ParamFrac& o) const { return *this * o.inverse(); }

ParamFrac ParamFrac::operator-() const {
  if (!poly_) return ParamFrac(Rational(-c_));
  ParamFrac r = *this;
  r.poly_ = std::make_shared<const std::pair<ParamPoly, ParamPoly>>(-poly_->first, poly_->second);
  return r;
}

ParamFrac ParamFrac::inverse() const {
  if (is_zero()) throw DomainError("zero denominator");
  if (!poly_) return ParamFrac(Rational(1 / c_));
  return ParamFrac(poly_->second, poly_->first);
}

ParamFrac ParamFrac::pow(long n) const {
  if (n < 0) return inverse().pow(-n);
  ParamFrac r(1L), b = *this;
  while (n > 0) {
    if (n & 1) r = r * b;
    b = b * b;
    n >>= 1;
  }
  return r;
}

int ParamFrac::compare(const ParamFrac& o) const {
  if (!poly_ && !o.poly_) {
    int c = cmp(c_, o.c_);
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  if (!poly_) return -1;
  if (!o.poly_) return 1;
  int c = poly_->first.compare(o.poly_->first);
  if (c != 0) return c;
  return poly_->second.compare(o.poly_->second);
}

ParamFrac ParamFrac::derivative(const std::string& param) const {
  if (!poly_) return ParamFrac(0L);
  const auto& [n, d] = *poly_;
  return ParamFrac(n.derivative(param) * d - n * d.derivative(param), d * d);
}

double ParamFrac::evaluate(const std::map<std::string, double>& values) const {
  if (!poly_) return c_.get_d();
  return poly_->first.evaluate(values) / poly_->second.evaluate(values);
}

ParamFrac ParamFrac::substitute(const std::map<std::string, ParamFrac>& values) const {
  if (!poly_) return *this;
  auto eval_poly = [&](const ParamPoly& p) {
    ParamFrac s(0L);
    for (const auto& [m, c] : p.terms()) {
      ParamFrac t(c);
      for (const auto& [v, e] : m) {
        auto it = values.find(v);
        t = t * (it == values.end() ? parameter(v) : it->second).pow(e);
      }
      s = s + t;
    }
    return s;
  };
  return eval_poly(poly_->first) / eval_poly(poly_->second);
}

std::string ParamFrac::to_string(bool atomic) const {
  if (!poly_) {
    std::string s = c_.get_str();
    if (atomic && (c_ < 0 || c_.get_den() != 1)) return "(" + s + ")";
    return s;
  }
  const auto& [n, d] = *poly_;
  if (d.is_constant()) {
    // Monic normalization makes a constant denominator equal to 1.
    std::string s = n.to_string();
    if (atomic && (n.terms().size() > 1 || n.terms().begin()->second != 1)) return "(" + s + ")";
    return s;
  }
  std::string s = "(" + n.to_string() + ")/(" + d.to_string() + ")";
  return atomic ? "(" + s + ")" : s;
}

std::string rational_to_string(const Rational& q) { return q.get_str(); }

}  // namespace condsym
