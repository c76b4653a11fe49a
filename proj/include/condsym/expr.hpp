// Symbolic kernel: canonical Laurent polynomials over atoms with coefficients
// and exponents in Q(parameters).
//
// Every Expr is kept in canonical form by construction:
//   * terms sorted by monomial, distinct monomials, no zero coefficients;
//   * monomial factors sorted by atom, no zero exponents;
//   * power atoms (opaque bases) never carry a positive integer exponent,
//     those are expanded.
// Expressions are immutable and share structure through shared_ptr, so they
// are cheap to copy and safe to read from several threads.
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "condsym/param.hpp"

namespace condsym {

class Expr;
struct AtomNode;

enum class AtomKind : std::uint8_t { Indep = 0, Slot = 1, Jet = 2, Func = 3, Base = 4 };

/// Reserved name of the built-in exponential.
inline constexpr const char* kExpName = "exp";

class Atom {
 public:
  static Atom indep(const std::string& name);
  /// Jet coordinate d^{nt+nx} dep / dt^nt dx^nx; (0,0) is the dependent variable itself.
  static Atom jet(const std::string& dep, int nt, int nx);
  /// Placeholder for argument `index` of a function template.
  static Atom slot(int index);
  /// Application of an opaque function symbol; `deriv` holds one order per argument slot.
  static Atom func(const std::string& name, std::vector<std::string> slots,
                   std::vector<Expr> args, std::vector<int> deriv);
  static Atom exp(const Expr& arg);
  /// Opaque power base (a sum or a non-rational constant); the exponent lives in the monomial.
  static Atom base(const Expr& b);

  AtomKind kind() const;
  const std::string& name() const;
  int nt() const;
  int nx() const;
  int order() const { return nt() + nx(); }
  int slot_index() const;
  const std::vector<Expr>& args() const;
  const std::vector<std::string>& slots() const;
  const std::vector<int>& deriv() const;
  int deriv_order() const;
  const Expr& base_expr() const;

  bool is_jet() const { return kind() == AtomKind::Jet; }
  bool is_func() const { return kind() == AtomKind::Func; }
  bool is_exp() const;
  Atom with_deriv(std::vector<int> deriv) const;
  Atom with_args(std::vector<Expr> args) const;
  Atom bumped(int dt, int dx) const;  // jets only

  int compare(const Atom& o) const;
  bool operator==(const Atom& o) const { return compare(o) == 0; }
  bool operator!=(const Atom& o) const { return compare(o) != 0; }
  bool operator<(const Atom& o) const { return compare(o) < 0; }

 private:
  explicit Atom(std::shared_ptr<const AtomNode> n) : n_(std::move(n)) {}
  std::shared_ptr<const AtomNode> n_;
};

struct Monomial {
  std::vector<std::pair<Atom, ParamFrac>> factors;

  bool empty() const { return factors.empty(); }
  ParamFrac exponent_of(const Atom& a) const;
  Monomial operator*(const Monomial& o) const;
  Monomial inverse() const;
  int compare(const Monomial& o) const;
  bool operator==(const Monomial& o) const { return compare(o) == 0; }
  bool operator<(const Monomial& o) const { return compare(o) < 0; }
};

struct Term {
  Monomial mono;
  ParamFrac coeff;
};

class Expr {
 public:
  Expr();
  Expr(long v);                // NOLINT(google-explicit-constructor)
  Expr(int v) : Expr(static_cast<long>(v)) {}  // NOLINT
  Expr(const Rational& q);     // NOLINT
  Expr(const ParamFrac& c);    // NOLINT
  explicit Expr(const Atom& a);
  explicit Expr(const Term& t);

  /// Canonicalizes an arbitrary term list (sorting, merging, base expansion).
  static Expr from_terms(std::vector<Term> terms);
  static Expr parameter(const std::string& name) { return Expr(ParamFrac::parameter(name)); }
  static Expr indep(const std::string& name) { return Expr(Atom::indep(name)); }
  static Expr jet(const std::string& dep, int nt = 0, int nx = 0) {
    return Expr(Atom::jet(dep, nt, nx));
  }

  const std::vector<Term>& terms() const;
  std::size_t size() const { return terms().size(); }
  bool is_zero() const { return terms().empty(); }
  /// Value when the expression has no atoms.
  std::optional<ParamFrac> constant() const;
  bool is_constant() const { return constant().has_value(); }
  /// The atom when the expression is exactly one atom to the first power with coefficient 1.
  std::optional<Atom> as_atom() const;

  Expr operator+(const Expr& o) const;
  Expr operator-(const Expr& o) const;
  Expr operator*(const Expr& o) const;
  Expr operator/(const Expr& o) const;
  Expr operator-() const;
  Expr& operator+=(const Expr& o) { return *this = *this + o; }
  Expr& operator-=(const Expr& o) { return *this = *this - o; }
  Expr& operator*=(const Expr& o) { return *this = *this * o; }

  int compare(const Expr& o) const;
  bool operator==(const Expr& o) const { return compare(o) == 0; }
  bool operator!=(const Expr& o) const { return compare(o) != 0; }
  bool operator<(const Expr& o) const { return compare(o) < 0; }

 private:
  explicit Expr(std::shared_ptr<const std::vector<Term>> t) : t_(std::move(t)) {}
  std::shared_ptr<const std::vector<Term>> t_;
};

inline Expr operator+(long a, const Expr& b) { return Expr(a) + b; }
inline Expr operator-(long a, const Expr& b) { return Expr(a) - b; }
inline Expr operator*(long a, const Expr& b) { return Expr(a) * b; }
inline Expr operator/(long a, const Expr& b) { return Expr(a) / b; }

Expr pow(const Expr& base, const ParamFrac& exponent);
/// Rendering in the input grammar (parses back to the same expression).
std::string to_string(const Expr& e);
std::string to_string(const Atom& a);
std::ostream& operator<<(std::ostream& os, const Expr& e);
Expr exp(const Expr& arg);

// ---------------------------------------------------------------------------
// Kernel operations.

/// Body of a function substitution, written in Slot atoms #0..#arity-1.
struct FunctionTemplate {
  std::size_t arity = 0;
  Expr body;
};

/// Simultaneous substitution: atoms, parameters and whole function symbols.
struct AtomMap {
  std::map<Atom, Expr> atoms;
  std::map<std::string, ParamFrac> params;
  std::map<std::string, FunctionTemplate> functions;

  bool empty() const { return atoms.empty() && params.empty() && functions.empty(); }
};

/// Partial derivative in an atom (IndepVar, Jet or Slot); all other atoms are independent.
Expr diff(const Expr& e, const Atom& a);
/// Derivation extending `leaf` (the derivative of each Indep, Slot and Jet atom)
/// by the sum, product and chain rules through functions and power bases.
Expr derive(const Expr& e, const std::function<Expr(const Atom&)>& leaf);
/// Partial derivative in a parameter. Throws if the parameter occurs in an exponent.
Expr diff_param(const Expr& e, const std::string& param);
Expr substitute(const Expr& e, const AtomMap& m);
/// Coefficients of e as a polynomial in the basis atoms.
std::map<Monomial, Expr> collect(const Expr& e, const std::vector<Atom>& basis);
bool equal_canonical(const Expr& a, const Expr& b);
/// Exact quotient a / b as Laurent polynomials, or nullopt if b does not divide a.
/// Only attempted when every exponent involved is a rational number.
std::optional<Expr> divide_exact(const Expr& a, const Expr& b);

/// Monomial of basis atoms only (helper for reports).
Expr monomial_expr(const Monomial& m);

/// All atoms of the given kind, including those nested in function arguments and bases.
std::set<Atom> atoms_of_kind(const Expr& e, AtomKind kind);
std::set<Atom> jets_in(const Expr& e);
/// Function applications at the top level of monomials (not nested in arguments).
std::set<Atom> top_level_funcs(const Expr& e);
bool contains_atom(const Expr& e, const Atom& a);
std::set<std::string> parameters_in(const Expr& e);
/// Expression with every term's atoms mapped through `f` (f returns replacement or nullopt).
Expr map_atoms(const Expr& e, const std::function<std::optional<Expr>(const Atom&)>& f);

// ---------------------------------------------------------------------------
// Un-normalized expression trees (parser output) and normalization.

struct Tree;
using TreePtr = std::shared_ptr<const Tree>;

struct Tree {
  enum class Kind { Number, Param, Leaf, Apply, Sum, Product, Neg, Div, Power, TotalDeriv };
  Kind kind = Kind::Number;
  Rational number;                 // Number
  std::string name;                // Param, Apply (function name)
  std::optional<Atom> leaf;        // Leaf: indep / jet / slot atom
  std::vector<std::string> slots;  // Apply
  std::vector<int> deriv;          // Apply
  std::vector<TreePtr> children;   // Apply args, Sum, Product, Neg, Div(2), Power(2), TotalDeriv(1)
  char direction = 'x';            // TotalDeriv
  int line = 0;
  int column = 0;

  static TreePtr make_number(const Rational& q);
  static TreePtr make_param(const std::string& name);
  static TreePtr make_leaf(const Atom& a);
  static TreePtr make(Kind k, std::vector<TreePtr> children);
};

using TotalDerivativeHook = std::function<Expr(const Expr&, char)>;

/// Canonical form of a tree. TotalDeriv nodes require `hook`.
Expr normalize(const Tree& t, const TotalDerivativeHook& hook = {});
/// Canonical Expr is already normal; provided for symmetry with the tree overload.
inline Expr normalize(const Expr& e) { return e; }
/// Un-normalized tree that normalizes back to `e`.
TreePtr to_tree(const Expr& e);

}  // namespace condsym
