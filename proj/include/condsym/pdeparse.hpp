// Text grammar for expressions, PDE systems, operators and side constraints.
// See docs/grammar.ebnf for the full grammar.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "condsym/expr.hpp"
#include "condsym/jetspace.hpp"

namespace condsym {

struct FunctionDecl {
  std::string name;
  std::vector<std::string> args;  // argument names, also used as derivative suffixes
};

struct Declarations {
  std::vector<std::string> params;
  /// Parameter macros such as alpha = lambda1*(k+1)/(lambda2*(l+1)).
  std::map<std::string, ParamFrac> derived;
  /// Expression macros such as omega = U^(k+1) - alpha*V^(l+1).
  std::map<std::string, Expr> definitions;
  std::vector<std::string> deps;
  std::vector<FunctionDecl> functions;

  bool is_param(const std::string& n) const;
  bool is_dep(const std::string& n) const;
  const FunctionDecl* function(const std::string& n) const;
  void add_function(FunctionDecl f);
  /// Application of a declared function to explicit arguments.
  Expr apply(const std::string& name, std::vector<Expr> args, std::vector<int> deriv = {}) const;
  /// Application to the declared argument names, which must resolve to variables.
  Expr apply_declared(const std::string& name, std::vector<int> deriv = {}) const;

  /// u, v with d1(u), d2(v), C1(u,v), C2(u,v) and xi0, xi1, eta1, eta2 over (t,x,u,v).
  static Declarations rd_canonical();
};

TreePtr parse_tree(const std::string& text, const Declarations& decls);
Expr parse_expr(const std::string& text, const Declarations& decls);
Expr parse_expr(const std::string& text);
/// Text in the input grammar; parse_expr(render(e)) == e under matching declarations.
std::string render(const Expr& e);

enum class SystemForm { Evolution, RDOriginal, RDCanonical };

/// U^a_t = (D^a(U^a) U^a_x)_x + F^a.
struct RDOriginal {
  std::vector<std::string> deps;
  std::vector<Expr> diffusivity;
  std::vector<Expr> reaction;
};

/// u^a_xx = d^a(u^a) u^a_t + C^a.
struct RDCanonical {
  std::vector<std::string> deps;
  std::vector<Expr> d;
  std::vector<Expr> c;

  /// S_a = d^a u^a_t + C^a - u^a_xx.
  PdeSystem pde() const;
};

struct ParsedSystem {
  SystemForm form = SystemForm::Evolution;
  PdeSystem pde;
  std::optional<EvolutionSystem> evolution;
  std::optional<RDOriginal> original;
  std::optional<RDCanonical> canonical;
};

std::string form_name(SystemForm f);

struct Relation {
  Expr expr;        // relation reads `expr != 0` or `expr == 0`
  bool nonzero = true;
  std::string text;
};

/// Second-order ODE side constraint f'' = rhs for a unary function.
struct OdeRule {
  std::string function;
  Expr rhs;
  std::string text;
};

struct LabeledEquation {
  std::string label;
  Expr expr;
};

struct SystemLine {
  TreePtr lhs;
  TreePtr rhs;
  int line = 0;
};

struct SourceFile {
  std::string name;
  Declarations decls;
  std::vector<SystemLine> system;
  std::map<std::string, Expr> op;
  std::vector<OdeRule> ode_rules;
  std::vector<Relation> side_relations;
  /// Each entry is a disjunction of relations.
  std::vector<std::vector<Relation>> restrictions;
  std::vector<LabeledEquation> equations;
  std::vector<Relation> assumptions;
  std::map<std::string, Expr> inverse;
  std::map<std::string, std::string> meta;

  bool has_operator() const { return !op.empty(); }
};

SourceFile parse_source(const std::string& text, const std::string& name = "<input>");
SourceFile load_source(const std::string& path);

ParsedSystem parse_system(const SourceFile& src);
/// Bare system text; dependent variables are taken from the left-hand sides.
ParsedSystem parse_system(const std::string& text);

/// Operator block as a vector field; missing coefficients are zero.
VectorField operator_of(const SourceFile& src);

/// File rendering of a list of labeled equations with the declarations they need.
std::string render_equations(const Declarations& decls, const std::vector<LabeledEquation>& eqs,
                             const std::vector<std::string>& assumptions = {},
                             const std::string& comment = {});

}  // namespace condsym
