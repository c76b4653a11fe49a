// Table of reaction-diffusion systems with known Q-conditional symmetry
// operators, their instantiation and expected classification.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "condsym/kirchhoff.hpp"
#include "condsym/numoracle.hpp"
#include "condsym/pdeparse.hpp"

namespace condsym {

struct CatalogEntry {
  int row = 0;
  std::string path;
  std::string title;
  SourceFile source;
  std::map<std::string, Rational> defaults;
};

/// Directory of the bundled row files (compile-time default, CONDSYM_DATA overrides).
std::string data_dir();

/// Row is 0 when the file has no meta row.
CatalogEntry read_entry(const std::string& path);
std::vector<CatalogEntry> list_entries(const std::string& dir = data_dir() + "/catalog");
CatalogEntry load_entry(int row, const std::string& dir = data_dir() + "/catalog");

/// `k = 1, lambda = 1/2` style assignments.
std::map<std::string, Rational> parse_assignments(const std::string& text);

struct InstantiateOptions {
  std::map<std::string, Rational> params;  // missing ones take the row defaults
  bool enforce_restrictions = true;
  /// Concrete p(x) written in slot #0; checked against p'' = p^2 + lambda p.
  std::optional<Expr> p_sample;
  double constraint_tol = 1e-9;
};

struct Instance {
  int row = 0;
  std::map<std::string, Rational> params;
  Declarations decls;
  RDOriginal original;
  EvolutionSystem evolution;
  VectorField op;
  std::vector<OdeRule> rules;  // rhs in slot #0, parameters substituted; empty when p is concrete

  PdeSystem pde() const { return evolution.residual_form(); }
};

/// Throws PreconditionError "restriction ... violated" or "p sample fails constraint".
Instance instantiate(const CatalogEntry& entry, const InstantiateOptions& opt = {});

/// Replaces f^(n), n >= 2, by derivatives of the rule's right-hand side (written in slot #0).
Expr apply_rules(const Expr& e, const std::vector<OdeRule>& rules);

struct Classification {
  bool nonclassical = true;
  bool first_type = false;
  bool lie_degenerate = false;
  std::vector<std::string> trace;
};

/// First type via the criterion eta2*d2_v = 0 or eta1*d1_u = 0 on the canonical image.
Classification expected_classification(const CatalogEntry& entry, const std::map<std::string, Rational>& params);

enum class CheckKind { Lie, FirstType, NonClassical };

std::string kind_name(CheckKind k);

struct VerifyOptions {
  CheckOptions check;
  int n_samples = 3;  // independent f, g samples
};

struct VerifyResult {
  std::string claim;
  CheckKind kind = CheckKind::NonClassical;
  std::vector<std::size_t> indices;
  bool symbolic_zero = false;
  CheckReport report;  // aggregated over samples: worst violation
  std::vector<CheckReport> per_sample;
};

/// Residuals for the given manifold with the side rules applied.
std::vector<Expr> instance_residuals(const Instance& inst, const std::vector<std::size_t>& indices);

/// Lie ignores `indices`; NonClassical with empty `indices` adjoins every Q(u^a).
VerifyResult verify_instance(const Instance& inst, CheckKind kind, const std::vector<std::size_t>& indices,
                             const VerifyOptions& opt);

/// First type passes when either single surface condition works; fails only when both fail.
struct FirstTypeResult {
  VerifyResult with_u;
  VerifyResult with_v;
  std::string status() const;
};

FirstTypeResult verify_first_type(const Instance& inst, const VerifyOptions& opt);

/// ASCII relation text rendered with Greek letters and subscripts.
std::string pretty(const std::string& text);

}  // namespace condsym
