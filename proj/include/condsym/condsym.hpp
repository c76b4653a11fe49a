// Determining systems for Q-conditional symmetries of evolution systems:
// manifolds, invariance residuals, splitting and structural comparison.
#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "condsym/expr.hpp"
#include "condsym/jetspace.hpp"
#include "condsym/pdeparse.hpp"

namespace condsym {

struct Manifold {
  std::vector<Expr> constraints;
  /// Applied in order; each value mentions only jets solved later or free jets.
  std::vector<std::pair<Atom, Expr>> plan;
  bool diff_consequences = false;
  std::vector<std::size_t> indices;  // 1-based dependent indices with adjoined Q(u_i) = 0

  std::vector<Atom> eliminated() const;
  Expr restrict(const Expr& e) const;
};

/// Empty `indices` gives the Lie manifold {S_1, ..., S_m}. Q(u_i) = 0 is solved for
/// u_i,t, or for u_i,x when xi0 vanishes identically.
Manifold build_manifold(const PdeSystem& sys, const VectorField& q, const std::vector<std::size_t>& indices,
                        bool diff_consequences = false);

struct Residuals {
  std::vector<Expr> exprs;
  int xi0_power = 0;  // power of xi0 multiplied in to clear denominators
};

Residuals invariance_residuals(const PdeSystem& sys, const VectorField& q, const Manifold& man,
                               ProlongationCache* cache = nullptr);

struct DeterminingSystem {
  Declarations decls;
  std::vector<LabeledEquation> equations;
  std::vector<Atom> basis;
  std::vector<Relation> assumptions;
  std::set<std::string> unknowns;
  int xi0_power = 0;
  std::string description;
};

/// Coefficients of every residual as a polynomial in the free jets (all
/// derivative jets present when `free_jets` is empty).
DeterminingSystem split_determining(const std::vector<Expr>& residuals, std::vector<Atom> free_jets = {});

struct GenerateRequest {
  std::vector<std::size_t> indices;
  bool diff_consequences = false;
};

/// Full pipeline for a source file with a system and an operator template.
DeterminingSystem generate(const SourceFile& src, const GenerateRequest& req);

DeterminingSystem determining_from_source(const SourceFile& src);
std::string render(const DeterminingSystem& ds);

// ---------------------------------------------------------------------------
// Reduction and comparison

struct ReductionContext {
  std::set<std::string> unknowns;
  std::vector<Expr> nonzero;  // assumed nonzero: monomials are stripped, sums divided out
};

ReductionContext context_of(const DeterminingSystem& ds);

/// Scale-free form: nonzero monomial content stripped, nonzero sums divided
/// out, leading coefficient 1.
Expr primitive(const Expr& e, const std::vector<Expr>& nonzero);

struct Reduced {
  std::vector<std::pair<Atom, std::size_t>> generators;  // vanishing derivatives and source equation
  std::vector<std::pair<Expr, std::size_t>> remaining;   // primitive forms and source equation

  std::vector<Atom> generator_atoms() const;
  std::vector<Expr> remaining_exprs() const;
};

/// Closure under "a single unknown derivative vanishes": such derivatives and
/// all of their further derivatives are set to zero until nothing changes.
Reduced reduce(const std::vector<Expr>& eqs, const ReductionContext& ctx,
               const std::vector<Atom>& vanishing = {});

/// Zeroes every derivative of an unknown that is a derivative of a generator.
Expr apply_vanishing(const Expr& e, const std::vector<Atom>& generators);
bool implied_by(const Atom& a, const std::vector<Atom>& generators);

struct MatchedPair {
  std::size_t a = 0;
  std::size_t b = 0;
  std::string label_a;
  std::string label_b;
  std::string level;  // "raw", "generator", "reduced"
};

struct CompareReport {
  std::string status;  // identical, equivalent-up-to-combination, mismatch
  std::vector<MatchedPair> matched_pairs;
  std::vector<std::size_t> unmatched_a;
  std::vector<std::size_t> unmatched_b;
  std::vector<std::size_t> implied_a;  // reduce to 0 modulo the generators
  std::vector<std::size_t> implied_b;
  std::vector<std::string> assumptions;
  bool reduced_identical = false;
  std::vector<std::string> unmatched_a_text;
  std::vector<std::string> unmatched_b_text;
};

CompareReport compare_systems(const DeterminingSystem& a, const DeterminingSystem& b);

/// Generators followed by remaining equations, as a determining system.
DeterminingSystem reduced_system(const DeterminingSystem& ds, const std::vector<Atom>& vanishing = {});

struct Xi0Normalization {
  DeterminingSystem system;
  bool xi0_eliminated_exactly = false;
};

/// Substitutes xi1 = xi0*xi, eta^k = xi0*eta^k, reduces, and sets xi0 = 1.
Xi0Normalization normalize_xi0(const DeterminingSystem& ds);
VectorField normalize_xi0(const VectorField& q);

enum class ExampleKind { FirstType, NonClassical };

struct ExampleResult {
  DeterminingSystem system;             // remaining equations after the restrictions
  std::vector<Atom> generators;         // vanishing unknown derivatives
  bool ansatz_solves_generators = false;

  /// Generator equations followed by the remaining ones.
  DeterminingSystem full() const;
};

/// Generic system of the given kind restricted by xi1 = eta1_v = eta2_u = 0.
/// `extra` vanishing atoms (for instance d2_v) are imposed as well.
ExampleResult restrict_example(const SourceFile& generic, ExampleKind kind, const std::vector<Atom>& extra = {});

/// Renames u <-> v, d1 <-> d2, C1 <-> C2 (arguments swapped), eta1 <-> eta2 and
/// swaps the u, v arguments of the operator coefficients.
DeterminingSystem swap_components(const DeterminingSystem& ds);

}  // namespace condsym
