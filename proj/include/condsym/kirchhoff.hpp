// Kirchhoff substitution u = int D(U) dU taking U_t = (D(U) U_x)_x + F to
// the canonical form u_xx = d(u) u_t + C, and the induced operator transform.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "condsym/jetspace.hpp"
#include "condsym/pdeparse.hpp"

namespace condsym {

struct TransformRecord {
  std::vector<std::string> original_deps;   // U, V
  std::vector<std::string> canonical_deps;  // u, v
  std::vector<Expr> diffusivity;            // D^a in the original jet U^a
  std::vector<Expr> forward;                // u^a as an expression in U^a
  /// U^a as an expression in u^a; empty when only the numeric inverse exists.
  std::vector<std::optional<Expr>> inverse;
  /// Bracket for the numeric inverse, on which D^a > 0 is assumed.
  double lo = 1e-6;
  double hi = 1e6;
  double tol = 1e-12;

  bool closed_form() const;
  double forward_value(std::size_t a, double U, const std::map<std::string, double>& params = {}) const;
  /// Closed form when available, else monotone bisection on [lo, hi].
  double inverse_value(std::size_t a, double u, const std::map<std::string, double>& params = {}) const;
};

struct KirchhoffResult {
  RDCanonical canonical;
  TransformRecord record;
  Declarations decls;  // declarations for the canonical variables
};

/// Antiderivative with constant 0 of a sum of power terms c U^a, a != -1.
Expr power_antiderivative(const Expr& d, const Atom& var);

/// Throws PreconditionError for diffusivities outside power-sum form and,
/// without `numeric_fallback`, for forward maps that are not single power terms.
KirchhoffResult to_canonical(const RDOriginal& orig, const Declarations& decls, bool numeric_fallback = false);

/// xi0, xi1 composed with the inverse maps; eta^a = D^a * eta*^a composed likewise.
VectorField transform_operator(const VectorField& q_star, const TransformRecord& rec);

/// Canonical system, optional operator and [inverse] block in the input grammar.
std::string render(const KirchhoffResult& k, const VectorField* op = nullptr);

}  // namespace condsym
