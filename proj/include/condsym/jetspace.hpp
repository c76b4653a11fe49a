// Jet space over the independent variables t and x: total derivatives and
// prolongation of point vector fields.
#pragma once

#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "condsym/expr.hpp"

namespace condsym {

inline const char* const kTime = "t";
inline const char* const kSpace = "x";

Atom time_atom();
Atom space_atom();

/// A system S_a = 0, a = 1..m, in the jet coordinates of `deps`.
struct PdeSystem {
  std::vector<std::string> deps;
  std::vector<Expr> equations;

  /// Highest total jet order of each equation.
  std::vector<int> orders() const;
  int max_order() const;
};

/// u^a_t = rhs[a]; the residual form is u^a_t - rhs[a].
struct EvolutionSystem {
  std::vector<std::string> deps;
  std::vector<Expr> rhs;

  std::vector<int> orders() const;
  PdeSystem residual_form() const;
};

/// Throws PreconditionError when some rhs contains a time derivative.
void validate(const EvolutionSystem& sys);

/// Q = xi0 d_t + xi1 d_x + sum_a eta[a] d_{u^a}.
struct VectorField {
  std::vector<std::string> deps;
  Expr xi0;
  Expr xi1;
  std::vector<Expr> eta;

  /// Characteristic W^a = eta^a - xi0 u^a_t - xi1 u^a_x.
  Expr characteristic(std::size_t a) const;
  /// Q(u^a) = xi0 u^a_t + xi1 u^a_x - eta^a.
  Expr surface_condition(std::size_t a) const;
};

/// Throws PreconditionError when a coefficient depends on derivatives.
void validate(const VectorField& q);

Expr total_derivative(const Expr& e, char dir);

struct ProlongedField {
  VectorField base;
  int order = 0;
  /// Coefficient of d/d(u^a_J) for every jet with 0 <= |J| <= order.
  std::map<Atom, Expr> coefficients;
};

ProlongedField prolong(const VectorField& q, int order);

/// Prolonged operator applied to e. Throws "insufficient prolongation order"
/// when e has a jet above the prolongation order.
Expr apply_prolonged(const ProlongedField& pq, const Expr& e);

/// Memoizes prolong() per (operator, order); safe for concurrent use.
class ProlongationCache {
 public:
  std::shared_ptr<const ProlongedField> get(const VectorField& q, int order);
  std::size_t size() const;

 private:
  using Key = std::pair<std::vector<Expr>, int>;
  mutable std::shared_mutex mutex_;
  std::map<Key, std::shared_ptr<const ProlongedField>> cache_;
};

}  // namespace condsym
