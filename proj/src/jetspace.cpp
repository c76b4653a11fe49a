#include "condsym/jetspace.hpp"

#include <algorithm>
#include <mutex>

#include "condsym/error.hpp"

namespace condsym {

Atom time_atom() { return Atom::indep(kTime); }
Atom space_atom() { return Atom::indep(kSpace); }

namespace {

int jet_order(const Expr& e) {
  int k = 0;
  for (const auto& j : jets_in(e)) k = std::max(k, j.order());
  return k;
}

}  // namespace

std::vector<int> PdeSystem::orders() const {
  std::vector<int> out;
  for (const auto& s : equations) out.push_back(jet_order(s));
  return out;
}

int PdeSystem::max_order() const {
  int k = 0;
  for (int o : orders()) k = std::max(k, o);
  return k;
}

std::vector<int> EvolutionSystem::orders() const {
  std::vector<int> out;
  for (const auto& f : rhs) out.push_back(jet_order(f));
  return out;
}

PdeSystem EvolutionSystem::residual_form() const {
  PdeSystem p;
  p.deps = deps;
  for (std::size_t a = 0; a < rhs.size(); ++a) p.equations.push_back(Expr::jet(deps[a], 1, 0) - rhs[a]);
  return p;
}

void validate(const EvolutionSystem& sys) {
  if (sys.deps.empty()) throw PreconditionError("system needs at least one dependent variable");
  if (sys.deps.size() != sys.rhs.size()) throw PreconditionError("one equation per dependent variable");
  for (const auto& f : sys.rhs) {
    for (const auto& j : jets_in(f)) {
      if (j.nt() > 0) throw PreconditionError("time derivative on the right-hand side: " + to_string(j));
    }
  }
}

Expr VectorField::characteristic(std::size_t a) const {
  return eta.at(a) - xi0 * Expr::jet(deps[a], 1, 0) - xi1 * Expr::jet(deps[a], 0, 1);
}

Expr VectorField::surface_condition(std::size_t a) const { return -characteristic(a); }

void validate(const VectorField& q) {
  if (q.eta.size() != q.deps.size()) throw PreconditionError("one eta per dependent variable");
  std::vector<Expr> all{q.xi0, q.xi1};
  all.insert(all.end(), q.eta.begin(), q.eta.end());
  for (const auto& c : all) {
    for (const auto& j : jets_in(c)) {
      if (j.order() > 0) throw PreconditionError("operator coefficient depends on " + to_string(j));
    }
  }
}

Expr total_derivative(const Expr& e, char dir) {
  const Atom var = dir == 't' ? time_atom() : space_atom();
  const int dt = dir == 't' ? 1 : 0;
  return derive(e, [&](const Atom& a) -> Expr {
    if (a.kind() == AtomKind::Jet) return Expr(a.bumped(dt, 1 - dt));
    if (a == var) return Expr(1);
    return Expr();
  });
}

ProlongedField prolong(const VectorField& q, int order) {
  if (order < 0) throw PreconditionError("negative prolongation order");
  validate(q);
  ProlongedField pf;
  pf.base = q;
  pf.order = order;
  for (std::size_t a = 0; a < q.deps.size(); ++a) {
    const std::string& u = q.deps[a];
    pf.coefficients[Atom::jet(u, 0, 0)] = q.eta[a];
    // D_J W for all J, built by x-derivatives first and then t-derivatives.
    std::map<std::pair<int, int>, Expr> dw;
    dw[{0, 0}] = q.characteristic(a);
    for (int n = 1; n <= order; ++n) {
      for (int nt = 0; nt <= n; ++nt) {
        int nx = n - nt;
        dw[{nt, nx}] = nx > 0 ? total_derivative(dw.at({nt, nx - 1}), 'x')
                              : total_derivative(dw.at({nt - 1, nx}), 't');
        pf.coefficients[Atom::jet(u, nt, nx)] = dw.at({nt, nx}) + q.xi0 * Expr::jet(u, nt + 1, nx) +
                                               q.xi1 * Expr::jet(u, nt, nx + 1);
      }
    }
  }
  return pf;
}

Expr apply_prolonged(const ProlongedField& pq, const Expr& e) {
  for (const auto& j : jets_in(e)) {
    if (j.order() > pq.order) throw PreconditionError("insufficient prolongation order");
  }
  Expr out = pq.base.xi0 * diff(e, time_atom()) + pq.base.xi1 * diff(e, space_atom());
  for (const auto& j : jets_in(e)) {
    auto it = pq.coefficients.find(j);
    if (it == pq.coefficients.end()) continue;
    out += it->second * diff(e, j);
  }
  return out;
}

std::shared_ptr<const ProlongedField> ProlongationCache::get(const VectorField& q, int order) {
  std::vector<Expr> key_exprs{q.xi0, q.xi1};
  key_exprs.insert(key_exprs.end(), q.eta.begin(), q.eta.end());
  for (const auto& d : q.deps) key_exprs.push_back(Expr::jet(d));
  Key key{key_exprs, order};
  {
    std::shared_lock lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  auto pf = std::make_shared<const ProlongedField>(prolong(q, order));
  std::unique_lock lock(mutex_);
  return cache_.emplace(std::move(key), pf).first->second;
}

std::size_t ProlongationCache::size() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

}  // namespace condsym
