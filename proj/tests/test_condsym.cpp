#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "condsym/catalog.hpp"
#include "condsym/condsym.hpp"
#include "condsym/error.hpp"

using namespace condsym;

namespace {

const SourceFile& generic() {
  static const SourceFile s = load_source(data_dir() + "/rd_generic.sys");
  return s;
}

DeterminingSystem reference(const std::string& name) {
  return determining_from_source(load_source(data_dir() + "/reference/" + name + ".sys"));
}

DeterminingSystem first_type(std::size_t index = 1, bool diff = false) {
  return generate(generic(), GenerateRequest{{index}, diff});
}

DeterminingSystem nonclassical() { return generate(generic(), GenerateRequest{{1, 2}, false}); }

Atom atom(const std::string& s) { return *parse_expr(s, generic().decls).as_atom(); }

bool all_zero(const std::vector<Expr>& es) {
  return std::all_of(es.begin(), es.end(), [](const Expr& e) { return e.is_zero(); });
}

std::vector<std::string> equation_lines(const DeterminingSystem& ds) {
  std::vector<std::string> out;
  for (const auto& e : ds.equations) out.push_back(e.label + ": " + to_string(e.expr));
  return out;
}

// Labels of `b` matched by pairs, with the number of distinct partners.
std::map<std::string, std::set<std::string>> partners(const CompareReport& r) {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& p : r.matched_pairs) out[p.label_b].insert(p.label_a);
  return out;
}

}  // namespace

TEST(Manifold, LieModeEliminatesTopDerivatives) {
  ParsedSystem ps = parse_system(generic());
  Manifold m = build_manifold(ps.pde, operator_of(generic()), {});
  EXPECT_EQ(m.constraints.size(), 2u);
  std::vector<Atom> el = m.eliminated();
  std::set<Atom> got(el.begin(), el.end());
  EXPECT_EQ(got, (std::set<Atom>{Atom::jet("u", 0, 2), Atom::jet("v", 0, 2)}));
}

TEST(Manifold, FirstTypeAddsSurfaceCondition) {
  ParsedSystem ps = parse_system(generic());
  Manifold m = build_manifold(ps.pde, operator_of(generic()), {1});
  EXPECT_EQ(m.constraints.size(), 3u);
  std::vector<Atom> el = m.eliminated();
  EXPECT_NE(std::find(el.begin(), el.end(), Atom::jet("u", 1, 0)), el.end());
  EXPECT_EQ(std::find(el.begin(), el.end(), Atom::jet("v", 1, 0)), el.end());
  EXPECT_THROW(build_manifold(ps.pde, operator_of(generic()), {3}), PreconditionError);
}

TEST(Manifold, RestrictLeavesNoEliminatedJets) {
  ParsedSystem ps = parse_system(generic());
  VectorField q = operator_of(generic());
  Manifold m = build_manifold(ps.pde, q, {1, 2});
  Residuals r = invariance_residuals(ps.pde, q, m);
  for (const auto& e : r.exprs)
    for (const auto& j : jets_in(e))
      for (const auto& el : m.eliminated()) EXPECT_NE(j, el);
}

TEST(FirstType, MatchesPublishedSystem) {
  CompareReport r = compare_systems(first_type(), reference("first_type"));
  EXPECT_TRUE(r.status == "identical" || r.status == "equivalent-up-to-combination") << r.status;
  EXPECT_TRUE(r.reduced_identical);
  EXPECT_TRUE(r.unmatched_a.empty());
  EXPECT_TRUE(r.unmatched_b.empty());
  auto p = partners(r);
  for (int g = 1; g <= 8; ++g) EXPECT_TRUE(p.count(std::to_string(g))) << "group " << g;
  // groups 3 to 6 are single equations, each matched by exactly one generated equation
  std::set<std::string> used;
  for (int g = 3; g <= 6; ++g) {
    ASSERT_EQ(p[std::to_string(g)].size(), 1u) << "group " << g;
    EXPECT_TRUE(used.insert(*p[std::to_string(g)].begin()).second);
  }
}

TEST(FirstType, DifferentialConsequencesAddNothing) {
  DeterminingSystem plain = first_type(1, false);
  DeterminingSystem star = first_type(1, true);
  CompareReport r = compare_systems(star, plain);
  EXPECT_TRUE(r.reduced_identical);
  EXPECT_NE(r.status, "mismatch");
  EXPECT_EQ(equation_lines(reduced_system(star)), equation_lines(reduced_system(plain)));
}

TEST(FirstType, SecondComponentIsTheMirrorImage) {
  CompareReport r = compare_systems(swap_components(first_type(2)), first_type(1));
  EXPECT_EQ(r.status, "identical");
}

TEST(NonClassical, MatchesPublishedSystem) {
  DeterminingSystem ref = reference("nonclassical");
  std::set<std::string> groups;
  for (const auto& e : ref.equations) groups.insert(e.label);
  EXPECT_EQ(groups.size(), 12u);
  CompareReport r = compare_systems(nonclassical(), ref);
  EXPECT_TRUE(r.status == "identical" || r.status == "equivalent-up-to-combination") << r.status;
  EXPECT_TRUE(r.reduced_identical);
  EXPECT_TRUE(r.unmatched_b.empty());
}

TEST(NonClassical, Xi0NormalizationMatchesPublishedSystem) {
  Xi0Normalization n = normalize_xi0(nonclassical());
  EXPECT_TRUE(n.xi0_eliminated_exactly);
  CompareReport r = compare_systems(n.system, reference("nonclassical_normalized"));
  EXPECT_EQ(r.status, "identical");
}

TEST(NonClassical, FirstTypeIsNotXi0Free) { EXPECT_FALSE(normalize_xi0(first_type()).xi0_eliminated_exactly); }

TEST(NonClassical, NormalizedOperator) {
  VectorField q = normalize_xi0(operator_of(generic()));
  EXPECT_EQ(q.xi0, Expr(1));
  VectorField zero{{"u", "v"}, Expr(0), Expr(1), {Expr(0), Expr(0)}};
  EXPECT_THROW(normalize_xi0(zero), PreconditionError);
}

TEST(Example, NonClassicalRestriction) {
  ExampleResult r = restrict_example(generic(), ExampleKind::NonClassical);
  EXPECT_EQ(r.system.equations.size(), 2u);
  EXPECT_TRUE(r.ansatz_solves_generators);
  EXPECT_EQ(compare_systems(r.system, reference("example_nonclassical")).status, "identical");
}

TEST(Example, FirstTypeRestriction) {
  ExampleResult r = restrict_example(generic(), ExampleKind::FirstType);
  EXPECT_EQ(r.system.equations.size(), 3u);
  EXPECT_TRUE(r.ansatz_solves_generators);
  EXPECT_EQ(compare_systems(r.system, reference("example_first_type")).status, "identical");
}

TEST(Example, ConstantSecondDiffusivityMakesTypesEquivalent) {
  ExampleResult nc = restrict_example(generic(), ExampleKind::NonClassical, {atom("d2_v")});
  ExampleResult ft = restrict_example(generic(), ExampleKind::FirstType, {atom("d2_v")});
  Xi0Normalization a = normalize_xi0(nc.full());
  Xi0Normalization b = normalize_xi0(ft.full());
  EXPECT_TRUE(a.xi0_eliminated_exactly);
  EXPECT_TRUE(b.xi0_eliminated_exactly);
  EXPECT_EQ(compare_systems(a.system, b.system).status, "identical");
}

TEST(Example, TypesDifferWithoutTheExtraCondition) {
  ExampleResult nc = restrict_example(generic(), ExampleKind::NonClassical);
  ExampleResult ft = restrict_example(generic(), ExampleKind::FirstType);
  EXPECT_EQ(compare_systems(normalize_xi0(nc.full()).system, normalize_xi0(ft.full()).system).status, "mismatch");
}

TEST(Reduce, GeneratorsPropagate) {
  DeterminingSystem ds = first_type();
  ReductionContext ctx = context_of(ds);
  Reduced r = reduce({parse_expr("xi0(t,x,u,v)*xi0_u(t,x,u,v)", generic().decls)}, ctx);
  ASSERT_EQ(r.generators.size(), 1u);
  EXPECT_EQ(r.generators[0].first, atom("xi0_u"));
  EXPECT_TRUE(implied_by(atom("xi0_tu"), {atom("xi0_u")}));
  EXPECT_FALSE(implied_by(atom("xi0_t"), {atom("xi0_u")}));
  Expr e = parse_expr("xi0_xu(t,x,u,v) + eta1(t,x,u,v)", generic().decls);
  EXPECT_EQ(apply_vanishing(e, {atom("xi0_u")}), parse_expr("eta1(t,x,u,v)", generic().decls));
}

TEST(Reduce, PrimitiveStripsNonzeroFactors) {
  const auto& d = generic().decls;
  std::vector<Expr> nz = {parse_expr("xi0(t,x,u,v)", d), parse_expr("d1(u) - d2(v)", d)};
  Expr e = parse_expr("-3*xi0(t,x,u,v)^2*(d1(u) - d2(v))*eta1_v(t,x,u,v)", d);
  EXPECT_EQ(primitive(e, nz), parse_expr("eta1_v(t,x,u,v)", d));
}

TEST(Compare, DetectsMismatch) {
  DeterminingSystem a = first_type();
  DeterminingSystem b = a;
  b.equations.pop_back();
  b.equations.push_back({"extra", parse_expr("eta1_t(t,x,u,v)", generic().decls)});
  EXPECT_EQ(compare_systems(a, b).status, "mismatch");
}

TEST(Hierarchy, TranslationsOnAutonomousSystems) {
  std::vector<PdeSystem> systems = {
      parse_system("u_t = u_xx + u*v\nv_t = v_xx - u^2").pde,
      parse_system("u_t = u^2*u_xx + 2*u*u_x^2 + u^3 - v\nv_t = v_xx + u*v^2").pde,
      parse_system(generic()).pde,
  };
  for (const auto& sys : systems) {
    for (int dir = 0; dir < 2; ++dir) {
      VectorField q{sys.deps, Expr(dir == 0 ? 1 : 0), Expr(dir == 1 ? 1 : 0), {Expr(0), Expr(0)}};
      bool lie = all_zero(invariance_residuals(sys, q, build_manifold(sys, q, {})).exprs);
      bool first = all_zero(invariance_residuals(sys, q, build_manifold(sys, q, {1})).exprs);
      bool nc = all_zero(invariance_residuals(sys, q, build_manifold(sys, q, {1, 2})).exprs);
      EXPECT_TRUE(lie);
      EXPECT_TRUE(!lie || first);
      EXPECT_TRUE(!first || nc);
    }
  }
}

TEST(Hierarchy, FirstTypeOperatorIsNonClassical) {
  Instance inst = instantiate(load_entry(1));
  std::vector<Expr> first = instance_residuals(inst, {2});
  std::vector<Expr> nc = instance_residuals(inst, {1, 2});
  EXPECT_TRUE(all_zero(first));
  EXPECT_TRUE(all_zero(nc));
  EXPECT_FALSE(all_zero(instance_residuals(inst, {})));
}

TEST(Render, DeterminingSystemRoundTrip) {
  DeterminingSystem ds = first_type();
  SourceFile back = parse_source(render(ds));
  DeterminingSystem again = determining_from_source(back);
  ASSERT_EQ(again.equations.size(), ds.equations.size());
  for (std::size_t i = 0; i < ds.equations.size(); ++i) EXPECT_EQ(again.equations[i].expr, ds.equations[i].expr);
}
