#include <gtest/gtest.h>

#include <cmath>

#include "condsym/error.hpp"
#include "condsym/numoracle.hpp"
#include "condsym/pdeparse.hpp"

using namespace condsym;

namespace {

Declarations decls() { return Declarations::rd_canonical(); }
Expr P(const std::string& s) { return parse_expr(s, decls()); }

NumericPoint point(std::map<std::string, double> jets) {
  NumericPoint pt;
  for (const auto& [name, v] : jets) {
    auto a = P(name).as_atom();
    pt.values[*a] = v;
  }
  return pt;
}

FunctionSample cube(const std::string& name) {
  return {name, FunctionTemplate{1, pow(Expr(Atom::slot(0)), 3)}};
}

}  // namespace

TEST(Eval, Polynomial) { EXPECT_DOUBLE_EQ(eval(P("u^2"), point({{"u", 3}})), 9); }

TEST(Eval, SampledDerivative) {
  double v = eval(P("d1'(u)*u_t"), point({{"u", 2}, {"u_t", 5}}), {cube("d1")});
  EXPECT_DOUBLE_EQ(v, 60);
}

TEST(Eval, Parameters) {
  NumericPoint pt = point({{"u", 4}});
  Expr e = pow(P("u"), ParamFrac::parameter("k")) * Expr::parameter("k");
  pt.params["k"] = 0.5;
  EXPECT_DOUBLE_EQ(eval(e, pt), 1.0);
}

TEST(Eval, DomainViolation) {
  EXPECT_THROW(eval(P("u^(1/2)"), point({{"u", -1}})), DomainError);
  EXPECT_THROW(eval(P("u^(-1)"), point({{"u", 0}})), DomainError);
}

TEST(Eval, UncoveredAtom) { EXPECT_THROW(eval(P("u*v"), point({{"u", 1}})), PreconditionError); }

TEST(CheckIdentity, Examples) {
  CheckOptions o;
  EXPECT_TRUE(check_identity(P("(u+v)^2"), P("u^2 + 2*u*v + v^2"), o));
  EXPECT_FALSE(check_identity(P("u_x"), P("v_x"), o));
}

TEST(CheckIdentity, SoundForCanonicalEquality) {
  CheckOptions o;
  Expr a = P("(u + v)^3*d1(u)");
  Expr b = P("u^3*d1(u) + 3*u^2*v*d1(u) + 3*u*v^2*d1(u) + v^3*d1(u)");
  ASSERT_TRUE(equal_canonical(a, b));
  std::mt19937_64 rng(7);
  EXPECT_TRUE(check_identity(a, b, o, {random_polynomial_sample("d1", 1, rng)}));
}

TEST(ResidualCheck, ConfirmedFailure) {
  CheckOptions o;
  CheckReport r = residual_check({P("u_x - v_x")}, o, {}, "differs");
  EXPECT_TRUE(r.confirmed_fail());
  EXPECT_GT(r.max_violation, 1e3 * o.tol);
  EXPECT_EQ(r.claim, "differs");
  EXPECT_FALSE(r.worst_point.empty());
}

TEST(ResidualCheck, Deterministic) {
  CheckOptions o;
  o.seed = 99;
  std::mt19937_64 r1(5), r2(5);
  auto s1 = random_polynomial_sample("C1", 2, r1);
  auto s2 = random_polynomial_sample("C1", 2, r2);
  EXPECT_EQ(s1.tmpl.body, s2.tmpl.body);
  Expr e = P("C1(u, v)*u_x - u_t");
  CheckReport a = residual_check({e}, o, {s1});
  CheckReport b = residual_check({e}, o, {s2});
  EXPECT_EQ(a.max_violation, b.max_violation);
  EXPECT_EQ(a.worst_point, b.worst_point);
}

TEST(ResidualCheck, SamplesRespectDomain) {
  SamplingDomain dom;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    NumericPoint pt = sample_point({P("u*v*u_x*t*x")}, dom, {}, {}, rng);
    for (const auto& [a, v] : pt.values) {
      if (a.kind() == AtomKind::Indep && a.name() == "t") EXPECT_TRUE(v >= 0.1 && v <= 1.0);
      if (a.kind() == AtomKind::Indep && a.name() == "x") EXPECT_TRUE(v >= 1.0 && v <= 2.0);
      if (a.is_jet() && a.order() == 0) EXPECT_TRUE(v >= 0.5 && v <= 2.0);
      if (a.is_jet() && a.order() > 0) EXPECT_TRUE(std::abs(v) >= 0.1 && std::abs(v) <= 2.0);
    }
  }
}

TEST(RandomSample, NonzeroCoefficientsInRange) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    FunctionSample s = random_polynomial_sample("f", 1, rng);
    for (const auto& t : s.tmpl.body.terms()) {
      ASSERT_TRUE(t.coeff.is_rational());
      EXPECT_NE(t.coeff.rational(), 0);
      EXPECT_LE(abs(t.coeff.rational()), 2);
    }
  }
}
