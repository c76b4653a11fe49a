#include <gtest/gtest.h>

#include "condsym/error.hpp"
#include "condsym/pdeparse.hpp"

using namespace condsym;

namespace {
Expr P(const std::string& s) { return parse_expr(s); }
}  // namespace

TEST(ParseExpr, CanonicalSystemEquation) {
  Expr s1 = P("u_xx - d1(u)*u_t - C1(u,v)");
  Declarations d = Declarations::rd_canonical();
  Expr built = Expr::jet("u", 0, 2) - d.apply_declared("d1") * Expr::jet("u", 1, 0) - d.apply_declared("C1");
  EXPECT_EQ(s1, built);
  EXPECT_TRUE(P("0").is_zero());
}

TEST(ParseExpr, Precedence) {
  EXPECT_EQ(P("-u^2"), -(Expr::jet("u") * Expr::jet("u")));
  EXPECT_EQ(P("2^3^2"), Expr(512));
  EXPECT_EQ(P("u/v*v"), P("u"));
  EXPECT_EQ(P("1 - u - v"), Expr(1) - Expr::jet("u") - Expr::jet("v"));
  EXPECT_EQ(P("0.25*u"), P("u/4"));
}

TEST(ParseExpr, DerivativeNotations) {
  Declarations d = Declarations::rd_canonical();
  EXPECT_EQ(P("C1_uv"), d.apply_declared("C1", {1, 1}));
  EXPECT_EQ(P("xi0_tx"), d.apply_declared("xi0", {1, 1, 0, 0}));
  Declarations e;
  e.deps = {"U"};
  e.functions = {{"f", {"w"}}};
  EXPECT_EQ(parse_expr("f''(U)", e), Expr(Atom::func("f", {"w"}, {Expr::jet("U")}, {2})));
  EXPECT_EQ(parse_expr("f_ww(U)", e), parse_expr("f''(U)", e));
}

TEST(ParseExpr, Unicode) {
  Declarations d = Declarations::rd_canonical();
  d.params = {"lambda1"};
  EXPECT_EQ(parse_expr("λ₁*ξ⁰_t − η¹", d), parse_expr("lambda1*xi0_t - eta1", d));
  EXPECT_EQ(parse_expr("d¹·u_t", d), parse_expr("d1*u_t", d));
}

TEST(ParseExpr, PowerWithParameter) {
  Declarations d;
  d.params = {"k"};
  d.deps = {"U"};
  Expr e = parse_expr("(U^k*U_x)", d);
  EXPECT_EQ(e, pow(Expr::jet("U"), ParamFrac::parameter("k")) * Expr::jet("U", 0, 1));
  EXPECT_EQ(parse_expr("U^k*U^1", d), pow(Expr::jet("U"), ParamFrac::parameter("k") + 1));
}

TEST(ParseExpr, PositionedErrors) {
  try {
    P("u + * v");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1);
    EXPECT_EQ(e.column(), 5);
  }
  try {
    P("u + w");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("undeclared symbol 'w'"), std::string::npos);
    EXPECT_EQ(e.column(), 5);
  }
  try {
    P("u_y");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("malformed jet suffix"), std::string::npos);
  }
  EXPECT_THROW(P("(u"), ParseError);
  EXPECT_THROW(P("u/(v - v)"), ParseError);
  EXPECT_THROW(P("C1(u)"), ParseError);
}

TEST(Render, RoundTrip) {
  EXPECT_EQ(render(2 * Expr::jet("u")), "2*u");
  EXPECT_EQ(render(Expr()), "0");
  for (const char* s : {"(2*xi1_x - xi0_t)*d2 + eta2*d2_v", "C1_uv*u_x^2/xi0 - 3/2*v_tx",
                        "exp(u*v)*(u + v)^(-1/2)", "eta1^2*d1_u/xi0^2"}) {
    Expr e = P(s);
    EXPECT_EQ(P(render(e)), e) << s;
  }
}

TEST(ParseSystem, FormDetection) {
  ParsedSystem heat = parse_system("u_t = u_xx");
  EXPECT_EQ(heat.form, SystemForm::Evolution);
  EXPECT_EQ(heat.pde.deps.size(), 1u);

  SourceFile canon = parse_source(R"(
[variables]
u, v
[functions]
d1(u), d2(v), C1(u,v), C2(u,v)
[system]
u_xx = d1*u_t + C1
v_xx = d2*v_t + C2
)");
  ParsedSystem c = parse_system(canon);
  EXPECT_EQ(c.form, SystemForm::RDCanonical);
  EXPECT_EQ(c.pde.equations[0], P("d1*u_t + C1 - u_xx"));

  SourceFile row2 = parse_source(R"(
[params]
k, l, lambda1, lambda2
alpha = lambda1*(k+1)/(lambda2*(l+1))
[variables]
U, V
[functions]
f(w), g(w)
[system]
U_t = (U^k*U_x)_x + lambda1*U^(-k) + f(U^(k+1) - alpha*V^(l+1))
V_t = (V^l*V_x)_x + lambda2*V^(-l) + g(U^(k+1) - alpha*V^(l+1))
)");
  ParsedSystem o = parse_system(row2);
  ASSERT_EQ(o.form, SystemForm::RDOriginal);
  EXPECT_EQ(o.original->diffusivity[0], parse_expr("U^k", row2.decls));
  EXPECT_EQ(o.original->reaction[0],
            parse_expr("lambda1*U^(-k) + f(U^(k+1) - lambda1*(k+1)/(lambda2*(l+1))*V^(l+1))", row2.decls));
  EXPECT_EQ(o.evolution->rhs[0], parse_expr("U^k*U_xx + k*U^(k-1)*U_x^2 + lambda1*U^(-k) + f(U^(k+1) - alpha*V^(l+1))", row2.decls));
}

TEST(ParseSystem, Errors) {
  EXPECT_THROW(parse_system("u_t = u_tx"), ParseError);
  SourceFile mixed = parse_source(R"(
[variables]
U, V
[system]
U_t = (U*U_x)_x
V_t = V_xx
)");
  EXPECT_THROW(parse_system(mixed), ParseError);
}

TEST(ParseSource, EquationsAndRelations) {
  SourceFile s = parse_source(R"(
[params]
lambda
[variables]
u, v
[functions]
xi0(t,x,u,v), p(x)
[constraints]
p'' = p^2 + lambda*p
p != 0
[restrictions]
lambda^2 + 1 != 0 or lambda != 0
[equations]
1: xi0_x = xi0_u = 0
2: xi0_t*
   xi0
)");
  ASSERT_EQ(s.ode_rules.size(), 1u);
  EXPECT_EQ(s.ode_rules[0].function, "p");
  EXPECT_EQ(s.side_relations.size(), 1u);
  EXPECT_EQ(s.restrictions[0].size(), 2u);
  ASSERT_EQ(s.equations.size(), 3u);
  EXPECT_EQ(s.equations[0].label, "1");
  EXPECT_EQ(s.equations[2].expr, parse_expr("xi0_t*xi0", s.decls));
}
