#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "condsym/catalog.hpp"
#include "condsym/condsym.hpp"
#include "condsym/error.hpp"
#include "condsym/kirchhoff.hpp"

using namespace condsym;

namespace {

struct Parsed {
  SourceFile src;
  RDOriginal orig;
};

Parsed load(const std::string& text) {
  Parsed p;
  p.src = parse_source(text);
  p.orig = parse_system(p.src).original.value();
  return p;
}

const char* kHeader = "[params]\nk\n[variables]\nU, V\n[functions]\nF(a, b), G(a, b)\n[system]\n";

Expr P(const std::string& s, const Declarations& d) { return parse_expr(s, d); }

}  // namespace

TEST(Kirchhoff, IdentityDiffusivity) {
  Parsed p = load(std::string(kHeader) + "U_t = (U_x)_x + F(U, V)\nV_t = (V_x)_x + G(U, V)\n");
  KirchhoffResult r = to_canonical(p.orig, p.src.decls);
  EXPECT_EQ(r.record.forward[0], Expr::jet("U"));
  EXPECT_EQ(r.canonical.d[0], Expr(1));
  EXPECT_EQ(r.canonical.c[0], -P("F(u, v)", r.decls));
  EXPECT_EQ(r.canonical.c[1], -P("G(u, v)", r.decls));
}

TEST(Kirchhoff, PowerDiffusivity) {
  Parsed p = load(std::string(kHeader) + "U_t = (U^k*U_x)_x + F(U, V)\nV_t = (V_x)_x + G(U, V)\n");
  KirchhoffResult r = to_canonical(p.orig, p.src.decls);
  ParamFrac k = ParamFrac::parameter("k");
  Atom U = Atom::jet("U", 0, 0);
  // derivative of the forward map is the diffusivity
  EXPECT_EQ(diff(r.record.forward[0], U), pow(Expr(U), k));
  Expr u = Expr::jet("u");
  EXPECT_EQ(r.canonical.d[0], pow(Expr(k + 1) * u, -k / (k + 1)));
  ASSERT_TRUE(r.record.inverse[0]);
  std::map<std::string, double> params{{"k", 2.0}};
  for (double x : {0.5, 1.0, 2.0}) {
    double f = r.record.forward_value(0, x, params);
    EXPECT_NEAR(f, x * x * x / 3.0, 1e-14);
    EXPECT_NEAR(r.record.inverse_value(0, f, params), x, 1e-12);
  }
}

TEST(Kirchhoff, LogarithmicCaseRejected) {
  Parsed p = load(std::string(kHeader) + "U_t = (U^(-1)*U_x)_x + F(U, V)\nV_t = (V_x)_x + G(U, V)\n");
  EXPECT_THROW(to_canonical(p.orig, p.src.decls), PreconditionError);
}

TEST(Kirchhoff, RoundTripAtRandomPoints) {
  Parsed p = load(std::string(kHeader) + "U_t = (U^(1/2)*U_x)_x + F(U, V)\nV_t = (V^(-1/2)*V_x)_x + G(U, V)\n");
  KirchhoffResult r = to_canonical(p.orig, p.src.decls);
  std::mt19937_64 rng(2009);
  std::uniform_real_distribution<double> dist(0.5, 2.0);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    for (std::size_t a = 0; a < 2; ++a) {
      double x = dist(rng);
      double back = r.record.inverse_value(a, r.record.forward_value(a, x));
      worst = std::max(worst, std::abs(back - x) / std::abs(x));
    }
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Kirchhoff, NumericInverseFallback) {
  Parsed p = load(std::string(kHeader) + "U_t = ((1 + U^2)*U_x)_x + F(U, V)\nV_t = (V_x)_x + G(U, V)\n");
  EXPECT_THROW(to_canonical(p.orig, p.src.decls), PreconditionError);
  KirchhoffResult r = to_canonical(p.orig, p.src.decls, true);
  EXPECT_FALSE(r.record.closed_form());
  for (double x : {0.5, 1.0, 1.7}) {
    double f = r.record.forward_value(0, x);
    EXPECT_NEAR(f, x + x * x * x / 3, 1e-14);
    EXPECT_NEAR(r.record.inverse_value(0, f), x, 1e-10);
  }
  VectorField q{{"U", "V"}, Expr(1), Expr(0), {Expr::jet("U"), Expr(0)}};
  VectorField ok{{"U", "V"}, Expr(1), Expr(0), {Expr(0), Expr(1)}};
  EXPECT_THROW(transform_operator(q, r.record), PreconditionError);
  EXPECT_NO_THROW(transform_operator(ok, r.record));
}

TEST(TransformOperator, TimeTranslation) {
  Parsed p = load(std::string(kHeader) + "U_t = (U^k*U_x)_x + F(U, V)\nV_t = (V_x)_x + G(U, V)\n");
  KirchhoffResult r = to_canonical(p.orig, p.src.decls);
  VectorField q = transform_operator(VectorField{{"U", "V"}, Expr(1), Expr(0), {Expr(0), Expr(0)}}, r.record);
  EXPECT_EQ(q.deps, (std::vector<std::string>{"u", "v"}));
  EXPECT_EQ(q.xi0, Expr(1));
  EXPECT_TRUE(q.eta[0].is_zero() && q.eta[1].is_zero());
}

TEST(TransformOperator, CatalogRowTwo) {
  Instance inst = instantiate(load_entry(2));
  KirchhoffResult r = to_canonical(inst.original, inst.decls);
  VectorField q = transform_operator(inst.op, r.record);
  EXPECT_EQ(q.xi0, Expr(1));
  EXPECT_TRUE(q.xi1.is_zero());
  EXPECT_EQ(q.eta[0], Expr(inst.params.at("lambda1")));
  EXPECT_EQ(q.eta[1], Expr(inst.params.at("lambda2")));
}

TEST(TransformOperator, CatalogRowTwoSymbolic) {
  CatalogEntry e = load_entry(2);
  ParsedSystem ps = parse_system(e.source);
  KirchhoffResult r = to_canonical(*ps.original, e.source.decls);
  VectorField q = transform_operator(operator_of(e.source), r.record);
  EXPECT_EQ(q.eta[0], Expr::parameter("lambda1"));
  EXPECT_EQ(q.eta[1], Expr::parameter("lambda2"));
}

TEST(TransformOperator, ExampleRestrictionsPreserved) {
  Parsed p = load(std::string(kHeader) + "U_t = (U^k*U_x)_x + F(U, V)\nV_t = (V^2*V_x)_x + G(U, V)\n");
  KirchhoffResult r = to_canonical(p.orig, p.src.decls);
  Declarations d = p.src.decls;
  VectorField star{{"U", "V"}, P("t^2 + x", d), Expr(0), {P("t*U + x", d), P("V^3 - t", d)}};
  VectorField q = transform_operator(star, r.record);
  EXPECT_TRUE(q.xi1.is_zero());
  EXPECT_TRUE(diff(q.eta[0], Atom::jet("v", 0, 0)).is_zero());
  EXPECT_TRUE(diff(q.eta[1], Atom::jet("u", 0, 0)).is_zero());
}

// Transformed operators remain non-classical symmetries of the transformed systems.
TEST(TransformOperator, SymmetryTransport) {
  for (const auto& e : list_entries()) {
    Instance inst = instantiate(e);
    KirchhoffResult r = to_canonical(inst.original, inst.decls);
    VectorField q = transform_operator(inst.op, r.record);
    PdeSystem sys = r.canonical.pde();
    Residuals res = invariance_residuals(sys, q, build_manifold(sys, q, {1, 2}));
    std::vector<Expr> exprs;
    for (const auto& x : res.exprs) exprs.push_back(apply_rules(x, inst.rules));
    std::mt19937_64 rng(e.row);
    std::vector<FunctionSample> samples = {random_polynomial_sample("f", 1, rng),
                                           random_polynomial_sample("g", 1, rng)};
    CheckOptions o;
    CheckReport rep = residual_check(exprs, o, samples, "transport");
    EXPECT_TRUE(rep.pass()) << "row " << e.row << " " << rep.max_violation;
  }
}

TEST(Render, InverseBlock) {
  Instance inst = instantiate(load_entry(2));
  KirchhoffResult r = to_canonical(inst.original, inst.decls);
  VectorField q = transform_operator(inst.op, r.record);
  std::string text = render(r, &q);
  EXPECT_NE(text.find("[inverse]"), std::string::npos);
  SourceFile back = parse_source(text);
  EXPECT_EQ(parse_system(back).form, SystemForm::RDCanonical);
  EXPECT_EQ(operator_of(back).eta[0], q.eta[0]);
}
