#include <gtest/gtest.h>

#include "support/corpus.hpp"

using namespace condsym;
using condsym::testing::ExprGen;

TEST(Properties, GeneratedCorpus) {
  ExprGen gen(20090601);
  std::vector<Expr> corpus = gen.corpus(600);
  auto c = condsym::testing::check_properties(corpus, gen.decls());
  EXPECT_EQ(c.cases, 600);
  EXPECT_EQ(c.normalize_failures, 0);
  EXPECT_EQ(c.diff_failures, 0);
  EXPECT_EQ(c.collect_failures, 0);
  EXPECT_EQ(c.parse_failures, 0);
}

TEST(Properties, NormalizeIdempotentOnCanonicalForm) {
  ExprGen gen(7);
  for (const auto& e : gen.corpus(100)) {
    Expr once = normalize(*to_tree(e));
    EXPECT_EQ(normalize(*to_tree(once)), once);
  }
}

TEST(Properties, DiffIsLinear) {
  ExprGen gen(11);
  auto c = gen.corpus(200);
  Atom u = Atom::jet("u", 0, 0);
  for (std::size_t i = 0; i + 1 < c.size(); i += 2) EXPECT_EQ(diff(c[i] + c[i + 1], u), diff(c[i], u) + diff(c[i + 1], u));
}

TEST(Properties, ProductRule) {
  ExprGen gen(13);
  auto c = gen.corpus(200);
  Atom x = Atom::indep("x");
  for (std::size_t i = 0; i + 1 < c.size(); i += 2)
    EXPECT_EQ(diff(c[i] * c[i + 1], x), diff(c[i], x) * c[i + 1] + c[i] * diff(c[i + 1], x));
}
