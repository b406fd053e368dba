#include <gtest/gtest.h>

#include "invsynth/ast.hpp"
#include "invsynth/parser.hpp"
#include "test_util.hpp"

using namespace invsynth;

namespace {

LinExpr X(std::int64_t c = 1) { return LinExpr::var("x", c); }
LinExpr Y(std::int64_t c = 1) { return LinExpr::var("y", c); }
LinExpr K(std::int64_t c) { return LinExpr::constant(c); }

bool eval_source(std::int64_t l, SourceRel r, std::int64_t rhs) {
  switch (r) {
    case SourceRel::Lt: return l < rhs;
    case SourceRel::Le: return l <= rhs;
    case SourceRel::Gt: return l > rhs;
    case SourceRel::Ge: return l >= rhs;
    case SourceRel::Eq: return l == rhs;
    case SourceRel::Ne: return l != rhs;
  }
  return false;
}

}  // namespace

TEST(LinExpr, DropsZeroCoefficients) {
  LinExpr e = X() + Y() - X();
  EXPECT_EQ(e, Y());
  EXPECT_EQ(e.coeff("x"), 0);
  EXPECT_TRUE(e.vars().size() == 1);
}

TEST(LinExpr, OverflowIsReported) {
  LinExpr big = LinExpr::var("x", INT64_MAX);
  EXPECT_THROW(big + big, OverflowError);
  EXPECT_THROW(big.scaled(2), OverflowError);
}

TEST(Normalize, StrictLessThan) {
  Formula f = normalize_atom(X(), SourceRel::Lt, K(5));
  ASSERT_TRUE(f.is_atom());
  EXPECT_EQ(f.atom().rel(), Rel::Ge);
  EXPECT_EQ(f.atom().expr(), X(-1) + K(4));
  for (std::int64_t x = -10; x <= 10; ++x) EXPECT_EQ(eval(f, {{"x", x}}), x < 5) << x;
}

TEST(Normalize, IntegerTightening) {
  Formula f = normalize_atom(X(2), SourceRel::Ge, K(3));
  EXPECT_EQ(f, normalize_atom(X(), SourceRel::Ge, K(2)));
  for (std::int64_t x = -10; x <= 10; ++x) EXPECT_EQ(eval(f, {{"x", x}}), 2 * x >= 3) << x;
}

TEST(Normalize, ParityMakesEqualityFalse) {
  EXPECT_TRUE(normalize_atom(X(2), SourceRel::Eq, K(1)).is_false());
}

TEST(Normalize, EqualAtomsCompareEqual) {
  EXPECT_EQ(normalize_atom(X(2), SourceRel::Ge, K(4)), normalize_atom(X(), SourceRel::Ge, K(2)));
  EXPECT_EQ(normalize_atom(X(), SourceRel::Eq, Y()), normalize_atom(Y(), SourceRel::Eq, X()));
}

TEST(Normalize, GroundAtomsFold) {
  EXPECT_TRUE(normalize_atom(K(3), SourceRel::Le, K(4)).is_true());
  EXPECT_TRUE(normalize_atom(K(3), SourceRel::Ne, K(3)).is_false());
}

TEST(Normalize, MetaAtomsAreNotTightened) {
  Formula f = make_atom(X(2) + LinExpr::meta("c") + K(1), Rel::Ge);
  ASSERT_TRUE(f.is_atom());
  EXPECT_EQ(f.atom().expr().coeff("x"), 2);
  Formula g = make_atom(X(2) + LinExpr::meta("c", 2) + K(4), Rel::Ge);
  EXPECT_EQ(g.atom().expr(), X() + LinExpr::meta("c") + K(2));
}

TEST(Normalize, SoundOnRandomAtoms) {
  Rng rng(11);
  const SourceRel rels[] = {SourceRel::Lt, SourceRel::Le, SourceRel::Gt,
                            SourceRel::Ge, SourceRel::Eq, SourceRel::Ne};
  for (int iter = 0; iter < 400; ++iter) {
    std::int64_t a = rng.uniform_int(-4, 4), b = rng.uniform_int(-4, 4);
    std::int64_t c = rng.uniform_int(-6, 6), d = rng.uniform_int(-6, 6);
    SourceRel r = rels[rng.uniform_int(0, 5)];
    Formula f = normalize_atom(X(a) + K(c), r, Y(b) + K(d));
    for (std::int64_t x = -10; x <= 10; ++x)
      for (std::int64_t y = -10; y <= 10; ++y)
        ASSERT_EQ(eval(f, {{"x", x}, {"y", y}}), eval_source(a * x + c, r, b * y + d))
            << a << "x+" << c << " vs " << b << "y+" << d;
  }
}

TEST(Subst, PreservationInstance) {
  Formula inv = parse_formula("x >= y");
  Formula s = subst_var(inv, "x", X() + Y());
  EXPECT_EQ(s, parse_formula("x + y >= y"));
  EXPECT_EQ(s, parse_formula("x >= 0"));
}

TEST(Subst, VariableNotFree) {
  Formula f = parse_formula("y >= 0");
  EXPECT_EQ(subst_var(f, "x", X() + K(1)), f);
}

TEST(Subst, GcdRenormalized) {
  Formula f = parse_formula("2*x == 4");
  Formula g = subst_var(f, "x", LinExpr::var("z"));
  EXPECT_EQ(g, parse_formula("z == 2"));
  for (std::int64_t z = -5; z <= 5; ++z) EXPECT_EQ(eval(g, {{"z", z}}), 2 * z == 4);
}

TEST(Subst, MetaInstantiation) {
  EXPECT_EQ(subst_meta(parse_formula("x - y <= c?"), "c", 10), parse_formula("x - y <= 10"));
  Formula f = parse_formula("x >= 1");
  EXPECT_EQ(subst_meta(f, "c", 3), f);
  EXPECT_TRUE(subst_meta(parse_formula("c? >= 0"), "c", -1).is_false());
}

TEST(Subst, CommutesWithEvaluation) {
  Rng rng(5);
  for (int iter = 0; iter < 200; ++iter) {
    Formula f = testutil::random_formula(rng, {"x", "y", "z"}, 3);
    LinExpr e = testutil::random_expr(rng, {"x", "y", "z"}, 3);
    Formula g = subst_var(f, "x", e);
    for (const auto& env : testutil::box_envs({"x", "y", "z"}, 2)) {
      Env env2 = env;
      env2["x"] = e.eval(env);
      ASSERT_EQ(eval(g, env), eval(f, env2)) << print_formula(f) << " [x <- " << print_expr(e) << "]";
    }
  }
}

TEST(Cnf, ImplicationIsOneClause) {
  auto cnf = to_cnf(parse_formula("x >= 0 -> x + y >= 1"));
  ASSERT_EQ(cnf.size(), 1u);
  Clause expected{parse_formula("x <= -1").atom(), parse_formula("x + y >= 1").atom()};
  EXPECT_EQ(cnf[0], expected);
}

TEST(Cnf, ConjunctionSplits) {
  auto cnf = to_cnf(parse_formula("x >= 0 && y >= 0"));
  ASSERT_EQ(cnf.size(), 2u);
  EXPECT_EQ(cnf[0], Clause{parse_formula("x >= 0").atom()});
  EXPECT_EQ(cnf[1], Clause{parse_formula("y >= 0").atom()});
}

TEST(Cnf, NegatedDisjunction) {
  auto cnf = to_cnf(parse_formula("!(x >= 0 || y >= 0)"));
  ASSERT_EQ(cnf.size(), 2u);
  EXPECT_EQ(cnf[0], Clause{parse_formula("x <= -1").atom()});
  EXPECT_EQ(cnf[1], Clause{parse_formula("y <= -1").atom()});
}

TEST(Cnf, ConstantsAndTautologies) {
  EXPECT_TRUE(to_cnf(Formula::truth()).empty());
  auto f = to_cnf(Formula::falsity());
  ASSERT_EQ(f.size(), 1u);
  EXPECT_TRUE(f[0].empty());
  EXPECT_TRUE(to_cnf(parse_formula("x >= 0 || x <= 0")).empty());
}

TEST(Cnf, BudgetIsEnforced) {
  std::vector<Formula> ds;
  for (int i = 0; i < 10; ++i) {
    std::string a = "a" + std::to_string(i), b = "b" + std::to_string(i);
    ds.push_back(parse_formula(a + " >= 0 && " + b + " >= 0"));
  }
  EXPECT_THROW(to_cnf(f_or(ds)), CnfBudgetExceeded);
}

TEST(Cnf, EquivalentOnRandomFormulas) {
  Rng rng(3);
  const std::vector<std::string> vars{"w", "x", "y", "z"};
  for (int iter = 0; iter < 300; ++iter) {
    Formula f = testutil::random_formula(rng, vars, 3);
    std::vector<Clause> cnf;
    try {
      cnf = to_cnf(f);
    } catch (const CnfBudgetExceeded&) {
      continue;
    }
    for (const auto& env : testutil::box_envs(vars, 2)) {
      bool v = true;
      for (const auto& c : cnf) {
        bool any = false;
        for (const auto& a : c) any = any || eval(Formula::from_atom(a), env);
        v = v && any;
      }
      ASSERT_EQ(v, eval(f, env)) << print_formula(f);
    }
  }
}

TEST(Formula, SmartConstructors) {
  Formula a = parse_formula("x >= 0");
  EXPECT_EQ(f_and(a, Formula::truth()), a);
  EXPECT_TRUE(f_and(a, Formula::falsity()).is_false());
  EXPECT_EQ(f_or(a, a), a);
  EXPECT_EQ(f_not(f_not(a)), a);
  EXPECT_EQ(f_not(parse_formula("x == 0")), parse_formula("x != 0"));
  EXPECT_EQ(f_not(parse_formula("x != 0")), parse_formula("x == 0"));
  EXPECT_TRUE(f_implies(Formula::falsity(), a).is_true());
}

TEST(Formula, VariableSets) {
  EXPECT_EQ(free_vars(parse_formula("x + y >= c?")), (std::set<std::string>{"x", "y"}));
  EXPECT_EQ(metas_of(parse_formula("x + y >= c?")), (std::set<std::string>{"c"}));
  EXPECT_TRUE(meta_only(parse_formula("c? >= 1")));
  EXPECT_FALSE(meta_only(parse_formula("x >= 1")));
}

TEST(Stmt, ModifiedVars) {
  Stmt inc = Stmt::assign("x", X() + K(1));
  EXPECT_EQ(modified_vars(inc), (std::set<std::string>{"x"}));
  EXPECT_TRUE(modified_vars(Stmt::skip()).empty());
  Stmt branch = Stmt::if_then(std::nullopt, inc, Stmt::assign("y", K(0)));
  EXPECT_EQ(modified_vars(branch), (std::set<std::string>{"x", "y"}));
  EXPECT_EQ(count_star_branches(branch), 1u);
}
