#include <gtest/gtest.h>

#include "invsynth/parser.hpp"
#include "invsynth/semantics.hpp"
#include "test_util.hpp"

using namespace invsynth;

namespace {

Formula F(const std::string& s) { return parse_formula(s); }

LoopTask load(const std::string& rel) { return parse_task(testutil::read_file(testutil::source_path(rel))); }

}  // namespace

TEST(Wlp, Assignments) {
  LoopTask t = load("fixtures/sum_loop.imp");
  EXPECT_EQ(wlp(t.body, F("x >= y")), F("x >= 1"));
  EXPECT_EQ(wlp(Stmt::skip(), F("x >= y")), F("x >= y"));
}

TEST(Wlp, Branches) {
  Stmt inc = Stmt::assign("x", parse_expr("x + 1"));
  Stmt guarded = Stmt::if_then(F("y > 0"), inc);
  Formula w = wlp(guarded, F("x >= 1"));
  for (const auto& env : testutil::box_envs({"x", "y"}, 3)) {
    bool expected = env.at("y") > 0 ? env.at("x") + 1 >= 1 : env.at("x") >= 1;
    EXPECT_EQ(eval(w, env), expected);
  }
  Stmt star = Stmt::if_then(std::nullopt, inc, Stmt::assign("x", parse_expr("x - 1")));
  EXPECT_EQ(wlp(star, F("x >= 1")), F("x >= 0 && x >= 2"));
  EXPECT_EQ(wlp(Stmt::assume(F("x >= 5")), F("x >= 1")), F("x >= 5 -> x >= 1"));
}

TEST(Vc, SumLoopInvariantIsProved) {
  LoopTask t = load("fixtures/sum_loop.imp");
  InvariantCheck c = check_invariant(t, F("y >= 0 && x >= 1 && x >= y"));
  EXPECT_TRUE(c.init.proved());
  EXPECT_TRUE(c.preserved.proved());
  EXPECT_TRUE(c.post.proved());
  EXPECT_TRUE(c.proved());
}

TEST(Vc, WeakCandidateIsRefuted) {
  LoopTask t = load("fixtures/sum_loop.imp");
  InvariantCheck c = check_invariant(t, F("x >= 1"));
  EXPECT_TRUE(c.init.proved());
  EXPECT_EQ(c.preserved.verdict, Verdict::Refuted);
  ASSERT_EQ(c.post.verdict, Verdict::Refuted);
  const Env& m = *c.post.counterexample;
  EXPECT_GE(m.at("y"), 1000);
  EXPECT_LT(m.at("x"), m.at("y"));
}

TEST(Validity, Basics) {
  EXPECT_TRUE(check_valid(F("x >= 0 -> x != -1")).proved());
  EXPECT_TRUE(check_valid(F("x == 0 || x != 0")).proved());
  EXPECT_TRUE(check_valid(F("2*x != 1")).proved());
  EXPECT_TRUE(check_valid(F("x >= 1 && y == x + 2 -> y >= 3")).proved());
  ValidityResult r = check_valid(F("x >= 0 -> x >= 1"));
  ASSERT_EQ(r.verdict, Verdict::Refuted);
  EXPECT_EQ(r.counterexample->at("x"), 0);
  EXPECT_THROW(check_valid(F("x >= c?")), std::invalid_argument);
}

TEST(Validity, DisequalityNeedsSearch) {
  ValidityResult r = check_valid(F("x >= 0 && x <= 2 -> x != 1"));
  ASSERT_EQ(r.verdict, Verdict::Refuted);
  EXPECT_EQ(r.counterexample->at("x"), 1);
}

TEST(Validity, SoundOnRandomFormulas) {
  Rng rng(41);
  const std::vector<std::string> vars{"x", "y", "z"};
  const auto envs = testutil::box_envs(vars, 3);
  int proved = 0, refuted = 0;
  for (int iter = 0; iter < 600; ++iter) {
    Formula f = f_implies(testutil::random_formula(rng, vars, 2), testutil::random_formula(rng, vars, 1));
    ValidityResult r = check_valid(f);
    if (r.verdict == Verdict::Proved) {
      ++proved;
      for (const auto& env : envs) ASSERT_TRUE(eval(f, env)) << print_formula(f);
    } else if (r.verdict == Verdict::Refuted) {
      ++refuted;
      Env env = *r.counterexample;
      for (const auto& v : vars) env.emplace(v, 0);
      ASSERT_FALSE(eval(f, env)) << print_formula(f);
    } else {
      bool all = true;
      for (const auto& env : envs) all = all && eval(f, env);
      EXPECT_TRUE(all) << "small counterexample missed for " << print_formula(f);
    }
  }
  EXPECT_GT(proved, 30);
  EXPECT_GT(refuted, 30);
}

TEST(Validity, SatIsDual) {
  EXPECT_EQ(check_sat(F("x >= 3 && x <= 2")).status, SatStatus::Unsat);
  SatResult s = check_sat(F("x >= 3 && x + y == 10"));
  ASSERT_EQ(s.status, SatStatus::Sat);
  EXPECT_TRUE(eval(F("x >= 3 && x + y == 10"), *s.model));
}

TEST(BoxModels, PropagationAndDisequality) {
  auto ms = box_models({parse_expr("x - 5"), parse_expr("5 - x")}, {}, {"x"}, 3);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].at("x"), 5);
  auto ns = box_models({parse_expr("x"), parse_expr("2 - x")}, {parse_expr("x")}, {"x"}, 10);
  ASSERT_EQ(ns.size(), 2u);
  EXPECT_EQ(ns[0].at("x"), 1);
  EXPECT_EQ(ns[1].at("x"), 2);
}

TEST(Enumerate, ModelsSatisfyFormula) {
  Formula f = F("x >= 1 && y == 0 && (z > x || z < -x)");
  auto ms = enumerate_models(f, {"x", "y", "z"}, 4, 1000);
  EXPECT_FALSE(ms.empty());
  for (const auto& m : ms) EXPECT_TRUE(eval(f, m));
  std::size_t brute = 0;
  for (const auto& env : testutil::box_envs({"x", "y", "z"}, 4)) brute += eval(f, env);
  EXPECT_EQ(ms.size(), brute);
}

TEST(Exec, StarChoicesAndAssume) {
  Stmt s = Stmt::seq({Stmt::if_then(std::nullopt, Stmt::assign("x", parse_expr("x + 1")),
                                    Stmt::assign("x", parse_expr("x - 1"))),
                      Stmt::assume(F("x >= 0"))});
  auto up = exec_bounded(s, {{"x", 0}}, [] { return true; });
  ASSERT_TRUE(up.has_value());
  EXPECT_EQ(up->at("x"), 1);
  EXPECT_FALSE(exec_bounded(s, {{"x", 0}}, [] { return false; }).has_value());
}

TEST(Bounded, CorrectTasksHaveNoViolation) {
  for (const char* f : {"fixtures/sum_loop.imp", "fixtures/c2i_003.imp", "fixtures/c2i_007.imp",
                        "fixtures/c2i_093.imp", "fixtures/c2i_110.imp"})
    EXPECT_FALSE(find_bounded_violation(load(f)).has_value()) << f;
}

TEST(Bounded, WrongPostIsCaught) {
  LoopTask t = load("fixtures/c2i_003.imp");
  t.post = F("y < z");
  EXPECT_TRUE(find_bounded_violation(t).has_value());
  LoopTask loop = load("fixtures/sum_loop.imp");
  EXPECT_TRUE(find_bounded_inv_violation(loop, F("y <= 3")).has_value());
  EXPECT_FALSE(find_bounded_inv_violation(loop, F("y >= 0 && x >= 1 && x >= y")).has_value());
}
