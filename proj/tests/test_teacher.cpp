#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "invsynth/parser.hpp"
#include "invsynth/semantics.hpp"
#include "invsynth/teacher.hpp"
#include "test_util.hpp"

using namespace invsynth;

namespace {

ReferenceProblem problem(const std::string& text, const char* lin, const char* main, const char* aux,
                         TeacherConstraints cs = {}) {
  ReferenceProblem p;
  p.task = parse_task(text);
  if (lin) p.inv_lin = parse_formula(lin);
  if (main) p.inv_main = parse_formula(main);
  if (aux) p.inv_aux = parse_formula(aux);
  p.constraints = std::move(cs);
  p.sync();
  return p;
}

// Rejection rules restated independently of the implementation.
bool accepted(std::optional<int> lin, std::optional<int> main, std::optional<int> aux, bool star, bool implies,
              bool useful_inv, bool useful_post, unsigned templates) {
  auto has = [&](int bit) { return (templates >> bit) & 1u; };  // bits follow the template table order
  if (!lin && !main && !aux) return false;
  if (aux && !main) return false;
  if (star && (useful_inv || useful_post)) return false;
  if (!main && (implies || useful_inv)) return false;
  if (implies && useful_inv) return false;
  if (!has(2) && !has(3) && !has(4) && !has(5)) return false;
  if (lin && !has(2) && !has(3)) return false;
  return true;
}

ExecutionState replay_labels(std::shared_ptr<const Strategy> s, const std::vector<std::string>& script) {
  ExecutionState st = ExecutionState::start(std::move(s));
  for (const auto& label : script) {
    if (!st.running()) break;
    const auto& ls = st.choice_point().labels;
    auto it = std::find(ls.begin(), ls.end(), label);
    if (it == ls.end()) throw std::runtime_error("missing label " + label);
    st = st.resume(static_cast<std::size_t>(it - ls.begin()));
  }
  return st;
}

const char* kCounter = "x = 0; while (x < 10) { x = x + 1; } assert x == 10;";

}  // namespace

TEST(TeacherSampling, Deterministic) {
  Rng a(42), b(42);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sample_constraints(a), sample_constraints(b));
}

TEST(TeacherSampling, RecordInvariants) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    auto cs = sample_constraints(rng);
    ASSERT_EQ(cs.available_consts.size(), 6u);
    std::set<std::int64_t> distinct(cs.available_consts.begin(), cs.available_consts.end());
    EXPECT_EQ(distinct.size(), 6u);
    for (auto c : cs.available_consts) {
      EXPECT_NE(c, 0);
      EXPECT_GE(c, -64);
      EXPECT_LE(c, 63);
    }
    EXPECT_FALSE(rejection_reason(cs).has_value());
    if (!cs.has_conditional) EXPECT_FALSE(cs.has_else_branch || cs.has_cond_guard);
    EXPECT_EQ(TeacherConstraints::from_json(cs.to_json()), cs);
  }
}

TEST(TeacherSampling, RejectsRecordWithoutInvariant) {
  TeacherConstraints cs;
  cs.assignment_templates = {AssignTemplate::Incr};
  EXPECT_EQ(rejection_reason(cs), "no-invariant");
  cs.num_inv_aux_conjuncts = 1;
  EXPECT_EQ(rejection_reason(cs), "aux-without-main");
  cs.num_inv_main_disjuncts = 1;
  EXPECT_FALSE(rejection_reason(cs).has_value());
  cs.assignment_templates = {AssignTemplate::Const};
  EXPECT_EQ(rejection_reason(cs), "no-progress");
}

TEST(TeacherSampling, ConfigFileMatchesDefaults) {
  Json j = Json::parse(testutil::read_file(testutil::source_path("config/teacher.json")));
  EXPECT_EQ(TeacherConfig::from_json(j).to_json(), TeacherConfig{}.to_json());
  // Every documented rejection rule is reachable and no other rule exists.
  std::set<std::string> documented;
  for (const auto& [k, v] : j.at("rejected_combinations").items()) documented.insert(k);
  std::set<std::string> seen;
  const std::optional<int> counts[] = {std::nullopt, 1, 2};
  for (const auto& lin : counts)
    for (const auto& main : counts)
      for (const auto& aux : counts)
        for (unsigned flags = 0; flags < 16; ++flags)
          for (unsigned ts = 0; ts < 64; ++ts) {
            TeacherConstraints cs;
            cs.num_preserved_term_vars = lin;
            cs.num_inv_main_disjuncts = main;
            cs.num_inv_aux_conjuncts = aux;
            cs.loop_guard_template = flags & 1 ? GuardTemplate::Star : GuardTemplate::VarLtConst;
            cs.body_implies_main_inv = flags & 2;
            cs.loop_guard_useful_for_inv = flags & 4;
            cs.loop_guard_useful_for_post = flags & 8;
            for (int b = 0; b < 6; ++b)
              if ((ts >> b) & 1) cs.assignment_templates.insert(static_cast<AssignTemplate>(b));
            auto r = rejection_reason(cs);
            EXPECT_EQ(!r.has_value(), accepted(lin, main, aux, flags & 1, flags & 2, flags & 4, flags & 8, ts));
            if (r) seen.insert(*r);
          }
  EXPECT_EQ(seen, documented);
}

// Exact post-rejection marginals by enumeration over the fields that take
// part in rejection; the other fields are independent of it.
TEST(TeacherSampling, MarginalsMatchExactOracle) {
  TeacherConfig cfg;
  auto p_of = [](const std::map<std::string, double>& m, const std::string& k) { return m.at(k); };
  const char* keys[] = {"none", "1", "2"};
  const char* lin_keys[] = {"none", "2", "3"};
  const char* tnames[] = {"x=c", "x=y", "x=x+d", "x=x-d", "x=x+y", "x=c-y"};
  std::map<std::string, double> oracle;
  double total = 0;
  for (int li = 0; li < 3; ++li)
    for (int mi = 0; mi < 3; ++mi)
      for (int ai = 0; ai < 3; ++ai)
        for (unsigned flags = 0; flags < 16; ++flags)
          for (unsigned ts = 0; ts < 64; ++ts) {
            double p = p_of(cfg.preserved_term_vars, lin_keys[li]);
            p *= p_of(li == 0 ? cfg.inv_main_disjuncts_without_lin : cfg.inv_main_disjuncts, keys[mi]);
            p *= p_of(cfg.inv_aux_conjuncts, keys[ai]);
            double star = cfg.guard_templates.at("*");
            p *= flags & 1 ? star : 1 - star;
            const char* fl[] = {"body_implies_main_inv", "loop_guard_useful_for_inv", "loop_guard_useful_for_post"};
            for (int b = 0; b < 3; ++b) p *= (flags >> (b + 1)) & 1 ? cfg.flags.at(fl[b]) : 1 - cfg.flags.at(fl[b]);
            for (int b = 0; b < 6; ++b)
              p *= (ts >> b) & 1 ? cfg.assignment_templates.at(tnames[b]) : 1 - cfg.assignment_templates.at(tnames[b]);
            auto opt = [](int i, int v) { return i == 0 ? std::nullopt : std::optional<int>(v); };
            if (!accepted(opt(li, li + 1), opt(mi, mi), opt(ai, ai), flags & 1, flags & 2, flags & 4, flags & 8, ts))
              continue;
            total += p;
            oracle[std::string("lin=") + lin_keys[li]] += p;
            oracle[std::string("main=") + keys[mi]] += p;
            oracle[std::string("aux=") + keys[ai]] += p;
            if (flags & 1) oracle["guard=*"] += p;
            if (flags & 2) oracle["body_implies_main_inv"] += p;
            if (flags & 4) oracle["loop_guard_useful_for_inv"] += p;
            if (flags & 8) oracle["loop_guard_useful_for_post"] += p;
            for (int b = 0; b < 6; ++b)
              if ((ts >> b) & 1) oracle[std::string("tmpl ") + tnames[b]] += p;
          }
  for (auto& [k, v] : oracle) v /= total;
  oracle["has_conditional"] = cfg.flags.at("has_conditional");
  oracle["has_else_branch"] = cfg.flags.at("has_conditional") * cfg.flags.at("has_else_branch");
  oracle["use_params"] = cfg.flags.at("use_params");
  oracle["post=2"] = cfg.post_disjuncts.at("2");

  const int n = 10000;
  std::map<std::string, double> freq;
  Rng rng(11);
  for (int i = 0; i < n; ++i) {
    auto cs = sample_constraints(rng, cfg);
    auto key = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("none"); };
    freq["lin=" + key(cs.num_preserved_term_vars)] += 1;
    freq["main=" + key(cs.num_inv_main_disjuncts)] += 1;
    freq["aux=" + key(cs.num_inv_aux_conjuncts)] += 1;
    if (cs.loop_guard_template == GuardTemplate::Star) freq["guard=*"] += 1;
    if (cs.body_implies_main_inv) freq["body_implies_main_inv"] += 1;
    if (cs.loop_guard_useful_for_inv) freq["loop_guard_useful_for_inv"] += 1;
    if (cs.loop_guard_useful_for_post) freq["loop_guard_useful_for_post"] += 1;
    for (auto t : cs.assignment_templates) freq["tmpl " + to_string(t)] += 1;
    if (cs.has_conditional) freq["has_conditional"] += 1;
    if (cs.has_else_branch) freq["has_else_branch"] += 1;
    if (cs.use_params) freq["use_params"] += 1;
    if (cs.num_post_disjuncts == 2) freq["post=2"] += 1;
  }
  for (const auto& [k, want] : oracle) EXPECT_NEAR(freq[k] / n, want, 0.02) << k;
}

TEST(TeacherRun, ConfigRewards) {
  RunConfig cfg = teacher_run_config();
  EXPECT_EQ(cfg.r_min, -0.5);
  ASSERT_EQ(cfg.events.size(), 16u);
  EXPECT_EQ(cfg.find("use-params")->reward, -0.5);
  EXPECT_EQ(cfg.find("eq-only-for-init")->reward, -0.2);
  EXPECT_EQ(cfg.find("allow-vcomp-in-inv-main")->reward, -0.2);
  EXPECT_DOUBLE_EQ(final_reward({{"use-params", 1}, {"num-inv-aux-conjuncts", 1}}, cfg, true), 0.0);
}

TEST(TeacherChecks, RedundantFormulas) {
  EXPECT_TRUE(is_redundant_disjunction(parse_formula("x > 0 || x == 0")));
  EXPECT_TRUE(is_redundant_conjunction(parse_formula("x > 1 && x > 2")));
  EXPECT_TRUE(is_redundant_disjunction(parse_formula("x >= 0 || x < 0")));
  EXPECT_TRUE(is_redundant_disjunction(parse_formula("x >= 3 || x <= 3")));
  EXPECT_TRUE(is_redundant_conjunction(parse_formula("x >= 3 && x <= 3")));
  EXPECT_TRUE(is_redundant_conjunction(parse_formula("x > 1 && x < 0")));
  EXPECT_TRUE(is_redundant_disjunction(parse_formula("x >= y || x > y + 4")));
  EXPECT_FALSE(is_redundant_disjunction(parse_formula("x > 0 || y > 0")));
  EXPECT_FALSE(is_redundant_disjunction(parse_formula("x > 5 || x < 0")));
  EXPECT_FALSE(is_redundant_conjunction(parse_formula("x >= 0 && x <= 5")));
  EXPECT_FALSE(is_redundant_conjunction(parse_formula("x == y && y >= 2")));
}

TEST(TeacherChecks, ValidProblemPasses) {
  auto p = problem(kCounter, nullptr, "x <= 10", nullptr);
  EXPECT_FALSE(check_hard(p).has_value());
}

TEST(TeacherChecks, WrongInvariantFailsCorrectness) {
  auto p = problem(kCounter, nullptr, "x <= 9", nullptr);
  EXPECT_EQ(check_hard(p), "correctness");
}

TEST(TeacherChecks, LoopEntered) {
  auto p = problem("x = 12; while (x < 10) { x = x + 1; } assert x >= 10;", nullptr, "x >= 0", nullptr);
  EXPECT_EQ(check_hard(p), "loop-entered");
}

TEST(TeacherChecks, LoopTerminates) {
  auto p = problem("x = 0; while (x >= 0) { x = x + 1; } assert x >= 10;", nullptr, "x >= 0", nullptr);
  EXPECT_EQ(check_hard(p), "loop-terminates");
}

TEST(TeacherChecks, RedundantMainIsHard) {
  auto p = problem(kCounter, nullptr, "x <= 9 || x == 10", nullptr);
  EXPECT_EQ(check_hard(p), "inv_main-not-valid-unsat-or-redundant");
}

TEST(TeacherChecks, UnsatisfiableInvariant) {
  auto p = problem(kCounter, nullptr, "x <= 10", "x > 20");
  EXPECT_TRUE(check_hard(p).has_value());
}

TEST(TeacherSoft, RemovableMainDisjunct) {
  auto p = problem(kCounter, nullptr, "x <= 10 || y == 3", nullptr);
  auto v = soft_violations(p);
  EXPECT_TRUE(v.count("inv_main-not-valid-unsat-or-redundant"));
  EXPECT_FALSE(v.count("num-inv-main-disjuncts"));
}

TEST(TeacherSoft, UselessAuxAndParameter) {
  auto p = problem("x = 0; y = 5; while (x < 10) { x = x + 1; } assert x == 10;", nullptr, "x <= 10", "y >= 5");
  auto v = soft_violations(p);
  EXPECT_TRUE(v.count("num-inv-aux-conjuncts"));
  EXPECT_TRUE(v.count("use-params"));
}

TEST(TeacherSoft, GuardUsefulness) {
  TeacherConstraints cs;
  cs.loop_guard_useful_for_post = true;
  cs.loop_guard_useful_for_inv = true;
  // x <= 10 is preserved only under x < 10; x == 10 needs the exit condition.
  auto p = problem(kCounter, nullptr, "x <= 10", nullptr, cs);
  auto v = soft_violations(p);
  EXPECT_FALSE(v.count("loop-guard-useful-for-post"));
  EXPECT_FALSE(v.count("loop-guard-useful-for-inv"));
  cs.loop_guard_useful_for_post = false;
  cs.loop_guard_useful_for_inv = false;
  p.constraints = cs;
  v = soft_violations(p);
  EXPECT_TRUE(v.count("loop-guard-useful-for-post"));
  EXPECT_TRUE(v.count("loop-guard-useful-for-inv"));
}

TEST(TeacherSoft, EqualitiesAndVariableComparisons) {
  TeacherConstraints cs;
  cs.eq_only_for_init = true;
  auto p = problem("x = 0; y = 0; while (x < 10) { x = x + 1; y = y + 1; } assert y == 10;", nullptr, "x <= y",
                   "x == y", cs);
  auto v = soft_violations(p);
  EXPECT_TRUE(v.count("eq-only-for-init"));
  EXPECT_TRUE(v.count("allow-vcomp-in-inv-main"));
}

TEST(TeacherTransform, MakePostAssums) {
  auto p = problem("x = 1; y = 1; while (x < 5) { x = x + 1; } assert x > 0 || y > 0;", nullptr, "x >= 1", nullptr);
  Rng rng(1);
  auto q = apply_transform("make-post-assums", p, rng);
  ASSERT_TRUE(q.has_value());
  std::string text = print_task(q->task);
  EXPECT_NE(text.find("assume x <= 0;"), std::string::npos) << text;
  EXPECT_NE(text.find("assert y > 0;"), std::string::npos) << text;
  EXPECT_EQ(parse_task(text), q->task);
  EXPECT_EQ(q->task.post, p.task.post);
}

TEST(TeacherTransform, AddUselessInit) {
  auto p = problem(kCounter, nullptr, "x <= 10", nullptr);
  Rng rng(5);
  auto q = apply_transform("add-useless-init", p, rng);
  ASSERT_TRUE(q.has_value());
  EXPECT_EQ(conjuncts(q->task.init).size(), conjuncts(p.task.init).size() + 1);
  if (!check_hard(*q)) EXPECT_TRUE(check_invariant(q->task, q->invariant()).proved());
}

TEST(TeacherTransform, WeakenPost) {
  auto p = problem("x = 1; while (x < 5) { x = x + 1; } assert x > 0;", nullptr, "x >= 1", nullptr);
  std::set<std::string> seen;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    auto q = apply_transform("weaken-post", p, rng);
    ASSERT_TRUE(q.has_value());
    seen.insert(print_formula(q->task.post));
  }
  EXPECT_EQ(seen, (std::set<std::string>{"x >= 0", "x != 0"}));
}

TEST(TeacherTransform, MoveParamAssumption) {
  auto p = problem("assume n >= 0; x = 0; while (x < n) { x = x + 1; } assert x == n;", nullptr, "x <= n", nullptr);
  ASSERT_EQ(p.param_facts().size(), 1u);
  Rng rng(2);
  auto q = apply_transform("move-param-assum", p, rng);
  ASSERT_TRUE(q.has_value());
  EXPECT_TRUE(q->param_facts().empty());
  EXPECT_EQ(q->task.post, parse_formula("x == n || n < 0"));
}

TEST(TeacherTransform, CancelledWhenItBreaksTheProblem) {
  TeacherConfig cfg;
  for (const auto& n : kTransformNames) cfg.transform_probability[n] = 0;
  cfg.transform_probability["move-param-assum"] = 1;
  // Without n >= 0 the invariant no longer holds initially.
  auto p = problem("assume n >= 0; x = 0; while (x < n) { x = x + 1; } assert x == n;", nullptr, "x <= n", nullptr);
  ASSERT_FALSE(check_hard(p).has_value());
  Rng rng(4);
  auto q = transform(p, rng, cfg);
  EXPECT_TRUE(q.transforms.empty());
  EXPECT_EQ(q.task, p.task);
  cfg.transform_probability["move-param-assum"] = 0;
  cfg.transform_probability["rearrange-commutative"] = 1;
  q = transform(p, rng, cfg);
  EXPECT_EQ(q.transforms, std::vector<std::string>{"rearrange-commutative"});
}

TEST(TeacherStrategy, EqualityCounterProblem) {
  TeacherConstraints cs;
  cs.num_inv_main_disjuncts = 1;
  cs.loop_guard_useful_for_post = true;
  cs.loop_guard_template = GuardTemplate::VarLtConst;
  cs.assignment_templates = {AssignTemplate::Incr};
  cs.available_consts = {-9, -6, 4, 8, 13, 20};
  auto st = replay_labels(std::make_shared<TeacherStrategy>(cs, 1),
                          {"c? (abduce later)", "x? == y?", "y (new)", "x", "y", "1", "x=x+d", "x", "1", "skip",
                           "template", "x? > c?", "y", "c? (abduce later)", "x == y", "c2? = 0", "c1? = 1"});
  ASSERT_EQ(st.status(), RunStatus::Succeeded) << st.failure_reason();
  const auto& p = std::any_cast<const ReferenceProblem&>(st.result());
  LoopTask want = parse_task(
      "assume y == x; while (x < 1) { invariant y == x; y = y + 1; x = x + 1; } assert y > 0;");
  EXPECT_EQ(p.task, want);
  EXPECT_TRUE(p.violations.empty());
  EXPECT_EQ(st.reward(), 1.0);
}

TEST(TeacherStrategy, RandomRunsAreValidAndConsistent) {
  Rng pick(9);
  int ok = 0;
  for (int i = 0; i < 400; ++i) {
    Rng rng(mix_seed(21, static_cast<std::uint64_t>(i)));
    auto strat = std::make_shared<TeacherStrategy>(sample_constraints(rng), static_cast<std::uint64_t>(i));
    ExecutionState st = ExecutionState::start(strat);
    while (st.running()) st = st.resume(static_cast<std::size_t>(pick.uniform_int(0, st.num_choices() - 1)));
    if (st.status() != RunStatus::Succeeded) {
      EXPECT_EQ(st.reward(), -1.0);
      continue;
    }
    ++ok;
    const auto& p = std::any_cast<const ReferenceProblem&>(st.result());
    EXPECT_FALSE(check_hard(p).has_value()) << print_task(p.task);
    EXPECT_FALSE(find_bounded_inv_violation(p.task, p.invariant()).has_value()) << print_task(p.task);
    EXPECT_EQ(soft_violations(p), p.violations);
    std::set<std::string> raised;
    for (const auto& [e, n] : st.event_counts()) raised.insert(e);
    EXPECT_EQ(raised, p.violations) << print_task(p.task);
    EXPECT_DOUBLE_EQ(st.reward(), final_reward(st.event_counts(), strat->config(), true));
    EXPECT_EQ(parse_task(print_task(p.task)), p.task);
  }
  EXPECT_GT(ok, 5);
}

TEST(Teach, ReverifiedAndReproducible) {
  TeachOptions opts;
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    auto p = teach(seed, {}, opts);
    ASSERT_TRUE(p.has_value()) << seed;
    EXPECT_TRUE(check_invariant(p->task, p->invariant()).proved()) << print_task(p->task);
    EXPECT_FALSE(check_hard(*p).has_value()) << print_task(p->task);
    EXPECT_EQ(soft_violations(*p), p->violations);
    auto again = teach(seed, {}, opts);
    EXPECT_EQ(to_record(*p, seed).dump(), to_record(*again, seed).dump());
    ReferenceProblem back = from_record(to_record(*p, seed));
    EXPECT_EQ(back.task, p->task);
    EXPECT_EQ(back.violations, p->violations);
    Json hidden = to_record(*p, seed, true);
    EXPECT_TRUE(hidden["inv_main"].is_null());
    EXPECT_EQ(hidden["task_text"].get<std::string>().find("invariant"), std::string::npos);
  }
}

TEST(Teach, SearchReducesViolations) {
  auto mean = [](std::size_t sims) {
    TeachOptions opts;
    opts.sims = sims;
    opts.transform = false;
    double v = 0;
    int n = 0;
    for (std::uint64_t seed = 0; seed < 25; ++seed)
      if (auto p = teach(seed, {}, opts)) {
        v += static_cast<double>(p->violations.size());
        ++n;
      }
    return v / n;
  };
  double low = mean(4), high = mean(64);
  std::cout << "mean soft violations: sims=4 " << low << ", sims=64 " << high << "\n";
  EXPECT_LT(high, low);
}
