#include "invsynth/teacher.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "invsynth/abduction.hpp"
#include "invsynth/parser.hpp"
#include "invsynth/semantics.hpp"

namespace invsynth {

namespace {

const std::vector<std::pair<GuardTemplate, std::string>> kGuardNames{{GuardTemplate::VarLtConst, "x<c"},
                                                                      {GuardTemplate::VarLeConst, "x<=c"},
                                                                      {GuardTemplate::VarLtVar, "x<y"},
                                                                      {GuardTemplate::VarLeVar, "x<=y"},
                                                                      {GuardTemplate::Star, "*"}};

const std::vector<std::pair<AssignTemplate, std::string>> kAssignNames{
    {AssignTemplate::Const, "x=c"}, {AssignTemplate::Var, "x=y"},    {AssignTemplate::Incr, "x=x+d"},
    {AssignTemplate::Decr, "x=x-d"}, {AssignTemplate::AddVar, "x=x+y"}, {AssignTemplate::ConstMinusVar, "x=c-y"}};

const std::vector<std::string> kSourceOps{"<", "<=", ">", ">=", "==", "!="};
const SourceRel kSourceRels[] = {SourceRel::Lt, SourceRel::Le, SourceRel::Gt,
                                 SourceRel::Ge, SourceRel::Eq, SourceRel::Ne};

const std::string kRedundantMain = "inv_main-not-valid-unsat-or-redundant";

Json opt_int(const std::optional<int>& v) { return v ? Json(*v) : Json(nullptr); }
std::optional<int> int_opt(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<int>();
}

std::optional<int> key_to_count(const std::string& k) {
  if (k == "none") return std::nullopt;
  return std::stoi(k);
}

std::string sample_key(Rng& rng, const std::map<std::string, double>& dist) {
  std::vector<std::string> keys;
  std::vector<double> w;
  for (const auto& [k, p] : dist) {
    keys.push_back(k);
    w.push_back(p);
  }
  return keys[rng.weighted_index(w)];
}

template <typename Fn>
Formula map_atoms(const Formula& f, const Fn& fn) {
  switch (f.kind()) {
    case Formula::Kind::True:
    case Formula::Kind::False:
      return f;
    case Formula::Kind::Atom:
      return fn(f.atom());
    case Formula::Kind::Not:
      return f_not(map_atoms(f.children()[0], fn));
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      if (as_disequality(f)) return f;
      std::vector<Formula> ks;
      for (const auto& c : f.children()) ks.push_back(map_atoms(c, fn));
      return f.kind() == Formula::Kind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
    }
    case Formula::Kind::Implies:
      return f_implies(map_atoms(f.children()[0], fn), map_atoms(f.children()[1], fn));
  }
  return f;
}

bool has_eq_atom(const Formula& f) {
  if (f.is_atom()) return f.atom().rel() == Rel::Eq;
  if (as_disequality(f)) return false;
  return std::any_of(f.children().begin(), f.children().end(), has_eq_atom);
}

Formula negate_unit(const Formula& f) {
  if (f.is_atom()) return negate_atom(f.atom());
  if (auto eq = as_disequality(f)) return Formula::from_atom(*eq);
  return f_not(f);
}

std::vector<Formula> without(const std::vector<Formula>& fs, std::size_t i) {
  std::vector<Formula> out;
  for (std::size_t k = 0; k < fs.size(); ++k)
    if (k != i) out.push_back(fs[k]);
  return out;
}

// Whether the set of integers in [-kBox, kBox] given by `in` is the solution
// set of a single atom over one variable.
constexpr std::int64_t kBox = 300;

bool single_atom_set(const std::vector<bool>& in) {
  std::size_t n = in.size(), count = std::count(in.begin(), in.end(), true);
  if (count == 0 || count == n || count == 1 || count == n - 1) return true;
  bool prefix = std::is_partitioned(in.begin(), in.end(), [](bool b) { return b; });
  bool suffix = std::is_partitioned(in.begin(), in.end(), [](bool b) { return !b; });
  return prefix || suffix;
}

bool pair_collapses(const Formula& a, const Formula& b, bool disjunction) {
  auto va = free_vars(a), vb = free_vars(b);
  if (va.size() != 1 || va != vb) return false;
  const std::string v = *va.begin();
  std::vector<bool> in;
  for (std::int64_t x = -kBox; x <= kBox; ++x) {
    Env env{{v, x}};
    bool ea = eval(a, env), eb = eval(b, env);
    in.push_back(disjunction ? (ea || eb) : (ea && eb));
  }
  return single_atom_set(in);
}

bool refuted(const Formula& f) { return check_valid(f).verdict == Verdict::Refuted; }

}  // namespace

std::string to_string(GuardTemplate g) {
  for (const auto& [k, s] : kGuardNames)
    if (k == g) return s;
  return "";
}

std::string to_string(AssignTemplate a) {
  for (const auto& [k, s] : kAssignNames)
    if (k == a) return s;
  return "";
}

GuardTemplate guard_template_from(const std::string& s) {
  for (const auto& [k, n] : kGuardNames)
    if (n == s) return k;
  throw std::invalid_argument("unknown guard template: " + s);
}

AssignTemplate assign_template_from(const std::string& s) {
  for (const auto& [k, n] : kAssignNames)
    if (n == s) return k;
  throw std::invalid_argument("unknown assignment template: " + s);
}

Json TeacherConstraints::to_json() const {
  Json j;
  j["num_preserved_term_vars"] = opt_int(num_preserved_term_vars);
  j["num_inv_main_disjuncts"] = opt_int(num_inv_main_disjuncts);
  j["num_inv_aux_conjuncts"] = opt_int(num_inv_aux_conjuncts);
  j["num_post_disjuncts"] = num_post_disjuncts;
  j["has_conditional"] = has_conditional;
  j["has_else_branch"] = has_else_branch;
  j["has_cond_guard"] = has_cond_guard;
  j["body_implies_main_inv"] = body_implies_main_inv;
  j["loop_guard_useful_for_inv"] = loop_guard_useful_for_inv;
  j["loop_guard_useful_for_post"] = loop_guard_useful_for_post;
  j["use_params"] = use_params;
  j["eq_only_for_init"] = eq_only_for_init;
  j["allow_vcomp_in_inv_main"] = allow_vcomp_in_inv_main;
  j["loop_guard_template"] = to_string(loop_guard_template);
  Json ts = Json::array();
  for (auto a : assignment_templates) ts.push_back(to_string(a));
  j["assignment_templates"] = ts;
  j["available_consts"] = available_consts;
  return j;
}

TeacherConstraints TeacherConstraints::from_json(const Json& j) {
  TeacherConstraints cs;
  cs.num_preserved_term_vars = int_opt(j.at("num_preserved_term_vars"));
  cs.num_inv_main_disjuncts = int_opt(j.at("num_inv_main_disjuncts"));
  cs.num_inv_aux_conjuncts = int_opt(j.at("num_inv_aux_conjuncts"));
  cs.num_post_disjuncts = j.at("num_post_disjuncts").get<int>();
  cs.has_conditional = j.at("has_conditional").get<bool>();
  cs.has_else_branch = j.at("has_else_branch").get<bool>();
  cs.has_cond_guard = j.at("has_cond_guard").get<bool>();
  cs.body_implies_main_inv = j.at("body_implies_main_inv").get<bool>();
  cs.loop_guard_useful_for_inv = j.at("loop_guard_useful_for_inv").get<bool>();
  cs.loop_guard_useful_for_post = j.at("loop_guard_useful_for_post").get<bool>();
  cs.use_params = j.at("use_params").get<bool>();
  cs.eq_only_for_init = j.at("eq_only_for_init").get<bool>();
  cs.allow_vcomp_in_inv_main = j.at("allow_vcomp_in_inv_main").get<bool>();
  cs.loop_guard_template = guard_template_from(j.at("loop_guard_template").get<std::string>());
  for (const auto& a : j.at("assignment_templates")) cs.assignment_templates.insert(assign_template_from(a));
  cs.available_consts = j.at("available_consts").get<std::vector<std::int64_t>>();
  return cs;
}

TeacherConfig TeacherConfig::from_json(const Json& j) {
  TeacherConfig c;
  auto dist = [&](const char* key, std::map<std::string, double>& into) {
    if (!j.contains(key)) return;
    into.clear();
    for (const auto& [k, v] : j.at(key).items()) into[k] = v.get<double>();
  };
  dist("num_preserved_term_vars", c.preserved_term_vars);
  dist("num_inv_main_disjuncts", c.inv_main_disjuncts);
  dist("num_inv_main_disjuncts_without_lin", c.inv_main_disjuncts_without_lin);
  dist("num_inv_aux_conjuncts", c.inv_aux_conjuncts);
  dist("num_post_disjuncts", c.post_disjuncts);
  dist("flags", c.flags);
  dist("loop_guard_template", c.guard_templates);
  dist("assignment_templates", c.assignment_templates);
  dist("transform_probability", c.transform_probability);
  if (j.contains("const_range")) {
    c.const_min = j.at("const_range").at(0).get<std::int64_t>();
    c.const_max = j.at("const_range").at(1).get<std::int64_t>();
  }
  if (j.contains("num_consts")) c.num_consts = j.at("num_consts").get<std::size_t>();
  return c;
}

Json TeacherConfig::to_json() const {
  Json j;
  j["num_preserved_term_vars"] = preserved_term_vars;
  j["num_inv_main_disjuncts"] = inv_main_disjuncts;
  j["num_inv_main_disjuncts_without_lin"] = inv_main_disjuncts_without_lin;
  j["num_inv_aux_conjuncts"] = inv_aux_conjuncts;
  j["num_post_disjuncts"] = post_disjuncts;
  j["flags"] = flags;
  j["loop_guard_template"] = guard_templates;
  j["assignment_templates"] = assignment_templates;
  j["const_range"] = {const_min, const_max};
  j["num_consts"] = num_consts;
  Json tp;
  for (const auto& n : kTransformNames) tp[n] = transform_p(n);
  j["transform_probability"] = tp;
  return j;
}

double TeacherConfig::transform_p(const std::string& name) const {
  auto it = transform_probability.find(name);
  if (it != transform_probability.end()) return it->second;
  return name == "rearrange-commutative" || name == "randomize-comparisons" ? 0.5 : 0.25;
}

std::optional<std::string> rejection_reason(const TeacherConstraints& cs) {
  const auto& ts = cs.assignment_templates;
  bool guarded = cs.loop_guard_template != GuardTemplate::Star;
  if (!cs.num_preserved_term_vars && !cs.num_inv_main_disjuncts && !cs.num_inv_aux_conjuncts) return "no-invariant";
  if (cs.num_inv_aux_conjuncts && !cs.num_inv_main_disjuncts) return "aux-without-main";
  if (!guarded && (cs.loop_guard_useful_for_inv || cs.loop_guard_useful_for_post)) return "useful-star-guard";
  if (!cs.num_inv_main_disjuncts && (cs.body_implies_main_inv || cs.loop_guard_useful_for_inv))
    return "main-property-without-main";
  if (cs.body_implies_main_inv && cs.loop_guard_useful_for_inv) return "body-implies-and-guard-useful";
  if (!ts.count(AssignTemplate::Incr) && !ts.count(AssignTemplate::Decr) && !ts.count(AssignTemplate::AddVar) &&
      !ts.count(AssignTemplate::ConstMinusVar))
    return "no-progress";
  if (cs.num_preserved_term_vars && !ts.count(AssignTemplate::Incr) && !ts.count(AssignTemplate::Decr))
    return "preserved-term-without-increments";
  return std::nullopt;
}

TeacherConstraints sample_constraints(Rng& rng, const TeacherConfig& cfg) {
  auto flag = [&](const char* k) { return rng.bernoulli(cfg.flags.at(k)); };
  for (;;) {
    TeacherConstraints cs;
    cs.num_preserved_term_vars = key_to_count(sample_key(rng, cfg.preserved_term_vars));
    cs.num_inv_main_disjuncts = key_to_count(
        sample_key(rng, cs.num_preserved_term_vars ? cfg.inv_main_disjuncts : cfg.inv_main_disjuncts_without_lin));
    cs.num_inv_aux_conjuncts = key_to_count(sample_key(rng, cfg.inv_aux_conjuncts));
    cs.num_post_disjuncts = std::stoi(sample_key(rng, cfg.post_disjuncts));
    cs.has_conditional = flag("has_conditional");
    cs.has_else_branch = flag("has_else_branch");
    cs.has_cond_guard = flag("has_cond_guard");
    cs.body_implies_main_inv = flag("body_implies_main_inv");
    cs.loop_guard_useful_for_inv = flag("loop_guard_useful_for_inv");
    cs.loop_guard_useful_for_post = flag("loop_guard_useful_for_post");
    cs.use_params = flag("use_params");
    cs.eq_only_for_init = flag("eq_only_for_init");
    cs.allow_vcomp_in_inv_main = flag("allow_vcomp_in_inv_main");
    cs.loop_guard_template = guard_template_from(sample_key(rng, cfg.guard_templates));
    for (const auto& [name, p] : cfg.assignment_templates)
      if (rng.bernoulli(p)) cs.assignment_templates.insert(assign_template_from(name));
    if (!cs.has_conditional) cs.has_else_branch = cs.has_cond_guard = false;
    if (rejection_reason(cs)) continue;
    while (cs.available_consts.size() < cfg.num_consts) {
      std::int64_t c = rng.uniform_int(cfg.const_min, cfg.const_max);
      if (c == 0 || std::find(cs.available_consts.begin(), cs.available_consts.end(), c) != cs.available_consts.end())
        continue;
      cs.available_consts.push_back(c);
    }
    std::sort(cs.available_consts.begin(), cs.available_consts.end());
    return cs;
  }
}

RunConfig teacher_run_config() {
  RunConfig cfg;
  for (const char* id : {"num-preserved-term-vars", "num-inv-main-disjuncts", "num-inv-aux-conjuncts",
                         "num-post-disjuncts", "has-conditional", "has-else-branch", "has-cond-guard",
                         "body-implies-main-inv", "loop-guard-useful-for-inv", "loop-guard-useful-for-post",
                         "use-params"})
    cfg.events.push_back({id, -0.5, 1});
  for (const char* id : {"eq-only-for-init", "loop-guard-template", "assignment-templates", "allow-vcomp-in-inv-main"})
    cfg.events.push_back({id, -0.2, 1});
  cfg.events.push_back({kRedundantMain, -0.5, 1});
  cfg.r_min = -0.5;
  return cfg;
}

// ---------------------------------------------------------------------------
// Reference problems and checks

std::vector<Formula> ReferenceProblem::param_facts() const {
  std::vector<Formula> out;
  for (const auto& c : conjuncts(task.init)) {
    auto vs = free_vars(c);
    if (vs.empty()) continue;
    if (std::all_of(vs.begin(), vs.end(), [&](const std::string& v) { return task.is_parameter(v); }))
      out.push_back(c);
  }
  return out;
}

std::vector<Formula> ReferenceProblem::invariant_parts() const {
  std::vector<Formula> parts;
  auto add = [&](const Formula& f) {
    if (std::find(parts.begin(), parts.end(), f) == parts.end()) parts.push_back(f);
  };
  if (inv_lin) add(*inv_lin);
  if (inv_aux) add(*inv_aux);
  if (inv_main) add(*inv_main);
  for (const auto& f : param_facts()) add(f);
  return parts;
}

void ReferenceProblem::sync() {
  task.vars.clear();
  task.invariants.clear();
  infer_var_kinds(task);
  task.invariants = invariant_parts();
}

bool is_redundant_disjunction(const Formula& f) {
  if (f.is_true() || f.is_false()) return true;
  if (!refuted(f)) return true;
  if (check_sat(f).status != SatStatus::Sat) return true;
  auto units = disjunct_units(f);
  for (std::size_t i = 0; i < units.size() && units.size() > 1; ++i)
    if (!refuted(f_implies(units[i], f_or(without(units, i))))) return true;
  for (std::size_t i = 0; i < units.size(); ++i)
    for (std::size_t j = i + 1; j < units.size(); ++j)
      if (pair_collapses(units[i], units[j], true)) return true;
  return false;
}

bool is_redundant_conjunction(const Formula& f) {
  if (f.is_true() || f.is_false()) return true;
  if (!refuted(f)) return true;
  if (check_sat(f).status != SatStatus::Sat) return true;
  auto units = conjuncts(f);
  for (std::size_t i = 0; i < units.size() && units.size() > 1; ++i)
    if (!refuted(f_implies(f_and(without(units, i)), units[i]))) return true;
  for (std::size_t i = 0; i < units.size(); ++i)
    for (std::size_t j = i + 1; j < units.size(); ++j)
      if (pair_collapses(units[i], units[j], false)) return true;
  return false;
}

std::optional<std::string> check_hard(const ReferenceProblem& p) {
  const LoopTask& t = p.task;
  Formula inv = p.invariant();
  for (const auto& part : p.invariant_parts())
    if (!metas_of(part).empty()) return "correctness";
  if (!check_invariant(t, inv).proved()) return "correctness";
  if (p.inv_main && is_redundant_disjunction(*p.inv_main)) return kRedundantMain;
  if (is_redundant_disjunction(t.post)) return "post-not-valid-unsat-or-redundant";
  if (is_redundant_conjunction(t.init)) return "init-not-valid-unsat-or-redundant";
  if (check_sat(inv).status != SatStatus::Sat) return "inv-sat";
  if (t.guard) {
    if (!refuted(f_implies(f_and(inv, *t.guard), wlp(t.body, *t.guard)))) return "loop-terminates";
    if (!refuted(f_implies(t.init, f_not(*t.guard)))) return "loop-entered";
  }
  return std::nullopt;
}

namespace {

bool proves(const LoopTask& t, const std::vector<Formula>& parts) { return check_invariant(t, f_and(parts)).proved(); }

std::vector<Formula> parts_except(const ReferenceProblem& p, const std::optional<Formula>& part) {
  std::vector<Formula> out;
  for (const auto& f : p.invariant_parts())
    if (!part || !(f == *part)) out.push_back(f);
  return out;
}

bool guard_useful_for_inv(const ReferenceProblem& p) {
  if (!p.task.guard || !p.inv_main) return false;
  return !check_valid(f_implies(p.invariant(), wlp(p.task.body, *p.inv_main))).proved();
}

bool guard_useful_for_post(const ReferenceProblem& p) {
  if (!p.task.guard) return false;
  return !check_valid(f_implies(p.invariant(), p.task.post)).proved();
}

}  // namespace

std::set<std::string> soft_violations(const ReferenceProblem& p) {
  std::set<std::string> out;
  const auto& cs = p.constraints;
  const LoopTask& t = p.task;
  if (p.inv_lin && proves(t, parts_except(p, p.inv_lin))) out.insert("num-preserved-term-vars");
  if (p.inv_aux) {
    auto aux = conjuncts(*p.inv_aux);
    for (std::size_t i = 0; i < aux.size(); ++i) {
      ReferenceProblem q = p;
      q.inv_aux = aux.size() > 1 ? std::optional<Formula>(f_and(without(aux, i))) : std::nullopt;
      if (proves(t, q.invariant_parts())) {
        out.insert("num-inv-aux-conjuncts");
        break;
      }
    }
  }
  if (p.inv_main) {
    auto units = disjunct_units(*p.inv_main);
    if (proves(t, parts_except(p, p.inv_main))) {
      out.insert("num-inv-main-disjuncts");
    } else {
      for (std::size_t i = 0; i < units.size() && units.size() > 1; ++i) {
        ReferenceProblem q = p;
        q.inv_main = f_or(without(units, i));
        if (proves(t, q.invariant_parts())) {
          out.insert(kRedundantMain);
          break;
        }
      }
    }
    std::vector<Formula> rest = parts_except(p, p.inv_main);
    rest.push_back(t.guard_formula());
    bool implies = check_valid(f_implies(f_and(rest), wlp(t.body, *p.inv_main))).proved();
    if (implies != cs.body_implies_main_inv) out.insert("body-implies-main-inv");
    if (!units.empty() && !cs.allow_vcomp_in_inv_main && units[0].is_atom() && units[0].atom().rel() == Rel::Ge) {
      int mutables = 0;
      for (const auto& v : free_vars(units[0])) mutables += t.is_parameter(v) ? 0 : 1;
      if (mutables >= 2) out.insert("allow-vcomp-in-inv-main");
    }
  }
  if (guard_useful_for_inv(p) != cs.loop_guard_useful_for_inv && p.inv_main) out.insert("loop-guard-useful-for-inv");
  if (guard_useful_for_post(p) != cs.loop_guard_useful_for_post) out.insert("loop-guard-useful-for-post");
  bool params = std::any_of(t.vars.begin(), t.vars.end(), [](const VarId& v) { return v.kind == VarKind::Parameter; });
  if (params != cs.use_params) out.insert("use-params");
  if (cs.eq_only_for_init) {
    bool eq = has_eq_atom(t.post) || (p.inv_main && has_eq_atom(*p.inv_main)) || (p.inv_aux && has_eq_atom(*p.inv_aux));
    if (eq) out.insert("eq-only-for-init");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

constexpr std::size_t kMaxMutables = 3;
constexpr std::size_t kMaxParams = 2;
constexpr std::size_t kMaxBlock = 3;
constexpr std::size_t kProofRetries = 4;
constexpr std::size_t kInitConjuncts = 5;

const std::vector<std::string> kMutableNames{"x", "y", "z"};
const std::vector<std::string> kParamNames{"n", "m"};

struct Extra {
  Formula formula;
  bool nonneg_meta = false;  // contains placeholder `c` to be kept >= 0
};

class Gen {
 public:
  Gen(const TeacherConstraints& cs, std::uint64_t seed, StrategyContext& ctx) : cs_(cs), seed_(seed), ctx_(ctx) {}

  ReferenceProblem run() {
    refine_guard();
    refine_inv();
    refine_body();
    if (guard_ && abduct(f_implies(assumptions({inv(), *guard_}), wlp(body_, *guard_))).valid)
      ctx_.fail("loop-terminates");
    detect_after_body();
    prove("preserved", [&] {
      return f_implies(assumptions({inv(), guard_formula()}), wlp(body_, inv()));
    });
    detect_after_preserved();
    refine_post();
    prove("post", [&] { return f_implies(assumptions({inv(), neg_guard()}), post_); });
    detect_after_post();
    refine_init();
    refine_metas();
    prune();

    ReferenceProblem p;
    p.constraints = cs_;
    p.inv_lin = lin_;
    p.inv_main = main_;
    p.inv_aux = aux_;
    std::vector<Formula> init = params_;
    init.insert(init.end(), init_.begin(), init_.end());
    p.task.init = f_and(init);
    p.task.guard = guard_;
    p.task.body = body_;
    p.task.post = post_;
    p.sync();
    if (auto bad = check_hard(p)) ctx_.fail(*bad);
    p.violations = soft_violations(p);
    for (const auto& v : p.violations)
      if (!raised_.count(v)) raise(v);
    return p;
  }

 private:
  // -- choices ---------------------------------------------------------------

  std::size_t pick(const std::string& site, const std::vector<std::string>& labels) {
    if (labels.empty()) ctx_.fail("no option for " + site);
    if (labels.size() == 1) return 0;
    Rng rng(mix_seed(seed_, ++counter_));
    std::vector<std::size_t> perm(labels.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::size_t i = ctx_.choose(labels.size(), [&] {
      ChoicePoint cp;
      cp.probe = probe(site);
      for (std::size_t k : perm) cp.labels.push_back(labels[k]);
      return cp;
    });
    return perm[i];
  }

  Json probe(const std::string& site) const {
    Json p;
    p["site"] = site;
    p["constraints"] = cs_.to_json();
    Json prob;
    prob["guard"] = guard_ ? print_formula(*guard_) : "*";
    prob["inv_lin"] = lin_ ? print_formula(*lin_) : "";
    prob["inv_aux"] = aux_ ? print_formula(*aux_) : "";
    prob["inv_main"] = main_ ? print_formula(*main_) : "";
    prob["body"] = print_stmt(body_);
    prob["post"] = print_formula(post_);
    std::vector<Formula> init = params_;
    init.insert(init.end(), init_.begin(), init_.end());
    prob["init"] = print_formula(f_and(init));
    p["problem"] = prob;
    Json cs = Json::array();
    for (const auto& c : constrs_) cs.push_back(print_formula(c));
    p["constrs"] = cs;
    p["violations"] = std::vector<std::string>(raised_.begin(), raised_.end());
    return p;
  }

  void raise(const std::string& id) {
    if (raised_.insert(id).second) ctx_.event(id);
  }

  // -- variables and constants -------------------------------------------------

  struct Operand {
    std::string label;
    LinExpr expr;
    std::optional<std::string> fresh_mut, fresh_par;
    bool meta = false;
  };

  void commit(const Operand& o) {
    if (o.fresh_mut) mut_.push_back(*o.fresh_mut);
    if (o.fresh_par) par_.push_back(*o.fresh_par);
  }

  std::vector<Operand> var_operands(bool params, const std::vector<std::string>& exclude) const {
    std::vector<Operand> out;
    auto excluded = [&](const std::string& v) { return std::find(exclude.begin(), exclude.end(), v) != exclude.end(); };
    for (const auto& v : mut_)
      if (!excluded(v)) out.push_back({v, LinExpr::var(v), std::nullopt, std::nullopt});
    if (mut_.size() < kMaxMutables) {
      const std::string& v = kMutableNames[mut_.size()];
      out.push_back({v + " (new)", LinExpr::var(v), v, std::nullopt});
    }
    if (params && cs_.use_params) {
      for (const auto& v : par_)
        if (!excluded(v)) out.push_back({v, LinExpr::var(v), std::nullopt, std::nullopt});
      if (par_.size() < kMaxParams) {
        const std::string& v = kParamNames[par_.size()];
        out.push_back({v + " (new param)", LinExpr::var(v), std::nullopt, v});
      }
    }
    return out;
  }

  std::vector<Operand> const_operands(bool allow_meta, bool positive_only = false) const {
    std::vector<Operand> out;
    if (positive_only) out.push_back({"1", LinExpr::constant(1), std::nullopt, std::nullopt});
    for (auto c : cs_.available_consts)
      if (!positive_only || c > 1) out.push_back({std::to_string(c), LinExpr::constant(c), std::nullopt, std::nullopt});
    if (positive_only) return out;
    if (cs_.use_params) {
      for (const auto& v : par_) out.push_back({v, LinExpr::var(v), std::nullopt, std::nullopt});
      if (par_.size() < kMaxParams) {
        const std::string& v = kParamNames[par_.size()];
        out.push_back({v + " (new param)", LinExpr::var(v), std::nullopt, v});
      }
    }
    if (allow_meta) out.push_back({"c? (abduce later)", LinExpr(), std::nullopt, std::nullopt, true});
    return out;
  }

  LinExpr take(const std::string& site, const std::vector<Operand>& ops) {
    std::vector<std::string> labels;
    for (const auto& o : ops) labels.push_back(o.label);
    const Operand& o = ops[pick(site, labels)];
    commit(o);
    if (o.meta) return LinExpr::meta(fresh_meta());
    return o.expr;
  }

  std::string fresh_meta() { return "c" + std::to_string(++metas_); }

  Formula instantiate(const Extra& e) {
    if (!e.nonneg_meta) return e.formula;
    std::string m = fresh_meta();
    Formula f = map_atoms(e.formula, [&](const Atom& a) {
      std::int64_t k = a.expr().meta_coeff("c");
      if (k == 0) return Formula::from_atom(a);
      return make_atom(a.expr().subst_meta("c", 0) + LinExpr::meta(m, k), a.rel(), a.style());
    });
    constrs_.push_back(make_atom(LinExpr::meta(m), Rel::Ge));
    return f;
  }

  // -- formulas --------------------------------------------------------------

  Formula refine_atom(const std::string& site, bool allow_meta, const std::vector<Extra>& extras = {},
                      bool extras_first = false) {
    if (extras_first && !extras.empty() && pick(site + ":source", {"consequence", "template"}) == 0) {
      std::vector<std::string> labels;
      for (const auto& e : extras) labels.push_back(print_formula(e.formula));
      return instantiate(extras[pick(site + ":consequence", labels)]);
    }
    std::vector<std::string> labels;
    for (const auto& op : kSourceOps) labels.push_back("x? " + op + " c?");
    for (const auto& op : kSourceOps) labels.push_back("x? " + op + " y?");
    for (const auto& e : extras) labels.push_back(print_formula(e.formula));
    std::size_t t = pick(site + ":template", labels);
    if (t >= 2 * kSourceOps.size()) return instantiate(extras[t - 2 * kSourceOps.size()]);
    SourceRel rel = kSourceRels[t % kSourceOps.size()];
    LinExpr x = take(site + ":x", var_operands(false, {}));
    std::string xname = x.vars().front().name;
    LinExpr rhs = t < kSourceOps.size() ? take(site + ":c", const_operands(allow_meta))
                                        : take(site + ":y", var_operands(true, {xname}));
    Formula f = normalize_atom(x, rel, rhs);
    if (cs_.eq_only_for_init && rel == SourceRel::Eq && site != "cond") raise("eq-only-for-init");
    return f;
  }

  void refine_guard() {
    auto fresh_x = [&] {
      mut_.push_back(kMutableNames[0]);
      return LinExpr::var(kMutableNames[0]);
    };
    switch (cs_.loop_guard_template) {
      case GuardTemplate::Star:
        return;
      case GuardTemplate::VarLtConst:
      case GuardTemplate::VarLeConst: {
        LinExpr x = fresh_x();
        LinExpr c = take("guard:c", const_operands(true));
        guard_ = normalize_atom(x, cs_.loop_guard_template == GuardTemplate::VarLtConst ? SourceRel::Lt : SourceRel::Le, c);
        return;
      }
      case GuardTemplate::VarLtVar:
      case GuardTemplate::VarLeVar: {
        LinExpr x = fresh_x();
        LinExpr y = take("guard:y", var_operands(true, {"x"}));
        guard_ = normalize_atom(x, cs_.loop_guard_template == GuardTemplate::VarLtVar ? SourceRel::Lt : SourceRel::Le, y);
        return;
      }
    }
  }

  void refine_inv() {
    if (cs_.num_preserved_term_vars) {
      LinExpr term;
      std::vector<std::string> used;
      std::int64_t g = 0;
      for (int k = 0; k < *cs_.num_preserved_term_vars; ++k) {
        LinExpr v = take("inv_lin:var", var_operands(false, used));
        used.push_back(v.vars().front().name);
        std::vector<std::int64_t> coeffs;
        bool last = k + 1 == *cs_.num_preserved_term_vars;
        for (std::int64_t a = k == 0 ? 1 : -3; a <= 3; ++a)
          if (a != 0 && (!last || std::gcd(g, a) == 1)) coeffs.push_back(a);
        std::vector<std::string> labels;
        for (auto a : coeffs) labels.push_back(std::to_string(a));
        std::int64_t a = coeffs[pick("inv_lin:coeff", labels)];
        g = std::gcd(g, a);
        term = term + v.scaled(a);
      }
      lin_terms_ = term;
      lin_ = make_atom(term - LinExpr::meta(fresh_meta()), Rel::Eq);
    }
    if (cs_.num_inv_aux_conjuncts) {
      std::vector<Formula> cs;
      for (int k = 0; k < *cs_.num_inv_aux_conjuncts; ++k) cs.push_back(refine_atom("inv_aux", true));
      aux_ = f_and(cs);
    }
    if (cs_.num_inv_main_disjuncts) {
      std::vector<Extra> extras;
      if (guard_) {
        extras.push_back({*guard_, false});
        if (guard_->is_atom() && guard_->atom().rel() == Rel::Ge)
          extras.push_back({make_atom(guard_->atom().expr() + LinExpr::meta("c"), Rel::Ge), true});
      }
      std::vector<Formula> ds;
      for (int k = 0; k < *cs_.num_inv_main_disjuncts; ++k) ds.push_back(refine_atom("inv_main", true, extras));
      main_ = f_or(ds);
    }
    std::vector<Formula> facts = constrs_;
    for (const auto& part : {lin_, aux_, main_})
      if (part)
        for (const auto& c : conjuncts(*part)) facts.push_back(c);
    if (fm_refutes(facts)) ctx_.fail("inv-sat");
    if (guard_) {
      facts.push_back(*guard_);
      if (fm_refutes(facts)) ctx_.fail("loop-entered");
    }
  }

  // -- body ------------------------------------------------------------------

  // A block assigns each variable at most once. Variables of the preserved
  // term only get increments, and an unbalanced increment must be followed by
  // one that restores the term.
  Stmt refine_block(const std::string& site, std::size_t min_len) {
    std::vector<Stmt> out;
    std::vector<std::string> assigned;
    std::map<std::string, std::int64_t> delta;
    auto in_lin = [&](const std::string& v) { return lin_terms_ && lin_terms_->coeff(v) != 0; };
    for (std::size_t n = 0; n < kMaxBlock; ++n) {
      std::int64_t d = 0;
      std::vector<std::string> free_lin;
      if (lin_terms_)
        for (const auto& t : lin_terms_->vars()) {
          if (delta.count(t.name)) d += t.coeff * delta[t.name];
          if (std::find(assigned.begin(), assigned.end(), t.name) == assigned.end()) free_lin.push_back(t.name);
        }
      std::vector<std::string> labels;
      std::vector<Stmt> balancing;
      for (const auto& v : free_lin) {
        std::int64_t a = lin_terms_->coeff(v);
        if (d == 0 || d % a != 0) continue;
        balancing.push_back(Stmt::assign(v, LinExpr::var(v).plus_constant(-d / a)));
        labels.push_back(print_stmt(balancing.back()));
      }
      std::vector<std::optional<AssignTemplate>> kinds;
      std::vector<std::vector<Operand>> target_opts;
      if (balancing.empty()) {
        if (n >= min_len && d == 0) {
          labels.push_back("skip");
          kinds.push_back(std::nullopt);
          target_opts.emplace_back();
        }
        bool room = n + 2 <= kMaxBlock && free_lin.size() >= 2;
        for (const auto& [k, name] : kAssignNames) {
          if (!cs_.assignment_templates.count(k)) continue;
          bool incr = k == AssignTemplate::Incr || k == AssignTemplate::Decr;
          std::vector<std::string> exclude = assigned;
          for (const auto& v : mut_)
            if (in_lin(v) && !(incr && room)) exclude.push_back(v);
          auto ts = var_operands(false, exclude);
          if (ts.empty()) continue;
          labels.push_back(name);
          kinds.push_back(k);
          target_opts.push_back(std::move(ts));
        }
        if (labels.empty()) break;
      }
      std::size_t i = pick(site, labels);
      if (i < balancing.size()) {
        const Stmt& s = balancing[i];
        delta[s.target()] = s.value().constant_term();
        assigned.push_back(s.target());
        out.push_back(s);
        continue;
      }
      i -= balancing.size();
      if (!kinds[i]) break;
      LinExpr xe = take(site + ":target", target_opts[i]);
      std::string x = xe.vars().front().name;
      assigned.push_back(x);
      LinExpr value;
      switch (*kinds[i]) {
        case AssignTemplate::Const:
          value = take(site + ":c", const_operands(false));
          break;
        case AssignTemplate::Var:
          value = take(site + ":y", var_operands(true, {x}));
          break;
        case AssignTemplate::Incr:
        case AssignTemplate::Decr: {
          auto steps = const_operands(false, true);
          if (in_lin(x)) {
            // The step must be compensable by another variable of the term.
            std::int64_t a = lin_terms_->coeff(x);
            std::erase_if(steps, [&](const Operand& o) {
              return std::none_of(free_lin.begin(), free_lin.end(), [&](const std::string& v) {
                return v != x && (a * o.expr.constant_term()) % lin_terms_->coeff(v) == 0;
              });
            });
          }
          LinExpr step = take(site + ":d", steps);
          std::int64_t k = *kinds[i] == AssignTemplate::Incr ? step.constant_term() : -step.constant_term();
          value = xe.plus_constant(k);
          delta[x] = k;
          break;
        }
        case AssignTemplate::AddVar:
          value = xe + take(site + ":y", var_operands(true, {x}));
          break;
        case AssignTemplate::ConstMinusVar:
          value = take(site + ":c", const_operands(false)) - take(site + ":y", var_operands(true, {x}));
          break;
      }
      out.push_back(Stmt::assign(x, value));
    }
    return out.empty() ? Stmt::skip() : out.size() == 1 ? out.front() : Stmt::seq(out);
  }

  void refine_body() {
    if (!cs_.has_conditional) {
      body_ = refine_block("body", 1);
      return;
    }
    std::optional<Formula> cond;
    if (cs_.has_cond_guard) cond = refine_atom("cond", false);
    Stmt then_b = refine_block("then", 1);
    std::optional<Stmt> else_b;
    if (cs_.has_else_branch) else_b = refine_block("else", 1);
    Stmt tail = refine_block("after", 0);
    Stmt branch = Stmt::if_then(cond, then_b, else_b);
    body_ = tail.kind() == Stmt::Kind::Skip ? branch : Stmt::seq({branch, tail});
  }

  // -- obligations -------------------------------------------------------------

  Formula inv() const {
    std::vector<Formula> ps;
    for (const auto& part : {lin_, aux_, main_})
      if (part) ps.push_back(*part);
    return f_and(ps);
  }
  Formula guard_formula() const { return guard_ ? *guard_ : Formula::truth(); }
  Formula neg_guard() const { return guard_ ? f_not(*guard_) : Formula::truth(); }

  Formula assumptions(std::vector<Formula> extra) const {
    std::vector<Formula> all = constrs_;
    all.insert(all.end(), params_.begin(), params_.end());
    all.insert(all.end(), extra.begin(), extra.end());
    return f_and(all);
  }

  bool is_param_only(const Formula& f) const {
    auto vs = free_vars(f);
    if (vs.empty() || !metas_of(f).empty()) return false;
    return std::all_of(vs.begin(), vs.end(),
                       [&](const std::string& v) { return std::find(par_.begin(), par_.end(), v) != par_.end(); });
  }

  // Closes an obligation by adding metavariable constraints or parameter
  // assumptions suggested by abduction.
  void prove(const std::string& site, const std::function<Formula()>& obligation) {
    for (std::size_t attempt = 0; attempt < kProofRetries; ++attempt) {
      AbductionResult r = abduct(obligation());
      if (r.valid) return;
      std::vector<Formula> opts;
      for (const auto& a : r.suggestions) {
        Formula s = Formula::from_atom(a);
        if (!meta_only(s) && !is_param_only(s)) continue;
        std::vector<Formula> facts = constrs_;
        facts.insert(facts.end(), params_.begin(), params_.end());
        facts.push_back(s);
        if (!fm_refutes(facts)) opts.push_back(s);
      }
      std::vector<std::string> labels;
      for (const auto& o : opts) labels.push_back(print_formula(o));
      if (opts.empty()) ctx_.fail("correctness: " + site);
      const Formula& s = opts[pick(site + ":assume", labels)];
      (meta_only(s) ? constrs_ : params_).push_back(s);
    }
    if (!abduct(obligation()).valid) ctx_.fail("correctness: " + site);
  }

  void refine_post() {
    std::vector<Formula> ds;
    for (int k = 0; k < cs_.num_post_disjuncts; ++k) {
      std::vector<Extra> extras;
      if (k + 1 == cs_.num_post_disjuncts) {
        std::vector<Atom> facts;
        std::vector<Formula> known = constrs_;
        known.insert(known.end(), params_.begin(), params_.end());
        for (const auto& part : {lin_, aux_})
          if (part) known.push_back(*part);
        if (main_ && main_->is_atom()) known.push_back(*main_);
        known.push_back(neg_guard());
        for (const auto& f : known)
          for (const auto& c : conjuncts(f))
            if (c.is_atom()) facts.push_back(c.atom());
        Saturation sat = fm_saturate(facts);
        std::vector<Atom> derived;
        for (const auto& a : sat.facts)
          if (a.expr().has_vars() && !a.expr().has_metas()) derived.push_back(a.with_style({}));
        sort_candidates(derived);
        for (const auto& a : derived) {
          Formula f = Formula::from_atom(a);
          bool dup = std::any_of(extras.begin(), extras.end(), [&](const Extra& e) { return e.formula == f; });
          if (!dup && extras.size() < 6) extras.push_back({f, false});
        }
      }
      ds.push_back(refine_atom("post", true, extras, true));
    }
    post_ = f_or(ds);
  }

  void refine_init() {
    for (std::size_t n = 0; n <= kInitConjuncts; ++n) {
      Formula ob = f_implies(assumptions(init_), inv());
      AbductionResult r = abduct(ob);
      if (r.valid && !(init_.empty() && params_.empty())) return;
      if (n == kInitConjuncts) break;
      std::vector<Formula> known = constrs_;
      known.insert(known.end(), params_.begin(), params_.end());
      known.insert(known.end(), init_.begin(), init_.end());
      // Options must keep init, the invariant and the guard jointly
      // satisfiable and must not already follow from init.
      std::vector<Formula> entry = known;
      for (const auto& part : {lin_, aux_, main_})
        if (part)
          for (const auto& c : conjuncts(*part)) entry.push_back(c);
      if (guard_) entry.push_back(*guard_);
      std::vector<Formula> opts;
      auto consider = [&](const Formula& f) {
        if (std::find(opts.begin(), opts.end(), f) != opts.end()) return;
        std::vector<Formula> facts = entry;
        facts.push_back(f);
        if (fm_refutes(facts)) return;
        facts = known;
        facts.push_back(negate_unit(f));
        if (!fm_refutes(facts)) opts.push_back(f);
      };
      if (!r.valid)
        for (const auto& a : r.suggestions) consider(Formula::from_atom(a));
      for (const auto& v : mut_) {
        bool fixed = std::any_of(init_.begin(), init_.end(), [&](const Formula& f) {
          return f.is_atom() && f.atom().rel() == Rel::Eq && f.atom().expr().coeff(v) != 0;
        });
        if (fixed) continue;
        for (auto c : cs_.available_consts) consider(make_atom(LinExpr::var(v).plus_constant(-c), Rel::Eq));
      }
      std::vector<std::string> labels;
      for (const auto& o : opts) labels.push_back(print_formula(o));
      if (opts.empty()) ctx_.fail("correctness: init");
      const Formula& f = opts[pick("init", labels)];
      if (meta_only(f)) {
        constrs_.push_back(f);
      } else if (is_param_only(f)) {
        params_.push_back(f);
      } else {
        init_.push_back(f);
      }
    }
    ctx_.fail("correctness: init");
  }

  // Early detection of soft violations. Each check only fires when the final
  // check is bound to agree: later steps only add assumptions.

  bool holds(const std::vector<Formula>& hyps, const Formula& goal) const {
    return abduct(f_implies(assumptions(hyps), goal)).valid;
  }

  std::vector<Formula> parts_but(const std::optional<Formula>* skip) const {
    std::vector<Formula> out;
    for (const auto* part : {&lin_, &aux_, &main_})
      if (part != skip && *part) out.push_back(**part);
    return out;
  }

  void detect_after_body() {
    auto modified = modified_vars(body_);
    if (!cs_.use_params)
      for (const auto& v : mut_)
        if (!modified.count(v)) raise("use-params");
    if (main_ && !cs_.allow_vcomp_in_inv_main) {
      auto units = disjunct_units(*main_);
      int n = 0;
      for (const auto& v : free_vars(units.front())) n += modified.count(v) ? 1 : 0;
      if (units.front().is_atom() && units.front().atom().rel() == Rel::Ge && n >= 2) raise("allow-vcomp-in-inv-main");
    }
  }

  void detect_after_preserved() {
    if (!main_) return;
    Formula next = wlp(body_, *main_);
    auto rest = parts_but(&main_);
    rest.push_back(guard_formula());
    if (!cs_.body_implies_main_inv && holds(rest, next)) raise("body-implies-main-inv");
    if (guard_ && cs_.loop_guard_useful_for_inv && holds({inv()}, next)) raise("loop-guard-useful-for-inv");
  }

  void detect_after_post() {
    if (cs_.loop_guard_useful_for_post && holds({inv()}, post_)) raise("loop-guard-useful-for-post");
    auto removable = [&](const std::vector<Formula>& parts) {
      Formula rest = f_and(parts);
      return holds({rest, guard_formula()}, wlp(body_, rest)) && holds({rest, neg_guard()}, post_);
    };
    if (lin_ && removable(parts_but(&lin_))) raise("num-preserved-term-vars");
    if (main_ && removable(parts_but(&main_))) raise("num-inv-main-disjuncts");
    if (aux_) {
      auto aux = conjuncts(*aux_);
      for (std::size_t i = 0; i < aux.size(); ++i) {
        auto parts = parts_but(&aux_);
        auto others = without(aux, i);
        parts.insert(parts.end(), others.begin(), others.end());
        if (removable(parts)) {
          raise("num-inv-aux-conjuncts");
          break;
        }
      }
    }
  }

  // Drops init conjuncts implied by the rest and post units implying the
  // rest; both leave the formula unchanged.
  void prune() {
    for (std::size_t i = init_.size(); i-- > 0;) {
      std::vector<Formula> facts = params_;
      for (std::size_t k = 0; k < init_.size(); ++k)
        if (k != i) facts.push_back(init_[k]);
      facts.push_back(negate_unit(init_[i]));
      if (fm_refutes(facts)) init_.erase(init_.begin() + static_cast<std::ptrdiff_t>(i));
    }
    auto units = disjunct_units(post_);
    for (std::size_t i = units.size(); i-- > 0 && units.size() > 1;) {
      std::vector<Formula> facts{units[i]};
      for (std::size_t k = 0; k < units.size(); ++k)
        if (k != i) facts.push_back(negate_unit(units[k]));
      if (fm_refutes(facts)) units.erase(units.begin() + static_cast<std::ptrdiff_t>(i));
    }
    post_ = f_or(units);
  }

  std::set<std::string> live_metas() const {
    std::set<std::string> ms;
    auto add = [&](const Formula& f) {
      for (const auto& m : metas_of(f)) ms.insert(m);
    };
    if (guard_) add(*guard_);
    for (const auto& part : {lin_, aux_, main_})
      if (part) add(*part);
    add(post_);
    for (const auto& f : init_) add(f);
    for (const auto& f : constrs_) add(f);
    return ms;
  }

  void refine_metas() {
    // Latest placeholders first: they tend to carry the tightest bounds.
    auto metas = live_metas();
    std::vector<std::string> order(metas.begin(), metas.end());
    std::sort(order.begin(), order.end(), [](const std::string& a, const std::string& b) {
      return a.size() != b.size() ? a.size() > b.size() : a > b;
    });
    for (const auto& m : order) {
      MetaInterval iv = meta_bounds(m, constrs_);
      if (iv.empty) ctx_.fail("unsatisfiable constraints");
      auto inside = [&](std::int64_t v) { return (!iv.lo || v >= *iv.lo) && (!iv.hi || v <= *iv.hi); };
      std::vector<std::int64_t> vals;
      for (auto c : cs_.available_consts)
        if (inside(c)) vals.push_back(c);
      if (iv.lo) vals.push_back(*iv.lo);
      if (iv.hi) vals.push_back(*iv.hi);
      if (inside(0)) vals.push_back(0);
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      std::vector<std::string> labels;
      for (auto v : vals) labels.push_back(m + "? = " + std::to_string(v));
      std::int64_t v = vals[pick("meta", labels)];
      auto sub = [&](Formula& f) { f = subst_meta(f, m, v); };
      if (guard_) sub(*guard_);
      for (auto* part : {&lin_, &aux_, &main_})
        if (*part) sub(**part);
      sub(post_);
      for (auto& f : init_) sub(f);
      std::vector<Formula> cs;
      for (auto f : constrs_) {
        sub(f);
        if (f.is_false()) ctx_.fail("unsatisfiable constraints");
        if (!f.is_true()) cs.push_back(f);
      }
      constrs_ = std::move(cs);
    }
  }

  const TeacherConstraints& cs_;
  std::uint64_t seed_;
  StrategyContext& ctx_;
  std::uint64_t counter_ = 0;
  int metas_ = 0;
  std::set<std::string> raised_;

  std::vector<std::string> mut_, par_;
  std::optional<Formula> guard_;
  std::optional<Formula> lin_, aux_, main_;
  std::optional<LinExpr> lin_terms_;
  Stmt body_;
  Formula post_ = Formula::falsity();
  std::vector<Formula> params_, init_, constrs_;
};

}  // namespace

TeacherStrategy::TeacherStrategy(TeacherConstraints cs, std::uint64_t seed)
    : cs_(std::move(cs)), seed_(seed), run_cfg_(teacher_run_config()) {}

std::any TeacherStrategy::run(StrategyContext& ctx) const {
  Gen g(cs_, seed_, ctx);
  return g.run();
}

Json TeacherStrategy::describe_result(const std::any& result) const {
  const auto& p = std::any_cast<const ReferenceProblem&>(result);
  return to_record(p, 0);
}

// ---------------------------------------------------------------------------
// Transformations

namespace {

Formula random_atom(const ReferenceProblem& p, Rng& rng, bool allow_fresh) {
  std::vector<std::string> vars = p.task.var_names();
  if (allow_fresh || vars.empty()) vars.push_back("u");
  const std::string& v = vars[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(vars.size()) - 1))];
  const auto& consts = p.constraints.available_consts;
  std::int64_t c = consts.empty() ? 0 : consts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(consts.size()) - 1))];
  SourceRel rel = kSourceRels[rng.uniform_int(0, 5)];
  return normalize_atom(LinExpr::var(v), rel, LinExpr::constant(c));
}

Formula shuffle_formula(const Formula& f, Rng& rng) {
  if (f.kind() == Formula::Kind::And) {
    auto cs = f.children();
    for (auto& c : cs) c = shuffle_formula(c, rng);
    rng.shuffle(cs);
    return f_and(cs);
  }
  if (f.kind() == Formula::Kind::Or && !as_disequality(f)) {
    auto us = disjunct_units(f);
    for (auto& u : us) u = shuffle_formula(u, rng);
    rng.shuffle(us);
    return f_or(us);
  }
  return f;
}

Formula randomize_styles(const Formula& f, Rng& rng) {
  return map_atoms(f, [&](const Atom& a) {
    AtomStyle s{a.rel() == Rel::Ge && rng.bernoulli(0.5), rng.bernoulli(0.5)};
    return Formula::from_atom(a.with_style(s));
  });
}

Stmt shuffle_runs(const Stmt& s, Rng& rng, bool& changed) {
  switch (s.kind()) {
    case Stmt::Kind::Seq: {
      std::vector<Stmt> parts;
      std::vector<Stmt> run;
      auto flush = [&] {
        if (run.size() > 1) {
          auto before = run;
          rng.shuffle(run);
          if (!(before == run)) changed = true;
        }
        parts.insert(parts.end(), run.begin(), run.end());
        run.clear();
      };
      for (const auto& p : s.parts()) {
        if (p.kind() == Stmt::Kind::Assign) {
          run.push_back(p);
          continue;
        }
        flush();
        parts.push_back(shuffle_runs(p, rng, changed));
      }
      flush();
      return Stmt::seq(parts);
    }
    case Stmt::Kind::If: {
      std::optional<Stmt> e;
      if (s.has_else()) e = shuffle_runs(s.else_branch(), rng, changed);
      return Stmt::if_then(s.guard(), shuffle_runs(s.then_branch(), rng, changed), e);
    }
    default:
      return s;
  }
}

template <typename T>
const T& pick_one(const std::vector<T>& v, Rng& rng) {
  return v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(v.size()) - 1))];
}

}  // namespace

std::optional<ReferenceProblem> apply_transform(const std::string& name, const ReferenceProblem& p0, Rng& rng) {
  ReferenceProblem p = p0;
  LoopTask& t = p.task;
  if (name == "add-useless-loop-guard") {
    if (t.guard && (guard_useful_for_inv(p) || guard_useful_for_post(p))) return std::nullopt;
    t.guard = random_atom(p, rng, false);
  } else if (name == "add-useless-init") {
    t.init = f_and(t.init, random_atom(p, rng, true));
  } else if (name == "add-useless-post") {
    t.post = f_or(t.post, random_atom(p, rng, false));
  } else if (name == "add-useless-cond") {
    t.body = Stmt::if_then(random_atom(p, rng, false), t.body);
  } else if (name == "rearrange-commutative") {
    t.init = shuffle_formula(t.init, rng);
    t.post = shuffle_formula(t.post, rng);
    if (p.inv_aux) p.inv_aux = shuffle_formula(*p.inv_aux, rng);
    if (p.inv_main) p.inv_main = shuffle_formula(*p.inv_main, rng);
  } else if (name == "move-conditional") {
    if (t.body.kind() != Stmt::Kind::Seq) return std::nullopt;
    auto parts = t.body.parts();
    auto it = std::find_if(parts.begin(), parts.end(), [](const Stmt& s) { return s.kind() == Stmt::Kind::If; });
    if (it == parts.end() || parts.size() < 2) return std::nullopt;
    Stmt cond = *it;
    parts.erase(it);
    auto to = static_cast<std::ptrdiff_t>(rng.uniform_int(0, static_cast<std::int64_t>(parts.size())));
    parts.insert(parts.begin() + to, cond);
    t.body = Stmt::seq(parts);
  } else if (name == "shuffle-instrs") {
    bool changed = false;
    t.body = shuffle_runs(t.body, rng, changed);
    if (!changed) return std::nullopt;
  } else if (name == "randomize-comparisons") {
    t.init = randomize_styles(t.init, rng);
    t.post = randomize_styles(t.post, rng);
    if (t.guard) t.guard = randomize_styles(*t.guard, rng);
    for (auto* part : {&p.inv_lin, &p.inv_aux, &p.inv_main})
      if (*part) *part = randomize_styles(**part, rng);
  } else if (name == "move-param-assum") {
    std::vector<Formula> facts;
    for (const auto& f : p.param_facts())
      if (f.is_atom()) facts.push_back(f);
    if (facts.empty()) return std::nullopt;
    Formula a = pick_one(facts, rng);
    std::vector<Formula> rest;
    for (const auto& c : conjuncts(t.init))
      if (!(c == a)) rest.push_back(c);
    t.init = f_and(rest);
    t.post = f_or(t.post, f_not(a));
  } else if (name == "make-post-assums") {
    auto units = disjunct_units(t.post);
    if (units.size() < 2) return std::nullopt;
    t.style.post_assumes = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(units.size()) - 1));
  } else if (name == "make-init-instrs") {
    if (!has_eq_atom(t.init) || t.style.init_as_instrs) return std::nullopt;
    t.style.init_as_instrs = true;
  } else if (name == "weaken-post") {
    if (!t.post.is_atom()) return std::nullopt;
    const Atom& a = t.post.atom();
    std::vector<Formula> weaker;
    if (a.rel() == Rel::Ge) {
      weaker.push_back(make_atom(a.expr().plus_constant(1), Rel::Ge));
      weaker.push_back(negate_atom(Atom(a.expr().plus_constant(1), Rel::Eq)));
    } else {
      weaker.push_back(make_atom(a.expr(), Rel::Ge));
      weaker.push_back(make_atom(-a.expr(), Rel::Ge));
    }
    t.post = pick_one(weaker, rng);
  } else {
    throw std::invalid_argument("unknown transformation: " + name);
  }
  p.sync();
  return p;
}

ReferenceProblem transform(const ReferenceProblem& p0, Rng& rng, const TeacherConfig& cfg) {
  ReferenceProblem p = p0;
  std::size_t soft = soft_violations(p).size();
  for (const auto& name : kTransformNames) {
    if (!rng.bernoulli(cfg.transform_p(name))) continue;
    auto q = apply_transform(name, p, rng);
    if (!q || check_hard(*q)) continue;
    auto s = soft_violations(*q);
    if (s.size() > soft) continue;
    p = std::move(*q);
    p.transforms.push_back(name);
    p.violations = s;
    soft = s.size();
  }
  return p;
}

ReferenceProblem hide_invariants(const ReferenceProblem& p) {
  ReferenceProblem q = p;
  q.inv_lin.reset();
  q.inv_main.reset();
  q.inv_aux.reset();
  q.task.invariants.clear();
  return q;
}

std::optional<ReferenceProblem> teach(std::uint64_t seed, const TeacherConfig& cfg, const TeachOptions& opts) {
  UniformEvaluator eval;
  for (std::size_t a = 0; a < opts.max_attempts; ++a) {
    std::uint64_t s = mix_seed(seed, a);
    Rng rng(s);
    TeacherConstraints cs = sample_constraints(rng, cfg);
    auto strat = std::make_shared<TeacherStrategy>(cs, s);
    ExecutionState start = ExecutionState::start(strat);
    ExecutionState end = opts.greedy ? greedy_rollout(start, eval)
                                     : solve_with_search(start, eval, {opts.sims, opts.step_budget, std::nullopt, {}}).final;
    if (end.status() != RunStatus::Succeeded) continue;
    ReferenceProblem p = std::any_cast<const ReferenceProblem&>(end.result());
    p.seed = seed;
    if (opts.transform) p = transform(p, rng, cfg);
    return p;
  }
  return std::nullopt;
}

Json to_record(const ReferenceProblem& p0, std::size_t id, bool export_solver) {
  ReferenceProblem p = export_solver ? hide_invariants(p0) : p0;
  auto opt = [](const std::optional<Formula>& f) { return f ? Json(print_formula(*f)) : Json(nullptr); };
  Json j;
  j["id"] = id;
  j["task_text"] = print_task(p.task);
  j["inv_lin"] = opt(p.inv_lin);
  j["inv_main"] = opt(p.inv_main);
  j["inv_aux"] = opt(p.inv_aux);
  j["constraints"] = p.constraints.to_json();
  j["violations"] = std::vector<std::string>(p.violations.begin(), p.violations.end());
  j["seed"] = p.seed;
  return j;
}

ReferenceProblem from_record(const Json& j) {
  ReferenceProblem p;
  p.task = parse_task(j.at("task_text").get<std::string>());
  auto opt = [&](const char* k) -> std::optional<Formula> {
    if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
    return parse_formula(j.at(k).get<std::string>());
  };
  p.inv_lin = opt("inv_lin");
  p.inv_main = opt("inv_main");
  p.inv_aux = opt("inv_aux");
  p.constraints = TeacherConstraints::from_json(j.at("constraints"));
  for (const auto& v : j.at("violations")) p.violations.insert(v.get<std::string>());
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

}  // namespace invsynth
