#pragma once

// Problem generator: samples a constraint record, refines a loop template
// into a problem with a reference invariant, then applies random
// validity-preserving transformations.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "invsynth/ast.hpp"
#include "invsynth/mcts.hpp"
#include "invsynth/numeric.hpp"
#include "invsynth/strategy.hpp"

namespace invsynth {

enum class GuardTemplate { VarLtConst, VarLeConst, VarLtVar, VarLeVar, Star };
enum class AssignTemplate { Const, Var, Incr, Decr, AddVar, ConstMinusVar };

std::string to_string(GuardTemplate g);
std::string to_string(AssignTemplate a);
GuardTemplate guard_template_from(const std::string& s);
AssignTemplate assign_template_from(const std::string& s);

struct TeacherConstraints {
  std::optional<int> num_preserved_term_vars;  // 2 or 3
  std::optional<int> num_inv_main_disjuncts;   // 1 or 2
  std::optional<int> num_inv_aux_conjuncts;    // 1 or 2
  int num_post_disjuncts = 1;
  bool has_conditional = false;
  bool has_else_branch = false;
  bool has_cond_guard = false;
  bool body_implies_main_inv = false;
  bool loop_guard_useful_for_inv = false;
  bool loop_guard_useful_for_post = false;
  bool use_params = false;
  bool eq_only_for_init = false;
  bool allow_vcomp_in_inv_main = false;
  GuardTemplate loop_guard_template = GuardTemplate::VarLtConst;
  std::set<AssignTemplate> assignment_templates;
  std::vector<std::int64_t> available_consts;

  Json to_json() const;
  static TeacherConstraints from_json(const Json& j);
  friend bool operator==(const TeacherConstraints&, const TeacherConstraints&) = default;
};

/// Marginals, the inv_main correlation, constant range and transformation
/// probabilities. Defaults mirror config/teacher.json.
struct TeacherConfig {
  std::map<std::string, double> preserved_term_vars{{"none", 0.5}, {"2", 0.35}, {"3", 0.15}};
  std::map<std::string, double> inv_main_disjuncts{{"none", 0.15}, {"1", 0.55}, {"2", 0.3}};
  /// Used instead of the above when no preserved term is requested.
  std::map<std::string, double> inv_main_disjuncts_without_lin{{"none", 0.1}, {"1", 0.45}, {"2", 0.45}};
  std::map<std::string, double> inv_aux_conjuncts{{"none", 0.6}, {"1", 0.3}, {"2", 0.1}};
  std::map<std::string, double> post_disjuncts{{"1", 0.75}, {"2", 0.25}};
  std::map<std::string, double> flags{{"has_conditional", 0.35},
                                      {"has_else_branch", 0.5},
                                      {"has_cond_guard", 0.5},
                                      {"body_implies_main_inv", 0.2},
                                      {"loop_guard_useful_for_inv", 0.35},
                                      {"loop_guard_useful_for_post", 0.5},
                                      {"use_params", 0.35},
                                      {"eq_only_for_init", 0.5},
                                      {"allow_vcomp_in_inv_main", 0.5}};
  std::map<std::string, double> guard_templates{
      {"x<c", 0.3}, {"x<=c", 0.15}, {"x<y", 0.15}, {"x<=y", 0.1}, {"*", 0.3}};
  /// Independent inclusion probability of each assignment template.
  std::map<std::string, double> assignment_templates{{"x=c", 0.3},   {"x=y", 0.3},   {"x=x+d", 0.85},
                                                     {"x=x-d", 0.4}, {"x=x+y", 0.35}, {"x=c-y", 0.2}};
  std::int64_t const_min = -64, const_max = 63;
  std::size_t num_consts = 6;
  std::map<std::string, double> transform_probability;

  static TeacherConfig from_json(const Json& j);
  Json to_json() const;
  double transform_p(const std::string& name) const;
};

/// Name of the rejection rule matched by `cs`, if any.
std::optional<std::string> rejection_reason(const TeacherConstraints& cs);

/// Samples fields independently (inv_main depends on whether a preserved term
/// is requested), normalizes fields made irrelevant by `has_conditional`, and
/// resamples rejected records.
TeacherConstraints sample_constraints(Rng& rng, const TeacherConfig& cfg = {});

/// Soft events in the order of the constraint table, plus the removable
/// inv_main disjunct event.
RunConfig teacher_run_config();

inline const std::vector<std::string> kTransformNames{
    "add-useless-loop-guard", "add-useless-init",      "add-useless-post",  "add-useless-cond",
    "rearrange-commutative",  "move-conditional",      "shuffle-instrs",    "randomize-comparisons",
    "move-param-assum",       "make-post-assums",      "make-init-instrs",  "weaken-post"};

struct ReferenceProblem {
  LoopTask task;  // task.invariants: the reference invariant conjuncts
  std::optional<Formula> inv_lin, inv_main, inv_aux;
  TeacherConstraints constraints;
  std::set<std::string> violations;
  std::uint64_t seed = 0;
  std::vector<std::string> transforms;  // transformations that fired

  /// Conjuncts of init over parameters only; they hold throughout the loop
  /// and are part of the reference invariant.
  std::vector<Formula> param_facts() const;
  std::vector<Formula> invariant_parts() const;
  Formula invariant() const { return f_and(invariant_parts()); }
  /// Recomputes variable kinds and the invariant annotations of `task`.
  void sync();
};

/// First violated hard constraint, if any. Unknown verdicts count as
/// violations.
std::optional<std::string> check_hard(const ReferenceProblem& p);
std::set<std::string> soft_violations(const ReferenceProblem& p);

/// Disjunctions and conjunctions that are valid, unsatisfiable or can be
/// written with fewer units.
bool is_redundant_disjunction(const Formula& f);
bool is_redundant_conjunction(const Formula& f);

class TeacherStrategy : public Strategy {
 public:
  TeacherStrategy(TeacherConstraints cs, std::uint64_t seed);

  std::string name() const override { return "teacher"; }
  const RunConfig& config() const override { return run_cfg_; }
  std::any run(StrategyContext& ctx) const override;
  Json describe_result(const std::any& result) const override;

  const TeacherConstraints& constraints() const { return cs_; }

 private:
  TeacherConstraints cs_;
  std::uint64_t seed_;
  RunConfig run_cfg_;
};

/// Applies each transformation in table order with its probability; an
/// application is cancelled when it breaks a hard constraint or adds soft
/// violations.
ReferenceProblem transform(const ReferenceProblem& p, Rng& rng, const TeacherConfig& cfg = {});
/// Single transformation by name (no probability, no cancellation check);
/// nullopt when it does not apply.
std::optional<ReferenceProblem> apply_transform(const std::string& name, const ReferenceProblem& p, Rng& rng);

/// Copy with invariants removed, as given to a solver.
ReferenceProblem hide_invariants(const ReferenceProblem& p);

struct TeachOptions {
  std::size_t sims = 16;
  bool greedy = false;
  bool transform = true;
  std::size_t max_attempts = 30;
  std::size_t step_budget = 200;
};

/// Samples constraints and generates until a problem is produced (at most
/// `max_attempts` constraint records).
std::optional<ReferenceProblem> teach(std::uint64_t seed, const TeacherConfig& cfg = {}, const TeachOptions& opts = {});

Json to_record(const ReferenceProblem& p, std::size_t id, bool export_solver = false);
ReferenceProblem from_record(const Json& j);

}  // namespace invsynth
