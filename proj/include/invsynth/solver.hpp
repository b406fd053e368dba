#pragma once

// Invariant synthesis strategy: abduce missing invariants, optionally
// strengthen them, conjecture templates with unknown constants and refine
// those constants lazily.

#include <string>
#include <vector>

#include "invsynth/ast.hpp"
#include "invsynth/strategy.hpp"

namespace invsynth {

inline const std::string kAbductionEvent = "ABDUCTION";
inline const std::string kConjecturingEvent = "CONJECTURING";

RunConfig solver_run_config();

/// Reward of the simple size-penalized strategy: max(-1, -0.2 * conjuncts).
double size_penalty_reward(std::size_t num_conjuncts);

/// Template atom; the metavariable placeholder (if any) is named `c`.
struct Conjecture {
  enum class Kind { Preserved, GuardRelaxation, Init };
  Kind kind;
  Formula formula;
  bool has_meta = false;
  bool nonneg = false;  // placeholder constrained to c? >= 0
};

/// Linear combinations over modified variables (at most `max_vars` of them,
/// coefficients in [-max_coeff, max_coeff], gcd 1, first coefficient
/// positive) left unchanged by every path through `body`.
std::vector<LinExpr> preserved_terms(const Stmt& body, const std::vector<std::string>& vars, int max_vars = 3,
                                     int max_coeff = 3);

std::vector<Conjecture> conjectures(const LoopTask& t);

struct StrengthenOption {
  Formula formula;
  bool has_meta = false;  // weakened with the placeholder `c`, to be kept >= 0
};

/// Identity first, then `A > B` / `A < B` for each disequality disjunct, then
/// `A + c >= B` for each metavariable-free inequality disjunct.
std::vector<StrengthenOption> strengthen_options(const Formula& f);

/// Bound type of `meta` in `f`: upper when it only adds to the larger side of
/// inequalities, lower when it only adds to the smaller side, free otherwise.
BoundType bound_type_of(const Formula& f, const std::string& meta);

struct SolverConfig {
  std::size_t max_pending = 8;       // nesting of invariants being proved
  std::size_t max_invariants = 10;   // proved or pending invariants per run
  std::size_t max_retries = 8;       // re-abductions per obligation
  std::size_t max_disjuncts = 3;
};

struct SolverOutcome {
  std::vector<Formula> conjuncts;
  std::size_t abduced_disjuncts = 0;
  std::size_t conjectured_disjuncts = 0;
};

class SolverStrategy : public Strategy {
 public:
  explicit SolverStrategy(LoopTask task, SolverConfig cfg = {});

  std::string name() const override { return "solver"; }
  const RunConfig& config() const override { return run_cfg_; }
  std::any run(StrategyContext& ctx) const override;
  Json describe_result(const std::any& result) const override;

  const LoopTask& task() const { return task_; }
  const std::vector<Conjecture>& conjecture_pool() const { return conjectures_; }

 private:
  LoopTask task_;
  SolverConfig cfg_;
  RunConfig run_cfg_;
  std::vector<Conjecture> conjectures_;
  Json task_json_;
};

}  // namespace invsynth
