#pragma once

// Weakest liberal preconditions, verification conditions, a validity checker
// and concrete bounded execution.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "invsynth/ast.hpp"

namespace invsynth {

Formula wlp(const Stmt& s, const Formula& post);

/// init -> inv
Formula init_vc(const LoopTask& t, const Formula& inv);
/// inv && guard -> wlp(body, inv)
Formula preservation_vc(const LoopTask& t, const Formula& inv);
/// inv && !guard -> post
Formula post_vc(const LoopTask& t, const Formula& inv);

enum class Verdict { Proved, Refuted, Unknown };

struct ValidityResult {
  Verdict verdict = Verdict::Unknown;
  std::optional<Env> counterexample;

  bool proved() const { return verdict == Verdict::Proved; }
};

/// Proofs come from Fourier-Motzkin refutation of each negated CNF clause;
/// counterexamples from a bounded search. Throws std::invalid_argument when
/// `f` contains metavariables. Results are memoized per thread.
ValidityResult check_valid(const Formula& f);

enum class SatStatus { Sat, Unsat, Unknown };

struct SatResult {
  SatStatus status = SatStatus::Unknown;
  std::optional<Env> model;
};

SatResult check_sat(const Formula& f);

struct InvariantCheck {
  ValidityResult init, preserved, post;

  bool proved() const { return init.proved() && preserved.proved() && post.proved(); }
};

InvariantCheck check_invariant(const LoopTask& t, const Formula& inv);

/// Finds integer points of the conjunction `ge >= 0` with every `ne != 0`,
/// searching [-bound, bound] by interval propagation and bisection with
/// values near zero first. Stops after `limit` models or `node_limit` nodes.
struct BoxSearch {
  std::int64_t bound = std::int64_t{1} << 20;
  std::size_t node_limit = 4000;
};
std::vector<Env> box_models(const std::vector<LinExpr>& ge, const std::vector<LinExpr>& ne,
                            const std::vector<std::string>& vars, std::size_t limit, const BoxSearch& opts = {});

/// Up to `limit` models of `f` over `vars`, all within [-bound, bound].
std::vector<Env> enumerate_models(const Formula& f, const std::vector<std::string>& vars, std::int64_t bound,
                                  std::size_t limit);

/// Source of choices for `*` guards.
using StarStream = std::function<bool()>;

/// Executes a loop-free statement; nullopt when an `assume` fails.
std::optional<Env> exec_bounded(const Stmt& s, Env env, const StarStream& star);

struct BoundedOptions {
  std::int64_t init_bound = 6;
  std::size_t max_inits = 60;
  std::size_t max_iterations = 50;
  std::uint64_t seed = 1;
};

/// Searches for a run that reaches the loop exit in a state violating the
/// postcondition, under several choice streams. Returns the initial state of
/// the run found.
std::optional<Env> find_bounded_violation(const LoopTask& t, const BoundedOptions& opts = {});

/// Checks that `inv` holds in every state reached by the same bounded runs.
std::optional<Env> find_bounded_inv_violation(const LoopTask& t, const Formula& inv,
                                              const BoundedOptions& opts = {});

}  // namespace invsynth
