#pragma once

// PUCT Monte-Carlo tree search over strategy states, with a pluggable
// evaluator, plus the greedy no-search policy.

#include <chrono>
#include <memory>
#include <optional>
#include <vector>

#include "invsynth/strategy.hpp"

namespace invsynth {

struct Evaluation {
  std::vector<double> prior;
  ValuePrediction value;
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual Evaluation evaluate(const ExecutionState& s) const = 0;
  /// Name reported to clients, e.g. "uniform".
  virtual std::string heuristic() const = 0;
};

/// Uniform prior; predicts success (p2 = 1) with no further events.
class UniformEvaluator : public Evaluator {
 public:
  Evaluation evaluate(const ExecutionState& s) const override;
  std::string heuristic() const override { return "uniform"; }
};

struct MctsConfig {
  double c_puct = 1.5;
  std::uint64_t seed = 0;
};

struct ChoiceStats {
  int visits = 0;
  double q = 0;
  double prior = 0;
};

class SearchTree {
 public:
  SearchTree(ExecutionState root, const Evaluator& eval, MctsConfig cfg = {});
  ~SearchTree();
  SearchTree(SearchTree&&) noexcept;
  SearchTree& operator=(SearchTree&&) noexcept;

  /// Runs simulations until `sims` more are done or `deadline` passes.
  void simulate(std::size_t sims, std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt);
  const ExecutionState& root_state() const;
  int root_visits() const;
  std::vector<ChoiceStats> stats() const;
  /// Most visited child; ties go to the lower index.
  std::size_t best() const;
  /// Makes child `i` the new root, keeping its subtree.
  void commit(std::size_t i);
  /// Copy of child `i` and its statistics as a new tree; this tree is unchanged.
  SearchTree subtree(std::size_t i) const;
  /// Value estimate of the root state as computed at expansion.
  double root_value() const;

 private:
  struct Node;
  static std::unique_ptr<Node> copy(const Node& n);
  SearchTree(std::unique_ptr<Node> root, const Evaluator* eval, MctsConfig cfg);
  double evaluate_leaf(Node& n);
  void expand(Node& n);
  std::unique_ptr<Node> root_;
  const Evaluator* eval_;
  MctsConfig cfg_;
};

struct Decision {
  std::size_t choice = 0;
  std::vector<ChoiceStats> stats;
};

Decision mcts_decide(const ExecutionState& s, std::size_t sims, const Evaluator& eval, MctsConfig cfg = {});

struct SearchOutcome {
  ExecutionState final;
  std::vector<std::size_t> trace;
  std::vector<std::vector<ChoiceStats>> step_stats;
  bool budget_exhausted = false;
  bool timed_out = false;
  std::size_t steps = 0;
};

struct SearchOptions {
  std::size_t sims = 400;
  std::size_t step_budget = 64;
  std::optional<double> timeout_seconds;
  MctsConfig mcts;
};

SearchOutcome solve_with_search(const ExecutionState& s, const Evaluator& eval, const SearchOptions& opts = {});

/// Follows the highest-prior choice (lowest index on ties) to a terminal state.
ExecutionState greedy_rollout(const ExecutionState& s, const Evaluator& eval);

}  // namespace invsynth
