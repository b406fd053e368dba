#pragma once

// Nondeterministic strategies reified as resumable states. A strategy is an
// ordinary function that calls `choose`, `event` and `fail` on a context; a
// state is the trace of choices made so far, and resuming re-runs the
// strategy along the trace until the next choice point.

#include <any>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace invsynth {

using Json = nlohmann::ordered_json;

struct EventSpec {
  std::string id;
  double reward = 0;
  int max_count = 1;
};

struct RunConfig {
  std::vector<EventSpec> events;
  double r_min = 0;

  const EventSpec* find(const std::string& id) const;
};

using EventCounts = std::map<std::string, int>;

/// max(1 + sum_e r_e min(n_e, m_e), r_min) on success, exactly -1 on failure.
double final_reward(const EventCounts& counts, const RunConfig& cfg, bool success);

struct ValuePrediction {
  double p0 = 0, p1 = 0, p2 = 1;
  /// Distribution of min(n_e, m_e) over 0..m_e; events not listed count as
  /// concentrated at 0.
  std::map<std::string, std::vector<double>> events;
};

/// -p0 + p1 r_min + p2 sum_e sum_i phat_e^i i r_e, where phat_e is p_e
/// restricted to i >= n_e and renormalized (all mass at min(n_e, m_e) when
/// nothing is left). Throws std::invalid_argument on malformed predictions.
double combine_value(const ValuePrediction& pred, const EventCounts& counts, const RunConfig& cfg);

struct ChoicePoint {
  Json probe;  // {"strategy", "site", ...context}
  std::vector<std::string> labels;
};

class StrategyContext;

class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual std::string name() const = 0;
  virtual const RunConfig& config() const = 0;
  /// Runs to completion under `ctx`; the return value is the success result.
  virtual std::any run(StrategyContext& ctx) const = 0;
  virtual Json describe_result(const std::any& result) const = 0;
};

class StrategyFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StrategyContext {
 public:
  /// Picks one of `n` options. `describe` builds the choice point and is only
  /// called when the run suspends here. n == 0 fails the run.
  std::size_t choose(std::size_t n, const std::function<ChoicePoint()>& describe);
  void event(const std::string& id);
  [[noreturn]] void fail(const std::string& reason);
  void require(bool cond, const std::string& reason) {
    if (!cond) fail(reason);
  }
  const EventCounts& event_counts() const { return counts_; }
  /// Number of choices consumed so far.
  std::size_t depth() const { return pos_; }

 private:
  friend class ExecutionState;
  StrategyContext(const Strategy& s, const std::vector<std::size_t>& trace) : strategy_(s), trace_(trace) {}

  const Strategy& strategy_;
  const std::vector<std::size_t>& trace_;
  std::size_t pos_ = 0;
  EventCounts counts_;
};

enum class RunStatus { Running, Succeeded, Failed };

class ExecutionState {
 public:
  static ExecutionState start(std::shared_ptr<const Strategy> s);
  /// Re-runs `s` along `trace`; indices must be valid at each step.
  static ExecutionState replay(std::shared_ptr<const Strategy> s, const std::vector<std::size_t>& trace);

  /// Throws std::out_of_range for an invalid index and std::logic_error when
  /// the state is terminal.
  ExecutionState resume(std::size_t choice) const;

  RunStatus status() const { return status_; }
  bool running() const { return status_ == RunStatus::Running; }
  const ChoicePoint& choice_point() const;
  std::size_t num_choices() const { return cp_ ? cp_->labels.size() : 0; }
  const EventCounts& event_counts() const { return counts_; }
  const std::vector<std::size_t>& trace() const { return trace_; }
  /// Final reward when terminal.
  double reward() const { return reward_; }
  const std::any& result() const { return result_; }
  const std::string& failure_reason() const { return failure_; }
  const std::shared_ptr<const Strategy>& strategy() const { return strategy_; }

  /// Failing a run from outside (step budget, timeout).
  ExecutionState abandoned(const std::string& reason) const;

 private:
  std::shared_ptr<const Strategy> strategy_;
  std::vector<std::size_t> trace_;
  RunStatus status_ = RunStatus::Running;
  std::optional<ChoicePoint> cp_;
  EventCounts counts_;
  double reward_ = 0;
  std::any result_;
  std::string failure_;
};

/// Upper limit on the number of choices in one run; deeper runs fail.
inline constexpr std::size_t kMaxRunDepth = 400;

}  // namespace invsynth
