#include "invsynth/strategy.hpp"

#include <cmath>
#include <stdexcept>

#include "invsynth/numeric.hpp"

namespace invsynth {

namespace {

// Thrown through strategy code when the trace runs out; deliberately not a
// std::exception so that strategies cannot swallow it.
struct Suspend {
  ChoicePoint cp;
};

constexpr double kTol = 1e-6;

}  // namespace

const EventSpec* RunConfig::find(const std::string& id) const {
  for (const auto& e : events)
    if (e.id == id) return &e;
  return nullptr;
}

double final_reward(const EventCounts& counts, const RunConfig& cfg, bool success) {
  if (!success) return -1.0;
  double r = 1.0;
  for (const auto& [id, n] : counts) {
    const EventSpec* e = cfg.find(id);
    if (!e) throw std::invalid_argument("unknown event " + id);
    r += e->reward * std::min(n, e->max_count);
  }
  return std::max(r, cfg.r_min);
}

double combine_value(const ValuePrediction& pred, const EventCounts& counts, const RunConfig& cfg) {
  auto bad = [](const std::string& m) { throw std::invalid_argument("malformed prediction: " + m); };
  for (double p : {pred.p0, pred.p1, pred.p2})
    if (p < -kTol || p > 1 + kTol) bad("probability out of range");
  if (std::abs(pred.p0 + pred.p1 + pred.p2 - 1) > kTol) bad("p0 + p1 + p2 != 1");
  for (const auto& [id, dist] : pred.events)
    if (!cfg.find(id)) bad("unknown event " + id);
  double events = 0;
  for (const auto& spec : cfg.events) {
    std::vector<double> p(static_cast<std::size_t>(spec.max_count) + 1, 0.0);
    auto it = pred.events.find(spec.id);
    if (it == pred.events.end()) {
      p[0] = 1;
    } else {
      if (it->second.size() != p.size()) bad("wrong support for " + spec.id);
      double sum = 0;
      for (double x : it->second) {
        if (x < -kTol || x > 1 + kTol) bad("probability out of range");
        sum += x;
      }
      if (std::abs(sum - 1) > kTol) bad("distribution for " + spec.id + " does not sum to 1");
      p = it->second;
    }
    int n = 0;
    if (auto c = counts.find(spec.id); c != counts.end()) n = c->second;
    double mass = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (static_cast<int>(i) < n) p[i] = 0;
      mass += p[i];
    }
    if (mass <= 0) {
      std::fill(p.begin(), p.end(), 0.0);
      p[static_cast<std::size_t>(std::min(n, spec.max_count))] = 1;
      mass = 1;
    }
    for (std::size_t i = 0; i < p.size(); ++i) events += p[i] / mass * static_cast<double>(i) * spec.reward;
  }
  return -pred.p0 + pred.p1 * cfg.r_min + pred.p2 * events;
}

std::size_t StrategyContext::choose(std::size_t n, const std::function<ChoicePoint()>& describe) {
  if (n == 0) fail("no choices");
  if (pos_ < trace_.size()) {
    std::size_t i = trace_[pos_++];
    if (i >= n) throw std::out_of_range("trace index out of range");
    return i;
  }
  if (pos_ >= kMaxRunDepth) fail("run depth limit");
  ChoicePoint cp = describe();
  if (cp.labels.size() != n) throw std::logic_error("choice point label count mismatch");
  cp.probe["strategy"] = strategy_.name();
  throw Suspend{std::move(cp)};
}

void StrategyContext::event(const std::string& id) {
  if (!strategy_.config().find(id)) throw std::invalid_argument("unknown event " + id);
  ++counts_[id];
}

void StrategyContext::fail(const std::string& reason) { throw StrategyFailure(reason); }

ExecutionState ExecutionState::start(std::shared_ptr<const Strategy> s) { return replay(std::move(s), {}); }

ExecutionState ExecutionState::replay(std::shared_ptr<const Strategy> s, const std::vector<std::size_t>& trace) {
  ExecutionState st;
  st.strategy_ = std::move(s);
  st.trace_ = trace;
  StrategyContext ctx(*st.strategy_, st.trace_);
  try {
    st.result_ = st.strategy_->run(ctx);
    st.counts_ = ctx.counts_;
    if (ctx.pos_ != trace.size()) throw std::out_of_range("trace continues past the end of the run");
    st.status_ = RunStatus::Succeeded;
    st.reward_ = final_reward(st.counts_, st.strategy_->config(), true);
  } catch (Suspend& s) {
    st.counts_ = ctx.counts_;
    if (ctx.pos_ != trace.size()) throw std::logic_error("suspended before the end of the trace");
    st.status_ = RunStatus::Running;
    st.cp_ = std::move(s.cp);
  } catch (const std::out_of_range&) {
    throw;
  } catch (const std::logic_error&) {
    throw;
  } catch (const std::exception& e) {
    // StrategyFailure, OverflowError, refinement errors and the like.
    st.counts_ = ctx.counts_;
    st.status_ = RunStatus::Failed;
    st.reward_ = -1.0;
    st.failure_ = e.what();
  }
  return st;
}

ExecutionState ExecutionState::resume(std::size_t choice) const {
  if (status_ != RunStatus::Running) throw std::logic_error("resume on a terminal state");
  if (choice >= cp_->labels.size()) throw std::out_of_range("choice index out of range");
  std::vector<std::size_t> t = trace_;
  t.push_back(choice);
  return replay(strategy_, t);
}

const ChoicePoint& ExecutionState::choice_point() const {
  if (!cp_) throw std::logic_error("terminal state has no choice point");
  return *cp_;
}

ExecutionState ExecutionState::abandoned(const std::string& reason) const {
  ExecutionState st = *this;
  st.status_ = RunStatus::Failed;
  st.cp_.reset();
  st.reward_ = -1.0;
  st.failure_ = reason;
  return st;
}

}  // namespace invsynth
