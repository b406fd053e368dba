#pragma once

// Small explicit decision trees exposed as strategies, with an exact
// value-iteration oracle.

#include <memory>
#include <vector>

#include "invsynth/numeric.hpp"
#include "invsynth/strategy.hpp"

namespace toy {

struct Node {
  bool leaf = false;
  bool success = false;
  std::vector<int> children;
  std::vector<int> edge_events;  // "cost" events raised when taking each edge
};

class TreeStrategy : public invsynth::Strategy {
 public:
  explicit TreeStrategy(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
    cfg_.events = {{"cost", -0.1, 10}, {"bonus", 0.0, 1}};
    cfg_.r_min = -0.5;
  }

  std::string name() const override { return "toy"; }
  const invsynth::RunConfig& config() const override { return cfg_; }

  std::any run(invsynth::StrategyContext& ctx) const override {
    int cur = 0;
    while (!nodes_[cur].leaf) {
      const Node& n = nodes_[cur];
      std::size_t i = ctx.choose(n.children.size(), [&] {
        invsynth::ChoicePoint cp;
        cp.probe["site"] = "node";
        cp.probe["node"] = cur;
        for (int c : n.children) cp.labels.push_back("to " + std::to_string(c));
        return cp;
      });
      for (int e = 0; e < n.edge_events[i]; ++e) ctx.event("cost");
      cur = n.children[i];
    }
    if (!nodes_[cur].success) ctx.fail("dead end");
    return cur;
  }

  invsynth::Json describe_result(const std::any& r) const override {
    return invsynth::Json{{"leaf", std::any_cast<int>(r)}};
  }

  const std::vector<Node>& nodes() const { return nodes_; }

  /// Optimal reward from node `i` having already accumulated `events`.
  double value(int i, int events = 0) const {
    const Node& n = nodes_[i];
    if (n.leaf) {
      invsynth::EventCounts c;
      if (events > 0) c["cost"] = events;
      return invsynth::final_reward(c, cfg_, n.success);
    }
    double best = -2;
    for (std::size_t k = 0; k < n.children.size(); ++k)
      best = std::max(best, value(n.children[k], events + n.edge_events[k]));
    return best;
  }

  std::vector<std::size_t> optimal_root_actions() const {
    std::vector<std::size_t> out;
    double v = value(0);
    const Node& r = nodes_[0];
    for (std::size_t k = 0; k < r.children.size(); ++k)
      if (std::abs(value(r.children[k], r.edge_events[k]) - v) < 1e-9) out.push_back(k);
    return out;
  }

 private:
  std::vector<Node> nodes_;
  invsynth::RunConfig cfg_;
};

/// Random tree with at most `max_states` nodes; the root always has at least
/// two children.
inline std::shared_ptr<TreeStrategy> random_tree(std::uint64_t seed, int max_states = 200) {
  invsynth::Rng rng(seed);
  std::vector<Node> nodes(1);
  std::vector<std::pair<int, int>> frontier{{0, 0}};  // (node, depth)
  std::size_t head = 0;
  while (head < frontier.size()) {
    auto [id, depth] = frontier[head++];
    int remaining = max_states - static_cast<int>(nodes.size());
    bool make_leaf = depth > 0 && (depth >= 6 || remaining < 3 || rng.bernoulli(0.3));
    if (make_leaf) {
      nodes[id].leaf = true;
      nodes[id].success = rng.bernoulli(0.4);
      continue;
    }
    int k = static_cast<int>(rng.uniform_int(depth == 0 ? 2 : 1, 3));
    k = std::min(k, remaining);
    for (int c = 0; c < k; ++c) {
      int cid = static_cast<int>(nodes.size());
      nodes.emplace_back();
      nodes[id].children.push_back(cid);
      nodes[id].edge_events.push_back(static_cast<int>(rng.uniform_int(0, 3)));
      frontier.push_back({cid, depth + 1});
    }
  }
  return std::make_shared<TreeStrategy>(std::move(nodes));
}

}  // namespace toy
