#include "invsynth/mcts.hpp"

#include <cmath>
#include <stdexcept>

namespace invsynth {

Evaluation UniformEvaluator::evaluate(const ExecutionState& s) const {
  Evaluation ev;
  std::size_t n = s.num_choices();
  if (n > 0) ev.prior.assign(n, 1.0 / static_cast<double>(n));
  return ev;
}

struct SearchTree::Node {
  ExecutionState state;
  int visits = 0;
  double value_sum = 0;
  double value = 0;  // evaluation at expansion
  bool expanded = false;
  std::vector<double> prior;
  std::vector<std::unique_ptr<Node>> children;

  explicit Node(ExecutionState s) : state(std::move(s)) {}
};

SearchTree::SearchTree(ExecutionState root, const Evaluator& eval, MctsConfig cfg)
    : root_(std::make_unique<Node>(std::move(root))), eval_(&eval), cfg_(cfg) {}
SearchTree::SearchTree(std::unique_ptr<Node> root, const Evaluator* eval, MctsConfig cfg)
    : root_(std::move(root)), eval_(eval), cfg_(cfg) {}
SearchTree::~SearchTree() = default;
SearchTree::SearchTree(SearchTree&&) noexcept = default;
SearchTree& SearchTree::operator=(SearchTree&&) noexcept = default;

void SearchTree::expand(Node& n) {
  n.expanded = true;
  if (!n.state.running()) {
    n.value = n.state.reward();
    return;
  }
  Evaluation ev = eval_->evaluate(n.state);
  std::size_t k = n.state.num_choices();
  if (ev.prior.size() != k) throw std::logic_error("evaluator prior has the wrong size");
  double sum = 0;
  for (double p : ev.prior) sum += p;
  if (std::abs(sum - 1) > 1e-6) throw std::logic_error("evaluator prior does not sum to 1");
  n.prior = std::move(ev.prior);
  n.children.resize(k);
  n.value = combine_value(ev.value, n.state.event_counts(), n.state.strategy()->config());
}

double SearchTree::evaluate_leaf(Node& n) {
  if (!n.expanded) expand(n);
  return n.value;
}

void SearchTree::simulate(std::size_t sims, std::optional<std::chrono::steady_clock::time_point> deadline) {
  if (!root_->expanded) {
    root_->visits = 1;
    root_->value_sum = evaluate_leaf(*root_);
  }
  for (std::size_t s = 0; s < sims; ++s) {
    if (deadline && std::chrono::steady_clock::now() > *deadline) return;
    std::vector<Node*> path{root_.get()};
    Node* node = root_.get();
    double v = 0;
    while (true) {
      if (!node->state.running()) {
        v = node->value;
        break;
      }
      double sqrt_n = std::sqrt(static_cast<double>(node->visits));
      std::size_t pick = 0;
      double best = -INFINITY;
      for (std::size_t i = 0; i < node->children.size(); ++i) {
        const Node* c = node->children[i].get();
        int cn = c ? c->visits : 0;
        double q = cn > 0 ? c->value_sum / cn : 0.0;
        double u = q + cfg_.c_puct * node->prior[i] * sqrt_n / (1.0 + cn);
        if (u > best) {
          best = u;
          pick = i;
        }
      }
      auto& slot = node->children[pick];
      if (!slot) {
        slot = std::make_unique<Node>(node->state.resume(pick));
        path.push_back(slot.get());
        v = evaluate_leaf(*slot);
        break;
      }
      node = slot.get();
      path.push_back(node);
    }
    for (Node* p : path) {
      p->visits += 1;
      p->value_sum += v;
    }
  }
}

const ExecutionState& SearchTree::root_state() const { return root_->state; }
int SearchTree::root_visits() const { return root_->visits; }
double SearchTree::root_value() const { return root_->value; }

std::vector<ChoiceStats> SearchTree::stats() const {
  std::vector<ChoiceStats> out;
  for (std::size_t i = 0; i < root_->children.size(); ++i) {
    ChoiceStats cs;
    cs.prior = root_->prior[i];
    if (const Node* c = root_->children[i].get(); c && c->visits > 0) {
      cs.visits = c->visits;
      cs.q = c->value_sum / c->visits;
    }
    out.push_back(cs);
  }
  return out;
}

std::size_t SearchTree::best() const {
  auto st = stats();
  if (st.empty()) throw std::logic_error("best() on a terminal root");
  std::size_t b = 0;
  for (std::size_t i = 1; i < st.size(); ++i)
    if (st[i].visits > st[b].visits) b = i;
  return b;
}

void SearchTree::commit(std::size_t i) {
  if (!root_->expanded) expand(*root_);
  if (i >= root_->children.size()) throw std::out_of_range("commit: choice index out of range");
  std::unique_ptr<Node> child = std::move(root_->children[i]);
  if (!child) child = std::make_unique<Node>(root_->state.resume(i));
  root_ = std::move(child);
  if (!root_->expanded) {
    root_->visits = 1;
    root_->value_sum = evaluate_leaf(*root_);
  }
}

std::unique_ptr<SearchTree::Node> SearchTree::copy(const Node& n) {
  auto out = std::make_unique<Node>(n.state);
  out->visits = n.visits;
  out->value_sum = n.value_sum;
  out->value = n.value;
  out->expanded = n.expanded;
  out->prior = n.prior;
  for (const auto& c : n.children) out->children.push_back(c ? copy(*c) : nullptr);
  return out;
}

SearchTree SearchTree::subtree(std::size_t i) const {
  SearchTree t(copy(*root_), eval_, cfg_);
  t.commit(i);
  return t;
}

Decision mcts_decide(const ExecutionState& s, std::size_t sims, const Evaluator& eval, MctsConfig cfg) {
  if (!s.running()) throw std::logic_error("mcts_decide on a terminal state");
  SearchTree tree(s, eval, cfg);
  tree.simulate(std::max<std::size_t>(sims, 1));
  return {tree.best(), tree.stats()};
}

SearchOutcome solve_with_search(const ExecutionState& s, const Evaluator& eval, const SearchOptions& opts) {
  using Clock = std::chrono::steady_clock;
  std::optional<Clock::time_point> deadline;
  if (opts.timeout_seconds)
    deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(*opts.timeout_seconds));
  SearchOutcome out{s, {}, {}, false, false, 0};
  if (!s.running()) return out;
  SearchTree tree(s, eval, opts.mcts);
  while (tree.root_state().running()) {
    if (out.steps >= opts.step_budget) {
      out.budget_exhausted = true;
      out.final = tree.root_state().abandoned("step budget exhausted");
      return out;
    }
    tree.simulate(std::max<std::size_t>(opts.sims, 1), deadline);
    if (deadline && Clock::now() > *deadline) {
      out.timed_out = true;
      out.final = tree.root_state().abandoned("timeout");
      return out;
    }
    std::size_t b = tree.best();
    out.step_stats.push_back(tree.stats());
    out.trace.push_back(b);
    tree.commit(b);
    ++out.steps;
  }
  out.final = tree.root_state();
  return out;
}

ExecutionState greedy_rollout(const ExecutionState& s, const Evaluator& eval) {
  ExecutionState cur = s;
  while (cur.running()) {
    Evaluation ev = eval.evaluate(cur);
    std::size_t b = 0;
    for (std::size_t i = 1; i < ev.prior.size(); ++i)
      if (ev.prior[i] > ev.prior[b]) b = i;
    cur = cur.resume(b);
  }
  return cur;
}

}  // namespace invsynth
