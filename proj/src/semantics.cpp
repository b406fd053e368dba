#include "invsynth/semantics.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "invsynth/abduction.hpp"

namespace invsynth {

Formula wlp(const Stmt& s, const Formula& post) {
  switch (s.kind()) {
    case Stmt::Kind::Skip:
      return post;
    case Stmt::Kind::Assign:
      return subst_var(post, s.target(), s.value());
    case Stmt::Kind::Seq: {
      Formula q = post;
      const auto& ps = s.parts();
      for (auto it = ps.rbegin(); it != ps.rend(); ++it) q = wlp(*it, q);
      return q;
    }
    case Stmt::Kind::If: {
      Formula a = wlp(s.then_branch(), post);
      Formula b = s.has_else() ? wlp(s.else_branch(), post) : post;
      if (!s.guard()) return f_and(a, b);
      return f_and(f_implies(*s.guard(), a), f_implies(f_not(*s.guard()), b));
    }
    case Stmt::Kind::Assume:
      return f_implies(s.condition(), post);
  }
  return post;
}

Formula init_vc(const LoopTask& t, const Formula& inv) { return f_implies(t.init, inv); }

Formula preservation_vc(const LoopTask& t, const Formula& inv) {
  return f_implies(f_and(inv, t.guard_formula()), wlp(t.body, inv));
}

Formula post_vc(const LoopTask& t, const Formula& inv) { return f_implies(f_and(inv, t.neg_guard_formula()), t.post); }

namespace {

struct Lin {
  std::vector<std::pair<std::size_t, std::int64_t>> terms;
  std::int64_t k = 0;
};

struct Dom {
  std::int64_t lo, hi;
};

using i128 = __int128;

i128 floor_div128(i128 a, i128 b) {
  i128 q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

class Searcher {
 public:
  Searcher(std::vector<Lin> ge, std::vector<Lin> ne, std::size_t nvars, const BoxSearch& opts, std::size_t limit)
      : ge_(std::move(ge)), ne_(std::move(ne)), nvars_(nvars), opts_(opts), limit_(limit) {}

  std::vector<std::vector<std::int64_t>> run() {
    std::vector<Dom> d(nvars_, Dom{-opts_.bound, opts_.bound});
    dfs(d);
    return out_;
  }

 private:
  bool propagate(std::vector<Dom>& d) const {
    for (int pass = 0; pass < 40; ++pass) {
      bool changed = false;
      for (const auto& c : ge_) {
        i128 maxsum = c.k;
        for (auto [i, a] : c.terms) maxsum += a > 0 ? i128(a) * d[i].hi : i128(a) * d[i].lo;
        if (maxsum < 0) return false;
        for (auto [i, a] : c.terms) {
          i128 mine = a > 0 ? i128(a) * d[i].hi : i128(a) * d[i].lo;
          i128 rest = maxsum - mine;
          // a*x >= -rest
          if (a > 0) {
            i128 lo = -floor_div128(rest, a);
            if (lo > d[i].lo) {
              if (lo > d[i].hi) return false;
              d[i].lo = static_cast<std::int64_t>(lo);
              changed = true;
            }
          } else {
            i128 hi = floor_div128(rest, -a);
            if (hi < d[i].hi) {
              if (hi < d[i].lo) return false;
              d[i].hi = static_cast<std::int64_t>(hi);
              changed = true;
            }
          }
          if (changed) {
            maxsum = c.k;
            for (auto [j, b] : c.terms) maxsum += b > 0 ? i128(b) * d[j].hi : i128(b) * d[j].lo;
            if (maxsum < 0) return false;
          }
        }
      }
      if (!changed) break;
    }
    for (const auto& c : ne_) {
      i128 v = c.k;
      bool fixed = true;
      for (auto [i, a] : c.terms) {
        if (d[i].lo != d[i].hi) {
          fixed = false;
          break;
        }
        v += i128(a) * d[i].lo;
      }
      if (fixed && v == 0) return false;
    }
    return true;
  }

  void dfs(std::vector<Dom> d) {
    if (out_.size() >= limit_ || nodes_ >= opts_.node_limit) return;
    ++nodes_;
    if (!propagate(d)) return;
    std::size_t pick = nvars_;
    std::int64_t best = 0;
    for (std::size_t i = 0; i < nvars_; ++i) {
      if (d[i].lo == d[i].hi) continue;
      std::int64_t w = d[i].hi - d[i].lo;
      if (pick == nvars_ || w < best) {
        pick = i;
        best = w;
      }
    }
    if (pick == nvars_) {
      std::vector<std::int64_t> m;
      for (const auto& x : d) m.push_back(x.lo);
      out_.push_back(std::move(m));
      return;
    }
    Dom cur = d[pick];
    Dom first, second;
    if (cur.lo < 0 && cur.hi > 0) {
      first = {0, cur.hi};
      second = {cur.lo, -1};
    } else if (cur.lo >= 0) {
      std::int64_t mid = cur.lo + (cur.hi - cur.lo) / 2;
      first = {cur.lo, mid};
      second = {mid + 1, cur.hi};
    } else {
      std::int64_t mid = cur.hi - (cur.hi - cur.lo) / 2;
      first = {mid, cur.hi};
      second = {cur.lo, mid - 1};
    }
    d[pick] = first;
    dfs(d);
    d[pick] = second;
    dfs(d);
  }

  std::vector<Lin> ge_, ne_;
  std::size_t nvars_;
  BoxSearch opts_;
  std::size_t limit_;
  std::size_t nodes_ = 0;
  std::vector<std::vector<std::int64_t>> out_;
};

Lin to_lin(const LinExpr& e, const std::vector<std::string>& vars) {
  Lin l;
  l.k = e.constant_term();
  for (const auto& t : e.vars()) {
    auto it = std::lower_bound(vars.begin(), vars.end(), t.name);
    if (it == vars.end() || *it != t.name) throw std::invalid_argument("unknown variable " + t.name);
    l.terms.emplace_back(static_cast<std::size_t>(it - vars.begin()), t.coeff);
  }
  return l;
}

// Model of the negation of one clause, if the bounded search finds one.
std::optional<Env> clause_counterexample(const Clause& clause) {
  std::vector<LinExpr> ge, ne;
  std::set<std::string> vs;
  for (const auto& lit : clause) {
    for (const auto& t : lit.expr().vars()) vs.insert(t.name);
    if (lit.rel() == Rel::Ge) {
      ge.push_back((-lit.expr()).plus_constant(-1));
    } else {
      ne.push_back(lit.expr());
    }
  }
  std::vector<std::string> vars(vs.begin(), vs.end());
  auto ms = box_models(ge, ne, vars, 1);
  if (ms.empty()) return std::nullopt;
  return ms[0];
}

ValidityResult check_valid_uncached(const Formula& f) {
  std::vector<Clause> cnf;
  try {
    cnf = to_cnf(f);
  } catch (const CnfBudgetExceeded&) {
    return {};
  }
  bool all_closed = true;
  for (const auto& clause : cnf) {
    if (clause_closed(clause)) continue;
    all_closed = false;
    if (auto m = clause_counterexample(clause)) {
      Env env = *m;
      for (const auto& v : free_vars(f)) env.emplace(v, 0);
      if (!eval(f, env)) return {Verdict::Refuted, env};
    }
  }
  if (all_closed) return {Verdict::Proved, std::nullopt};
  return {};
}

}  // namespace

std::vector<Env> box_models(const std::vector<LinExpr>& ge, const std::vector<LinExpr>& ne,
                            const std::vector<std::string>& vars, std::size_t limit, const BoxSearch& opts) {
  std::vector<std::string> sorted = vars;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<Lin> g, n;
  for (const auto& e : ge) g.push_back(to_lin(e, sorted));
  for (const auto& e : ne) n.push_back(to_lin(e, sorted));
  Searcher s(std::move(g), std::move(n), sorted.size(), opts, limit);
  std::vector<Env> out;
  for (const auto& m : s.run()) {
    Env env;
    for (std::size_t i = 0; i < sorted.size(); ++i) env[sorted[i]] = m[i];
    out.push_back(std::move(env));
  }
  return out;
}

ValidityResult check_valid(const Formula& f) {
  if (!metas_of(f).empty()) throw std::invalid_argument("check_valid: formula has metavariables");
  thread_local std::unordered_map<std::string, ValidityResult> cache;
  std::string key = formula_key(f);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  ValidityResult r = check_valid_uncached(f);
  if (cache.size() > 100000) cache.clear();
  cache.emplace(std::move(key), r);
  return r;
}

SatResult check_sat(const Formula& f) {
  ValidityResult r = check_valid(f_not(f));
  switch (r.verdict) {
    case Verdict::Proved:
      return {SatStatus::Unsat, std::nullopt};
    case Verdict::Refuted:
      return {SatStatus::Sat, r.counterexample};
    case Verdict::Unknown:
      break;
  }
  return {};
}

InvariantCheck check_invariant(const LoopTask& t, const Formula& inv) {
  return {check_valid(init_vc(t, inv)), check_valid(preservation_vc(t, inv)), check_valid(post_vc(t, inv))};
}

std::vector<Env> enumerate_models(const Formula& f, const std::vector<std::string>& vars, std::int64_t bound,
                                  std::size_t limit) {
  std::vector<Env> out;
  if (limit == 0) return out;
  std::vector<Clause> cnf;
  bool use_cnf = true;
  try {
    cnf = to_cnf(f);
  } catch (const CnfBudgetExceeded&) {
    use_cnf = false;
  }
  // clause i becomes checkable once variable ready[i] is assigned
  std::vector<std::size_t> ready(cnf.size(), 0);
  for (std::size_t i = 0; i < cnf.size(); ++i)
    for (const auto& a : cnf[i])
      for (const auto& t : a.expr().vars()) {
        auto pos = static_cast<std::size_t>(std::find(vars.begin(), vars.end(), t.name) - vars.begin());
        if (pos == vars.size()) throw std::invalid_argument("enumerate_models: unlisted variable " + t.name);
        ready[i] = std::max(ready[i], pos + 1);
      }
  std::vector<std::int64_t> values{0};
  for (std::int64_t d = 1; d <= bound; ++d) {
    values.push_back(d);
    values.push_back(-d);
  }
  Env env;
  std::size_t nodes = 0;
  const std::size_t node_limit = 200000;
  std::function<void(std::size_t)> go = [&](std::size_t depth) {
    if (out.size() >= limit || nodes >= node_limit) return;
    ++nodes;
    if (use_cnf) {
      for (std::size_t i = 0; i < cnf.size(); ++i) {
        if (ready[i] != depth) continue;
        bool any = false;
        for (const auto& a : cnf[i]) any = any || eval(Formula::from_atom(a), env);
        if (!any) return;
      }
    }
    if (depth == vars.size()) {
      if (use_cnf || eval(f, env)) out.push_back(env);
      return;
    }
    for (std::int64_t v : values) {
      env[vars[depth]] = v;
      go(depth + 1);
      if (out.size() >= limit || nodes >= node_limit) break;
    }
    env.erase(vars[depth]);
  };
  go(0);
  return out;
}

std::optional<Env> exec_bounded(const Stmt& s, Env env, const StarStream& star) {
  switch (s.kind()) {
    case Stmt::Kind::Skip:
      return env;
    case Stmt::Kind::Assign:
      env[s.target()] = s.value().eval(env);
      return env;
    case Stmt::Kind::Seq:
      for (const auto& p : s.parts()) {
        auto next = exec_bounded(p, std::move(env), star);
        if (!next) return std::nullopt;
        env = std::move(*next);
      }
      return env;
    case Stmt::Kind::If: {
      bool take = s.guard() ? eval(*s.guard(), env) : star();
      if (take) return exec_bounded(s.then_branch(), std::move(env), star);
      if (s.has_else()) return exec_bounded(s.else_branch(), std::move(env), star);
      return env;
    }
    case Stmt::Kind::Assume:
      if (!eval(s.condition(), env)) return std::nullopt;
      return env;
  }
  return env;
}

namespace {

// Calls `visit` on every loop-head state of the bounded runs; `exit` on every
// state in which the loop may terminate. Either returning true stops the search
// and reports the run's initial state.
std::optional<Env> bounded_runs(const LoopTask& t, const BoundedOptions& opts,
                                const std::function<bool(const Env&)>& visit,
                                const std::function<bool(const Env&)>& exit) {
  std::vector<std::string> vars = t.var_names();
  std::vector<Env> inits = enumerate_models(t.init, vars, opts.init_bound, opts.max_inits * 30);
  Rng rng(opts.seed);
  if (inits.size() > opts.max_inits) {
    rng.shuffle(inits);
    inits.resize(opts.max_inits);
  }
  try {
    for (const auto& init : inits) {
      for (int mode = 0; mode < 4; ++mode) {
        Rng bits(mix_seed(opts.seed, static_cast<std::uint64_t>(mode) + 17));
        std::size_t tick = 0;
        StarStream star = [&]() -> bool {
          ++tick;
          switch (mode) {
            case 0: return false;
            case 1: return true;
            case 2: return tick % 2 == 0;
            default: return bits.bernoulli(0.5);
          }
        };
        Env env = init;
        for (std::size_t it = 0; it <= opts.max_iterations; ++it) {
          if (visit(env)) return init;
          bool enter;
          if (t.guard) {
            enter = eval(*t.guard, env);
            if (!enter && exit(env)) return init;
          } else {
            if (exit(env)) return init;
            enter = true;
          }
          if (!enter || it == opts.max_iterations) break;
          auto next = exec_bounded(t.body, env, star);
          if (!next) break;
          env = std::move(*next);
        }
      }
    }
  } catch (const OverflowError&) {
  }
  return std::nullopt;
}

}  // namespace

std::optional<Env> find_bounded_violation(const LoopTask& t, const BoundedOptions& opts) {
  return bounded_runs(
      t, opts, [](const Env&) { return false; }, [&](const Env& e) { return !eval(t.post, e); });
}

std::optional<Env> find_bounded_inv_violation(const LoopTask& t, const Formula& inv, const BoundedOptions& opts) {
  return bounded_runs(
      t, opts, [&](const Env& e) { return !eval(inv, e); }, [](const Env&) { return false; });
}

}  // namespace invsynth
