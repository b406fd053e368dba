#include "invsynth/solver.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>

#include "invsynth/abduction.hpp"
#include "invsynth/parser.hpp"
#include "invsynth/semantics.hpp"

namespace invsynth {

double size_penalty_reward(std::size_t num_conjuncts) {
  return std::max(-1.0, -0.2 * static_cast<double>(num_conjuncts));
}

RunConfig solver_run_config() { return {{{kAbductionEvent, -0.2, 4}, {kConjecturingEvent, -0.3, 4}}, 0.0}; }

namespace {

using SymState = std::map<std::string, LinExpr>;

LinExpr apply_state(const LinExpr& e, const SymState& st) {
  LinExpr out = LinExpr::constant(e.constant_term());
  for (const auto& t : e.metas()) out = out + LinExpr::meta(t.name, t.coeff);
  for (const auto& t : e.vars()) {
    auto it = st.find(t.name);
    out = out + (it == st.end() ? LinExpr::var(t.name) : it->second).scaled(t.coeff);
  }
  return out;
}

void paths(const Stmt& s, std::vector<SymState>& states) {
  constexpr std::size_t kMaxPaths = 64;
  switch (s.kind()) {
    case Stmt::Kind::Skip:
    case Stmt::Kind::Assume:
      return;
    case Stmt::Kind::Assign:
      for (auto& st : states) st[s.target()] = apply_state(s.value(), st);
      return;
    case Stmt::Kind::Seq:
      for (const auto& p : s.parts()) paths(p, states);
      return;
    case Stmt::Kind::If: {
      std::vector<SymState> a = states, b = states;
      paths(s.then_branch(), a);
      if (s.has_else()) paths(s.else_branch(), b);
      a.insert(a.end(), b.begin(), b.end());
      if (a.size() > kMaxPaths) a.resize(kMaxPaths);
      states = std::move(a);
      return;
    }
  }
}

Formula map_atoms(const Formula& f, const std::function<Formula(const Atom&)>& fn) {
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
      std::vector<Formula> ks;
      for (const auto& c : f.children()) ks.push_back(map_atoms(c, fn));
      return f.kind() == Formula::Kind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
    }
    case Formula::Kind::Implies:
      return f_implies(map_atoms(f.children()[0], fn), map_atoms(f.children()[1], fn));
  }
  return f;
}

Formula rename_meta(const Formula& f, const std::string& from, const std::string& to) {
  return map_atoms(f, [&](const Atom& a) {
    std::int64_t k = a.expr().meta_coeff(from);
    if (k == 0) return Formula::from_atom(a);
    LinExpr e = a.expr().subst_meta(from, 0) + LinExpr::meta(to, k);
    return make_atom(e, a.rel(), a.style());
  });
}

void collect_atoms(const Formula& f, std::vector<Atom>& out) {
  if (f.is_atom()) {
    out.push_back(f.atom());
    return;
  }
  for (const auto& c : f.children()) collect_atoms(c, out);
}

std::vector<std::string> strings(const std::vector<Formula>& fs) {
  std::vector<std::string> out;
  for (const auto& f : fs) out.push_back(print_formula(f));
  return out;
}

enum class PendingKind { Post, Inv };
enum class PendingStatus { ToProve, ToProveNext, ProvedCond, Proved };

struct Pending {
  PendingKind kind;
  Formula formula;
  PendingStatus status;
};

const char* status_name(PendingStatus s) {
  switch (s) {
    case PendingStatus::ToProve: return "TO_PROVE";
    case PendingStatus::ToProveNext: return "TO_PROVE_NEXT";
    case PendingStatus::ProvedCond: return "PROVED_COND";
    case PendingStatus::Proved: return "PROVED";
  }
  return "";
}

struct Candidate {
  Formula formula;
  const Conjecture* conjecture = nullptr;
};

class Run {
 public:
  Run(const LoopTask& t, const SolverConfig& cfg, const std::vector<Conjecture>& conj, const Json& task_json,
      StrategyContext& ctx)
      : t_(t), cfg_(cfg), conj_(conj), task_json_(task_json), ctx_(ctx) {}

  SolverOutcome solve() {
    pending_.push_back({PendingKind::Post, t_.post, PendingStatus::ToProve});
    prove_post();
    pending_.pop_back();
    std::set<std::string> left;
    for (const auto& f : invs_)
      for (const auto& m : metas_of(f)) left.insert(m);
    refine(left);
    for (const auto& f : invs_) ctx_.require(metas_of(f).empty(), "unrefined metavariable");
    ctx_.require(check_invariant(t_, f_and(invs_)).proved(), "final re-verification failed");
    return {invs_, abduced_, conjectured_};
  }

 private:
  Formula context(std::vector<Formula> extra) const {
    std::vector<Formula> all = constrs_;
    all.insert(all.end(), invs_.begin(), invs_.end());
    all.insert(all.end(), extra.begin(), extra.end());
    return f_and(std::move(all));
  }

  std::size_t pick(std::size_t n, const std::string& site, const Formula& obligation,
                   const std::function<void(ChoicePoint&)>& fill) {
    if (n == 1) return 0;
    return ctx_.choose(n, [&] {
      ChoicePoint cp;
      cp.probe = probe(site, obligation);
      fill(cp);
      return cp;
    });
  }

  Json probe(const std::string& site, const Formula& obligation) const {
    Json p;
    p["site"] = site;
    p["task"] = task_json_;
    p["invs_proved"] = strings(invs_);
    p["constrs"] = strings(constrs_);
    Json pend = Json::array();
    for (const auto& e : pending_)
      pend.push_back({{"kind", e.kind == PendingKind::Post ? "POST" : "INV"},
                      {"formula", print_formula(e.formula)},
                      {"status", status_name(e.status)}});
    p["pending"] = pend;
    p["obligation"] = print_formula(obligation);
    return p;
  }

  void prove_post() {
    const std::size_t limit = cfg_.max_invariants + cfg_.max_retries;
    for (std::size_t attempt = 0; attempt < limit; ++attempt) {
      pending_.back().status = PendingStatus::ToProve;
      Formula ob = f_implies(context({t_.neg_guard_formula()}), t_.post);
      AbductionResult r = abduct(ob);
      if (r.valid) {
        pending_.back().status = PendingStatus::Proved;
        return;
      }
      Formula assum = suggest_missing(r.suggestions, ob);
      mark_closing(assum, ob);
      prove_missing(assum, true);
    }
    ctx_.fail("retry limit");
  }

  void mark_closing(const Formula& assum, const Formula& ob) {
    bool closing = abduct(f_implies(assum, ob)).valid;
    pending_.back().status = closing ? PendingStatus::ProvedCond : PendingStatus::ToProveNext;
  }

  std::vector<Candidate> candidate_pool(const std::vector<Atom>& suggs) const {
    std::vector<Candidate> pool;
    std::vector<Formula> base = constrs_;
    base.insert(base.end(), invs_.begin(), invs_.end());
    auto add = [&](Formula f, const Conjecture* c) {
      for (const auto& p : pool)
        if (p.formula == f) return;
      if (!c) {
        std::vector<Formula> facts = base;
        facts.push_back(f);
        if (fm_refutes(facts)) return;
      }
      pool.push_back({std::move(f), c});
    };
    for (const auto& a : suggs) add(Formula::from_atom(a), nullptr);
    for (const auto& c : conj_) add(c.formula, &c);
    return pool;
  }

  Formula instantiate(const Candidate& c) {
    if (!c.conjecture || !c.conjecture->has_meta) return c.formula;
    std::string m = fresh_meta();
    Formula f = rename_meta(c.formula, "c", m);
    btype_[m] = bound_type_of(f, m);
    if (c.conjecture->nonneg) constrs_.push_back(make_atom(LinExpr::meta(m), Rel::Ge));
    return f;
  }

  Formula suggest_missing(const std::vector<Atom>& suggs, const Formula& ob) {
    std::vector<Candidate> pool = candidate_pool(suggs);
    std::vector<std::string> labels;
    for (const auto& c : pool) labels.push_back(print_formula(c.formula) + (c.conjecture ? "  [conjecture]" : ""));
    std::size_t max_n = std::min(cfg_.max_disjuncts, pool.size());
    if (max_n == 0) ctx_.fail("no candidates");
    std::size_t num = 1 + pick(max_n, "num_disjuncts", ob, [&](ChoicePoint& cp) {
      cp.probe["candidates"] = labels;
      for (std::size_t i = 1; i <= max_n; ++i) cp.labels.push_back(std::to_string(i));
    });
    std::vector<Formula> disjs;
    std::vector<std::string> chosen;
    std::size_t next = 0;
    for (std::size_t j = 0; j < num; ++j) {
      std::size_t last = pool.size() - (num - j);  // leave room for the remaining disjuncts
      std::size_t n = last - next + 1;
      std::size_t i = next + pick(n, "disjunct", ob, [&](ChoicePoint& cp) {
                        cp.probe["num_disjuncts"] = num;
                        cp.probe["disjuncts"] = chosen;
                        for (std::size_t k = next; k <= last; ++k) cp.labels.push_back(labels[k]);
                      });
      next = i + 1;
      const Candidate& c = pool[i];
      ctx_.event(c.conjecture ? kConjecturingEvent : kAbductionEvent);
      ++(c.conjecture ? conjectured_ : abduced_);
      disjs.push_back(instantiate(c));
      chosen.push_back(labels[i]);
    }
    return f_or(disjs);
  }

  std::pair<Formula, std::vector<std::string>> strengthen(const Formula& f) {
    std::vector<StrengthenOption> options = strengthen_options(f);
    std::size_t i = pick(options.size(), "strengthen", f, [&](ChoicePoint& cp) {
      for (const auto& o : options) cp.labels.push_back(print_formula(o.formula));
    });
    if (!options[i].has_meta) return {options[i].formula, {}};
    std::string m = fresh_meta();
    Formula g = rename_meta(options[i].formula, "c", m);
    btype_[m] = BoundType::Upper;
    return {g, {m}};
  }

  void prove_missing(const Formula& f, bool as_inv) {
    if (meta_only(f)) {
      constrs_.push_back(f);
      std::vector<Formula> cs = constrs_;
      ctx_.require(!fm_refutes(cs), "unsatisfiable constraints");
      return;
    }
    ctx_.require(as_inv, "assumption is not an invariant candidate");
    ctx_.require(pending_.size() < cfg_.max_pending + 1, "nesting limit");
    ctx_.require(invs_.size() + pending_.size() <= cfg_.max_invariants, "invariant limit");
    auto [inv, fresh] = strengthen(f);
    for (const auto& c : fresh) constrs_.push_back(make_atom(LinExpr::meta(c), Rel::Ge));
    pending_.push_back({PendingKind::Inv, inv, PendingStatus::ToProve});
    std::size_t idx = pending_.size() - 1;
    prove_init(idx);
    prove_preserved(idx);
    Formula proved = pending_[idx].formula;
    pending_.pop_back();
    invs_.push_back(proved);
    std::set<std::string> ms = metas_of(proved);
    for (const auto& p : pending_)
      for (const auto& m : metas_of(p.formula)) ms.erase(m);
    refine(ms);
  }

  void prove_init(std::size_t idx) {
    for (std::size_t attempt = 0; attempt < cfg_.max_retries; ++attempt) {
      pending_[idx].status = PendingStatus::ToProve;
      Formula ob = f_implies(context({t_.init}), pending_[idx].formula);
      AbductionResult r = abduct(ob);
      if (r.valid) return;
      // Only metavariable constraints can be added at this point.
      std::vector<Formula> suggs;
      for (const auto& a : r.suggestions) {
        Formula s = Formula::from_atom(a);
        if (!meta_only(s)) continue;
        std::vector<Formula> cs = constrs_;
        cs.push_back(s);
        if (!fm_refutes(cs)) suggs.push_back(s);
      }
      std::size_t i = suggs.empty() ? ctx_.choose(0, nullptr) : pick(suggs.size(), "init_assumption", ob, [&](ChoicePoint& cp) {
        cp.labels = strings(suggs);
      });
      prove_missing(suggs[i], false);
    }
    ctx_.fail("retry limit");
  }

  void prove_preserved(std::size_t idx) {
    for (std::size_t attempt = 0; attempt < cfg_.max_retries; ++attempt) {
      pending_[idx].status = PendingStatus::ToProve;
      const Formula inv = pending_[idx].formula;
      Formula ob = f_implies(context({t_.guard_formula(), inv}), wlp(t_.body, inv));
      AbductionResult r = abduct(ob);
      if (r.valid) return;
      Formula assum = suggest_missing(r.suggestions, ob);
      mark_closing(assum, ob);
      prove_missing(assum, true);
    }
    ctx_.fail("retry limit");
  }

  void refine(const std::set<std::string>& metas) {
    for (const auto& m : metas) {
      auto bt = btype_.find(m);
      std::int64_t v = abduct_refinement(m, bt == btype_.end() ? BoundType::Free : bt->second, constrs_);
      for (auto& f : invs_) f = subst_meta(f, m, v);
      for (auto& p : pending_) p.formula = subst_meta(p.formula, m, v);
      std::vector<Formula> cs;
      for (const auto& c : constrs_) {
        Formula g = subst_meta(c, m, v);
        ctx_.require(!g.is_false(), "refinement violates a constraint");
        if (!g.is_true()) cs.push_back(g);
      }
      constrs_ = std::move(cs);
    }
  }

  std::string fresh_meta() { return "c" + std::to_string(++meta_counter_); }

  const LoopTask& t_;
  const SolverConfig& cfg_;
  const std::vector<Conjecture>& conj_;
  const Json& task_json_;
  StrategyContext& ctx_;

  std::vector<Formula> invs_, constrs_;
  std::vector<Pending> pending_;
  std::map<std::string, BoundType> btype_;
  int meta_counter_ = 0;
  std::size_t abduced_ = 0, conjectured_ = 0;
};

}  // namespace

std::vector<LinExpr> preserved_terms(const Stmt& body, const std::vector<std::string>& vars, int max_vars,
                                     int max_coeff) {
  std::set<std::string> mod = modified_vars(body);
  std::vector<std::string> ms;
  for (const auto& v : vars)
    if (mod.count(v)) ms.push_back(v);
  std::vector<SymState> st{SymState{}};
  paths(body, st);
  // delta[p][v] = value of v after path p minus v
  std::vector<std::map<std::string, LinExpr>> delta(st.size());
  for (std::size_t p = 0; p < st.size(); ++p)
    for (const auto& v : ms) {
      auto it = st[p].find(v);
      delta[p][v] = (it == st[p].end() ? LinExpr::var(v) : it->second) - LinExpr::var(v);
    }
  std::vector<LinExpr> out;
  std::vector<std::size_t> idx;
  std::vector<std::int64_t> coeff;
  std::function<void(std::size_t)> subsets = [&](std::size_t from) {
    if (!idx.empty()) {
      // enumerate coefficient vectors for the chosen variables
      std::function<void(std::size_t)> coeffs = [&](std::size_t k) {
        if (k == idx.size()) {
          std::int64_t g = 0;
          for (auto c : coeff) g = std::gcd(g, c);
          if (g != 1) return;
          for (const auto& d : delta) {
            LinExpr sum;
            for (std::size_t j = 0; j < idx.size(); ++j) sum = sum + d.at(ms[idx[j]]).scaled(coeff[j]);
            if (!(sum == LinExpr())) return;
          }
          LinExpr t;
          for (std::size_t j = 0; j < idx.size(); ++j) t = t + LinExpr::var(ms[idx[j]], coeff[j]);
          out.push_back(t);
          return;
        }
        for (std::int64_t c = k == 0 ? 1 : -max_coeff; c <= max_coeff; ++c) {
          if (c == 0) continue;
          coeff.push_back(c);
          coeffs(k + 1);
          coeff.pop_back();
        }
      };
      coeffs(0);
    }
    if (idx.size() == static_cast<std::size_t>(max_vars)) return;
    for (std::size_t i = from; i < ms.size(); ++i) {
      idx.push_back(i);
      subsets(i + 1);
      idx.pop_back();
    }
  };
  subsets(0);
  return out;
}

std::vector<Conjecture> conjectures(const LoopTask& t) {
  std::vector<Conjecture> out;
  auto push = [&](Conjecture c) {
    if (c.formula.is_true() || c.formula.is_false()) return;
    for (const auto& o : out)
      if (o.formula == c.formula) return;
    out.push_back(std::move(c));
  };
  const LinExpr c = LinExpr::meta("c");
  std::vector<std::string> params;
  for (const auto& v : t.vars)
    if (v.kind == VarKind::Parameter) params.push_back(v.name);
  auto terms = preserved_terms(t.body, t.var_names());
  for (const auto& term : terms) {
    push({Conjecture::Kind::Preserved, make_atom(term - c, Rel::Ge), true, false});
    push({Conjecture::Kind::Preserved, make_atom(c - term, Rel::Ge, {false, true}), true, false});
    push({Conjecture::Kind::Preserved, make_atom(term - c, Rel::Eq), true, false});
  }
  // A parameter can be added to a preserved term; only equalities are offered.
  for (const auto& term : terms)
    for (const auto& p : params)
      for (int sign : {-1, 1})
        push({Conjecture::Kind::Preserved, make_atom(term + LinExpr::var(p, sign) - c, Rel::Eq), true, false});
  if (t.guard) {
    for (const auto& g : conjuncts(*t.guard)) {
      if (!g.is_atom() || g.atom().rel() != Rel::Ge) continue;
      push({Conjecture::Kind::GuardRelaxation, make_atom(g.atom().expr() + c, Rel::Ge, {false, g.atom().style().mirrored}),
            true, true});
    }
  }
  std::set<std::string> mod = modified_vars(t.body);
  for (const auto& a : conjuncts(t.init)) {
    auto fv = free_vars(a);
    if (fv.empty()) continue;
    bool frozen = std::none_of(fv.begin(), fv.end(), [&](const std::string& v) { return mod.count(v) > 0; });
    if (frozen) push({Conjecture::Kind::Init, a, false, false});
  }
  return out;
}

std::vector<StrengthenOption> strengthen_options(const Formula& f) {
  std::vector<StrengthenOption> options{{f, false}};
  std::vector<Formula> units = disjunct_units(f);
  for (std::size_t u = 0; u < units.size(); ++u) {
    auto replace = [&](const Formula& by) {
      std::vector<Formula> ks = units;
      ks[u] = by;
      return f_or(ks);
    };
    if (auto eq = as_disequality(units[u])) {
      const LinExpr& e = eq->expr();
      options.push_back({replace(make_atom(e.plus_constant(-1), Rel::Ge, {true, false})), false});
      options.push_back({replace(make_atom((-e).plus_constant(-1), Rel::Ge, {true, true})), false});
    } else if (units[u].is_atom() && units[u].atom().rel() == Rel::Ge && !units[u].atom().expr().has_metas()) {
      const Atom& a = units[u].atom();
      options.push_back({replace(make_atom(a.expr() + LinExpr::meta("c"), Rel::Ge, a.style())), true});
    }
  }
  return options;
}

BoundType bound_type_of(const Formula& f, const std::string& meta) {
  std::vector<Atom> atoms;
  collect_atoms(f, atoms);
  std::optional<BoundType> bt;
  for (const auto& a : atoms) {
    std::int64_t k = a.expr().meta_coeff(meta);
    if (k == 0) continue;
    BoundType here = a.rel() == Rel::Eq ? BoundType::Free : (k > 0 ? BoundType::Upper : BoundType::Lower);
    if (bt && *bt != here) return BoundType::Free;
    bt = here;
  }
  return bt.value_or(BoundType::Free);
}

SolverStrategy::SolverStrategy(LoopTask task, SolverConfig cfg)
    : task_(std::move(task)), cfg_(cfg), run_cfg_(solver_run_config()), conjectures_(conjectures(task_)) {
  task_json_["init"] = print_formula(task_.init);
  task_json_["guard"] = task_.guard ? print_formula(*task_.guard) : "*";
  task_json_["body"] = print_stmt(task_.body);
  task_json_["post"] = print_formula(task_.post);
}

std::any SolverStrategy::run(StrategyContext& ctx) const {
  Run r(task_, cfg_, conjectures_, task_json_, ctx);
  return r.solve();
}

Json SolverStrategy::describe_result(const std::any& result) const {
  const auto& out = std::any_cast<const SolverOutcome&>(result);
  Json j;
  j["invariant"] = strings(out.conjuncts);
  return j;
}

}  // namespace invsynth
