#include "invsynth/abduction.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "invsynth/parser.hpp"

namespace invsynth {

namespace {

LinExpr expr_metas_as_vars(const LinExpr& e) {
  if (!e.has_metas()) return e;
  LinExpr out = LinExpr::constant(e.constant_term());
  for (const auto& t : e.vars()) out = out + LinExpr::var(t.name, t.coeff);
  for (const auto& t : e.metas()) out = out + LinExpr::var(t.name + "?", t.coeff);
  return out;
}

// Conjunction of `e >= 0` constraints under variable elimination.
class FmSystem {
 public:
  explicit FmSystem(std::size_t cap) : cap_(cap) {}

  bool contradiction() const { return contradiction_; }
  bool overflowed() const { return overflowed_; }

  void add_ge(const LinExpr& e) {
    Formula f = make_atom(e, Rel::Ge);
    if (f.is_true()) return;
    if (f.is_false()) {
      contradiction_ = true;
      return;
    }
    const LinExpr& n = f.atom().expr();
    LinExpr key = n.var_part();
    auto it = by_key_.find(key);
    if (it != by_key_.end()) {
      if (it->second <= n.constant_term()) return;
      it->second = n.constant_term();
    } else {
      by_key_.emplace(key, n.constant_term());
    }
    LinExpr neg = -key;
    auto opp = by_key_.find(neg);
    if (opp != by_key_.end()) {
      // L + a >= 0 and -L + b >= 0 need a + b >= 0.
      if (checked_add(opp->second, by_key_[key]) < 0) contradiction_ = true;
    }
    if (by_key_.size() > cap_) overflowed_ = true;
  }

  std::vector<LinExpr> constraints() const {
    std::vector<LinExpr> out;
    out.reserve(by_key_.size());
    for (const auto& [k, c] : by_key_) out.push_back(k.plus_constant(c));
    return out;
  }

  std::set<std::string> vars() const {
    std::set<std::string> out;
    for (const auto& [k, c] : by_key_)
      for (const auto& t : k.vars()) out.insert(t.name);
    return out;
  }

  // Picks the variable with the cheapest elimination, skipping `keep`.
  std::optional<std::string> pick(const std::string* keep) const {
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& [k, c] : by_key_)
      for (const auto& t : k.vars()) {
        auto& pn = counts[t.name];
        (t.coeff > 0 ? pn.first : pn.second)++;
      }
    std::optional<std::string> best;
    long best_cost = 0;
    for (const auto& [v, pn] : counts) {
      if (keep && v == *keep) continue;
      long cost = static_cast<long>(pn.first * pn.second) - static_cast<long>(pn.first + pn.second);
      if (!best || cost < best_cost) {
        best = v;
        best_cost = cost;
      }
    }
    return best;
  }

  void eliminate(const std::string& v) {
    std::vector<LinExpr> pos, neg;
    FmSystem next(cap_);
    for (const auto& e : constraints()) {
      std::int64_t c = e.coeff(v);
      if (c > 0) {
        pos.push_back(e);
      } else if (c < 0) {
        neg.push_back(e);
      } else {
        next.add_ge(e);
      }
    }
    for (const auto& p : pos) {
      for (const auto& n : neg) {
        std::int64_t a = p.coeff(v), b = -n.coeff(v);
        std::int64_t g = gcd(a, b);
        next.add_ge(p.scaled(b / g) + n.scaled(a / g));
        if (next.contradiction_ || next.overflowed_) break;
      }
      if (next.contradiction_ || next.overflowed_) break;
    }
    next.contradiction_ = next.contradiction_ || contradiction_;
    *this = std::move(next);
  }

 private:
  std::size_t cap_;
  std::map<LinExpr, std::int64_t> by_key_;
  bool contradiction_ = false;
  bool overflowed_ = false;
};

// Substitutes unit-coefficient equalities away; returns false on a ground
// contradiction. Remaining equalities become pairs of inequalities.
bool solve_equalities(std::vector<LinExpr>& ge, std::vector<LinExpr> eq) {
  while (!eq.empty()) {
    LinExpr e = eq.back();
    eq.pop_back();
    Formula norm = make_atom(e, Rel::Eq);
    if (norm.is_true()) continue;
    if (norm.is_false()) return false;
    e = norm.atom().expr();
    std::optional<Term> unit;
    for (const auto& t : e.vars())
      if (t.coeff == 1 || t.coeff == -1) {
        unit = t;
        break;
      }
    if (!unit) {
      ge.push_back(e);
      ge.push_back(-e);
      continue;
    }
    // x = -(e - c*x)/c  with c = +-1
    LinExpr rest = e - LinExpr::var(unit->name, unit->coeff);
    LinExpr value = rest.scaled(-unit->coeff);
    for (auto& g : ge) g = g.subst_var(unit->name, value);
    for (auto& q : eq) q = q.subst_var(unit->name, value);
  }
  return true;
}

bool refute_linear(std::vector<LinExpr> ge, std::vector<LinExpr> eq, const FmLimits& limits) {
  try {
    if (!solve_equalities(ge, std::move(eq))) return true;
    FmSystem sys(limits.max_constraints);
    for (const auto& g : ge) sys.add_ge(g);
    while (!sys.contradiction()) {
      if (sys.overflowed()) return false;
      auto v = sys.pick(nullptr);
      if (!v) break;
      sys.eliminate(*v);
    }
    return sys.contradiction();
  } catch (const OverflowError&) {
    return false;
  }
}

void split_atom(const Atom& a, std::vector<LinExpr>& ge, std::vector<LinExpr>& eq) {
  LinExpr e = expr_metas_as_vars(a.expr());
  (a.rel() == Rel::Ge ? ge : eq).push_back(e);
}

bool refute_cases(const std::vector<Formula>& facts, std::size_t idx, std::vector<Atom>& chosen,
                  const FmLimits& limits, std::size_t& branches) {
  while (idx < facts.size() && facts[idx].is_atom()) {
    chosen.push_back(facts[idx].atom());
    ++idx;
  }
  if (idx == facts.size()) {
    ++branches;
    return fm_refutes(chosen, limits);
  }
  const Formula& f = facts[idx];
  if (f.is_true()) {
    std::vector<Atom> keep = chosen;
    return refute_cases(facts, idx + 1, keep, limits, branches);
  }
  if (f.is_false()) return true;
  if (f.kind() != Formula::Kind::Or) return false;
  for (const auto& d : f.children()) {
    if (branches >= limits.max_branches) return false;
    std::vector<Atom> next = chosen;
    std::vector<Formula> rest(facts.begin() + static_cast<std::ptrdiff_t>(idx) + 1, facts.end());
    rest.insert(rest.begin(), d);
    if (!refute_cases(rest, 0, next, limits, branches)) return false;
  }
  return true;
}

struct SaturationState {
  std::vector<LinExpr> facts;
  std::map<LinExpr, std::size_t> index;  // var+meta part -> position
  bool contradiction = false;

  // Returns true when a new (or strictly stronger) fact was recorded.
  bool add(const LinExpr& e) {
    Formula f = make_atom(e, Rel::Ge);
    if (f.is_true()) return false;
    if (f.is_false()) {
      contradiction = true;
      return false;
    }
    const LinExpr& n = f.atom().expr();
    LinExpr key = n.plus_constant(-n.constant_term());
    auto it = index.find(key);
    if (it != index.end()) {
      if (facts[it->second].constant_term() <= n.constant_term()) return false;
      facts[it->second] = n;
      return true;
    }
    index.emplace(key, facts.size());
    facts.push_back(n);
    return true;
  }
};

}  // namespace

Atom metas_as_vars(const Atom& a) { return Atom(expr_metas_as_vars(a.expr()), a.rel(), a.style()); }

Formula metas_as_vars(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::True:
    case Formula::Kind::False:
      return f;
    case Formula::Kind::Atom:
      return make_atom(expr_metas_as_vars(f.atom().expr()), f.atom().rel(), f.atom().style());
    case Formula::Kind::Not:
      return f_not(metas_as_vars(f.children()[0]));
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      std::vector<Formula> ks;
      for (const auto& c : f.children()) ks.push_back(metas_as_vars(c));
      return f.kind() == Formula::Kind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
    }
    case Formula::Kind::Implies:
      return f_implies(metas_as_vars(f.children()[0]), metas_as_vars(f.children()[1]));
  }
  return f;
}

bool fm_refutes(const std::vector<Atom>& facts, const FmLimits& limits) {
  std::vector<LinExpr> ge, eq;
  for (const auto& a : facts) split_atom(a, ge, eq);
  return refute_linear(std::move(ge), std::move(eq), limits);
}

bool fm_refutes(const std::vector<Formula>& facts, const FmLimits& limits) {
  std::vector<Formula> flat;
  for (const auto& f : facts)
    for (const auto& c : conjuncts(f)) flat.push_back(c);
  for (const auto& f : flat)
    if (f.is_false()) return true;
  // Atoms first so that case splits see the strongest context.
  std::stable_partition(flat.begin(), flat.end(), [](const Formula& f) { return f.is_atom(); });
  std::vector<Atom> chosen;
  std::size_t branches = 0;
  return refute_cases(flat, 0, chosen, limits, branches);
}

bool clause_closed(const Clause& clause, const FmLimits& limits) {
  std::vector<Formula> neg;
  for (const auto& lit : clause) neg.push_back(negate_atom(lit));
  return fm_refutes(neg, limits);
}

Saturation fm_saturate(const std::vector<Atom>& assumptions, std::size_t budget) {
  SaturationState st;
  Saturation out;
  try {
    for (const auto& a : assumptions) {
      st.add(a.expr());
      if (a.rel() == Rel::Eq) st.add(-a.expr());
    }
    std::size_t derived = 0;
    bool truncated = false;
    // Pairs (i, j) with j < i are combined once each, in index order.
    for (std::size_t i = 1; i < st.facts.size() && !st.contradiction && !truncated; ++i) {
      for (std::size_t j = 0; j < i && !st.contradiction && !truncated; ++j) {
        const LinExpr a = st.facts[i];
        const LinExpr b = st.facts[j];
        for (const auto& t : a.vars()) {
          std::int64_t cb = b.coeff(t.name);
          if (cb == 0 || (cb > 0) == (t.coeff > 0)) continue;
          std::int64_t ca = abs_value(t.coeff), nb = abs_value(cb);
          std::int64_t g = gcd(ca, nb);
          if (st.add(a.scaled(nb / g) + b.scaled(ca / g))) ++derived;
          if (st.contradiction) break;
          if (derived >= budget) {
            truncated = true;
            break;
          }
        }
      }
    }
    out.truncated = truncated;
    out.derived = derived;
  } catch (const OverflowError&) {
    out.truncated = true;
  }
  out.contradiction = st.contradiction;
  for (const auto& e : st.facts) out.facts.emplace_back(e, Rel::Ge);
  return out;
}

void sort_candidates(std::vector<Atom>& atoms) {
  struct Keyed {
    std::size_t nvars, size;
    std::string text;
    Atom atom;
  };
  std::vector<Keyed> ks;
  for (auto& a : atoms)
    ks.push_back({a.expr().vars().size(), a.expr().vars().size() + a.expr().metas().size(), print_atom(a), a});
  std::stable_sort(ks.begin(), ks.end(), [](const Keyed& x, const Keyed& y) {
    if (x.nvars != y.nvars) return x.nvars < y.nvars;
    if (x.size != y.size) return x.size < y.size;
    return x.text < y.text;
  });
  atoms.clear();
  for (auto& k : ks) atoms.push_back(std::move(k.atom));
}

namespace {

AbductionResult abduct_uncached(const Formula& f) {
  std::vector<Clause> cnf;
  try {
    cnf = to_cnf(f);
  } catch (const CnfBudgetExceeded&) {
    return {};
  }
  AbductionResult out;
  bool all_closed = true;
  std::vector<Atom> cands;
  for (const auto& clause : cnf) {
    if (clause_closed(clause)) continue;
    std::vector<Atom> ge_lits;
    std::vector<LinExpr> eqs;
    for (const auto& lit : clause) {
      if (lit.rel() == Rel::Eq) {
        cands.push_back(lit);
        if (lit.expr().has_metas()) eqs.push_back(lit.expr());
      } else {
        ge_lits.push_back(lit);
      }
    }
    // An equality literal with metavariables, e == 0, is weakened to e >= 0
    // or -e >= 0 so that one-sided bounds on the metavariables show up.
    if (eqs.size() > 3) eqs.clear();
    bool open = !eqs.empty();
    for (std::size_t mask = 0; mask < (std::size_t{1} << eqs.size()); ++mask) {
      std::vector<Atom> assumptions;
      auto assume_not = [&](const Atom& lit) {
        Formula n = negate_atom(lit);
        if (n.is_atom()) assumptions.push_back(n.atom());
      };
      for (const auto& lit : ge_lits) assume_not(lit);
      for (std::size_t k = 0; k < eqs.size(); ++k) assume_not(Atom(mask >> k & 1 ? -eqs[k] : eqs[k], Rel::Ge));
      Saturation sat = fm_saturate(assumptions);
      if (sat.contradiction) continue;
      open = true;
      for (const auto& fact : sat.facts) {
        Formula n = negate_atom(fact);
        if (n.is_atom()) cands.push_back(n.atom());
      }
    }
    if (open) all_closed = false;
  }
  if (all_closed) return AbductionResult::Valid();
  std::vector<Atom> uniq;
  for (const auto& c : cands) {
    if (c.expr().is_constant()) continue;
    if (std::find(uniq.begin(), uniq.end(), c) == uniq.end()) uniq.push_back(c.with_style({}));
  }
  sort_candidates(uniq);
  out.suggestions = std::move(uniq);
  return out;
}

}  // namespace

AbductionResult abduct(const Formula& f) {
  thread_local std::unordered_map<std::string, AbductionResult> cache;
  std::string key = formula_key(f);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  AbductionResult r = abduct_uncached(f);
  if (cache.size() > 50000) cache.clear();
  cache.emplace(std::move(key), r);
  return r;
}

MetaInterval meta_bounds(const std::string& meta, const std::vector<Formula>& constraints) {
  std::vector<LinExpr> ge, eq;
  for (const auto& c : constraints)
    for (const auto& part : conjuncts(c))
      if (part.is_atom()) split_atom(part.atom(), ge, eq);
      else if (part.is_false()) return {std::nullopt, std::nullopt, true};
  MetaInterval out;
  const std::string name = meta + "?";
  try {
    for (const auto& e : eq) {
      ge.push_back(e);
      ge.push_back(-e);
    }
    FmSystem sys(FmLimits{}.max_constraints);
    for (const auto& g : ge) sys.add_ge(g);
    while (!sys.contradiction() && !sys.overflowed()) {
      auto v = sys.pick(&name);
      if (!v) break;
      sys.eliminate(*v);
    }
    if (sys.contradiction()) return {std::nullopt, std::nullopt, true};
    for (const auto& e : sys.constraints()) {
      std::int64_t a = e.coeff(name);
      if (a == 0 || e.vars().size() != 1) continue;
      std::int64_t k = e.constant_term();
      if (a > 0) {
        std::int64_t lo = ceil_div(-k, a);
        out.lo = out.lo ? std::max(*out.lo, lo) : lo;
      } else {
        std::int64_t hi = floor_div(k, -a);
        out.hi = out.hi ? std::min(*out.hi, hi) : hi;
      }
    }
  } catch (const OverflowError&) {
  }
  if (out.lo && out.hi && *out.lo > *out.hi) out.empty = true;
  return out;
}

std::int64_t abduct_refinement(const std::string& meta, BoundType bound, const std::vector<Formula>& constraints) {
  MetaInterval iv = meta_bounds(meta, constraints);
  if (iv.empty) throw RefinementError("unsatisfiable constraints on " + meta + "?");
  std::vector<std::int64_t> order;
  constexpr int kTries = 64;
  switch (bound) {
    case BoundType::Upper:
      if (!iv.lo) throw RefinementError(meta + "? has no lower limit");
      for (int i = 0; i < kTries; ++i) order.push_back(*iv.lo + i);
      break;
    case BoundType::Lower:
      if (!iv.hi) throw RefinementError(meta + "? has no upper limit");
      for (int i = 0; i < kTries; ++i) order.push_back(*iv.hi - i);
      break;
    case BoundType::Free: {
      std::int64_t lo = iv.lo.value_or(INT64_MIN / 4), hi = iv.hi.value_or(INT64_MAX / 4);
      std::int64_t start = std::clamp<std::int64_t>(0, lo, hi);
      order.push_back(start);
      for (int d = 1; d < kTries; ++d) {
        if (start + d <= hi) order.push_back(start + d);
        if (start - d >= lo) order.push_back(start - d);
      }
      break;
    }
  }
  for (std::int64_t v : order) {
    if ((iv.lo && v < *iv.lo) || (iv.hi && v > *iv.hi)) continue;
    std::vector<Formula> inst;
    for (const auto& c : constraints) inst.push_back(subst_meta(c, meta, v));
    if (!fm_refutes(inst)) return v;
  }
  throw RefinementError("no admissible value for " + meta + "?");
}

}  // namespace invsynth
