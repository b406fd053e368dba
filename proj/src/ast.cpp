#include "invsynth/ast.hpp"

#include <algorithm>
#include <sstream>

namespace invsynth {

// ---------------------------------------------------------------------------
// LinExpr

namespace {

// Merges two sorted term lists with multipliers, dropping zero coefficients.
std::vector<Term> merge_terms(const std::vector<Term>& a, std::int64_t ka, const std::vector<Term>& b,
                              std::int64_t kb) {
  std::vector<Term> out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].name < b[j].name)) {
      std::int64_t c = checked_mul(a[i].coeff, ka);
      if (c != 0) out.push_back({a[i].name, c});
      ++i;
    } else if (i == a.size() || b[j].name < a[i].name) {
      std::int64_t c = checked_mul(b[j].coeff, kb);
      if (c != 0) out.push_back({b[j].name, c});
      ++j;
    } else {
      std::int64_t c = checked_add(checked_mul(a[i].coeff, ka), checked_mul(b[j].coeff, kb));
      if (c != 0) out.push_back({a[i].name, c});
      ++i;
      ++j;
    }
  }
  return out;
}

std::int64_t lookup(const std::vector<Term>& ts, std::string_view name) {
  auto it = std::lower_bound(ts.begin(), ts.end(), name,
                             [](const Term& t, std::string_view n) { return t.name < n; });
  if (it != ts.end() && it->name == name) return it->coeff;
  return 0;
}

}  // namespace

LinExpr LinExpr::constant(std::int64_t k) {
  LinExpr e;
  e.const_ = k;
  return e;
}

LinExpr LinExpr::var(std::string name, std::int64_t coeff) {
  LinExpr e;
  if (coeff != 0) e.vars_.push_back({std::move(name), coeff});
  return e;
}

LinExpr LinExpr::meta(std::string id, std::int64_t coeff) {
  LinExpr e;
  if (coeff != 0) e.metas_.push_back({std::move(id), coeff});
  return e;
}

std::int64_t LinExpr::coeff(std::string_view name) const { return lookup(vars_, name); }
std::int64_t LinExpr::meta_coeff(std::string_view id) const { return lookup(metas_, id); }

LinExpr LinExpr::operator+(const LinExpr& o) const {
  LinExpr r;
  r.vars_ = merge_terms(vars_, 1, o.vars_, 1);
  r.metas_ = merge_terms(metas_, 1, o.metas_, 1);
  r.const_ = checked_add(const_, o.const_);
  return r;
}

LinExpr LinExpr::operator-(const LinExpr& o) const {
  LinExpr r;
  r.vars_ = merge_terms(vars_, 1, o.vars_, -1);
  r.metas_ = merge_terms(metas_, 1, o.metas_, -1);
  r.const_ = checked_sub(const_, o.const_);
  return r;
}

LinExpr LinExpr::scaled(std::int64_t k) const {
  LinExpr r;
  if (k == 0) return r;
  r.vars_ = merge_terms(vars_, k, {}, 0);
  r.metas_ = merge_terms(metas_, k, {}, 0);
  r.const_ = checked_mul(const_, k);
  return r;
}

LinExpr LinExpr::plus_constant(std::int64_t k) const {
  LinExpr r = *this;
  r.const_ = checked_add(const_, k);
  return r;
}

LinExpr LinExpr::subst_var(std::string_view name, const LinExpr& e) const {
  std::int64_t c = coeff(name);
  if (c == 0) return *this;
  LinExpr rest = *this;
  rest.vars_.erase(std::remove_if(rest.vars_.begin(), rest.vars_.end(),
                                  [&](const Term& t) { return t.name == name; }),
                   rest.vars_.end());
  return rest + e.scaled(c);
}

LinExpr LinExpr::subst_meta(std::string_view id, std::int64_t k) const {
  std::int64_t c = meta_coeff(id);
  if (c == 0) return *this;
  LinExpr rest = *this;
  rest.metas_.erase(std::remove_if(rest.metas_.begin(), rest.metas_.end(),
                                   [&](const Term& t) { return t.name == id; }),
                    rest.metas_.end());
  rest.const_ = checked_add(rest.const_, checked_mul(c, k));
  return rest;
}

LinExpr LinExpr::var_part() const {
  LinExpr r;
  r.vars_ = vars_;
  return r;
}

LinExpr LinExpr::offset_part() const {
  LinExpr r;
  r.const_ = const_;
  r.metas_ = metas_;
  return r;
}

std::int64_t LinExpr::eval(const std::map<std::string, std::int64_t>& env,
                           const std::map<std::string, std::int64_t>* meta_env) const {
  std::int64_t acc = const_;
  for (const auto& t : vars_) {
    auto it = env.find(t.name);
    if (it == env.end()) throw std::out_of_range("unbound variable '" + t.name + "'");
    acc = checked_add(acc, checked_mul(t.coeff, it->second));
  }
  for (const auto& t : metas_) {
    if (meta_env == nullptr) throw std::invalid_argument("unsubstituted metavariable '" + t.name + "'");
    auto it = meta_env->find(t.name);
    if (it == meta_env->end()) throw std::out_of_range("unbound metavariable '" + t.name + "'");
    acc = checked_add(acc, checked_mul(t.coeff, it->second));
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Formula

struct Formula::Node {
  Kind kind;
  std::optional<Atom> atom;
  std::vector<Formula> kids;
};

namespace {

const std::shared_ptr<const Formula::Node>& true_node() {
  static const auto n = std::make_shared<const Formula::Node>(Formula::Node{Formula::Kind::True, {}, {}});
  return n;
}

}  // namespace

Formula make_node(Formula::Kind k, std::vector<Formula> kids) {
  return Formula(std::make_shared<const Formula::Node>(Formula::Node{k, std::nullopt, std::move(kids)}));
}

Formula::Formula() : node_(true_node()) {}

Formula Formula::truth() { return Formula(); }

Formula Formula::falsity() {
  static const auto n = std::make_shared<const Node>(Node{Kind::False, {}, {}});
  return Formula(n);
}

Formula Formula::from_atom(Atom a) {
  return Formula(std::make_shared<const Node>(Node{Kind::Atom, std::move(a), {}}));
}

Formula::Kind Formula::kind() const { return node_->kind; }

const Atom& Formula::atom() const {
  if (!node_->atom) throw std::logic_error("formula is not an atom");
  return *node_->atom;
}

const std::vector<Formula>& Formula::children() const { return node_->kids; }

bool operator==(const Formula& a, const Formula& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  if (a.kind() == Formula::Kind::Atom) return a.atom() == b.atom();
  return a.children() == b.children();
}

std::strong_ordering operator<=>(const Formula& a, const Formula& b) {
  if (a.node_ == b.node_) return std::strong_ordering::equal;
  if (auto c = a.kind() <=> b.kind(); c != 0) return c;
  if (a.kind() == Formula::Kind::Atom) return a.atom() <=> b.atom();
  const auto& x = a.children();
  const auto& y = b.children();
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (auto c = x[i] <=> y[i]; c != 0) return c;
  }
  return x.size() <=> y.size();
}

Formula make_atom(const LinExpr& e, Rel rel, AtomStyle style) {
  if (e.is_constant()) {
    std::int64_t k = e.constant_term();
    bool holds = rel == Rel::Ge ? k >= 0 : k == 0;
    return holds ? Formula::truth() : Formula::falsity();
  }
  LinExpr norm = e;
  if (!e.has_metas()) {
    std::int64_t g = 0;
    for (const auto& t : e.vars()) g = gcd(g, t.coeff);
    if (rel == Rel::Ge) {
      if (g > 1) {
        LinExpr scaled;
        for (const auto& t : e.vars()) scaled = scaled + LinExpr::var(t.name, t.coeff / g);
        norm = scaled.plus_constant(floor_div(e.constant_term(), g));
      }
    } else {
      if (e.constant_term() % g != 0) return Formula::falsity();
      if (g > 1) {
        LinExpr scaled;
        for (const auto& t : e.vars()) scaled = scaled + LinExpr::var(t.name, t.coeff / g);
        norm = scaled.plus_constant(e.constant_term() / g);
      }
    }
  } else {
    // Only exact division: tightening needs a known constant.
    std::int64_t g = gcd(0, e.constant_term());
    for (const auto& t : e.vars()) g = gcd(g, t.coeff);
    for (const auto& t : e.metas()) g = gcd(g, t.coeff);
    if (g > 1) {
      LinExpr scaled = LinExpr::constant(e.constant_term() / g);
      for (const auto& t : e.vars()) scaled = scaled + LinExpr::var(t.name, t.coeff / g);
      for (const auto& t : e.metas()) scaled = scaled + LinExpr::meta(t.name, t.coeff / g);
      norm = scaled;
    }
  }
  if (rel == Rel::Eq) {
    std::int64_t lead = norm.has_vars() ? norm.vars().front().coeff : norm.metas().front().coeff;
    if (lead < 0) norm = -norm;
  }
  return Formula::from_atom(Atom(std::move(norm), rel, style));
}

Formula normalize_atom(const LinExpr& lhs, SourceRel rel, const LinExpr& rhs) {
  switch (rel) {
    case SourceRel::Ge:
      return make_atom(lhs - rhs, Rel::Ge, {false, false});
    case SourceRel::Gt:
      return make_atom((lhs - rhs).plus_constant(-1), Rel::Ge, {true, false});
    case SourceRel::Le:
      return make_atom(rhs - lhs, Rel::Ge, {false, true});
    case SourceRel::Lt:
      return make_atom((rhs - lhs).plus_constant(-1), Rel::Ge, {true, true});
    case SourceRel::Eq:
      return make_atom(lhs - rhs, Rel::Eq);
    case SourceRel::Ne: {
      Formula eq = make_atom(lhs - rhs, Rel::Eq);
      return eq.is_atom() ? negate_atom(eq.atom()) : f_not(eq);
    }
  }
  throw std::logic_error("unknown relation");
}

Formula negate_atom(const Atom& a) {
  if (a.rel() == Rel::Ge) {
    AtomStyle s{!a.style().strict, !a.style().mirrored};
    return make_atom((-a.expr()).plus_constant(-1), Rel::Ge, s);
  }
  return f_or(make_atom(a.expr().plus_constant(-1), Rel::Ge, {true, false}),
              make_atom((-a.expr()).plus_constant(-1), Rel::Ge, {true, true}));
}

Formula f_not(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::True:
      return Formula::falsity();
    case Formula::Kind::False:
      return Formula::truth();
    case Formula::Kind::Atom:
      return negate_atom(f.atom());
    case Formula::Kind::Not:
      return f.children()[0];
    default:
      if (auto eq = as_disequality(f)) return Formula::from_atom(*eq);
      return make_node(Formula::Kind::Not, {f});
  }
}

namespace {

bool is_diseq_pair(const Formula& a, const Formula& b) {
  if (!a.is_atom() || !b.is_atom()) return false;
  if (a.atom().rel() != Rel::Ge || b.atom().rel() != Rel::Ge) return false;
  LinExpr sum = a.atom().expr() + b.atom().expr();
  return sum.is_constant() && sum.constant_term() == -2 && a.atom().expr().has_vars();
}

Formula flatten_junction(Formula::Kind kind, std::vector<Formula> fs) {
  const bool is_and = kind == Formula::Kind::And;
  std::vector<Formula> out;
  for (auto& f : fs) {
    if (f.kind() == kind) {
      for (const auto& c : f.children())
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
      continue;
    }
    if (is_and ? f.is_true() : f.is_false()) continue;
    if (is_and ? f.is_false() : f.is_true()) return f;
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(std::move(f));
  }
  if (out.empty()) return is_and ? Formula::truth() : Formula::falsity();
  if (out.size() == 1) return out.front();
  if (!is_and) {
    // A disequality pair starts with the atom whose leading coefficient is positive.
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
      if (!is_diseq_pair(out[i], out[i + 1])) continue;
      if (out[i].atom().expr().vars().front().coeff < 0) std::swap(out[i], out[i + 1]);
      ++i;
    }
  }
  return make_node(kind, std::move(out));
}

}  // namespace

Formula f_and(std::vector<Formula> fs) { return flatten_junction(Formula::Kind::And, std::move(fs)); }
Formula f_or(std::vector<Formula> fs) { return flatten_junction(Formula::Kind::Or, std::move(fs)); }

Formula f_implies(const Formula& a, const Formula& b) {
  if (a.is_true()) return b;
  if (a.is_false() || b.is_true()) return Formula::truth();
  return make_node(Formula::Kind::Implies, {a, b});
}

namespace {

template <typename AtomFn>
Formula map_atoms(const Formula& f, const AtomFn& fn) {
  switch (f.kind()) {
    case Formula::Kind::True:
    case Formula::Kind::False:
      return f;
    case Formula::Kind::Atom:
      return fn(f.atom());
    case Formula::Kind::Not:
      return f_not(map_atoms(f.children()[0], fn));
    case Formula::Kind::And: {
      std::vector<Formula> ks;
      for (const auto& c : f.children()) ks.push_back(map_atoms(c, fn));
      return f_and(std::move(ks));
    }
    case Formula::Kind::Or: {
      std::vector<Formula> ks;
      for (const auto& c : f.children()) ks.push_back(map_atoms(c, fn));
      return f_or(std::move(ks));
    }
    case Formula::Kind::Implies:
      return f_implies(map_atoms(f.children()[0], fn), map_atoms(f.children()[1], fn));
  }
  throw std::logic_error("unknown formula kind");
}

template <typename Fn>
void for_each_atom(const Formula& f, const Fn& fn) {
  if (f.is_atom()) {
    fn(f.atom());
    return;
  }
  for (const auto& c : f.children()) for_each_atom(c, fn);
}

}  // namespace

Formula subst_var(const Formula& f, std::string_view x, const LinExpr& e) {
  return map_atoms(f, [&](const Atom& a) {
    if (a.expr().coeff(x) == 0) return Formula::from_atom(a);
    return make_atom(a.expr().subst_var(x, e), a.rel(), a.style());
  });
}

Formula subst_meta(const Formula& f, std::string_view m, std::int64_t k) {
  return map_atoms(f, [&](const Atom& a) {
    if (a.expr().meta_coeff(m) == 0) return Formula::from_atom(a);
    return make_atom(a.expr().subst_meta(m, k), a.rel(), a.style());
  });
}

Formula renormalize(const Formula& f) {
  return map_atoms(f, [](const Atom& a) { return make_atom(a.expr(), a.rel(), a.style()); });
}

std::set<std::string> free_vars(const Formula& f) {
  std::set<std::string> out;
  for_each_atom(f, [&](const Atom& a) {
    for (const auto& t : a.expr().vars()) out.insert(t.name);
  });
  return out;
}

std::set<std::string> metas_of(const Formula& f) {
  std::set<std::string> out;
  for_each_atom(f, [&](const Atom& a) {
    for (const auto& t : a.expr().metas()) out.insert(t.name);
  });
  return out;
}

bool meta_only(const Formula& f) { return free_vars(f).empty() && !metas_of(f).empty(); }

std::vector<Formula> conjuncts(const Formula& f) {
  if (f.is_true()) return {};
  if (f.kind() == Formula::Kind::And) return f.children();
  return {f};
}

std::vector<Formula> disjuncts(const Formula& f) {
  if (f.is_false()) return {};
  if (f.kind() == Formula::Kind::Or) return f.children();
  return {f};
}


std::optional<Atom> as_disequality(const Formula& f) {
  if (f.kind() != Formula::Kind::Or || f.children().size() != 2) return std::nullopt;
  const auto& a = f.children()[0];
  const auto& b = f.children()[1];
  if (!is_diseq_pair(a, b)) return std::nullopt;
  // a: e - 1 >= 0, so the equality is e == 0.
  Formula eq = make_atom(a.atom().expr().plus_constant(1), Rel::Eq);
  if (!eq.is_atom()) return std::nullopt;
  return eq.atom();
}

std::vector<Formula> disjunct_units(const Formula& f) {
  auto ds = disjuncts(f);
  std::vector<Formula> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (i + 1 < ds.size() && is_diseq_pair(ds[i], ds[i + 1])) {
      out.push_back(make_node(Formula::Kind::Or, {ds[i], ds[i + 1]}));
      ++i;
    } else {
      out.push_back(ds[i]);
    }
  }
  return out;
}

bool eval(const Formula& f, const Env& env, const Env* meta_env) {
  switch (f.kind()) {
    case Formula::Kind::True:
      return true;
    case Formula::Kind::False:
      return false;
    case Formula::Kind::Atom: {
      std::int64_t v = f.atom().expr().eval(env, meta_env);
      return f.atom().rel() == Rel::Ge ? v >= 0 : v == 0;
    }
    case Formula::Kind::Not:
      return !eval(f.children()[0], env, meta_env);
    case Formula::Kind::And:
      for (const auto& c : f.children())
        if (!eval(c, env, meta_env)) return false;
      return true;
    case Formula::Kind::Or:
      for (const auto& c : f.children())
        if (eval(c, env, meta_env)) return true;
      return false;
    case Formula::Kind::Implies:
      return !eval(f.children()[0], env, meta_env) || eval(f.children()[1], env, meta_env);
  }
  throw std::logic_error("unknown formula kind");
}

// ---------------------------------------------------------------------------
// CNF

namespace {

using Cnf = std::vector<Clause>;

bool complementary(const Atom& a, const Atom& b) {
  if (a.rel() != Rel::Ge || b.rel() != Rel::Ge) return false;
  LinExpr sum = a.expr() + b.expr();
  // e >= 0 and -e - 1 >= 0 cover every integer.
  return sum.is_constant() && sum.constant_term() >= -1;
}

// Returns false when the clause is a tautology.
bool add_literal(Clause& c, const Atom& a) {
  for (const auto& b : c) {
    if (b == a) return true;
    if (complementary(a, b)) return false;
  }
  c.push_back(a);
  return true;
}

Cnf cnf_of(const Formula& f, bool positive, std::size_t budget);

Cnf cnf_and(const std::vector<Cnf>& parts, std::size_t budget) {
  Cnf out;
  for (const auto& p : parts)
    for (const auto& c : p) {
      if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
      if (out.size() > budget) throw CnfBudgetExceeded();
    }
  return out;
}

Cnf cnf_or(const std::vector<Cnf>& parts, std::size_t budget) {
  Cnf acc{Clause{}};
  for (const auto& p : parts) {
    if (p.empty()) return {};  // a True disjunct
    Cnf next;
    for (const auto& c1 : acc) {
      for (const auto& c2 : p) {
        Clause merged = c1;
        bool keep = true;
        for (const auto& a : c2) {
          if (!add_literal(merged, a)) {
            keep = false;
            break;
          }
        }
        if (!keep) continue;
        if (std::find(next.begin(), next.end(), merged) == next.end()) next.push_back(std::move(merged));
        if (next.size() > budget) throw CnfBudgetExceeded();
      }
    }
    acc = std::move(next);
    if (acc.empty()) return {};
  }
  return acc;
}

Cnf cnf_atom(const Formula& lit) {
  // `lit` is an atom, True/False, or a disjunction of atoms.
  if (lit.is_true()) return {};
  if (lit.is_false()) return {Clause{}};
  if (lit.is_atom()) return {Clause{lit.atom()}};
  Clause c;
  for (const auto& d : lit.children())
    if (!add_literal(c, d.atom())) return {};
  return {c};
}

Cnf cnf_of(const Formula& f, bool positive, std::size_t budget) {
  using K = Formula::Kind;
  switch (f.kind()) {
    case K::True:
      return positive ? Cnf{} : Cnf{Clause{}};
    case K::False:
      return positive ? Cnf{Clause{}} : Cnf{};
    case K::Atom:
      return cnf_atom(positive ? f : negate_atom(f.atom()));
    case K::Not:
      return cnf_of(f.children()[0], !positive, budget);
    case K::And:
    case K::Or: {
      std::vector<Cnf> parts;
      for (const auto& c : f.children()) parts.push_back(cnf_of(c, positive, budget));
      bool conj = (f.kind() == K::And) == positive;
      return conj ? cnf_and(parts, budget) : cnf_or(parts, budget);
    }
    case K::Implies: {
      std::vector<Cnf> parts{cnf_of(f.children()[0], !positive, budget),
                             cnf_of(f.children()[1], positive, budget)};
      return positive ? cnf_or(parts, budget) : cnf_and(parts, budget);
    }
  }
  throw std::logic_error("unknown formula kind");
}

void write_terms(std::ostringstream& os, const std::vector<Term>& ts) {
  for (const auto& t : ts) os << t.coeff << '*' << t.name << ' ';
}

void write_key(std::ostringstream& os, const Formula& f) {
  using K = Formula::Kind;
  switch (f.kind()) {
    case K::True:
      os << 'T';
      return;
    case K::False:
      os << 'F';
      return;
    case K::Atom: {
      const auto& e = f.atom().expr();
      os << '[';
      write_terms(os, e.vars());
      os << "| ";
      write_terms(os, e.metas());
      os << e.constant_term() << (f.atom().rel() == Rel::Ge ? ">=" : "==") << ']';
      return;
    }
    default:
      os << (f.kind() == K::Not ? "!(" : f.kind() == K::And ? "&(" : f.kind() == K::Or ? "|(" : ">(");
      for (const auto& c : f.children()) {
        write_key(os, c);
        os << ',';
      }
      os << ')';
  }
}

}  // namespace

std::vector<Clause> to_cnf(const Formula& f, std::size_t clause_budget) {
  return cnf_of(f, true, clause_budget);
}

std::string formula_key(const Formula& f) {
  std::ostringstream os;
  write_key(os, f);
  return os.str();
}

// ---------------------------------------------------------------------------
// Statements

struct Stmt::Node {
  Kind kind;
  std::string target;
  LinExpr value;
  std::optional<Formula> guard;
  Formula cond;
  std::vector<Stmt> parts;  // Seq: body; If: {then, else}
  bool has_else = false;
};

Stmt::Stmt() : node_(std::make_shared<const Node>(Node{Kind::Skip, {}, {}, {}, {}, {}, false})) {}

Stmt Stmt::skip() { return Stmt(); }

Stmt Stmt::assign(std::string target, LinExpr value) {
  return Stmt(std::make_shared<const Node>(Node{Kind::Assign, std::move(target), std::move(value), {}, {}, {}, false}));
}

Stmt Stmt::seq(std::vector<Stmt> parts) {
  std::vector<Stmt> flat;
  for (auto& p : parts) {
    if (p.kind() == Kind::Skip) continue;
    if (p.kind() == Kind::Seq) {
      for (const auto& q : p.parts()) flat.push_back(q);
    } else {
      flat.push_back(std::move(p));
    }
  }
  if (flat.empty()) return skip();
  if (flat.size() == 1) return flat.front();
  return Stmt(std::make_shared<const Node>(Node{Kind::Seq, {}, {}, {}, {}, std::move(flat), false}));
}

Stmt Stmt::if_then(std::optional<Formula> guard, Stmt then_branch, std::optional<Stmt> else_branch) {
  bool has_else = else_branch.has_value();
  std::vector<Stmt> parts{std::move(then_branch), else_branch ? std::move(*else_branch) : skip()};
  return Stmt(std::make_shared<const Node>(Node{Kind::If, {}, {}, std::move(guard), {}, std::move(parts), has_else}));
}

Stmt Stmt::assume(Formula cond) {
  return Stmt(std::make_shared<const Node>(Node{Kind::Assume, {}, {}, {}, std::move(cond), {}, false}));
}

Stmt::Kind Stmt::kind() const { return node_->kind; }
const std::string& Stmt::target() const { return node_->target; }
const LinExpr& Stmt::value() const { return node_->value; }
const std::optional<Formula>& Stmt::guard() const { return node_->guard; }
const Stmt& Stmt::then_branch() const { return node_->parts.at(0); }
const Stmt& Stmt::else_branch() const { return node_->parts.at(1); }
bool Stmt::has_else() const { return node_->has_else; }
const Formula& Stmt::condition() const { return node_->cond; }
const std::vector<Stmt>& Stmt::parts() const { return node_->parts; }

bool operator==(const Stmt& a, const Stmt& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Stmt::Kind::Skip:
      return true;
    case Stmt::Kind::Assign:
      return a.target() == b.target() && a.value() == b.value();
    case Stmt::Kind::Seq:
      return a.parts() == b.parts();
    case Stmt::Kind::If:
      return a.guard() == b.guard() && a.has_else() == b.has_else() && a.parts() == b.parts();
    case Stmt::Kind::Assume:
      return a.condition() == b.condition();
  }
  return false;
}

namespace {

void collect_stmt(const Stmt& s, std::set<std::string>& modified, std::set<std::string>& all) {
  switch (s.kind()) {
    case Stmt::Kind::Skip:
      return;
    case Stmt::Kind::Assign:
      modified.insert(s.target());
      all.insert(s.target());
      for (const auto& t : s.value().vars()) all.insert(t.name);
      return;
    case Stmt::Kind::Seq:
      for (const auto& p : s.parts()) collect_stmt(p, modified, all);
      return;
    case Stmt::Kind::If:
      if (s.guard())
        for (const auto& v : free_vars(*s.guard())) all.insert(v);
      collect_stmt(s.then_branch(), modified, all);
      collect_stmt(s.else_branch(), modified, all);
      return;
    case Stmt::Kind::Assume:
      for (const auto& v : free_vars(s.condition())) all.insert(v);
      return;
  }
}

}  // namespace

std::set<std::string> modified_vars(const Stmt& s) {
  std::set<std::string> m, a;
  collect_stmt(s, m, a);
  return m;
}

std::set<std::string> stmt_vars(const Stmt& s) {
  std::set<std::string> m, a;
  collect_stmt(s, m, a);
  return a;
}

std::size_t count_star_branches(const Stmt& s) {
  switch (s.kind()) {
    case Stmt::Kind::Seq: {
      std::size_t n = 0;
      for (const auto& p : s.parts()) n += count_star_branches(p);
      return n;
    }
    case Stmt::Kind::If:
      return (s.guard() ? 0 : 1) + count_star_branches(s.then_branch()) + count_star_branches(s.else_branch());
    default:
      return 0;
  }
}

bool is_empty_body(const Stmt& s) { return s.kind() == Stmt::Kind::Skip; }

bool LoopTask::is_parameter(std::string_view name) const {
  for (const auto& v : vars)
    if (v.name == name) return v.kind == VarKind::Parameter;
  return false;
}

std::vector<std::string> LoopTask::var_names() const {
  std::vector<std::string> out;
  for (const auto& v : vars) out.push_back(v.name);
  return out;
}

void infer_var_kinds(LoopTask& t) {
  std::vector<std::string> order;
  auto note = [&](const std::string& n) {
    if (std::find(order.begin(), order.end(), n) == order.end()) order.push_back(n);
  };
  for (const auto& v : t.vars) note(v.name);
  auto note_formula = [&](const Formula& f) {
    for (const auto& v : free_vars(f)) note(v);
  };
  note_formula(t.init);
  if (t.guard) note_formula(*t.guard);
  for (const auto& v : stmt_vars(t.body)) note(v);
  note_formula(t.post);
  for (const auto& inv : t.invariants) note_formula(inv);
  auto mod = modified_vars(t.body);
  t.vars.clear();
  for (const auto& n : order)
    t.vars.push_back({n, mod.count(n) ? VarKind::Mutable : VarKind::Parameter});
}

}  // namespace invsynth
