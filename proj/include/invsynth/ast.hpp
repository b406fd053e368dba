#pragma once

// Terms, atoms, formulas, loop-free statements and single-loop tasks over
// linear integer arithmetic. All values are immutable once built and can be
// shared freely between threads.

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "invsynth/numeric.hpp"

namespace invsynth {

enum class VarKind { Mutable, Parameter };

struct VarId {
  std::string name;
  VarKind kind = VarKind::Mutable;

  friend bool operator==(const VarId&, const VarId&) = default;
};

/// How a metavariable occurs in a candidate invariant; drives the direction
/// in which it is instantiated.
enum class BoundType { Upper, Lower, Free };

struct MetaVar {
  std::string id;
  BoundType bound_type = BoundType::Free;
};

struct Term {
  std::string name;
  std::int64_t coeff = 0;

  friend auto operator<=>(const Term&, const Term&) = default;
};

/// Affine expression  sum(a_k * x_k) + k + sum(b_j * m_j)  where x_k are
/// program variables and m_j metavariables. Terms are kept sorted by name and
/// never carry a zero coefficient.
class LinExpr {
 public:
  LinExpr() = default;

  static LinExpr constant(std::int64_t k);
  static LinExpr var(std::string name, std::int64_t coeff = 1);
  static LinExpr meta(std::string id, std::int64_t coeff = 1);

  const std::vector<Term>& vars() const { return vars_; }
  const std::vector<Term>& metas() const { return metas_; }
  std::int64_t constant_term() const { return const_; }

  std::int64_t coeff(std::string_view name) const;
  std::int64_t meta_coeff(std::string_view id) const;
  bool has_vars() const { return !vars_.empty(); }
  bool has_metas() const { return !metas_.empty(); }
  bool is_constant() const { return vars_.empty() && metas_.empty(); }

  LinExpr operator+(const LinExpr& o) const;
  LinExpr operator-(const LinExpr& o) const;
  LinExpr operator-() const { return scaled(-1); }
  LinExpr scaled(std::int64_t k) const;
  LinExpr plus_constant(std::int64_t k) const;

  /// Replaces variable `name` by `e`.
  LinExpr subst_var(std::string_view name, const LinExpr& e) const;
  LinExpr subst_meta(std::string_view id, std::int64_t k) const;

  /// Same expression with the variable part only (no constant, no metas).
  LinExpr var_part() const;
  /// Constant plus metavariable part.
  LinExpr offset_part() const;

  /// Evaluates the expression; throws if a variable or metavariable is unbound.
  std::int64_t eval(const std::map<std::string, std::int64_t>& env,
                    const std::map<std::string, std::int64_t>* meta_env = nullptr) const;

  friend auto operator<=>(const LinExpr&, const LinExpr&) = default;

 private:
  std::vector<Term> vars_;
  std::int64_t const_ = 0;
  std::vector<Term> metas_;
};

enum class Rel { Ge, Eq };

/// Relations accepted by the surface syntax.
enum class SourceRel { Lt, Le, Gt, Ge, Eq, Ne };

/// Presentation hints carried by an atom. They never take part in equality.
struct AtomStyle {
  bool strict = false;    // print `a > b` instead of `a >= b + 1`
  bool mirrored = false;  // print the two sides swapped
};

/// Normalized atom `expr >= 0` or `expr == 0`.
class Atom {
 public:
  Atom(LinExpr expr, Rel rel, AtomStyle style = {}) : expr_(std::move(expr)), rel_(rel), style_(style) {}

  const LinExpr& expr() const { return expr_; }
  Rel rel() const { return rel_; }
  const AtomStyle& style() const { return style_; }
  Atom with_style(AtomStyle s) const { return Atom(expr_, rel_, s); }

  friend bool operator==(const Atom& a, const Atom& b) { return a.rel_ == b.rel_ && a.expr_ == b.expr_; }
  friend std::strong_ordering operator<=>(const Atom& a, const Atom& b) {
    if (auto c = a.rel_ <=> b.rel_; c != 0) return c;
    return a.expr_ <=> b.expr_;
  }

 private:
  LinExpr expr_;
  Rel rel_;
  AtomStyle style_;
};

class Formula {
 public:
  enum class Kind { True, False, Atom, Not, And, Or, Implies };

  Formula();  // True

  static Formula truth();
  static Formula falsity();
  /// Wraps an already-normalized atom. Use `make_atom` to normalize.
  static Formula from_atom(Atom a);

  Kind kind() const;
  bool is_true() const { return kind() == Kind::True; }
  bool is_false() const { return kind() == Kind::False; }
  bool is_atom() const { return kind() == Kind::Atom; }
  const Atom& atom() const;
  const std::vector<Formula>& children() const;

  friend bool operator==(const Formula& a, const Formula& b);
  friend std::strong_ordering operator<=>(const Formula& a, const Formula& b);

  struct Node;

 private:
  explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;

  friend Formula make_node(Kind, std::vector<Formula>);
};

/// Normalizes `e rel 0`: integer tightening when metavariable-free, ground
/// atoms folded to True/False.
Formula make_atom(const LinExpr& e, Rel rel, AtomStyle style = {});
/// Normalizes `lhs rel rhs`. `!=` yields a disjunction of two strict atoms.
Formula normalize_atom(const LinExpr& lhs, SourceRel rel, const LinExpr& rhs);

Formula f_not(const Formula& f);
Formula f_and(std::vector<Formula> fs);
Formula f_or(std::vector<Formula> fs);
Formula f_implies(const Formula& a, const Formula& b);
inline Formula f_and(const Formula& a, const Formula& b) { return f_and(std::vector<Formula>{a, b}); }
inline Formula f_or(const Formula& a, const Formula& b) { return f_or(std::vector<Formula>{a, b}); }

/// Negation of a single atom as a formula (`e >= 0` becomes `-e - 1 >= 0`,
/// `e == 0` becomes a disequality pair).
Formula negate_atom(const Atom& a);

Formula subst_var(const Formula& f, std::string_view x, const LinExpr& e);
Formula subst_meta(const Formula& f, std::string_view m, std::int64_t k);
/// Reapplies every atom through `make_atom`, keeping styles.
Formula renormalize(const Formula& f);

std::set<std::string> free_vars(const Formula& f);
std::set<std::string> metas_of(const Formula& f);
bool meta_only(const Formula& f);

/// Top-level conjuncts (flattening nested And).
std::vector<Formula> conjuncts(const Formula& f);
/// Top-level disjuncts (flattening nested Or).
std::vector<Formula> disjuncts(const Formula& f);
/// Disjuncts with adjacent disequality pairs regrouped into one unit each.
std::vector<Formula> disjunct_units(const Formula& f);
/// If `f` is the disequality pair produced for `a != b`, returns the
/// equality atom `a == b` it negates.
std::optional<Atom> as_disequality(const Formula& f);

using Env = std::map<std::string, std::int64_t>;

bool eval(const Formula& f, const Env& env, const Env* meta_env = nullptr);

class CnfBudgetExceeded : public std::runtime_error {
 public:
  CnfBudgetExceeded() : std::runtime_error("CNF clause budget exceeded") {}
};

using Clause = std::vector<Atom>;

inline constexpr std::size_t kDefaultCnfBudget = 256;

/// Plain distributive CNF. Tautological clauses are dropped; an empty result
/// means True and an empty clause means False.
std::vector<Clause> to_cnf(const Formula& f, std::size_t clause_budget = kDefaultCnfBudget);

/// Canonical serialization used as a cache key (ignores presentation hints).
std::string formula_key(const Formula& f);

// ---------------------------------------------------------------------------
// Statements

class Stmt {
 public:
  enum class Kind { Skip, Assign, Seq, If, Assume };

  Stmt();  // Skip

  static Stmt skip();
  static Stmt assign(std::string target, LinExpr value);
  static Stmt seq(std::vector<Stmt> parts);
  /// `guard == nullopt` is the nondeterministic `*` guard.
  static Stmt if_then(std::optional<Formula> guard, Stmt then_branch,
                      std::optional<Stmt> else_branch = std::nullopt);
  static Stmt assume(Formula cond);

  Kind kind() const;
  const std::string& target() const;
  const LinExpr& value() const;
  const std::optional<Formula>& guard() const;
  const Stmt& then_branch() const;
  const Stmt& else_branch() const;
  bool has_else() const;
  const Formula& condition() const;
  const std::vector<Stmt>& parts() const;

  friend bool operator==(const Stmt& a, const Stmt& b);

  struct Node;

 private:
  explicit Stmt(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

std::set<std::string> modified_vars(const Stmt& s);
std::set<std::string> stmt_vars(const Stmt& s);
std::size_t count_star_branches(const Stmt& s);
bool is_empty_body(const Stmt& s);

/// Presentation of init/post in the surface syntax; ignored by equality.
struct TaskStyle {
  bool init_as_instrs = false;  // print init as assignments and assumes
  std::size_t post_assumes = 0;  // leading post units printed as `assume !u;`
};

struct LoopTask {
  Formula init;
  std::optional<Formula> guard;  // nullopt: `while (*)`
  Stmt body;
  Formula post;
  std::vector<VarId> vars;
  /// Reference invariant annotations (`invariant f;` inside the loop).
  std::vector<Formula> invariants;
  TaskStyle style;

  /// Guard as an assumption (True for `*`).
  Formula guard_formula() const { return guard ? *guard : Formula::truth(); }
  Formula neg_guard_formula() const { return guard ? f_not(*guard) : Formula::truth(); }
  bool is_parameter(std::string_view name) const;
  std::vector<std::string> var_names() const;

  friend bool operator==(const LoopTask& a, const LoopTask& b) {
    return a.init == b.init && a.guard == b.guard && a.body == b.body && a.post == b.post &&
           a.vars == b.vars && a.invariants == b.invariants;
  }
};

/// Recomputes variable kinds (parameter iff never assigned) and adds any
/// variable occurring in the task but missing from `vars`.
void infer_var_kinds(LoopTask& t);

}  // namespace invsynth
