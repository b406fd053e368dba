#pragma once

// Fourier-Motzkin reasoning over linear integer constraints: refutation,
// consequence saturation, abduction candidates and metavariable refinement.

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "invsynth/ast.hpp"

namespace invsynth {

/// Rewrites every metavariable `c?` into a program variable named `c?` so
/// that it can be eliminated like any other unknown integer.
Formula metas_as_vars(const Formula& f);
Atom metas_as_vars(const Atom& a);

struct FmLimits {
  std::size_t max_constraints = 1500;
  std::size_t max_branches = 64;
};

/// True when the conjunction of `facts` has no integer solution, as shown by
/// exact substitution of unit equalities followed by Fourier-Motzkin
/// elimination with integer tightening. Metavariables count as unknowns.
/// `false` means "not refuted", not "satisfiable".
bool fm_refutes(const std::vector<Atom>& facts, const FmLimits& limits = {});

/// Same as `fm_refutes` for facts that are atoms or disjunctions of atoms
/// (each disjunction is split into cases).
bool fm_refutes(const std::vector<Formula>& facts, const FmLimits& limits = {});

/// Refutes the negation of a CNF clause.
bool clause_closed(const Clause& clause, const FmLimits& limits = {});

struct Saturation {
  bool contradiction = false;
  bool truncated = false;  // derivation budget exhausted
  std::vector<Atom> facts;  // GE atoms, originals first
  std::size_t derived = 0;
};

inline constexpr std::size_t kDefaultDerivationBudget = 64;

/// Derives consequences of GE/EQ `assumptions` by pairwise variable
/// elimination. Metavariables behave as opaque constants.
Saturation fm_saturate(const std::vector<Atom>& assumptions, std::size_t budget = kDefaultDerivationBudget);

struct AbductionResult {
  bool valid = false;
  std::vector<Atom> suggestions;

  static AbductionResult Valid() { return {true, {}}; }
};

/// Either proves `f` valid or returns atoms whose assumption would unblock
/// some clause of `f`. Results are memoized per thread.
AbductionResult abduct(const Formula& f);

/// Canonical candidate order: fewer variables first, then smaller, then by text.
void sort_candidates(std::vector<Atom>& atoms);

class RefinementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Picks a value for `meta` satisfying the metavariable-only `constraints`:
/// the least value for an upper bound, the greatest for a lower bound and the
/// one of smallest magnitude (nonnegative first) otherwise.
std::int64_t abduct_refinement(const std::string& meta, BoundType bound, const std::vector<Formula>& constraints);

/// Interval of values allowed for `meta` after projecting out the other
/// metavariables of the atomic constraints; nullopt bounds are infinite.
struct MetaInterval {
  std::optional<std::int64_t> lo, hi;
  bool empty = false;
};
MetaInterval meta_bounds(const std::string& meta, const std::vector<Formula>& constraints);

}  // namespace invsynth
