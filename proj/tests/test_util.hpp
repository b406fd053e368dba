#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "invsynth/ast.hpp"

namespace testutil {

using invsynth::Env;
using invsynth::Formula;
using invsynth::LinExpr;
using invsynth::Rng;
using invsynth::Stmt;

inline std::vector<Env> box_envs(const std::vector<std::string>& vars, std::int64_t b) {
  std::vector<Env> out{Env{}};
  for (const auto& v : vars) {
    std::vector<Env> next;
    for (const auto& e : out)
      for (std::int64_t x = -b; x <= b; ++x) {
        Env e2 = e;
        e2[v] = x;
        next.push_back(std::move(e2));
      }
    out = std::move(next);
  }
  return out;
}

inline LinExpr random_expr(Rng& rng, const std::vector<std::string>& vars, std::int64_t cmax,
                           std::int64_t kmax = 4) {
  LinExpr e = LinExpr::constant(rng.uniform_int(-kmax, kmax));
  for (const auto& v : vars)
    if (rng.bernoulli(0.5)) e = e + LinExpr::var(v, rng.uniform_int(-cmax, cmax));
  return e;
}

inline Formula random_atom(Rng& rng, const std::vector<std::string>& vars, std::int64_t cmax = 3) {
  using invsynth::SourceRel;
  const SourceRel rels[] = {SourceRel::Lt, SourceRel::Le, SourceRel::Gt,
                            SourceRel::Ge, SourceRel::Eq, SourceRel::Ne};
  return invsynth::normalize_atom(random_expr(rng, vars, cmax), rels[rng.uniform_int(0, 5)],
                                  LinExpr::constant(rng.uniform_int(-3, 3)));
}

inline Formula random_formula(Rng& rng, const std::vector<std::string>& vars, int depth) {
  if (depth == 0 || rng.bernoulli(0.3)) return random_atom(rng, vars);
  switch (rng.uniform_int(0, 3)) {
    case 0:
      return invsynth::f_and(random_formula(rng, vars, depth - 1), random_formula(rng, vars, depth - 1));
    case 1:
      return invsynth::f_or(random_formula(rng, vars, depth - 1), random_formula(rng, vars, depth - 1));
    case 2:
      return invsynth::f_not(random_formula(rng, vars, depth - 1));
    default:
      return invsynth::f_implies(random_formula(rng, vars, depth - 1), random_formula(rng, vars, depth - 1));
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string source_path(const std::string& rel) { return std::string(INVSYNTH_SOURCE_DIR) + "/" + rel; }

}  // namespace testutil

#include "invsynth/parser.hpp"

namespace invsynth {
inline void PrintTo(const Formula& f, std::ostream* os) { *os << print_formula(f); }
inline void PrintTo(const LoopTask& t, std::ostream* os) { *os << "\n" << print_task(t); }
}  // namespace invsynth
