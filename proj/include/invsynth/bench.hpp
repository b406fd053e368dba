#pragma once

// Dataset generation, solving with re-verification, and the benchmark
// harness behind the command line tool.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "invsynth/ast.hpp"
#include "invsynth/mcts.hpp"
#include "invsynth/semantics.hpp"
#include "invsynth/teacher.hpp"

namespace invsynth {

struct SolveOptions {
  std::size_t sims = 400;
  std::size_t steps = 64;
  std::uint64_t seed = 0;
  bool greedy = false;
  std::optional<double> timeout_seconds;
  double c_puct = 1.5;
};

struct SolveResult {
  bool succeeded = false;  // the strategy returned an invariant
  bool solved = false;     // strategy succeeded and the invariant re-verified
  bool verified = false;  // independent check of the returned invariant
  std::vector<Formula> conjuncts;
  std::vector<std::size_t> trace;
  std::size_t steps = 0;
  double reward = -1;
  EventCounts events;
  std::string failure;  // empty on success
  double seconds = 0;
};

/// Runs the solver on `task` with its invariant annotations removed, then
/// checks the returned invariant with check_invariant and the bounded
/// execution test.
SolveResult solve_task(const LoopTask& task, const SolveOptions& opts = {});

/// Proof obligations plus bounded soundness test of a candidate invariant.
struct CheckReport {
  InvariantCheck obligations;
  std::optional<Env> bounded_violation;

  bool ok() const { return obligations.proved() && !bounded_violation; }
};
CheckReport check_task(const LoopTask& task, const Formula& inv);

struct GenOptions {
  std::size_t count = 100;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool export_solver = false;
  TeachOptions teach;
};

/// Problem i is taught from mix_seed(seed, i); indices whose generation
/// fails are skipped, so the first `count` successes make the dataset. The
/// result does not depend on the number of workers.
std::vector<ReferenceProblem> generate_problems(const GenOptions& opts, const TeacherConfig& cfg = {});
/// One JSON record per line, ids numbered from 0.
std::string dataset_jsonl(const std::vector<ReferenceProblem>& ps, bool export_solver);

struct BenchProblem {
  std::string name;
  LoopTask task;
};

/// A directory of `.imp` files (sorted by name), a JSONL dataset, or a
/// single `.imp` file. Throws std::runtime_error on I/O errors and
/// ParseError on malformed tasks.
std::vector<BenchProblem> load_problems(const std::filesystem::path& path);

struct ProblemReport {
  std::string name;
  SolveResult result;
};

struct BenchReport {
  std::vector<ProblemReport> problems;

  std::size_t solved() const;
  double solve_rate() const;
  double median_seconds() const;
  /// Timing fields are left out when `stable`.
  Json to_json(bool stable) const;
};

BenchReport run_bench(const std::vector<BenchProblem>& problems, const SolveOptions& opts, std::size_t workers = 1,
                      const std::function<void(const ProblemReport&)>& on_done = {});

}  // namespace invsynth
