#include "invsynth/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "invsynth/parser.hpp"
#include "invsynth/semantics.hpp"
#include "invsynth/solver.hpp"

namespace invsynth {

namespace {

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs fn(i) for i in [0, n) on `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mu;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace

CheckReport check_task(const LoopTask& task, const Formula& inv) {
  CheckReport r;
  r.obligations = check_invariant(task, inv);
  r.bounded_violation = find_bounded_inv_violation(task, inv);
  return r;
}

SolveResult solve_task(const LoopTask& task, const SolveOptions& opts) {
  auto start = std::chrono::steady_clock::now();
  LoopTask t = task;
  t.invariants.clear();
  auto strat = std::make_shared<SolverStrategy>(t);
  UniformEvaluator eval;
  ExecutionState init = ExecutionState::start(strat);
  SolveResult r;
  ExecutionState final = init;
  if (opts.greedy) {
    final = greedy_rollout(init, eval);
    r.steps = final.trace().size();
  } else {
    SearchOptions so;
    so.sims = opts.sims;
    so.step_budget = opts.steps;
    so.timeout_seconds = opts.timeout_seconds;
    so.mcts.seed = opts.seed;
    so.mcts.c_puct = opts.c_puct;
    SearchOutcome out = solve_with_search(init, eval, so);
    final = out.final;
    r.steps = out.steps;
  }
  r.trace = final.trace();
  r.events = final.event_counts();
  r.reward = final.reward();
  if (final.status() == RunStatus::Succeeded) {
    r.succeeded = true;
    r.conjuncts = std::any_cast<const SolverOutcome&>(final.result()).conjuncts;
    r.verified = check_task(t, f_and(r.conjuncts)).ok();
    r.solved = r.verified;
    if (!r.verified) r.failure = "re-verification failed";
  } else {
    r.failure = final.failure_reason();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<ReferenceProblem> generate_problems(const GenOptions& opts, const TeacherConfig& cfg) {
  std::vector<ReferenceProblem> out;
  std::size_t base = 0;
  while (out.size() < opts.count) {
    std::size_t batch = opts.count - out.size();
    std::vector<std::optional<ReferenceProblem>> got(batch);
    parallel_for(batch, opts.workers,
                 [&](std::size_t i) { got[i] = teach(mix_seed(opts.seed, base + i), cfg, opts.teach); });
    for (auto& p : got)
      if (p && out.size() < opts.count) out.push_back(std::move(*p));
    base += batch;
  }
  return out;
}

std::string dataset_jsonl(const std::vector<ReferenceProblem>& ps, bool export_solver) {
  std::string out;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    out += to_record(ps[i], i, export_solver).dump();
    out += '\n';
  }
  return out;
}

std::vector<BenchProblem> load_problems(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<BenchProblem> out;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".imp") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back({f.filename().string(), parse_task(read_text(f))});
    return out;
  }
  if (!fs::exists(path)) throw std::runtime_error("no such file: " + path.string());
  if (path.extension() == ".jsonl") {
    std::istringstream in(read_text(path));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::parse_error& e) {
        throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": " + e.what());
      }
      std::string name = j.contains("id") ? "record " + j["id"].dump() : "line " + std::to_string(n);
      out.push_back({name, parse_task(j.at("task_text").get<std::string>())});
    }
    return out;
  }
  out.push_back({path.filename().string(), parse_task(read_text(path))});
  return out;
}

std::size_t BenchReport::solved() const {
  return static_cast<std::size_t>(
      std::count_if(problems.begin(), problems.end(), [](const ProblemReport& p) { return p.result.solved; }));
}

double BenchReport::solve_rate() const {
  return problems.empty() ? 0.0 : static_cast<double>(solved()) / static_cast<double>(problems.size());
}

double BenchReport::median_seconds() const {
  if (problems.empty()) return 0;
  std::vector<double> ts;
  for (const auto& p : problems) ts.push_back(p.result.seconds);
  std::sort(ts.begin(), ts.end());
  std::size_t n = ts.size();
  return n % 2 ? ts[n / 2] : (ts[n / 2 - 1] + ts[n / 2]) / 2;
}

Json BenchReport::to_json(bool stable) const {
  Json j;
  Json ps = Json::array();
  std::map<std::string, int> rewards;
  double reward_sum = 0;
  for (const auto& p : problems) {
    const SolveResult& r = p.result;
    Json e;
    e["name"] = p.name;
    e["solved"] = r.solved;
    if (!stable) e["seconds"] = r.seconds;
    e["steps"] = r.steps;
    e["events"] = r.events;
    e["reward"] = r.reward;
    if (r.solved) {
      std::vector<std::string> cs;
      for (const auto& c : r.conjuncts) cs.push_back(print_formula(c));
      e["invariant"] = cs;
    } else {
      e["failure"] = r.failure;
    }
    ps.push_back(std::move(e));
    std::ostringstream key;
    key << r.reward;
    ++rewards[key.str()];
    reward_sum += r.reward;
  }
  j["total"] = problems.size();
  j["solved"] = solved();
  j["solve_rate"] = solve_rate();
  if (!stable) j["median_seconds"] = median_seconds();
  j["mean_reward"] = problems.empty() ? 0.0 : reward_sum / static_cast<double>(problems.size());
  j["reward_counts"] = rewards;
  j["problems"] = std::move(ps);
  return j;
}

BenchReport run_bench(const std::vector<BenchProblem>& problems, const SolveOptions& opts, std::size_t workers,
                      const std::function<void(const ProblemReport&)>& on_done) {
  BenchReport rep;
  rep.problems.resize(problems.size());
  std::mutex mu;
  parallel_for(problems.size(), workers, [&](std::size_t i) {
    ProblemReport pr{problems[i].name, solve_task(problems[i].task, opts)};
    std::lock_guard lock(mu);
    rep.problems[i] = pr;
    if (on_done) on_done(pr);
  });
  return rep;
}

}  // namespace invsynth
