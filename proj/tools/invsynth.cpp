#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "invsynth/bench.hpp"
#include "invsynth/parser.hpp"
#include "invsynth/session.hpp"
#include "invsynth/solver.hpp"

using namespace invsynth;

namespace {

constexpr int kOk = 0, kFailed = 1, kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LoopTask load_task(const std::string& path) {
  try {
    return parse_task(read_text(path));
  } catch (const ParseError& e) {
    throw UsageError(path + ":" + e.what());
  }
}

struct Config {
  TeacherConfig teacher;
  Json mcts = Json::object();
};

Config load_config(const std::string& path) {
  Config c;
  if (path.empty()) return c;
  Json j = Json::parse(read_text(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw UsageError(path + ": not a JSON object");
  c.teacher = TeacherConfig::from_json(j.contains("teacher") ? j["teacher"] : j);
  if (j.contains("mcts")) c.mcts = j["mcts"];
  return c;
}

void print_verdict(const char* name, const ValidityResult& r) {
  std::cout << "  " << name << ": ";
  switch (r.verdict) {
    case Verdict::Proved: std::cout << "Proved"; break;
    case Verdict::Refuted: std::cout << "Refuted"; break;
    case Verdict::Unknown: std::cout << "Unknown"; break;
  }
  if (r.counterexample) {
    std::cout << "  (";
    bool first = true;
    for (const auto& [k, v] : *r.counterexample) {
      std::cout << (first ? "" : ", ") << k << " = " << v;
      first = false;
    }
    std::cout << ")";
  }
  std::cout << "\n";
}

std::vector<std::size_t> parse_trace(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoul(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loop invariant synthesis and problem generation by search over nondeterministic strategies"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON file with teacher marginals and an \"mcts\" section")
      ->check(CLI::ExistingFile);

  SolveOptions solve;
  std::optional<double> timeout;
  std::size_t workers = 1;
  bool stable = false;
  std::string out_path;
  auto add_search_flags = [&](CLI::App* c) {
    c->add_option("--sims", solve.sims, "MCTS simulations per step")->check(CLI::PositiveNumber);
    c->add_option("--steps", solve.steps, "step budget")->check(CLI::PositiveNumber);
    c->add_option("--seed", solve.seed, "search seed");
    c->add_flag("--greedy", solve.greedy, "follow the prior without search");
    c->add_option("--timeout", timeout, "seconds per problem")->check(CLI::PositiveNumber);
    c->add_flag("--stable-output", stable, "omit timing fields");
  };

  auto* solve_cmd = app.add_subcommand("solve", "synthesize an invariant for a task");
  std::string task_path, trace_text;
  solve_cmd->add_option("file", task_path, "task file (.imp)")->required();
  add_search_flags(solve_cmd);
  solve_cmd->add_option("--trace", trace_text, "replay comma-separated choice indices instead of searching");

  auto* gen_cmd = app.add_subcommand("gen", "generate a dataset of problems");
  GenOptions gen;
  bool no_transform = false;
  gen_cmd->add_option("--count", gen.count, "number of problems")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "master seed");
  gen_cmd->add_option("--sims", gen.teach.sims, "MCTS simulations per teacher step")->check(CLI::PositiveNumber);
  gen_cmd->add_flag("--greedy", gen.teach.greedy, "generate without search");
  gen_cmd->add_flag("--no-transform", no_transform, "skip the final random transformations");
  gen_cmd->add_flag("--export-solver", gen.export_solver, "strip reference invariants");
  gen_cmd->add_option("--workers", gen.workers, "worker threads")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--out", out_path, "output JSONL (standard output when absent)");
  gen_cmd->add_flag("--stable-output", stable, "omit timing fields from the summary");

  auto* bench_cmd = app.add_subcommand("bench", "solve every task in a directory or JSONL file");
  std::string bench_path;
  bench_cmd->add_option("path", bench_path, "directory of .imp files, .jsonl dataset or .imp file")->required();
  add_search_flags(bench_cmd);
  bench_cmd->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", out_path, "write the JSON report here");

  auto* check_cmd = app.add_subcommand("check", "check a candidate invariant");
  std::string inv_text;
  check_cmd->add_option("file", task_path, "task file (.imp)")->required();
  check_cmd->add_option("--invariant", inv_text, "formula; defaults to the task's invariant annotations");

  auto* serve_cmd = app.add_subcommand("serve", "serve interactive sessions");
  int port = 8080;
  std::string host = "127.0.0.1";
  bool stdio = false;
  serve_cmd->add_option("--port", port, "HTTP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_flag("--stdio", stdio, "line-delimited JSON on standard input/output instead of HTTP");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    Config cfg = load_config(config_path);
    if (cfg.mcts.contains("c_puct")) solve.c_puct = cfg.mcts["c_puct"].get<double>();
    auto from_config = [&](CLI::App* cmd, const char* opt, const char* key, std::size_t& into) {
      if (cmd->count(opt) == 0 && cfg.mcts.contains(key)) into = cfg.mcts[key].get<std::size_t>();
    };

    if (solve_cmd->parsed()) {
      from_config(solve_cmd, "--sims", "sims", solve.sims);
      from_config(solve_cmd, "--steps", "steps", solve.steps);
      solve.timeout_seconds = timeout;
      LoopTask task = load_task(task_path);
      SolveResult r;
      if (!trace_text.empty()) {
        LoopTask t = task;
        t.invariants.clear();
        ExecutionState st = ExecutionState::replay(std::make_shared<SolverStrategy>(t), parse_trace(trace_text));
        r.trace = st.trace();
        r.steps = r.trace.size();
        r.reward = st.reward();
        r.events = st.event_counts();
        if (st.status() == RunStatus::Succeeded) {
          r.conjuncts = std::any_cast<const SolverOutcome&>(st.result()).conjuncts;
          r.verified = r.solved = check_task(t, f_and(r.conjuncts)).ok();
        } else {
          r.failure = st.running() ? "trace ends at a choice point" : st.failure_reason();
        }
      } else {
        r = solve_task(task, solve);
      }
      if (!r.solved && r.failure.empty()) r.failure = "re-verification failed";
      if (r.conjuncts.empty() && r.solved) std::cout << "invariant: true\n";
      for (const auto& c : r.conjuncts) std::cout << "invariant: " << print_formula(c) << "\n";
      std::cout << "verified: " << (r.verified ? "yes" : "no") << "\n";
      std::cout << "reward: " << r.reward << "\n";
      std::cout << "steps: " << r.steps << "\n";
      std::cout << "trace:";
      for (std::size_t i = 0; i < r.trace.size(); ++i) std::cout << (i ? "," : " ") << r.trace[i];
      std::cout << "\n";
      if (!stable && trace_text.empty()) std::cout << "seconds: " << r.seconds << "\n";
      if (!r.solved) std::cout << "unsolved: " << r.failure << "\n";
      return r.solved ? kOk : kFailed;
    }

    if (gen_cmd->parsed()) {
      gen.teach.transform = !no_transform;
      auto start = std::chrono::steady_clock::now();
      auto problems = generate_problems(gen, cfg.teacher);
      std::string text = dataset_jsonl(problems, gen.export_solver);
      if (out_path.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        out << text;
      }
      double violations = 0;
      for (const auto& p : problems) violations += static_cast<double>(p.violations.size());
      std::cerr << "generated " << problems.size() << " problems, mean soft violations "
                << (problems.empty() ? 0.0 : violations / static_cast<double>(problems.size()));
      if (!stable)
        std::cerr << ", " << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s";
      std::cerr << "\n";
      return kOk;
    }

    if (bench_cmd->parsed()) {
      from_config(bench_cmd, "--sims", "sims", solve.sims);
      from_config(bench_cmd, "--steps", "steps", solve.steps);
      solve.timeout_seconds = timeout ? timeout : std::optional<double>(30.0);
      std::vector<BenchProblem> problems;
      try {
        problems = load_problems(bench_path);
      } catch (const ParseError& e) {
        throw UsageError(bench_path + ": " + e.what());
      } catch (const std::runtime_error& e) {
        throw UsageError(e.what());
      }
      BenchReport rep = run_bench(problems, solve, workers);
      for (const auto& p : rep.problems) {
        std::cout << (p.result.solved ? "solved   " : "unsolved ") << p.name;
        if (!stable) std::cout << "  " << p.result.seconds << " s";
        if (p.result.solved) {
          std::cout << "  ";
          for (std::size_t i = 0; i < p.result.conjuncts.size(); ++i)
            std::cout << (i ? " && " : "") << print_formula(p.result.conjuncts[i]);
          if (p.result.conjuncts.empty()) std::cout << "true";
        } else {
          std::cout << "  (" << p.result.failure << ")";
        }
        std::cout << "\n";
      }
      std::cout << "solve rate: " << rep.solved() << "/" << rep.problems.size() << " = " << rep.solve_rate() << "\n";
      if (!stable) std::cout << "median seconds: " << rep.median_seconds() << "\n";
      if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        out << rep.to_json(stable).dump(2) << "\n";
      }
      return rep.solved() == rep.problems.size() ? kOk : kFailed;
    }

    if (check_cmd->parsed()) {
      LoopTask task = load_task(task_path);
      Formula inv = f_and(task.invariants);
      if (!inv_text.empty()) {
        try {
          inv = parse_formula(inv_text);
        } catch (const ParseError& e) {
          throw UsageError(std::string("invariant: ") + e.what());
        }
      }
      task.invariants.clear();
      std::cout << "invariant: " << print_formula(inv) << "\n";
      CheckReport r = check_task(task, inv);
      print_verdict("init", r.obligations.init);
      print_verdict("preserved", r.obligations.preserved);
      print_verdict("post", r.obligations.post);
      std::cout << "  bounded runs: " << (r.bounded_violation ? "violation" : "ok") << "\n";
      return r.ok() ? kOk : kFailed;
    }

    if (serve_cmd->parsed()) {
      SessionManager mgr;
      if (stdio) {
        mgr.serve_lines(std::cin, std::cout);
        return kOk;
      }
      HttpServer srv(mgr);
      int bound = srv.bind(host, port);
      if (bound < 0) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return kFailed;
      }
      std::cerr << "serving on http://" << host << ":" << bound << " (protocol " << kProtocolVersion << ")\n";
      return srv.listen() ? kOk : kFailed;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
