#include "invsynth/session.hpp"

#include <istream>
#include <ostream>
#include <regex>

#include "httplib.h"
#include "invsynth/parser.hpp"
#include "invsynth/solver.hpp"
#include "invsynth/teacher.hpp"

namespace invsynth {

namespace {

struct ApiError : std::runtime_error {
  int code;
  ApiError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

constexpr std::size_t kDefaultSims = 64;
constexpr std::size_t kMaxSims = 100000;

Json expr_tree(const LinExpr& e) {
  Json terms = Json::array();
  for (const auto& t : e.vars()) terms.push_back({{"var", t.name}, {"coeff", t.coeff}});
  for (const auto& t : e.metas()) terms.push_back({{"meta", t.name}, {"coeff", t.coeff}});
  return {{"text", print_expr(e)}, {"terms", terms}, {"constant", e.constant_term()}};
}

const char* kind_name(Formula::Kind k) {
  switch (k) {
    case Formula::Kind::True: return "true";
    case Formula::Kind::False: return "false";
    case Formula::Kind::Atom: return "atom";
    case Formula::Kind::Not: return "not";
    case Formula::Kind::And: return "and";
    case Formula::Kind::Or: return "or";
    case Formula::Kind::Implies: return "implies";
  }
  return "?";
}

Json optional_tree(const Json& text) {
  if (!text.is_string() || text.get<std::string>().empty()) return nullptr;
  try {
    return formula_tree(parse_formula(text.get<std::string>()));
  } catch (const std::exception&) {
    return nullptr;
  }
}

std::size_t sims_of(const Json& req) {
  std::size_t sims = req.value("sims", kDefaultSims);
  if (sims == 0 || sims > kMaxSims) throw ApiError(400, "sims must be in [1, " + std::to_string(kMaxSims) + "]");
  return sims;
}

const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Running: return "running";
    case RunStatus::Succeeded: return "succeeded";
    case RunStatus::Failed: return "failed";
  }
  return "?";
}

Json error_response(int code, const std::string& msg) {
  return {{"protocol_version", kProtocolVersion}, {"ok", false}, {"error", {{"code", code}, {"message", msg}}}};
}

}  // namespace

Json formula_tree(const Formula& f) {
  Json j{{"kind", kind_name(f.kind())}, {"text", print_formula(f)}};
  if (f.is_atom()) {
    j["rel"] = f.atom().rel() == Rel::Ge ? ">=" : "==";
    j["lhs"] = expr_tree(f.atom().expr());
  } else if (f.kind() == Formula::Kind::Or && as_disequality(f)) {
    j["kind"] = "ne";
    j["lhs"] = expr_tree(as_disequality(f)->expr());
  } else if (!f.children().empty()) {
    Json cs = Json::array();
    for (const auto& c : f.children()) cs.push_back(formula_tree(c));
    j["children"] = cs;
  }
  return j;
}

Json stmt_tree(const Stmt& s) {
  switch (s.kind()) {
    case Stmt::Kind::Skip:
      return {{"kind", "skip"}};
    case Stmt::Kind::Assign:
      return {{"kind", "assign"}, {"target", s.target()}, {"value", expr_tree(s.value())}};
    case Stmt::Kind::Seq: {
      Json parts = Json::array();
      for (const auto& p : s.parts()) parts.push_back(stmt_tree(p));
      return {{"kind", "seq"}, {"parts", parts}};
    }
    case Stmt::Kind::If: {
      Json j{{"kind", "if"}, {"guard", s.guard() ? formula_tree(*s.guard()) : Json("*")}, {"then", stmt_tree(s.then_branch())}};
      if (s.has_else()) j["else"] = stmt_tree(s.else_branch());
      return j;
    }
    case Stmt::Kind::Assume:
      return {{"kind", "assume"}, {"condition", formula_tree(s.condition())}};
  }
  return nullptr;
}

Json task_tree(const LoopTask& t) {
  Json vars = Json::array();
  for (const auto& v : t.vars) vars.push_back({{"name", v.name}, {"parameter", v.kind == VarKind::Parameter}});
  Json invs = Json::array();
  for (const auto& f : t.invariants) invs.push_back(formula_tree(f));
  return {{"text", print_task(t)},
          {"vars", vars},
          {"init", formula_tree(t.init)},
          {"guard", t.guard ? formula_tree(*t.guard) : Json("*")},
          {"body", stmt_tree(t.body)},
          {"post", formula_tree(t.post)},
          {"invariants", invs}};
}

struct SessionManager::Session {
  struct Snapshot {
    ExecutionState state;
    std::shared_ptr<SearchTree> tree;  // search statistics rooted at this state
    bool searched = false;             // run_mcts was called on this state
  };

  std::uint64_t id = 0;
  std::string kind;
  std::uint64_t seed = 0;
  std::mutex mu;
  std::vector<Snapshot> history;  // back() is current

  Snapshot& current() { return history.back(); }
};

SessionManager::SessionManager(std::shared_ptr<const Evaluator> eval) : eval_(std::move(eval)) {}
SessionManager::~SessionManager() = default;

std::size_t SessionManager::num_sessions() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const Json& req) {
  if (!req.contains("session")) throw ApiError(400, "missing session");
  auto id = req.at("session").get<std::uint64_t>();
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ApiError(404, "unknown session " + std::to_string(id));
  return it->second;
}

Json SessionManager::state_of(Session& s) const {
  const auto& snap = s.current();
  const ExecutionState& st = snap.state;
  Json j;
  j["protocol_version"] = kProtocolVersion;
  j["ok"] = true;
  j["session"] = s.id;
  j["kind"] = s.kind;
  j["status"] = status_name(st.status());
  j["depth"] = st.trace().size();
  j["trace"] = st.trace();
  j["can_undo"] = s.history.size() > 1;
  j["events"] = st.event_counts();

  Json trees;
  if (auto solver = std::dynamic_pointer_cast<const SolverStrategy>(st.strategy())) trees["task"] = task_tree(solver->task());

  if (st.running()) {
    const ChoicePoint& cp = st.choice_point();
    j["probe"] = cp.probe;
    if (cp.probe.contains("problem"))
      for (const auto& [k, v] : cp.probe["problem"].items())
        if (k != "body") trees["problem"][k] = optional_tree(v);
    if (cp.probe.contains("pending")) {
      Json ps = Json::array();
      for (const auto& p : cp.probe["pending"]) ps.push_back(optional_tree(p.value("formula", Json())));
      trees["pending"] = ps;
    }
    std::vector<ChoiceStats> stats;
    if (snap.tree) stats = snap.tree->stats();
    Json choices = Json::array();
    for (std::size_t i = 0; i < cp.labels.size(); ++i) {
      Json c{{"index", i}, {"label", cp.labels[i]}};
      if (i < stats.size()) c["mcts"] = {{"visits", stats[i].visits}, {"q", stats[i].q}, {"prior", stats[i].prior}};
      choices.push_back(std::move(c));
    }
    j["choices"] = choices;
    if (snap.tree) {
      int total = 0;
      for (const auto& c : stats) total += c.visits;
      j["mcts"] = {{"simulations", total}, {"best", snap.tree->best()}};
    } else {
      j["mcts"] = nullptr;
    }
    Evaluation ev = eval_->evaluate(st);
    Json evj;
    evj["heuristic"] = eval_->heuristic();
    evj["prior"] = ev.prior;
    evj["p0"] = ev.value.p0;
    evj["p1"] = ev.value.p1;
    evj["p2"] = ev.value.p2;
    Json dists = Json::object();
    for (const auto& e : st.strategy()->config().events) {
      auto it = ev.value.events.find(e.id);
      std::vector<double> d = it != ev.value.events.end() ? it->second : std::vector<double>{1.0};
      d.resize(static_cast<std::size_t>(e.max_count) + 1, 0.0);
      dists[e.id] = d;
    }
    evj["events"] = dists;
    evj["value"] = combine_value(ev.value, st.event_counts(), st.strategy()->config());
    j["evaluation"] = evj;
  } else {
    Json r{{"reward", st.reward()}};
    if (st.status() == RunStatus::Succeeded) {
      r["outcome"] = st.strategy()->describe_result(st.result());
      if (st.strategy()->name() == "solver") {
        Json cs = Json::array();
        for (const auto& f : std::any_cast<const SolverOutcome&>(st.result()).conjuncts) cs.push_back(formula_tree(f));
        trees["invariant"] = cs;
      }
    } else {
      r["failure"] = st.failure_reason();
    }
    j["result"] = r;
  }
  j["trees"] = trees.is_null() ? Json::object() : trees;
  return j;
}

Json SessionManager::handle(const Json& req) {
  try {
    if (!req.is_object() || !req.contains("op")) throw ApiError(400, "request must be an object with \"op\"");
    const std::string op = req.at("op").get<std::string>();

    if (op == "protocol") return {{"protocol_version", kProtocolVersion}, {"ok", true}, {"heuristic", eval_->heuristic()}};

    if (op == "new_session") {
      auto s = std::make_shared<Session>();
      s->kind = req.value("kind", std::string("solver"));
      s->seed = req.value("seed", std::uint64_t{0});
      std::shared_ptr<const Strategy> strat;
      if (s->kind == "solver") {
        if (!req.contains("task")) throw ApiError(400, "solver sessions need \"task\"");
        strat = std::make_shared<SolverStrategy>(parse_task(req.at("task").get<std::string>()));
      } else if (s->kind == "teacher") {
        TeacherConstraints cs;
        if (req.contains("constraints")) {
          cs = TeacherConstraints::from_json(req.at("constraints"));
        } else {
          Rng rng(s->seed);
          cs = sample_constraints(rng);
        }
        strat = std::make_shared<TeacherStrategy>(cs, s->seed);
      } else {
        throw ApiError(400, "unknown session kind " + s->kind);
      }
      ExecutionState st = ExecutionState::start(strat);
      if (req.contains("trace")) {
        for (auto i : req.at("trace").get<std::vector<std::size_t>>()) {
          if (!st.running()) throw ApiError(409, "trace continues past a terminal state");
          if (i >= st.num_choices()) throw ApiError(400, "trace index out of range");
          st = st.resume(i);
        }
      }
      s->history.push_back({st, nullptr, false});
      {
        std::lock_guard lock(mu_);
        s->id = next_id_++;
        sessions_[s->id] = s;
      }
      std::lock_guard lock(s->mu);
      return state_of(*s);
    }

    auto s = find(req);
    std::lock_guard lock(s->mu);
    auto& snap = s->current();

    if (op == "get_state") return state_of(*s);

    if (op == "close") {
      std::lock_guard mlock(mu_);
      sessions_.erase(s->id);
      return {{"protocol_version", kProtocolVersion}, {"ok", true}, {"session", s->id}, {"closed", true}};
    }

    if (op == "undo") {
      if (s->history.size() < 2) throw ApiError(409, "nothing to undo");
      s->history.pop_back();
      return state_of(*s);
    }

    if (!snap.state.running()) throw ApiError(409, "session is terminal");

    if (op == "choose") {
      if (!req.contains("index")) throw ApiError(400, "missing index");
      auto i = req.at("index").get<std::int64_t>();
      if (i < 0 || static_cast<std::size_t>(i) >= snap.state.num_choices())
        throw ApiError(400, "choice index out of range");
      s->history.push_back({snap.state.resume(static_cast<std::size_t>(i)), nullptr, false});
      return state_of(*s);
    }

    if (op == "run_mcts" || op == "step_best") {
      if (!snap.tree) snap.tree = std::make_shared<SearchTree>(snap.state, *eval_, MctsConfig{1.5, s->seed});
      if (op == "run_mcts" || !snap.searched || req.contains("sims")) snap.tree->simulate(sims_of(req));
      if (op == "run_mcts") {
        snap.searched = true;
        return state_of(*s);
      }
      std::size_t best = snap.tree->best();
      auto next = std::make_shared<SearchTree>(snap.tree->subtree(best));
      ExecutionState st = next->root_state();
      s->history.push_back({std::move(st), std::move(next), false});
      Json j = state_of(*s);
      j["chosen"] = best;
      return j;
    }

    throw ApiError(400, "unknown op " + op);
  } catch (const ApiError& e) {
    return error_response(e.code, e.what());
  } catch (const ParseError& e) {
    return error_response(400, std::string("parse error: ") + e.what());
  } catch (const Json::exception& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

void SessionManager::serve_lines(std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json resp;
    try {
      resp = handle(Json::parse(line));
    } catch (const Json::parse_error& e) {
      resp = error_response(400, e.what());
    }
    out << resp.dump() << '\n' << std::flush;
  }
}

struct HttpServer::Impl {
  httplib::Server srv;
};

HttpServer::HttpServer(SessionManager& mgr) : impl_(std::make_unique<Impl>()) {
  httplib::Server& srv = impl_->srv;
  static const auto reply = [](httplib::Response& res, const Json& j) {
    int code = j.value("ok", false) ? 200 : j["error"].value("code", 500);
    res.status = code;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(j.dump() + "\n", "application/json");
  };
  static const auto body = [](const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    Json j = Json::parse(req.body, nullptr, false);
    return j.is_discarded() ? Json() : j;
  };
  auto session_op = [&mgr](const std::string& op) {
    return [&mgr, op](const httplib::Request& req, httplib::Response& res) {
      Json j = body(req);
      if (!j.is_object()) return reply(res, error_response(400, "body must be a JSON object"));
      j["op"] = op;
      j["session"] = std::stoull(req.matches[1]);
      reply(res, mgr.handle(j));
    };
  };
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  srv.Get("/protocol", [&mgr](const httplib::Request&, httplib::Response& res) { reply(res, mgr.handle({{"op", "protocol"}})); });
  srv.Post("/session", [&mgr](const httplib::Request& req, httplib::Response& res) {
    Json j = body(req);
    if (!j.is_object()) return reply(res, error_response(400, "body must be a JSON object"));
    j["op"] = "new_session";
    reply(res, mgr.handle(j));
  });
  srv.Get(R"(/session/(\d+)/state)", session_op("get_state"));
  srv.Post(R"(/session/(\d+)/choose)", session_op("choose"));
  srv.Post(R"(/session/(\d+)/mcts)", session_op("run_mcts"));
  srv.Post(R"(/session/(\d+)/step)", session_op("step_best"));
  srv.Post(R"(/session/(\d+)/undo)", session_op("undo"));
  srv.Delete(R"(/session/(\d+))", session_op("close"));
  srv.Post("/rpc", [&mgr](const httplib::Request& req, httplib::Response& res) {
    std::istringstream in(req.body);
    std::ostringstream out;
    mgr.serve_lines(in, out);
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(out.str(), "application/x-ndjson");
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->srv.bind_to_any_port(host);
  return impl_->srv.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->srv.listen_after_bind(); }

void HttpServer::stop() { impl_->srv.stop(); }

}  // namespace invsynth
