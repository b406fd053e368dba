#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "invsynth/parser.hpp"
#include "invsynth/session.hpp"
#include "invsynth/solver.hpp"
#include "invsynth/teacher.hpp"
#include "test_util.hpp"

using namespace invsynth;

namespace {

std::string sum_loop_text() { return testutil::read_file(testutil::source_path("fixtures/sum_loop.imp")); }

Json new_solver(SessionManager& m) { return m.handle({{"op", "new_session"}, {"kind", "solver"}, {"task", sum_loop_text()}}); }

Json op(SessionManager& m, const std::string& name, const Json& s, Json extra = Json::object()) {
  extra["op"] = name;
  extra["session"] = s["session"];
  return m.handle(extra);
}

// Index of the choice labelled `label` in a state document.
std::size_t choice_index(const Json& st, const std::string& label) {
  for (const auto& c : st["choices"])
    if (c["label"] == label) return c["index"].get<std::size_t>();
  throw std::runtime_error("no choice " + label + " in " + st["choices"].dump());
}

const std::vector<std::string> kManualSumLoop{"1", "x >= y", "x >= y", "1", "x >= 1", "x >= 1", "1", "y >= 0", "y >= 0"};

}  // namespace

TEST(Session, SolverSessionShowsPostObligation) {
  SessionManager m;
  Json st = new_solver(m);
  ASSERT_TRUE(st["ok"].get<bool>()) << st.dump();
  EXPECT_EQ(st["protocol_version"], kProtocolVersion);
  EXPECT_EQ(st["status"], "running");
  EXPECT_EQ(st["probe"]["pending"][0]["kind"], "POST");
  EXPECT_EQ(st["probe"]["obligation"], "y >= 1000 -> x >= y");
  EXPECT_EQ(st["evaluation"]["heuristic"], "uniform");
  EXPECT_EQ(st["trees"]["task"]["post"]["text"], "x >= y");
  EXPECT_EQ(st["trees"]["pending"][0]["kind"], "atom");
  EXPECT_FALSE(st["can_undo"].get<bool>());
}

TEST(Session, RunMctsAttachesStatsWithoutCommitting) {
  SessionManager m;
  Json st = new_solver(m);
  Json after = op(m, "run_mcts", st, {{"sims", 64}});
  ASSERT_TRUE(after["ok"].get<bool>()) << after.dump();
  EXPECT_EQ(after["depth"], 0);
  int total = 0;
  double prior = 0;
  for (const auto& c : after["choices"]) {
    total += c["mcts"]["visits"].get<int>();
    prior += c["mcts"]["prior"].get<double>();
  }
  EXPECT_EQ(total, 64);
  EXPECT_NEAR(prior, 1.0, 1e-9);
  EXPECT_EQ(after["mcts"]["simulations"], 64);
  Json more = op(m, "run_mcts", st, {{"sims", 16}});
  EXPECT_EQ(more["mcts"]["simulations"], 80);
}

TEST(Session, GetStateIsIdempotent) {
  SessionManager m;
  Json st = new_solver(m);
  op(m, "run_mcts", st, {{"sims", 8}});
  std::string a = op(m, "get_state", st).dump();
  EXPECT_EQ(op(m, "get_state", st).dump(), a);
}

TEST(Session, UndoRestoresPriorStateExactly) {
  SessionManager m;
  Json st = new_solver(m);
  op(m, "run_mcts", st, {{"sims", 8}});
  std::string before = op(m, "get_state", st).dump();
  Json moved = op(m, "choose", st, {{"index", 1}});
  EXPECT_EQ(moved["depth"], 1);
  EXPECT_TRUE(moved["can_undo"].get<bool>());
  Json back = op(m, "undo", st);
  EXPECT_EQ(back.dump(), before);
  Json again = op(m, "undo", st);
  EXPECT_EQ(again["error"]["code"], 409);
}

TEST(Session, ManualDerivationMatchesHeadlessReplay) {
  SessionManager m;
  Json st = new_solver(m);
  for (const auto& label : kManualSumLoop) {
    ASSERT_EQ(st["status"], "running") << st.dump();
    st = op(m, "choose", st, {{"index", choice_index(st, label)}});
    ASSERT_TRUE(st["ok"].get<bool>()) << st.dump();
  }
  ASSERT_EQ(st["status"], "succeeded") << st.dump();
  std::vector<std::string> inv;
  for (const auto& t : st["trees"]["invariant"]) inv.push_back(t["text"]);
  std::sort(inv.begin(), inv.end());
  EXPECT_EQ(inv, (std::vector<std::string>{"x >= 1", "x >= y", "y >= 0"}));
  EXPECT_DOUBLE_EQ(st["result"]["reward"].get<double>(), 0.4);

  auto trace = st["trace"].get<std::vector<std::size_t>>();
  ExecutionState headless =
      ExecutionState::replay(std::make_shared<SolverStrategy>(parse_task(sum_loop_text())), trace);
  ASSERT_EQ(headless.status(), RunStatus::Succeeded);
  EXPECT_EQ(headless.reward(), st["result"]["reward"].get<double>());
  EXPECT_EQ(Json(headless.event_counts()), st["events"]);

  Json replayed = m.handle({{"op", "new_session"}, {"kind", "solver"}, {"task", sum_loop_text()}, {"trace", trace}});
  EXPECT_EQ(replayed["result"], st["result"]);
}

TEST(Session, StepBestReachesTerminalState) {
  SessionManager m;
  Json st = new_solver(m);
  for (int i = 0; i < 64 && st["status"] == "running"; ++i) {
    st = op(m, "step_best", st, {{"sims", 400}});
    ASSERT_TRUE(st["ok"].get<bool>()) << st.dump();
    EXPECT_TRUE(st.contains("chosen"));
  }
  EXPECT_EQ(st["status"], "succeeded");
}

TEST(Session, Errors) {
  SessionManager m;
  EXPECT_EQ(m.handle({{"op", "get_state"}, {"session", 42}})["error"]["code"], 404);
  EXPECT_EQ(m.handle({{"op", "frobnicate"}})["error"]["code"], 400);
  EXPECT_EQ(m.handle(Json::array())["error"]["code"], 400);
  EXPECT_EQ(m.handle({{"op", "new_session"}, {"kind", "solver"}, {"task", "while ("}})["error"]["code"], 400);
  EXPECT_EQ(m.handle({{"op", "new_session"}, {"kind", "oracle"}})["error"]["code"], 400);
  Json st = new_solver(m);
  EXPECT_EQ(op(m, "choose", st, {{"index", 3}})["error"]["code"], 400);
  EXPECT_EQ(op(m, "choose", st, {{"index", -1}})["error"]["code"], 400);
  EXPECT_EQ(op(m, "run_mcts", st, {{"sims", 0}})["error"]["code"], 400);
  for (const auto& label : kManualSumLoop) st = op(m, "choose", st, {{"index", choice_index(st, label)}});
  ASSERT_EQ(st["status"], "succeeded");
  EXPECT_EQ(op(m, "choose", st, {{"index", 0}})["error"]["code"], 409);
  EXPECT_EQ(op(m, "step_best", st)["error"]["code"], 409);
  EXPECT_TRUE(op(m, "close", st)["ok"].get<bool>());
  EXPECT_EQ(op(m, "get_state", st)["error"]["code"], 404);
  EXPECT_EQ(m.num_sessions(), 0u);
}

TEST(Session, TeacherSessionShowsConstraintRecord) {
  SessionManager m;
  Json st = m.handle({{"op", "new_session"}, {"kind", "teacher"}, {"seed", 3}});
  ASSERT_TRUE(st["ok"].get<bool>()) << st.dump();
  EXPECT_EQ(st["probe"]["strategy"], "teacher");
  EXPECT_TRUE(st["probe"].contains("constraints"));
  EXPECT_TRUE(st["probe"].contains("violations"));
  EXPECT_EQ(st["evaluation"]["events"].size(), teacher_run_config().events.size());
  for (int i = 0; i < 200 && st["status"] == "running"; ++i) st = op(m, "step_best", st, {{"sims", 8}});
  ASSERT_NE(st["status"], "running");
  if (st["status"] == "succeeded") {
    EXPECT_TRUE(st["result"]["outcome"].contains("task_text"));
  }
}

TEST(Session, SessionsAreIsolated) {
  SessionManager m;
  Json a = new_solver(m);
  Json b = new_solver(m);
  EXPECT_NE(a["session"], b["session"]);
  op(m, "choose", a, {{"index", 1}});
  EXPECT_EQ(op(m, "get_state", b)["depth"], 0);
  std::vector<std::thread> ts;
  std::vector<int> depth(4, -1);
  for (int k = 0; k < 4; ++k)
    ts.emplace_back([&, k] {
      Json s = new_solver(m);
      for (const auto& label : kManualSumLoop) s = op(m, "choose", s, {{"index", choice_index(s, label)}});
      depth[static_cast<std::size_t>(k)] = s["depth"].get<int>();
    });
  for (auto& t : ts) t.join();
  for (int d : depth) EXPECT_EQ(d, static_cast<int>(kManualSumLoop.size()));
}

TEST(Session, LineDelimitedStream) {
  SessionManager m;
  std::istringstream in(Json{{"op", "new_session"}, {"kind", "solver"}, {"task", sum_loop_text()}}.dump() + "\n\n" +
                        R"({"op":"run_mcts","session":1,"sims":4})" + "\nnot json\n");
  std::ostringstream out;
  m.serve_lines(in, out);
  std::istringstream lines(out.str());
  std::vector<Json> rs;
  for (std::string l; std::getline(lines, l);) rs.push_back(Json::parse(l));
  ASSERT_EQ(rs.size(), 3u);
  EXPECT_TRUE(rs[0]["ok"].get<bool>());
  EXPECT_EQ(rs[1]["mcts"]["simulations"], 4);
  EXPECT_EQ(rs[2]["error"]["code"], 400);
}

TEST(Session, HttpEndpoints) {
  SessionManager m;
  HttpServer srv(m);
  int port = srv.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread t([&] { srv.listen(); });
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(60, 0);
  for (int i = 0; i < 100 && !cli.Get("/protocol"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));

  auto proto = cli.Get("/protocol");
  ASSERT_TRUE(proto);
  EXPECT_EQ(Json::parse(proto->body)["protocol_version"], kProtocolVersion);

  auto created = cli.Post("/session", Json{{"kind", "solver"}, {"task", sum_loop_text()}}.dump(), "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 200);
  std::string id = Json::parse(created->body)["session"].dump();

  auto mcts = cli.Post("/session/" + id + "/mcts", R"({"sims": 32})", "application/json");
  ASSERT_TRUE(mcts);
  EXPECT_EQ(Json::parse(mcts->body)["mcts"]["simulations"], 32);
  auto step = cli.Post("/session/" + id + "/step", "", "application/json");
  ASSERT_TRUE(step);
  EXPECT_EQ(Json::parse(step->body)["depth"], 1);
  auto chosen = cli.Post("/session/" + id + "/choose", R"({"index": 0})", "application/json");
  EXPECT_EQ(Json::parse(chosen->body)["depth"], 2);
  auto undo = cli.Post("/session/" + id + "/undo", "", "application/json");
  EXPECT_EQ(Json::parse(undo->body)["depth"], 1);
  auto state = cli.Get("/session/" + id + "/state");
  ASSERT_TRUE(state);
  EXPECT_EQ(state->body, undo->body);

  auto missing = cli.Get("/session/999/state");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  auto bad = cli.Post("/session/" + id + "/choose", R"({"index": 99})", "application/json");
  EXPECT_EQ(bad->status, 400);
  auto rpc = cli.Post("/rpc", R"({"op":"get_state","session":)" + id + "}\n", "application/x-ndjson");
  ASSERT_TRUE(rpc);
  EXPECT_EQ(Json::parse(rpc->body)["depth"], 1);
  auto closed = cli.Delete("/session/" + id);
  EXPECT_EQ(closed->status, 200);

  srv.stop();
  t.join();
}
