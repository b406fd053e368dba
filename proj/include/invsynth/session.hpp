#pragma once

// Interactive strategy sessions behind a JSON request/response interface,
// served over HTTP or line-delimited standard input/output. The wire format
// is described in docs/protocol.md.

#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "invsynth/ast.hpp"
#include "invsynth/mcts.hpp"
#include "invsynth/strategy.hpp"

namespace invsynth {

inline constexpr int kProtocolVersion = 1;

Json formula_tree(const Formula& f);
Json stmt_tree(const Stmt& s);
Json task_tree(const LoopTask& t);

class SessionManager {
 public:
  explicit SessionManager(std::shared_ptr<const Evaluator> eval = std::make_shared<UniformEvaluator>());
  ~SessionManager();

  /// `request` is {"op": ..., ...}. Responses carry "ok"; failures carry
  /// "error": {"code", "message"} with HTTP-like codes (400 bad request,
  /// 404 unknown session, 409 terminal session).
  Json handle(const Json& request);
  /// One request per line, one response per line, until end of input.
  void serve_lines(std::istream& in, std::ostream& out);

  std::size_t num_sessions() const;

 private:
  struct Session;
  std::shared_ptr<Session> find(const Json& request);
  Json state_of(Session& s) const;

  std::shared_ptr<const Evaluator> eval_;
  mutable std::mutex mu_;
  std::map<std::uint64_t, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

class HttpServer {
 public:
  explicit HttpServer(SessionManager& mgr);
  ~HttpServer();

  /// Port 0 picks a free port. Returns the bound port, or -1 on failure.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace invsynth
