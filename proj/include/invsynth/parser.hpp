#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "invsynth/ast.hpp"

namespace invsynth {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line, int column)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Parses a `.imp` task. Statements before the loop fold into `init`,
/// trailing assumptions fold into `post` as negated disjuncts.
LoopTask parse_task(std::string_view text);

/// Parses a formula; identifiers written `c?` denote metavariables.
Formula parse_formula(std::string_view text);
LinExpr parse_expr(std::string_view text);

std::string print_expr(const LinExpr& e);
std::string print_atom(const Atom& a);
std::string print_formula(const Formula& f);
std::string print_stmt(const Stmt& s, int indent = 0);
std::string print_task(const LoopTask& t);

}  // namespace invsynth
