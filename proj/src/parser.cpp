#include "invsynth/parser.hpp"

#include <cctype>
#include <charconv>

namespace invsynth {

namespace {

enum class Tok { Ident, Meta, Int, Punct, End };

struct Token {
  Tok kind;
  std::string text;
  std::int64_t value = 0;
  int line = 1;
  int col = 1;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  static const char* const puncts[] = {"&&", "||", "->", "<=", ">=", "==", "!=", "<", ">", "=", "!", "+",
                                       "-",  "*",  "(",  ")",  "{",  "}",  ";",  ",", ":"};
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t{Tok::End, "", 0, line, col};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.text = std::string(src.substr(i, j - i));
      t.kind = Tok::Ident;
      if (j < src.size() && src[j] == '?') {
        t.kind = Tok::Meta;
        ++j;
      }
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      t.kind = Tok::Int;
      t.text = std::string(src.substr(i, j - i));
      auto [p, ec] = std::from_chars(src.data() + i, src.data() + j, t.value);
      if (ec != std::errc()) throw ParseError("integer literal out of range", line, col);
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }
    bool matched = false;
    for (const char* p : puncts) {
      std::string_view pv(p);
      if (src.substr(i, pv.size()) == pv) {
        t.kind = Tok::Punct;
        t.text = std::string(pv);
        advance(pv.size());
        out.push_back(std::move(t));
        matched = true;
        break;
      }
    }
    if (!matched) throw ParseError(std::string("unexpected character '") + c + "'", line, col);
  }
  out.push_back({Tok::End, "<end of input>", 0, line, col});
  return out;
}

struct Backtrack {};

class Parser {
 public:
  Parser(std::string_view src, bool allow_metas) : toks_(lex(src)), allow_metas_(allow_metas) {}

  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool at_end() const { return peek().kind == Tok::End; }
  bool is(std::string_view p) const { return peek().kind == Tok::Punct && peek().text == p; }
  bool is_kw(std::string_view k) const { return peek().kind == Tok::Ident && peek().text == k; }

  [[noreturn]] void error(const std::string& msg) const { throw ParseError(msg, peek().line, peek().col); }

  void expect(std::string_view p) {
    if (!is(p)) error("expected '" + std::string(p) + "' but found '" + peek().text + "'");
    ++pos_;
  }
  void expect_kw(std::string_view k) {
    if (!is_kw(k)) error("expected '" + std::string(k) + "' but found '" + peek().text + "'");
    ++pos_;
  }
  bool accept(std::string_view p) {
    if (!is(p)) return false;
    ++pos_;
    return true;
  }

  // expr := ['-'] term {('+'|'-') term}
  LinExpr expr() {
    LinExpr acc = term();
    while (is("+") || is("-")) {
      bool minus = peek().text == "-";
      ++pos_;
      LinExpr t = term();
      acc = minus ? acc - t : acc + t;
    }
    return acc;
  }

  LinExpr term() {
    LinExpr acc = unary();
    while (is("*")) {
      const Token& at = peek();
      ++pos_;
      LinExpr rhs = unary();
      if (acc.is_constant()) {
        acc = rhs.scaled(acc.constant_term());
      } else if (rhs.is_constant()) {
        acc = acc.scaled(rhs.constant_term());
      } else {
        throw ParseError("non-linear expression", at.line, at.col);
      }
    }
    return acc;
  }

  LinExpr unary() {
    if (accept("-")) return -unary();
    return atom_expr();
  }

  LinExpr atom_expr() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Int:
        ++pos_;
        return LinExpr::constant(t.value);
      case Tok::Ident:
        if (t.text == "true" || t.text == "false" || is_keyword(t.text)) error("expected an expression");
        ++pos_;
        return LinExpr::var(t.text);
      case Tok::Meta:
        if (!allow_metas_) error("metavariables are not allowed here");
        ++pos_;
        return LinExpr::meta(t.text);
      case Tok::Punct:
        if (t.text == "(") {
          ++pos_;
          LinExpr e = expr();
          if (!is(")")) throw Backtrack{};
          ++pos_;
          return e;
        }
        break;
      case Tok::End:
        break;
    }
    error("expected an expression but found '" + t.text + "'");
  }

  static bool is_keyword(const std::string& s) {
    return s == "while" || s == "if" || s == "else" || s == "assume" || s == "assert" || s == "skip" ||
           s == "int" || s == "invariant";
  }

  // formula := disj ['->' formula]
  Formula formula() {
    Formula lhs = disj();
    if (accept("->")) return f_implies(lhs, formula());
    return lhs;
  }

  Formula disj() {
    std::vector<Formula> parts{conj()};
    while (accept("||")) parts.push_back(conj());
    return parts.size() == 1 ? parts.front() : f_or(std::move(parts));
  }

  Formula conj() {
    std::vector<Formula> parts{neg()};
    while (accept("&&")) parts.push_back(neg());
    return parts.size() == 1 ? parts.front() : f_and(std::move(parts));
  }

  Formula neg() {
    if (accept("!")) return f_not(neg());
    return primary();
  }

  Formula primary() {
    if (is_kw("true")) {
      ++pos_;
      return Formula::truth();
    }
    if (is_kw("false")) {
      ++pos_;
      return Formula::falsity();
    }
    std::size_t save = pos_;
    if (is("(")) {
      try {
        return comparison();
      } catch (const Backtrack&) {
      } catch (const ParseError&) {
      }
      pos_ = save + 1;
      Formula f = formula();
      expect(")");
      return f;
    }
    try {
      return comparison();
    } catch (const Backtrack&) {
      pos_ = save;
      error("unbalanced parenthesis");
    }
  }

  Formula comparison() {
    LinExpr lhs = expr();
    const Token& op = peek();
    SourceRel rel;
    if (is("<")) rel = SourceRel::Lt;
    else if (is("<=")) rel = SourceRel::Le;
    else if (is(">")) rel = SourceRel::Gt;
    else if (is(">=")) rel = SourceRel::Ge;
    else if (is("==")) rel = SourceRel::Eq;
    else if (is("!=")) rel = SourceRel::Ne;
    else throw ParseError("expected a comparison operator but found '" + op.text + "'", op.line, op.col);
    ++pos_;
    LinExpr rhs = expr();
    return normalize_atom(lhs, rel, rhs);
  }

  // Optional guard `(*)` or `(f)`; returns nullopt for `*`.
  std::optional<Formula> guard() {
    expect("(");
    if (is("*") && peek(1).kind == Tok::Punct && peek(1).text == ")") {
      pos_ += 2;
      return std::nullopt;
    }
    Formula f = formula();
    expect(")");
    return f;
  }

  Stmt block(std::vector<Formula>* invariants) {
    expect("{");
    std::vector<Stmt> parts;
    while (!is("}")) {
      if (at_end()) error("unterminated block");
      if (is_kw("invariant")) {
        if (invariants == nullptr) error("invariant annotations are only allowed in the loop body");
        ++pos_;
        invariants->push_back(formula());
        expect(";");
        continue;
      }
      parts.push_back(statement());
    }
    expect("}");
    return Stmt::seq(std::move(parts));
  }

  Stmt statement() {
    if (is_kw("skip")) {
      ++pos_;
      expect(";");
      return Stmt::skip();
    }
    if (is_kw("assume")) {
      ++pos_;
      Formula f = formula();
      expect(";");
      return Stmt::assume(f);
    }
    if (is_kw("if")) {
      ++pos_;
      auto g = guard();
      Stmt then_b = block(nullptr);
      if (is_kw("else")) {
        ++pos_;
        Stmt else_b = is_kw("if") ? statement() : block(nullptr);
        return Stmt::if_then(g, then_b, else_b);
      }
      return Stmt::if_then(g, then_b);
    }
    if (is_kw("while")) error("nested loops are not supported");
    if (is_kw("assert")) error("assert is only allowed as the final statement");
    if (is_kw("invariant")) error("invariant annotations are only allowed in the loop body");
    if (peek().kind == Tok::Ident && !is_keyword(peek().text) && peek(1).kind == Tok::Punct &&
        peek(1).text == "=") {
      std::string target = peek().text;
      pos_ += 2;
      LinExpr e = expr();
      if (!is(";")) {
        if (is("*")) error("non-linear expression");
        expect(";");
      }
      ++pos_;
      return Stmt::assign(target, e);
    }
    error("expected a statement but found '" + peek().text + "'");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  bool allow_metas_;
};

struct PreludeItem {
  Stmt stmt;
  int line;
  int col;
};

Formula fold_prelude(const std::vector<PreludeItem>& items) {
  std::vector<Formula> conj;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const Stmt& s = items[k].stmt;
    std::set<std::string> assigned_from_here;
    for (std::size_t j = k; j < items.size(); ++j)
      if (items[j].stmt.kind() == Stmt::Kind::Assign) assigned_from_here.insert(items[j].stmt.target());
    std::set<std::string> used;
    if (s.kind() == Stmt::Kind::Assign) {
      for (const auto& t : s.value().vars()) used.insert(t.name);
      for (std::size_t j = 0; j < k; ++j)
        if (items[j].stmt.kind() == Stmt::Kind::Assign && items[j].stmt.target() == s.target())
          throw ParseError("variable '" + s.target() + "' assigned twice before the loop", items[k].line, items[k].col);
    } else {
      used = free_vars(s.condition());
    }
    for (const auto& v : used)
      if (assigned_from_here.count(v))
        throw ParseError("'" + v + "' is read before its assignment preceding the loop", items[k].line, items[k].col);
    if (s.kind() == Stmt::Kind::Assign) {
      conj.push_back(make_atom(LinExpr::var(s.target()) - s.value(), Rel::Eq));
    } else {
      conj.push_back(s.condition());
    }
  }
  return f_and(std::move(conj));
}

}  // namespace

LoopTask parse_task(std::string_view text) {
  Parser p(text, false);
  LoopTask t;
  std::vector<PreludeItem> prelude;
  bool saw_prelude_stmt = false;
  while (!p.is_kw("while")) {
    if (p.at_end()) p.error("missing loop");
    if (p.is_kw("int")) {
      if (saw_prelude_stmt) p.error("declarations must precede statements");
      ++p.pos_;
      do {
        if (p.peek().kind != Tok::Ident || Parser::is_keyword(p.peek().text)) p.error("expected a variable name");
        std::string name = p.peek().text;
        ++p.pos_;
        bool dup = false;
        for (const auto& v : t.vars) dup = dup || v.name == name;
        if (!dup) t.vars.push_back({name, VarKind::Mutable});
      } while (p.accept(","));
      p.expect(";");
      continue;
    }
    const Token at = p.peek();
    if (p.is_kw("if")) p.error("conditionals before the loop are not supported");
    Stmt s = p.statement();
    saw_prelude_stmt = true;
    if (s.kind() == Stmt::Kind::Skip) continue;
    prelude.push_back({s, at.line, at.col});
  }
  t.init = fold_prelude(prelude);
  t.style.init_as_instrs = false;
  for (const auto& item : prelude)
    if (item.stmt.kind() == Stmt::Kind::Assign) t.style.init_as_instrs = true;
  ++p.pos_;
  t.guard = p.guard();
  const Token body_at = p.peek();
  t.body = p.block(&t.invariants);
  if (is_empty_body(t.body)) throw ParseError("empty loop body", body_at.line, body_at.col);

  std::vector<Formula> post_units;
  while (!p.is_kw("assert")) {
    if (p.at_end()) p.error("missing final assert");
    if (p.is_kw("while")) p.error("only one loop is supported");
    Stmt s = p.statement();
    if (s.kind() == Stmt::Kind::Skip) continue;
    if (s.kind() != Stmt::Kind::Assume) p.error("only assumptions may follow the loop");
    post_units.push_back(f_not(s.condition()));
  }
  ++p.pos_;
  Formula asserted = p.formula();
  p.expect(";");
  if (!p.at_end()) p.error("unexpected input after the final assert");
  t.style.post_assumes = post_units.size();
  post_units.push_back(asserted);
  t.post = f_or(std::move(post_units));
  infer_var_kinds(t);
  return t;
}

Formula parse_formula(std::string_view text) {
  Parser p(text, true);
  Formula f = p.formula();
  if (!p.at_end()) p.error("unexpected input after formula");
  return f;
}

LinExpr parse_expr(std::string_view text) {
  Parser p(text, true);
  try {
    LinExpr e = p.expr();
    if (!p.at_end()) p.error("unexpected input after expression");
    return e;
  } catch (const Backtrack&) {
    p.error("unbalanced parenthesis");
  }
}

}  // namespace invsynth
