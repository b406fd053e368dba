#include <algorithm>
#include <sstream>

#include "invsynth/parser.hpp"

namespace invsynth {

namespace {

struct Side {
  std::vector<Term> terms;  // variables first, then metavariables (with '?')
  std::int64_t constant = 0;
};

std::string render(const Side& s) {
  std::ostringstream os;
  bool first = true;
  auto emit = [&](std::int64_t c, const std::string& body) {
    if (first) {
      if (c < 0) os << '-';
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    std::int64_t a = c < 0 ? -c : c;
    if (body.empty()) {
      os << a;
    } else {
      if (a != 1) os << a << '*';
      os << body;
    }
    first = false;
  };
  for (const auto& t : s.terms) emit(t.coeff, t.name);
  if (s.constant != 0 || first) {
    if (first && s.constant == 0) {
      os << '0';
    } else {
      emit(s.constant, "");
    }
  }
  return os.str();
}

std::vector<Term> all_terms(const LinExpr& e) {
  std::vector<Term> ts = e.vars();
  for (const auto& m : e.metas()) ts.push_back({m.name + "?", m.coeff});
  return ts;
}

// Splits `e op 0` into `lhs op rhs` with positive coefficients on both
// sides; the constant goes opposite the variables when one side is empty.
std::pair<Side, Side> split(const LinExpr& e) {
  Side l, r;
  for (const auto& t : all_terms(e)) {
    if (t.coeff > 0) {
      l.terms.push_back(t);
    } else {
      r.terms.push_back({t.name, -t.coeff});
    }
  }
  if (l.terms.empty()) {
    l.constant = e.constant_term();
  } else {
    r.constant = -e.constant_term();
  }
  return {l, r};
}

int precedence(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::Implies:
      return 1;
    case Formula::Kind::Or:
      return as_disequality(f) ? 5 : 2;
    case Formula::Kind::And:
      return 3;
    case Formula::Kind::Not:
      return 4;
    default:
      return 5;
  }
}

std::string print_prec(const Formula& f, int ctx) {
  std::string s;
  switch (f.kind()) {
    case Formula::Kind::True:
      return "true";
    case Formula::Kind::False:
      return "false";
    case Formula::Kind::Atom:
      return print_atom(f.atom());
    case Formula::Kind::Not:
      s = "!" + print_prec(f.children()[0], 5);
      break;
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      if (auto eq = as_disequality(f)) {
        auto [l, r] = split(eq->expr());
        return eq->style().mirrored ? render(r) + " != " + render(l) : render(l) + " != " + render(r);
      }
      bool is_and = f.kind() == Formula::Kind::And;
      auto units = is_and ? f.children() : disjunct_units(f);
      int own = precedence(f);
      for (std::size_t i = 0; i < units.size(); ++i) {
        if (i > 0) s += is_and ? " && " : " || ";
        s += print_prec(units[i], own + 1);
      }
      break;
    }
    case Formula::Kind::Implies:
      s = print_prec(f.children()[0], 2) + " -> " + print_prec(f.children()[1], 1);
      break;
  }
  return precedence(f) < ctx ? "(" + s + ")" : s;
}

void indent_to(std::ostringstream& os, int n) {
  for (int i = 0; i < n; ++i) os << "    ";
}

std::string guard_text(const std::optional<Formula>& g) { return g ? print_formula(*g) : std::string("*"); }

void print_stmt_into(std::ostringstream& os, const Stmt& s, int indent) {
  switch (s.kind()) {
    case Stmt::Kind::Skip:
      indent_to(os, indent);
      os << "skip;\n";
      return;
    case Stmt::Kind::Assign:
      indent_to(os, indent);
      os << s.target() << " = " << print_expr(s.value()) << ";\n";
      return;
    case Stmt::Kind::Seq:
      for (const auto& p : s.parts()) print_stmt_into(os, p, indent);
      return;
    case Stmt::Kind::Assume:
      indent_to(os, indent);
      os << "assume " << print_formula(s.condition()) << ";\n";
      return;
    case Stmt::Kind::If:
      indent_to(os, indent);
      os << "if (" << guard_text(s.guard()) << ") {\n";
      if (!is_empty_body(s.then_branch())) print_stmt_into(os, s.then_branch(), indent + 1);
      indent_to(os, indent);
      os << "}";
      if (s.has_else()) {
        os << " else {\n";
        if (!is_empty_body(s.else_branch())) print_stmt_into(os, s.else_branch(), indent + 1);
        indent_to(os, indent);
        os << "}";
      }
      os << "\n";
      return;
  }
}

// Picks, in conjunct order, which init equalities can be written as
// assignments without reading a variable before it is assigned.
std::vector<std::optional<std::string>> assignment_targets(const std::vector<Formula>& conj,
                                                           const LoopTask& t) {
  std::vector<std::optional<std::string>> targets(conj.size());
  std::set<std::string> read_so_far;
  std::set<std::string> taken;
  for (std::size_t k = 0; k < conj.size(); ++k) {
    const Formula& c = conj[k];
    auto vars = free_vars(c);
    if (c.is_atom() && c.atom().rel() == Rel::Eq && !c.atom().expr().has_metas()) {
      std::vector<std::string> cands;
      for (const auto& term : c.atom().expr().vars())
        if (term.coeff == 1 || term.coeff == -1) cands.push_back(term.name);
      std::stable_sort(cands.begin(), cands.end(), [&](const std::string& a, const std::string& b) {
        return !t.is_parameter(a) && t.is_parameter(b);
      });
      for (const auto& x : cands) {
        if (taken.count(x) || read_so_far.count(x)) continue;
        targets[k] = x;
        taken.insert(x);
        break;
      }
    }
    for (const auto& v : vars)
      if (!targets[k] || v != *targets[k]) read_so_far.insert(v);
  }
  return targets;
}

}  // namespace

std::string print_expr(const LinExpr& e) {
  Side s;
  s.terms = all_terms(e);
  s.constant = e.constant_term();
  return render(s);
}

std::string print_atom(const Atom& a) {
  LinExpr e = a.expr();
  std::string op = "==";
  if (a.rel() == Rel::Ge) {
    op = ">=";
    if (a.style().strict) {
      e = e.plus_constant(1);
      op = ">";
    }
  }
  auto [l, r] = split(e);
  std::string ls = render(l), rs = render(r);
  // A lone constant reads better on the right.
  bool mirrored = a.style().mirrored || (l.terms.empty() && !r.terms.empty());
  if (!mirrored) return ls + " " + op + " " + rs;
  if (op[0] == '>') op[0] = '<';
  return rs + " " + op + " " + ls;
}

std::string print_formula(const Formula& f) { return print_prec(f, 0); }

std::string print_stmt(const Stmt& s, int indent) {
  std::ostringstream os;
  print_stmt_into(os, s, indent);
  return os.str();
}

std::string print_task(const LoopTask& t) {
  std::ostringstream os;
  if (!t.vars.empty()) {
    os << "int ";
    for (std::size_t i = 0; i < t.vars.size(); ++i) os << (i ? ", " : "") << t.vars[i].name;
    os << ";\n";
  }
  auto init_conj = conjuncts(t.init);
  if (t.init.is_false()) init_conj = {t.init};
  std::vector<std::optional<std::string>> targets(init_conj.size());
  if (t.style.init_as_instrs) targets = assignment_targets(init_conj, t);
  for (std::size_t k = 0; k < init_conj.size(); ++k) {
    if (targets[k]) {
      const LinExpr& e = init_conj[k].atom().expr();
      std::int64_t c = e.coeff(*targets[k]);
      LinExpr rhs = (e - LinExpr::var(*targets[k], c)).scaled(-c);
      os << *targets[k] << " = " << print_expr(rhs) << ";\n";
    } else {
      os << "assume " << print_formula(init_conj[k]) << ";\n";
    }
  }
  os << "while (" << guard_text(t.guard) << ") {\n";
  for (const auto& inv : t.invariants) os << "    invariant " << print_formula(inv) << ";\n";
  print_stmt_into(os, t.body, 1);
  os << "}\n";
  auto units = disjunct_units(t.post);
  std::size_t n_assumes = std::min(t.style.post_assumes, units.empty() ? 0 : units.size() - 1);
  for (std::size_t k = 0; k < n_assumes; ++k) os << "assume " << print_formula(f_not(units[k])) << ";\n";
  std::vector<Formula> rest(units.begin() + static_cast<std::ptrdiff_t>(n_assumes), units.end());
  os << "assert " << print_formula(rest.empty() ? Formula::falsity() : f_or(rest)) << ";\n";
  return os.str();
}

}  // namespace invsynth
