#include "condsym/pdeparse.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "condsym/error.hpp"

namespace condsym {

// ---------------------------------------------------------------------------
// Declarations

bool Declarations::is_param(const std::string& n) const {
  return std::find(params.begin(), params.end(), n) != params.end();
}

bool Declarations::is_dep(const std::string& n) const {
  return std::find(deps.begin(), deps.end(), n) != deps.end();
}

const FunctionDecl* Declarations::function(const std::string& n) const {
  for (const auto& f : functions) {
    if (f.name == n) return &f;
  }
  return nullptr;
}

void Declarations::add_function(FunctionDecl f) {
  for (auto& g : functions) {
    if (g.name == f.name) {
      g = std::move(f);
      return;
    }
  }
  functions.push_back(std::move(f));
}

Expr Declarations::apply(const std::string& name, std::vector<Expr> args, std::vector<int> deriv) const {
  const FunctionDecl* f = function(name);
  if (!f) throw PreconditionError("undeclared function '" + name + "'");
  if (args.size() != f->args.size()) throw PreconditionError("wrong number of arguments for '" + name + "'");
  return Expr(Atom::func(name, f->args, std::move(args), std::move(deriv)));
}

Expr Declarations::apply_declared(const std::string& name, std::vector<int> deriv) const {
  const FunctionDecl* f = function(name);
  if (!f) throw PreconditionError("undeclared function '" + name + "'");
  std::vector<Expr> args;
  for (const auto& a : f->args) {
    if (a == kTime || a == kSpace) {
      args.push_back(Expr::indep(a));
    } else if (is_dep(a)) {
      args.push_back(Expr::jet(a));
    } else {
      throw PreconditionError("function '" + name + "' needs explicit arguments");
    }
  }
  return apply(name, std::move(args), std::move(deriv));
}

Declarations Declarations::rd_canonical() {
  Declarations d;
  d.deps = {"u", "v"};
  d.functions = {{"d1", {"u"}},
                 {"d2", {"v"}},
                 {"C1", {"u", "v"}},
                 {"C2", {"u", "v"}},
                 {"xi0", {"t", "x", "u", "v"}},
                 {"xi1", {"t", "x", "u", "v"}},
                 {"eta1", {"t", "x", "u", "v"}},
                 {"eta2", {"t", "x", "u", "v"}}};
  return d;
}

// ---------------------------------------------------------------------------
// Lexing

namespace {

struct Pos {
  int line = 0;
  int column = 0;
};

/// One logical statement with the source position of every byte.
struct Statement {
  std::string text;
  std::vector<Pos> pos;

  Pos at(std::size_t i) const {
    if (pos.empty()) return {};
    return i < pos.size() ? pos[i] : Pos{pos.back().line, pos.back().column + 1};
  }
};

// ASCII replacements for the Unicode symbols accepted in identifiers and operators.
const std::map<std::string, std::string>& unicode_map() {
  static const std::map<std::string, std::string> m = {
      {"λ", "lambda"}, {"ξ", "xi"},    {"η", "eta"},   {"α", "alpha"}, {"ω", "omega"},
      {"β", "beta"},   {"γ", "gamma"}, {"μ", "mu"},    {"₀", "0"},     {"₁", "1"},
      {"₂", "2"},      {"₃", "3"},     {"₄", "4"},     {"₅", "5"},     {"₆", "6"},
      {"₇", "7"},      {"₈", "8"},     {"₉", "9"},     {"⁰", "0"},     {"¹", "1"},
      {"²", "2"},      {"³", "3"},     {"⁴", "4"},     {"⁵", "5"},     {"⁶", "6"},
      {"⁷", "7"},      {"⁸", "8"},     {"⁹", "9"},     {"′", "'"},     {"″", "''"},
      {"−", "-"},      {"·", "*"},     {"≠", "!="},
  };
  return m;
}

std::size_t utf8_length(unsigned char c) {
  if (c < 0x80) return 1;
  if ((c >> 5) == 0x6) return 2;
  if ((c >> 4) == 0xE) return 3;
  if ((c >> 3) == 0x1E) return 4;
  return 1;
}

// Replaces Unicode symbols by ASCII, keeping positions of the original codepoints.
Statement asciify(const std::string& text, int line) {
  Statement s;
  int col = 1;
  for (std::size_t i = 0; i < text.size();) {
    std::size_t n = utf8_length(static_cast<unsigned char>(text[i]));
    std::string cp = text.substr(i, n);
    std::string rep = cp;
    if (n > 1) {
      auto it = unicode_map().find(cp);
      if (it == unicode_map().end()) throw ParseError("unsupported character '" + cp + "'", line, col);
      rep = it->second;
    }
    for (char c : rep) {
      s.text.push_back(c);
      s.pos.push_back({line, col});
    }
    i += n;
    ++col;
  }
  return s;
}

enum class Tok { Num, Ident, Op, Suffix, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Pos pos;
};

std::vector<Token> lex(const Statement& st) {
  std::vector<Token> out;
  const std::string& s = st.text;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.pos = st.at(i);
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      std::size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
      t.kind = Tok::Num;
      t.text = s.substr(i, j - i);
      i = j;
    } else if (c == '_' && !out.empty() && out.back().kind == Tok::Op && out.back().text == ")") {
      std::size_t j = i + 1;
      while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
      t.kind = Tok::Suffix;
      t.text = s.substr(i + 1, j - i - 1);
      if (t.text.empty()) throw ParseError("malformed derivative suffix", t.pos.line, t.pos.column);
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      t.kind = Tok::Ident;
      t.text = s.substr(i, j - i);
      i = j;
    } else if (c == '!' && i + 1 < s.size() && s[i + 1] == '=') {
      t.kind = Tok::Op;
      t.text = "!=";
      i += 2;
    } else if (c == '=' && i + 1 < s.size() && s[i + 1] == '=') {
      t.kind = Tok::Op;
      t.text = "=";
      i += 2;
    } else if (std::string("+-*/^(),=:'").find(c) != std::string::npos) {
      t.kind = Tok::Op;
      t.text = std::string(1, c);
      ++i;
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", t.pos.line, t.pos.column);
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::End;
  end.pos = st.at(s.size());
  out.push_back(end);
  return out;
}

Rational parse_number(const std::string& s, Pos p) {
  auto dot = s.find('.');
  if (dot == std::string::npos) return Rational(mpz_class(s, 10));
  if (s.find('.', dot + 1) != std::string::npos) throw ParseError("malformed number '" + s + "'", p.line, p.column);
  std::string whole = s.substr(0, dot);
  std::string frac = s.substr(dot + 1);
  mpz_class den = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
  Rational q(mpz_class((whole.empty() ? "0" : whole) + frac, 10), den);
  q.canonicalize();
  return q;
}

// ---------------------------------------------------------------------------
// Expression parser

class Parser {
 public:
  Parser(const Statement& st, const Declarations& d) : toks_(lex(st)), d_(d) {}

  TreePtr expression() {
    TreePtr first = term();
    std::vector<TreePtr> parts{first};
    while (peek_op("+") || peek_op("-")) {
      bool minus = next().text == "-";
      TreePtr t = term();
      parts.push_back(minus ? Tree::make(Tree::Kind::Neg, {t}) : t);
    }
    return parts.size() == 1 ? first : Tree::make(Tree::Kind::Sum, std::move(parts));
  }

  bool at_end() const { return toks_[i_].kind == Tok::End; }
  bool peek_op(const char* op) const { return toks_[i_].kind == Tok::Op && toks_[i_].text == op; }
  bool peek_ident(const char* word) const { return toks_[i_].kind == Tok::Ident && toks_[i_].text == word; }
  const Token& peek() const { return toks_[i_]; }
  Token next() { return toks_[i_].kind == Tok::End ? toks_[i_] : toks_[i_++]; }

  void expect_op(const char* op) {
    if (!peek_op(op)) fail("expected '" + std::string(op) + "'");
    ++i_;
  }

  void expect_end() {
    if (!at_end()) fail("unexpected '" + peek().text + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = toks_[i_];
    std::string m = msg;
    if (t.kind == Tok::End && msg.rfind("expected", 0) == 0) m += " at end of input";
    throw ParseError("syntax error: " + m, t.pos.line, t.pos.column);
  }

  std::string ident() {
    if (peek().kind != Tok::Ident) fail("expected a name");
    return next().text;
  }

 private:
  TreePtr term() {
    TreePtr first = unary();
    std::vector<TreePtr> factors{first};
    TreePtr acc = first;
    while (peek_op("*") || peek_op("/")) {
      bool div = next().text == "/";
      TreePtr f = unary();
      if (div) {
        acc = Tree::make(Tree::Kind::Div, {acc, f});
      } else {
        acc = Tree::make(Tree::Kind::Product, {acc, f});
      }
    }
    return acc;
  }

  TreePtr unary() {
    if (peek_op("-")) {
      next();
      return Tree::make(Tree::Kind::Neg, {unary()});
    }
    if (peek_op("+")) {
      next();
      return unary();
    }
    return power();
  }

  TreePtr power() {
    TreePtr b = postfix();
    if (peek_op("^")) {
      Pos p = next().pos;
      TreePtr e = unary();
      auto t = std::make_shared<Tree>(*Tree::make(Tree::Kind::Power, {b, e}));
      t->line = p.line;
      t->column = p.column;
      return t;
    }
    return b;
  }

  TreePtr postfix() {
    TreePtr p = primary();
    while (peek().kind == Tok::Suffix) {
      Token s = next();
      for (char c : s.text) {
        if (c != 't' && c != 'x') throw ParseError("malformed derivative suffix '_" + s.text + "'", s.pos.line, s.pos.column);
        auto t = std::make_shared<Tree>(*Tree::make(Tree::Kind::TotalDeriv, {p}));
        t->direction = c;
        t->line = s.pos.line;
        t->column = s.pos.column;
        p = t;
      }
    }
    return p;
  }

  TreePtr primary() {
    const Token& t = peek();
    if (t.kind == Tok::Num) {
      Token n = next();
      return Tree::make_number(parse_number(n.text, n.pos));
    }
    if (peek_op("(")) {
      next();
      TreePtr e = expression();
      expect_op(")");
      return e;
    }
    if (t.kind == Tok::Ident) return name();
    if (t.kind == Tok::End) fail("unexpected end of input");
    fail("unexpected '" + t.text + "'");
  }

  TreePtr name() {
    Token tok = next();
    int primes = 0;
    while (peek_op("'")) {
      next();
      ++primes;
    }
    std::optional<std::vector<TreePtr>> call;
    if (peek_op("(")) {
      next();
      call.emplace();
      if (!peek_op(")")) {
        call->push_back(expression());
        while (peek_op(",")) {
          next();
          call->push_back(expression());
        }
      }
      expect_op(")");
    }
    TreePtr r = resolve(tok, primes, call);
    auto t = std::make_shared<Tree>(*r);
    t->line = tok.pos.line;
    t->column = tok.pos.column;
    return t;
  }

  [[noreturn]] void fail_at(const Token& tok, const std::string& msg) const {
    throw ParseError(msg, tok.pos.line, tok.pos.column);
  }

  TreePtr resolve(const Token& tok, int primes, const std::optional<std::vector<TreePtr>>& call) {
    const std::string& n = tok.text;
    bool plain = primes == 0 && !call;
    if (n == kExpName && call) {
      if (primes || call->size() != 1) fail_at(tok, "exp takes one argument");
      auto t = std::make_shared<Tree>();
      t->kind = Tree::Kind::Apply;
      t->name = kExpName;
      t->slots = {"#0"};
      t->deriv = {0};
      t->children = *call;
      return t;
    }
    if (plain) {
      if (d_.is_param(n)) return Tree::make_param(n);
      if (auto it = d_.derived.find(n); it != d_.derived.end()) return to_tree(Expr(it->second));
      if (auto it = d_.definitions.find(n); it != d_.definitions.end()) return to_tree(it->second);
      if (n == kTime || n == kSpace) return Tree::make_leaf(Atom::indep(n));
      if (d_.is_dep(n)) return Tree::make_leaf(Atom::jet(n, 0, 0));
    }
    if (const FunctionDecl* f = d_.function(n)) {
      std::vector<int> deriv(f->args.size(), 0);
      if (primes > 0) {
        if (f->args.size() != 1) fail_at(tok, "prime derivative of non-unary function '" + n + "'");
        deriv[0] = primes;
      }
      return application(tok, *f, deriv, call);
    }
    auto us = n.find('_');
    if (us != std::string::npos && us > 0) {
      std::string base = n.substr(0, us);
      std::string suffix = n.substr(us + 1);
      if (d_.is_dep(base)) {
        if (!plain) fail_at(tok, "jet '" + n + "' cannot be applied");
        int nt = 0, nx = 0;
        for (char c : suffix) {
          if (c == 't') {
            ++nt;
          } else if (c == 'x') {
            ++nx;
          } else {
            fail_at(tok, "malformed jet suffix '" + n + "'");
          }
        }
        if (suffix.empty()) fail_at(tok, "malformed jet suffix '" + n + "'");
        return Tree::make_leaf(Atom::jet(base, nt, nx));
      }
      if (const FunctionDecl* f = d_.function(base)) {
        if (primes) fail_at(tok, "mixed derivative notation in '" + n + "'");
        std::vector<int> deriv(f->args.size(), 0);
        std::vector<std::size_t> order(f->args.size());
        for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return f->args[a].size() > f->args[b].size();
        });
        std::size_t k = 0;
        while (k < suffix.size()) {
          bool matched = false;
          for (std::size_t j : order) {
            const std::string& a = f->args[j];
            if (!a.empty() && suffix.compare(k, a.size(), a) == 0) {
              ++deriv[j];
              k += a.size();
              matched = true;
              break;
            }
          }
          if (!matched) fail_at(tok, "malformed derivative suffix '" + n + "'");
        }
        if (suffix.empty()) fail_at(tok, "malformed derivative suffix '" + n + "'");
        return application(tok, *f, deriv, call);
      }
    }
    if (!plain && !d_.function(n)) fail_at(tok, "undeclared function '" + n + "'");
    fail_at(tok, "undeclared symbol '" + n + "'");
  }

  TreePtr application(const Token& tok, const FunctionDecl& f, const std::vector<int>& deriv,
                      const std::optional<std::vector<TreePtr>>& call) {
    auto t = std::make_shared<Tree>();
    t->kind = Tree::Kind::Apply;
    t->name = f.name;
    t->slots = f.args;
    t->deriv = deriv;
    if (call) {
      if (call->size() != f.args.size()) {
        fail_at(tok, "function '" + f.name + "' expects " + std::to_string(f.args.size()) + " arguments");
      }
      t->children = *call;
    } else {
      for (const auto& a : f.args) {
        if (a == kTime || a == kSpace) {
          t->children.push_back(Tree::make_leaf(Atom::indep(a)));
        } else if (d_.is_dep(a)) {
          t->children.push_back(Tree::make_leaf(Atom::jet(a, 0, 0)));
        } else {
          fail_at(tok, "function '" + f.name + "' needs explicit arguments");
        }
      }
    }
    return t;
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
  const Declarations& d_;
};

Expr normalize_tree(const TreePtr& t) {
  try {
    return normalize(*t, [](const Expr& e, char dir) { return total_derivative(e, dir); });
  } catch (const DomainError& e) {
    throw ParseError(e.what(), t->line, t->column);
  }
}

}  // namespace

TreePtr parse_tree(const std::string& text, const Declarations& decls) {
  Statement st = asciify(text, 1);
  Parser p(st, decls);
  TreePtr t = p.expression();
  p.expect_end();
  return t;
}

Expr parse_expr(const std::string& text, const Declarations& decls) {
  return normalize_tree(parse_tree(text, decls));
}

Expr parse_expr(const std::string& text) { return parse_expr(text, Declarations::rd_canonical()); }

std::string render(const Expr& e) { return to_string(e); }

std::string form_name(SystemForm f) {
  switch (f) {
    case SystemForm::Evolution:
      return "evolution";
    case SystemForm::RDOriginal:
      return "rd-original";
    case SystemForm::RDCanonical:
      return "rd-canonical";
  }
  return "evolution";
}

PdeSystem RDCanonical::pde() const {
  PdeSystem p;
  p.deps = deps;
  for (std::size_t a = 0; a < deps.size(); ++a) {
    p.equations.push_back(d[a] * Expr::jet(deps[a], 1, 0) + c[a] - Expr::jet(deps[a], 0, 2));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Source files

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Splits text into blocks of logical statements. A statement continues on the
// next physical line while parentheses are open, after a trailing operator, or
// when the next line is indented.
struct RawBlock {
  std::string name;
  int line = 0;
  std::vector<Statement> statements;
};

std::vector<RawBlock> split_blocks(const std::string& text) {
  std::vector<RawBlock> blocks;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  Statement cur;
  int depth = 0;
  bool continues = false;
  auto flush = [&]() {
    if (!trim(cur.text).empty()) {
      if (blocks.empty()) blocks.push_back({"", cur.pos.front().line, {}});
      blocks.back().statements.push_back(cur);
    }
    cur = Statement{};
    depth = 0;
    continues = false;
  };
  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    bool indented = std::isspace(static_cast<unsigned char>(line[0])) != 0;
    if (t.front() == '[' && t.back() == ']' && depth == 0) {
      flush();
      blocks.push_back({trim(t.substr(1, t.size() - 2)), lineno, {}});
      continue;
    }
    if (!(continues || depth > 0 || (indented && !cur.text.empty()))) flush();
    Statement piece = asciify(line, lineno);
    if (!cur.text.empty()) {
      cur.text.push_back(' ');
      cur.pos.push_back(piece.pos.empty() ? Pos{lineno, 1} : piece.pos.front());
    }
    cur.text += piece.text;
    cur.pos.insert(cur.pos.end(), piece.pos.begin(), piece.pos.end());
    for (char c : piece.text) {
      if (c == '(') ++depth;
      if (c == ')') --depth;
    }
    std::string pt = trim(piece.text);
    char last = pt.empty() ? ' ' : pt.back();
    continues = std::string("+-*/^=,(").find(last) != std::string::npos;
  }
  flush();
  return blocks;
}

Statement slice(const Statement& s, std::size_t from, std::size_t to) {
  Statement out;
  out.text = s.text.substr(from, to - from);
  out.pos.assign(s.pos.begin() + static_cast<std::ptrdiff_t>(from),
                 s.pos.begin() + static_cast<std::ptrdiff_t>(std::min(to, s.pos.size())));
  return out;
}

// Top-level position of the first occurrence of `c` outside parentheses.
std::size_t find_top(const std::string& s, char c, std::size_t start = 0) {
  int depth = 0;
  for (std::size_t i = start; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')') --depth;
    if (depth == 0 && s[i] == c) {
      if (c == '=' && ((i > 0 && s[i - 1] == '!') || (i + 1 < s.size() && s[i + 1] == '='))) continue;
      return i;
    }
  }
  return std::string::npos;
}

std::vector<Statement> split_top(const Statement& s, char c) {
  std::vector<Statement> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t i = find_top(s.text, c, start);
    if (i == std::string::npos) {
      out.push_back(slice(s, start, s.text.size()));
      return out;
    }
    out.push_back(slice(s, start, i));
    start = i + 1;
  }
}

[[noreturn]] void fail_at(const Statement& s, const std::string& msg, std::size_t i = 0) {
  Pos p = s.at(i);
  throw ParseError(msg, p.line, p.column);
}

std::string checked_name(const Statement& s) {
  std::string n = trim(s.text);
  if (n.empty() || !(std::isalpha(static_cast<unsigned char>(n[0])) || n[0] == '_')) fail_at(s, "expected a name");
  for (char c : n) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) fail_at(s, "malformed name '" + n + "'");
  }
  return n;
}

TreePtr tree_of(const Statement& s, const Declarations& d) {
  Parser p(s, d);
  TreePtr t = p.expression();
  p.expect_end();
  return t;
}

Expr expr_of(const Statement& s, const Declarations& d) { return normalize_tree(tree_of(s, d)); }

std::vector<Relation> relations_of(const Statement& s, const Declarations& d) {
  Parser p(s, d);
  std::vector<Relation> out;
  for (;;) {
    Relation r;
    TreePtr lhs = p.expression();
    Expr value = normalize_tree(lhs);
    if (p.peek_op("!=") || p.peek_op("=")) {
      r.nonzero = p.next().text == "!=";
      value = value - normalize_tree(p.expression());
    } else {
      p.fail("expected '!=' or '='");
    }
    r.expr = value;
    out.push_back(std::move(r));
    if (p.peek_ident("or")) {
      p.next();
      continue;
    }
    p.expect_end();
    break;
  }
  std::string t = trim(s.text);
  for (auto& r : out) r.text = t;
  return out;
}

void parse_functions(const Statement& s, Declarations& d) {
  Parser p(s, d);
  while (!p.at_end()) {
    FunctionDecl f;
    f.name = p.ident();
    p.expect_op("(");
    if (!p.peek_op(")")) {
      f.args.push_back(p.ident());
      while (p.peek_op(",")) {
        p.next();
        f.args.push_back(p.ident());
      }
    }
    p.expect_op(")");
    if (d.is_param(f.name) || d.is_dep(f.name)) fail_at(s, "name '" + f.name + "' already declared");
    d.add_function(std::move(f));
    if (p.peek_op(",")) p.next();
  }
}

}  // namespace

SourceFile parse_source(const std::string& text, const std::string& name) {
  SourceFile src;
  src.name = name;
  Declarations& d = src.decls;
  for (const RawBlock& b : split_blocks(text)) {
    if (b.name.empty()) {
      fail_at(b.statements.front(), "statement outside a block");
    }
    for (const Statement& s : b.statements) {
      if (b.name == "params") {
        if (find_top(s.text, '=') != std::string::npos) {
          auto parts = split_top(s, '=');
          if (parts.size() != 2) fail_at(s, "expected 'name = value'");
          std::string n = checked_name(parts[0]);
          Expr v = expr_of(parts[1], d);
          auto c = v.constant();
          if (!c) fail_at(parts[1], "parameter definition must not depend on variables");
          d.derived[n] = *c;
        } else {
          for (const auto& part : split_top(s, ',')) {
            std::istringstream ws(part.text);
            std::string w;
            while (ws >> w) {
              Statement one = asciify(w, part.at(0).line);
              d.params.push_back(checked_name(one));
            }
          }
        }
      } else if (b.name == "variables") {
        for (const auto& part : split_top(s, ',')) {
          std::string n = checked_name(part);
          if (n == kTime || n == kSpace) continue;
          if (n.find('_') != std::string::npos) fail_at(part, "dependent variable names cannot contain '_'");
          d.deps.push_back(n);
        }
      } else if (b.name == "functions") {
        parse_functions(s, d);
      } else if (b.name == "definitions") {
        auto parts = split_top(s, '=');
        if (parts.size() != 2) fail_at(s, "expected 'name = expression'");
        d.definitions[checked_name(parts[0])] = expr_of(parts[1], d);
      } else if (b.name == "system") {
        auto parts = split_top(s, '=');
        if (parts.size() != 2) fail_at(s, "expected 'lhs = rhs'");
        src.system.push_back({tree_of(parts[0], d), tree_of(parts[1], d), s.at(0).line});
      } else if (b.name == "operator") {
        auto parts = split_top(s, '=');
        if (parts.size() != 2) fail_at(s, "expected 'coefficient = expression'");
        std::string key = checked_name(parts[0]);
        src.op[key] = expr_of(parts[1], d);
      } else if (b.name == "constraints") {
        if (find_top(s.text, '=') != std::string::npos && s.text.find("!=") == std::string::npos) {
          auto parts = split_top(s, '=');
          if (parts.size() != 2) fail_at(s, "expected 'lhs = rhs'");
          Expr lhs = expr_of(parts[0], d);
          Expr rhs = expr_of(parts[1], d);
          auto a = lhs.as_atom();
          if (a && a->is_func() && a->args().size() == 1 && a->deriv_order() == 2) {
            src.ode_rules.push_back({a->name(), rhs, trim(s.text)});
          } else {
            src.side_relations.push_back({lhs - rhs, false, trim(s.text)});
          }
        } else {
          for (auto& r : relations_of(s, d)) src.side_relations.push_back(std::move(r));
        }
      } else if (b.name == "restrictions") {
        src.restrictions.push_back(relations_of(s, d));
      } else if (b.name == "assumptions") {
        for (auto& r : relations_of(s, d)) src.assumptions.push_back(std::move(r));
      } else if (b.name == "equations") {
        Statement body = s;
        std::string label;
        std::size_t colon = find_top(s.text, ':');
        if (colon != std::string::npos) {
          label = trim(s.text.substr(0, colon));
          body = slice(s, colon + 1, s.text.size());
        }
        auto parts = split_top(body, '=');
        std::vector<Expr> chain;
        for (const auto& part : parts) chain.push_back(expr_of(part, d));
        if (chain.size() == 1) {
          src.equations.push_back({label, chain[0]});
        } else {
          for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
            src.equations.push_back({label, chain[i] - chain.back()});
          }
        }
      } else if (b.name == "inverse") {
        auto parts = split_top(s, '=');
        if (parts.size() != 2) fail_at(s, "expected 'U = expression'");
        src.inverse[checked_name(parts[0])] = expr_of(parts[1], d);
      } else if (b.name == "meta") {
        auto eq = s.text.find('=');
        if (eq == std::string::npos) fail_at(s, "expected 'key = value'");
        src.meta[trim(s.text.substr(0, eq))] = trim(s.text.substr(eq + 1));
      } else {
        throw ParseError("unknown block [" + b.name + "]", b.line, 1);
      }
    }
  }
  return src;
}

SourceFile load_source(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_source(ss.str(), path);
  } catch (const ParseError& e) {
    throw ParseError(path + ":" + e.what(), e.line(), e.column());
  }
}

namespace {

void flatten_sum(const TreePtr& t, bool negative, std::vector<std::pair<TreePtr, bool>>& out) {
  if (t->kind == Tree::Kind::Sum) {
    for (const auto& c : t->children) flatten_sum(c, negative, out);
  } else if (t->kind == Tree::Kind::Neg) {
    flatten_sum(t->children[0], !negative, out);
  } else {
    out.emplace_back(t, negative);
  }
}

bool jet_free(const Expr& e) {
  for (const auto& j : jets_in(e)) {
    if (j.order() > 0) return false;
  }
  return true;
}

[[noreturn]] void fail_line(const SystemLine& l, const std::string& msg) { throw ParseError(msg, l.line, 1); }

}  // namespace

ParsedSystem parse_system(const SourceFile& src) {
  const Declarations& d = src.decls;
  if (src.system.empty()) throw ParseError("no [system] block");
  std::map<std::string, std::size_t> index;
  for (std::size_t a = 0; a < d.deps.size(); ++a) index[d.deps[a]] = a;
  const std::size_t m = d.deps.size();
  if (src.system.size() != m) throw ParseError("expected one equation per dependent variable");

  enum class Kind { Evolution, Divergence, Canonical };
  std::vector<Kind> kinds(m);
  std::vector<bool> seen(m, false);
  std::vector<Expr> rhs(m), diffusivity(m), reaction(m), dcoef(m), ccoef(m);
  for (const SystemLine& l : src.system) {
    Expr lhs = normalize_tree(l.lhs);
    auto a = lhs.as_atom();
    if (!a || !a->is_jet()) fail_line(l, "left-hand side must be a single derivative");
    auto it = index.find(a->name());
    if (it == index.end()) fail_line(l, "undeclared dependent variable '" + a->name() + "'");
    std::size_t i = it->second;
    if (seen[i]) fail_line(l, "two equations for '" + a->name() + "'");
    seen[i] = true;
    const std::string& u = a->name();
    Expr r = normalize_tree(l.rhs);
    if (a->nt() == 1 && a->nx() == 0) {
      for (const auto& j : jets_in(r)) {
        if (j.nt() > 0) fail_line(l, "time derivatives on right-hand side");
      }
      rhs[i] = r;
      std::vector<std::pair<TreePtr, bool>> parts;
      flatten_sum(l.rhs, false, parts);
      std::optional<Expr> div;
      for (const auto& [t, neg] : parts) {
        if (t->kind != Tree::Kind::TotalDeriv) continue;
        if (div || neg || t->direction != 'x') fail_line(l, "unsupported divergence term");
        Expr inner = normalize_tree(t->children[0]);
        Atom ux = Atom::jet(u, 0, 1);
        std::map<Monomial, Expr> c;
        try {
          c = collect(inner, {ux});
        } catch (const PreconditionError&) {
          fail_line(l, "divergence term must read (D(" + u + ")*" + u + "_x)_x");
        }
        if (c.size() != 1 || c.begin()->first.factors.size() != 1 || !c.begin()->first.factors[0].second.is_one() ||
            !jet_free(c.begin()->second)) {
          fail_line(l, "divergence term must read (D(" + u + ")*" + u + "_x)_x");
        }
        div = c.begin()->second;
      }
      if (div) {
        kinds[i] = Kind::Divergence;
        diffusivity[i] = *div;
        reaction[i] = r - total_derivative(*div * Expr::jet(u, 0, 1), 'x');
        if (!jet_free(reaction[i])) fail_line(l, "reaction term depends on derivatives");
      } else {
        kinds[i] = Kind::Evolution;
      }
    } else if (a->nt() == 0 && a->nx() == 2) {
      kinds[i] = Kind::Canonical;
      Atom ut = Atom::jet(u, 1, 0);
      std::map<Monomial, Expr> c;
      try {
        c = collect(r, {ut});
      } catch (const PreconditionError&) {
        fail_line(l, "canonical form must read " + u + "_xx = d(" + u + ")*" + u + "_t + C");
      }
      Expr dd, cc;
      for (const auto& [mono, coeff] : c) {
        if (mono.empty()) {
          cc = coeff;
        } else if (mono.factors.size() == 1 && mono.factors[0].second.is_one()) {
          dd = coeff;
        } else {
          fail_line(l, "canonical form must be linear in " + u + "_t");
        }
      }
      if (!jet_free(dd) || !jet_free(cc)) fail_line(l, "canonical coefficients depend on derivatives");
      dcoef[i] = dd;
      ccoef[i] = cc;
    } else {
      fail_line(l, "left-hand side must be a first time derivative or, in canonical form, u_xx");
    }
  }
  for (std::size_t i = 1; i < m; ++i) {
    if (kinds[i] != kinds[0]) throw ParseError("mixed forms in [system]");
  }

  ParsedSystem ps;
  if (kinds[0] == Kind::Canonical) {
    ps.form = SystemForm::RDCanonical;
    ps.canonical = RDCanonical{d.deps, dcoef, ccoef};
    ps.pde = ps.canonical->pde();
    return ps;
  }
  EvolutionSystem ev{d.deps, rhs};
  validate(ev);
  ps.evolution = ev;
  ps.pde = ev.residual_form();
  if (kinds[0] == Kind::Divergence) {
    ps.form = SystemForm::RDOriginal;
    ps.original = RDOriginal{d.deps, diffusivity, reaction};
  }
  return ps;
}

ParsedSystem parse_system(const std::string& text) {
  if (text.find('[') != std::string::npos) return parse_system(parse_source(text));
  SourceFile src;
  std::vector<Statement> lines;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    Statement st = asciify(line.substr(0, line.find('#')), lineno);
    if (trim(st.text).empty()) continue;
    auto eq = find_top(st.text, '=');
    if (eq == std::string::npos) fail_at(st, "expected 'lhs = rhs'");
    std::string lhs = trim(st.text.substr(0, eq));
    std::string dep = lhs.substr(0, lhs.find('_'));
    if (!src.decls.is_dep(dep)) src.decls.deps.push_back(dep);
    lines.push_back(st);
  }
  for (const auto& st : lines) {
    auto parts = split_top(st, '=');
    if (parts.size() != 2) fail_at(st, "expected 'lhs = rhs'");
    src.system.push_back({tree_of(parts[0], src.decls), tree_of(parts[1], src.decls), st.at(0).line});
  }
  return parse_system(src);
}

VectorField operator_of(const SourceFile& src) {
  VectorField q;
  q.deps = src.decls.deps;
  std::set<std::string> known{"xi0", "xi1"};
  auto get = [&](const std::string& k) {
    auto it = src.op.find(k);
    return it == src.op.end() ? Expr() : it->second;
  };
  q.xi0 = get("xi0");
  q.xi1 = get("xi1");
  for (std::size_t a = 0; a < q.deps.size(); ++a) {
    std::string k = "eta" + std::to_string(a + 1);
    known.insert(k);
    Expr e = get(k);
    if (q.deps.size() == 1 && e.is_zero()) {
      e = get("eta");
      known.insert("eta");
    }
    q.eta.push_back(e);
  }
  for (const auto& [k, v] : src.op) {
    if (!known.count(k)) throw ParseError("unknown operator coefficient '" + k + "'");
  }
  validate(q);
  return q;
}

std::string render_equations(const Declarations& decls, const std::vector<LabeledEquation>& eqs,
                             const std::vector<std::string>& assumptions, const std::string& comment) {
  std::ostringstream os;
  if (!comment.empty()) os << "# " << comment << "\n";
  if (!decls.params.empty()) {
    os << "[params]\n";
    for (std::size_t i = 0; i < decls.params.size(); ++i) os << (i ? ", " : "") << decls.params[i];
    os << "\n";
  }
  os << "[variables]\n";
  for (std::size_t i = 0; i < decls.deps.size(); ++i) os << (i ? ", " : "") << decls.deps[i];
  os << "\n[functions]\n";
  for (const auto& f : decls.functions) {
    os << f.name << "(";
    for (std::size_t i = 0; i < f.args.size(); ++i) os << (i ? ", " : "") << f.args[i];
    os << ")\n";
  }
  if (!assumptions.empty()) {
    os << "[assumptions]\n";
    for (const auto& a : assumptions) os << a << "\n";
  }
  os << "[equations]\n";
  for (const auto& e : eqs) {
    if (!e.label.empty()) os << e.label << ": ";
    os << render(e.expr) << " = 0\n";
  }
  return os.str();
}

}  // namespace condsym
