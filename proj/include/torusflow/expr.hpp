#pragma once

// Smooth scalar expressions over torus coordinates x1..xn.
//
// Grammar (whitespace insignificant):
//   expr   := ['-'] term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := atom ('^' int)?
//   atom   := number | 'x'int | fn '(' expr ')' | '(' expr ')'
//   fn     := sin | cos | exp | sinp | cosp
// sinp(u) = sin(2*pi*u), cosp(u) = cos(2*pi*u); these are the 1-periodic
// combinators.  Exponents are (possibly negative) integers.

#include <cctype>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "torusflow/common.hpp"

namespace torusflow {

struct source_pos {
  int line = 1;
  int col = 1;
};

struct parse_error : config_error {
  source_pos pos;
  parse_error(const std::string& msg, source_pos p)
      : config_error(msg + " at line " + std::to_string(p.line) + ", column " +
                     std::to_string(p.col)),
        pos(p) {}
};

enum class expr_kind {
  number,
  var,   // x<i>, 1-based
  neg,
  add,
  sub,
  mul,
  divide,
  pow,   // integer exponent
  sin,
  cos,
  exp,
  sinp,
  cosp,
};

struct expr_node;
using expr_ptr = std::shared_ptr<const expr_node>;

struct expr_node {
  expr_kind kind;
  double number = 0.0;  // kind == number
  int var = 0;          // kind == var
  int exponent = 0;     // kind == pow
  expr_ptr a, b;        // operands
};

inline expr_ptr make_number(double v) {
  auto n = std::make_shared<expr_node>();
  n->kind = expr_kind::number;
  n->number = v;
  return n;
}

inline expr_ptr make_var(int i) {
  auto n = std::make_shared<expr_node>();
  n->kind = expr_kind::var;
  n->var = i;
  return n;
}

inline expr_ptr make_unary(expr_kind k, expr_ptr a) {
  // canonical form: negation of a literal is a negative literal
  if (k == expr_kind::neg && a->kind == expr_kind::number) return make_number(-a->number);
  auto n = std::make_shared<expr_node>();
  n->kind = k;
  n->a = std::move(a);
  return n;
}

inline expr_ptr make_binary(expr_kind k, expr_ptr a, expr_ptr b) {
  auto n = std::make_shared<expr_node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

inline expr_ptr make_pow(expr_ptr a, int e) {
  auto n = std::make_shared<expr_node>();
  n->kind = expr_kind::pow;
  n->a = std::move(a);
  n->exponent = e;
  return n;
}

namespace detail {

enum class tok_kind { number, var, fn, plus, minus, star, slash, caret, lparen, rparen, end };

struct token {
  tok_kind kind;
  double number = 0.0;
  int var = 0;
  expr_kind fn = expr_kind::sin;
  source_pos pos;
};

class lexer {
 public:
  explicit lexer(const std::string& text) : s_(text) { advance(); }

  const token& peek() const { return cur_; }

  token take() {
    token t = cur_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) bump();
    cur_.pos = pos_;
    if (i_ >= s_.size()) {
      cur_.kind = tok_kind::end;
      return;
    }
    char c = s_[i_];
    switch (c) {
      case '+': bump(); cur_.kind = tok_kind::plus; return;
      case '-': bump(); cur_.kind = tok_kind::minus; return;
      case '*': bump(); cur_.kind = tok_kind::star; return;
      case '/': bump(); cur_.kind = tok_kind::slash; return;
      case '^': bump(); cur_.kind = tok_kind::caret; return;
      case '(': bump(); cur_.kind = tok_kind::lparen; return;
      case ')': bump(); cur_.kind = tok_kind::rparen; return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      lex_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      lex_ident();
      return;
    }
    throw parse_error(std::string("unexpected character '") + c + "'", pos_);
  }

  void lex_number() {
    std::size_t start = i_;
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) bump();
    if (i_ < s_.size() && s_[i_] == '.') {
      bump();
      while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) bump();
    }
    if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
      std::size_t mark = i_;
      bump();
      if (i_ < s_.size() && (s_[i_] == '+' || s_[i_] == '-')) bump();
      if (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
        while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) bump();
      } else {
        // not an exponent after all; rewind (pos_ col drift is harmless here)
        i_ = mark;
      }
    }
    cur_.kind = tok_kind::number;
    cur_.number = std::strtod(s_.substr(start, i_ - start).c_str(), nullptr);
  }

  void lex_ident() {
    source_pos at = pos_;
    std::size_t start = i_;
    while (i_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[i_]))) bump();
    std::string w = s_.substr(start, i_ - start);
    if (w.size() >= 2 && w[0] == 'x' && std::isdigit(static_cast<unsigned char>(w[1]))) {
      for (std::size_t k = 1; k < w.size(); ++k)
        if (!std::isdigit(static_cast<unsigned char>(w[k])))
          throw parse_error("malformed variable '" + w + "'", at);
      cur_.kind = tok_kind::var;
      cur_.var = std::atoi(w.c_str() + 1);
      if (cur_.var < 1) throw parse_error("variable index must be >= 1", at);
      return;
    }
    cur_.kind = tok_kind::fn;
    if (w == "sin") cur_.fn = expr_kind::sin;
    else if (w == "cos") cur_.fn = expr_kind::cos;
    else if (w == "exp") cur_.fn = expr_kind::exp;
    else if (w == "sinp") cur_.fn = expr_kind::sinp;
    else if (w == "cosp") cur_.fn = expr_kind::cosp;
    else throw parse_error("unknown function '" + w + "'", at);
  }

  void bump() {
    if (s_[i_] == '\n') {
      ++pos_.line;
      pos_.col = 1;
    } else {
      ++pos_.col;
    }
    ++i_;
  }

  std::string s_;
  std::size_t i_ = 0;
  source_pos pos_;
  token cur_;
};

class parser {
 public:
  explicit parser(const std::string& text) : lx_(text) {}

  expr_ptr parse() {
    expr_ptr e = parse_expr();
    if (lx_.peek().kind != tok_kind::end)
      throw parse_error("trailing input", lx_.peek().pos);
    return e;
  }

 private:
  expr_ptr parse_expr() {
    expr_ptr e;
    if (lx_.peek().kind == tok_kind::minus) {
      lx_.take();
      e = make_unary(expr_kind::neg, parse_term());
    } else {
      e = parse_term();
    }
    for (;;) {
      tok_kind k = lx_.peek().kind;
      if (k == tok_kind::plus || k == tok_kind::minus) {
        lx_.take();
        e = make_binary(k == tok_kind::plus ? expr_kind::add : expr_kind::sub, e, parse_term());
      } else {
        return e;
      }
    }
  }

  expr_ptr parse_term() {
    expr_ptr e = parse_factor();
    for (;;) {
      tok_kind k = lx_.peek().kind;
      if (k == tok_kind::star || k == tok_kind::slash) {
        lx_.take();
        e = make_binary(k == tok_kind::star ? expr_kind::mul : expr_kind::divide, e,
                        parse_factor());
      } else {
        return e;
      }
    }
  }

  expr_ptr parse_factor() {
    expr_ptr a = parse_atom();
    if (lx_.peek().kind == tok_kind::caret) {
      lx_.take();
      bool parens = false;
      if (lx_.peek().kind == tok_kind::lparen) {
        lx_.take();
        parens = true;
      }
      int sign = 1;
      if (lx_.peek().kind == tok_kind::minus) {
        lx_.take();
        sign = -1;
      }
      token t = lx_.take();
      if (t.kind != tok_kind::number) throw parse_error("expected integer exponent", t.pos);
      double e = t.number;
      if (e != std::floor(e) || std::fabs(e) > 64)
        throw parse_error("exponent must be an integer with |e| <= 64", t.pos);
      if (parens) expect(tok_kind::rparen, "')'");
      return make_pow(a, sign * static_cast<int>(e));
    }
    return a;
  }

  expr_ptr parse_atom() {
    token t = lx_.take();
    switch (t.kind) {
      case tok_kind::number:
        return make_number(t.number);
      case tok_kind::var:
        return make_var(t.var);
      case tok_kind::fn: {
        expect(tok_kind::lparen, "'('");
        expr_ptr inner = parse_expr();
        expect(tok_kind::rparen, "')'");
        return make_unary(t.fn, inner);
      }
      case tok_kind::lparen: {
        expr_ptr inner = parse_expr();
        expect(tok_kind::rparen, "')'");
        return inner;
      }
      default:
        throw parse_error("expected number, variable, function, or '('", t.pos);
    }
  }

  void expect(tok_kind k, const char* what) {
    token t = lx_.take();
    if (t.kind != k) throw parse_error(std::string("expected ") + what, t.pos);
  }

  lexer lx_;
};

inline int precedence(expr_kind k) {
  switch (k) {
    case expr_kind::add:
    case expr_kind::sub:
      return 1;
    case expr_kind::mul:
    case expr_kind::divide:
      return 2;
    case expr_kind::neg:
      return 1;  // prints like 0 - x
    case expr_kind::pow:
      return 3;
    default:
      return 4;  // atoms
  }
}

inline void print_rec(const expr_ptr& e, std::string& out, int parent_prec, bool rhs) {
  int prec = precedence(e->kind);
  bool parens = prec < parent_prec || (prec == parent_prec && rhs && prec <= 2);
  if (parens) out += '(';
  switch (e->kind) {
    case expr_kind::number: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", e->number);
      bool negative = buf[0] == '-';
      if (negative) out += '(';
      out += buf;
      if (negative) out += ')';
      break;
    }
    case expr_kind::var:
      out += 'x';
      out += std::to_string(e->var);
      break;
    case expr_kind::neg:
      out += '-';
      print_rec(e->a, out, 2, true);
      break;
    case expr_kind::add:
    case expr_kind::sub:
    case expr_kind::mul:
    case expr_kind::divide: {
      const char* op = e->kind == expr_kind::add      ? " + "
                       : e->kind == expr_kind::sub    ? " - "
                       : e->kind == expr_kind::mul    ? "*"
                                                      : "/";
      print_rec(e->a, out, prec, false);
      out += op;
      print_rec(e->b, out, prec, true);
      break;
    }
    case expr_kind::pow:
      print_rec(e->a, out, prec + 1, false);
      out += '^';
      if (e->exponent < 0) {
        out += '(';
        out += std::to_string(e->exponent);
        out += ')';
      } else {
        out += std::to_string(e->exponent);
      }
      break;
    case expr_kind::sin:
    case expr_kind::cos:
    case expr_kind::exp:
    case expr_kind::sinp:
    case expr_kind::cosp: {
      const char* fn = e->kind == expr_kind::sin    ? "sin"
                       : e->kind == expr_kind::cos  ? "cos"
                       : e->kind == expr_kind::exp  ? "exp"
                       : e->kind == expr_kind::sinp ? "sinp"
                                                    : "cosp";
      out += fn;
      out += '(';
      print_rec(e->a, out, 0, false);
      out += ')';
      break;
    }
  }
  if (parens) out += ')';
}

}  // namespace detail

inline expr_ptr parse_expression(const std::string& text) {
  return detail::parser(text).parse();
}

inline std::string print_expression(const expr_ptr& e) {
  std::string out;
  detail::print_rec(e, out, 0, false);
  return out;
}

// Largest variable index referenced (0 for constant expressions).
inline int max_variable(const expr_ptr& e) {
  if (!e) return 0;
  int m = (e->kind == expr_kind::var) ? e->var : 0;
  if (e->a) m = std::max(m, max_variable(e->a));
  if (e->b) m = std::max(m, max_variable(e->b));
  return m;
}

inline bool structurally_equal(const expr_ptr& l, const expr_ptr& r) {
  if (l->kind != r->kind) return false;
  switch (l->kind) {
    case expr_kind::number:
      return l->number == r->number;
    case expr_kind::var:
      return l->var == r->var;
    case expr_kind::pow:
      return l->exponent == r->exponent && structurally_equal(l->a, r->a);
    default:
      if (l->a && !structurally_equal(l->a, r->a)) return false;
      if (l->b && !structurally_equal(l->b, r->b)) return false;
      return true;
  }
}

}  // namespace torusflow
