#include "pdmp/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <utility>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

ExprRef make_number(double v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Number;
  n->number = v;
  return n;
}

ExprRef make_variable() {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Variable;
  return n;
}

ExprRef make_negate(ExprRef operand) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Negate;
  n->lhs = std::move(operand);
  return n;
}

ExprRef make_binary(char op, ExprRef lhs, ExprRef rhs) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Binary;
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

ExprRef make_call(FuncId f, ExprRef arg) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Call;
  n->func = f;
  n->lhs = std::move(arg);
  return n;
}

struct Parser {
  std::string_view text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }

  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }

  bool consume(char c) {
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(std::size_t at, const std::string& what) { throw ParseError(at, what); }

  ExprRef parse_expr() {
    ExprRef node = parse_term();
    for (;;) {
      char c = peek();
      if (c == '+' || c == '-') {
        ++pos;
        node = make_binary(c, std::move(node), parse_term());
      } else {
        return node;
      }
    }
  }

  ExprRef parse_term() {
    ExprRef node = parse_factor();
    for (;;) {
      char c = peek();
      if (c == '*' || c == '/') {
        ++pos;
        node = make_binary(c, std::move(node), parse_factor());
      } else {
        return node;
      }
    }
  }

  ExprRef parse_factor() {
    ExprRef base = parse_base();
    if (consume('^')) return make_binary('^', std::move(base), parse_factor());
    return base;
  }

  ExprRef parse_base() {
    char c = peek();
    if (c == '\0') fail(pos, "unexpected end of expression");
    if (c == '-') {
      ++pos;
      return make_negate(parse_base());
    }
    if (c == '(') {
      ++pos;
      ExprRef inner = parse_expr();
      if (!consume(')')) fail(pos, "expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    fail(pos, std::string("unexpected character '") + c + "'");
  }

  ExprRef parse_number() {
    skip_ws();
    const std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    if (pos == start || (pos == start + 1 && text[start] == '.'))
      fail(start, "malformed number");
    if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
      std::size_t mark = pos;
      ++pos;
      if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
      if (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
      } else {
        pos = mark;  // 'e' starts an identifier, not an exponent; leave it
      }
    }
    double value = 0.0;
    auto res = std::from_chars(text.data() + start, text.data() + pos, value);
    if (res.ec != std::errc() || res.ptr != text.data() + pos) fail(start, "malformed number");
    return make_number(value);
  }

  ExprRef parse_ident() {
    skip_ws();
    const std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    std::string_view name = text.substr(start, pos - start);
    if (peek() == '(') {
      ++pos;
      FuncId f;
      if (name == "exp") f = FuncId::Exp;
      else if (name == "sin") f = FuncId::Sin;
      else if (name == "cos") f = FuncId::Cos;
      else if (name == "tanh") f = FuncId::Tanh;
      else if (name == "abs") f = FuncId::Abs;
      else fail(start, "unknown function '" + std::string(name) + "'");
      ExprRef arg = parse_expr();
      if (!consume(')')) fail(pos, "expected ')'");
      return make_call(f, std::move(arg));
    }
    if (name == "x") return make_variable();
    fail(start, "unknown identifier '" + std::string(name) + "'");
  }
};

double eval_node(const ExprNode& n, double x) noexcept {
  switch (n.kind) {
    case ExprKind::Number:
      return n.number;
    case ExprKind::Variable:
      return x;
    case ExprKind::Negate:
      return -eval_node(*n.lhs, x);
    case ExprKind::Binary: {
      const double a = eval_node(*n.lhs, x);
      const double b = eval_node(*n.rhs, x);
      switch (n.op) {
        case '+': return a + b;
        case '-': return a - b;
        case '*': return a * b;
        case '/': return a / b;
        case '^': return std::pow(a, b);
      }
      return 0.0;
    }
    case ExprKind::Call: {
      const double a = eval_node(*n.lhs, x);
      switch (n.func) {
        case FuncId::Exp: return std::exp(a);
        case FuncId::Sin: return std::sin(a);
        case FuncId::Cos: return std::cos(a);
        case FuncId::Tanh: return std::tanh(a);
        case FuncId::Abs: return std::fabs(a);
      }
      return 0.0;
    }
  }
  return 0.0;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Printers mirror the grammar levels so the output reparses to the same tree:
// anything below a level's own operators drops to the next printer, and
// anything above (or a sibling on the right of a left-associative chain) gets
// parenthesized by print_base's fallback.
void print_expr(const ExprNode& n, std::string& out);
void print_term(const ExprNode& n, std::string& out);
void print_factor(const ExprNode& n, std::string& out);
void print_base(const ExprNode& n, std::string& out);

void print_expr(const ExprNode& n, std::string& out) {
  if (n.kind == ExprKind::Binary && (n.op == '+' || n.op == '-')) {
    print_expr(*n.lhs, out);
    out.push_back(n.op);
    print_term(*n.rhs, out);
  } else {
    print_term(n, out);
  }
}

void print_term(const ExprNode& n, std::string& out) {
  if (n.kind == ExprKind::Binary && (n.op == '*' || n.op == '/')) {
    print_term(*n.lhs, out);
    out.push_back(n.op);
    print_factor(*n.rhs, out);
  } else {
    print_factor(n, out);
  }
}

void print_factor(const ExprNode& n, std::string& out) {
  if (n.kind == ExprKind::Binary && n.op == '^') {
    print_base(*n.lhs, out);
    out.push_back('^');
    print_factor(*n.rhs, out);
  } else {
    print_base(n, out);
  }
}

const char* func_name(FuncId f) {
  switch (f) {
    case FuncId::Exp: return "exp";
    case FuncId::Sin: return "sin";
    case FuncId::Cos: return "cos";
    case FuncId::Tanh: return "tanh";
    case FuncId::Abs: return "abs";
  }
  return "?";
}

void print_base(const ExprNode& n, std::string& out) {
  switch (n.kind) {
    case ExprKind::Number:
      out += format_number(n.number);
      return;
    case ExprKind::Variable:
      out.push_back('x');
      return;
    case ExprKind::Negate:
      out.push_back('-');
      print_base(*n.lhs, out);
      return;
    case ExprKind::Call:
      out += func_name(n.func);
      out.push_back('(');
      print_expr(*n.lhs, out);
      out.push_back(')');
      return;
    case ExprKind::Binary:
      out.push_back('(');
      print_expr(n, out);
      out.push_back(')');
      return;
  }
}

std::optional<Affine> affine_node(const ExprNode& n) {
  switch (n.kind) {
    case ExprKind::Number:
      return Affine{0.0, n.number};
    case ExprKind::Variable:
      return Affine{1.0, 0.0};
    case ExprKind::Negate: {
      auto u = affine_node(*n.lhs);
      if (!u) return std::nullopt;
      return Affine{-u->a, -u->b};
    }
    case ExprKind::Binary: {
      auto l = affine_node(*n.lhs);
      auto r = affine_node(*n.rhs);
      if (!l || !r) return std::nullopt;
      switch (n.op) {
        case '+': return Affine{l->a + r->a, l->b + r->b};
        case '-': return Affine{l->a - r->a, l->b - r->b};
        case '*':
          if (l->a == 0.0) return Affine{l->b * r->a, l->b * r->b};
          if (r->a == 0.0) return Affine{r->b * l->a, r->b * l->b};
          return std::nullopt;
        case '/':
          if (r->a == 0.0 && r->b != 0.0) return Affine{l->a / r->b, l->b / r->b};
          return std::nullopt;
        case '^':
          if (l->a == 0.0 && r->a == 0.0) return Affine{0.0, std::pow(l->b, r->b)};
          return std::nullopt;
      }
      return std::nullopt;
    }
    case ExprKind::Call: {
      auto u = affine_node(*n.lhs);
      if (!u || u->a != 0.0) return std::nullopt;
      double v = 0.0;
      switch (n.func) {
        case FuncId::Exp: v = std::exp(u->b); break;
        case FuncId::Sin: v = std::sin(u->b); break;
        case FuncId::Cos: v = std::cos(u->b); break;
        case FuncId::Tanh: v = std::tanh(u->b); break;
        case FuncId::Abs: v = std::fabs(u->b); break;
      }
      return Affine{0.0, v};
    }
  }
  return std::nullopt;
}

bool same_node(const ExprNode& a, const ExprNode& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ExprKind::Number:
      return a.number == b.number;
    case ExprKind::Variable:
      return true;
    case ExprKind::Negate:
      return same_node(*a.lhs, *b.lhs);
    case ExprKind::Binary:
      return a.op == b.op && same_node(*a.lhs, *b.lhs) && same_node(*a.rhs, *b.rhs);
    case ExprKind::Call:
      return a.func == b.func && same_node(*a.lhs, *b.lhs);
  }
  return false;
}

}  // namespace

double DriftExpr::eval(double x) const noexcept { return eval_node(*root_, x); }

double DriftExpr::eval_checked(double x) const {
  const double v = eval_node(*root_, x);
  if (!std::isfinite(v))
    throw EvalError("drift expression '" + to_string() + "' is not finite at x = " +
                    format_number(x));
  return v;
}

std::string DriftExpr::to_string() const {
  std::string out;
  print_expr(*root_, out);
  return out;
}

std::optional<Affine> DriftExpr::as_affine() const { return affine_node(*root_); }

bool DriftExpr::same_structure(const DriftExpr& other) const {
  if (!root_ || !other.root_) return root_ == other.root_;
  return same_node(*root_, *other.root_);
}

DriftExpr parse_drift(std::string_view text) {
  Parser p{text};
  if (p.at_end()) throw ParseError(0, "empty expression");
  ExprRef root = p.parse_expr();
  if (!p.at_end()) p.fail(p.pos, "unexpected trailing input");
  return DriftExpr(std::move(root));
}

}  // namespace pdmp
