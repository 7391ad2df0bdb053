#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pdmp {

// One-variable drift expressions over the grammar
//
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := base ('^' factor)?          -- '^' is right-associative
//   base   := NUMBER | 'x' | IDENT '(' expr ')' | '(' expr ')' | '-' base
//
// with IDENT one of exp, sin, cos, tanh, abs.  NUMBERs are non-negative
// decimal literals with optional fraction and exponent; a leading sign is
// always a unary minus node.

enum class ExprKind { Number, Variable, Negate, Binary, Call };

enum class FuncId { Exp, Sin, Cos, Tanh, Abs };

struct ExprNode;
using ExprRef = std::shared_ptr<const ExprNode>;

struct ExprNode {
  ExprKind kind;
  double number = 0.0;       // Number
  char op = 0;               // Binary: one of + - * / ^
  FuncId func = FuncId::Exp; // Call
  ExprRef lhs;               // Negate/Call operand, Binary left
  ExprRef rhs;               // Binary right
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : std::runtime_error("parse error at offset " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// a*x + b
struct Affine {
  double a = 0.0;
  double b = 0.0;
};

class DriftExpr {
 public:
  DriftExpr() = default;
  explicit DriftExpr(ExprRef root) : root_(std::move(root)) {}

  bool empty() const { return root_ == nullptr; }

  // Evaluates at x; never throws, non-finite results pass through.
  double eval(double x) const noexcept;

  // Like eval but throws EvalError when the result is not finite.
  double eval_checked(double x) const;

  // Serializes to text that parses back to a structurally identical tree.
  std::string to_string() const;

  // Returns coefficients when the tree folds to a*x + b, nullopt otherwise.
  std::optional<Affine> as_affine() const;

  bool same_structure(const DriftExpr& other) const;

  const ExprRef& root() const { return root_; }

 private:
  ExprRef root_;
};

// Parses per the grammar above.  Throws ParseError with a byte offset on
// syntax errors, unknown identifiers, and unknown function names.
DriftExpr parse_drift(std::string_view text);

}  // namespace pdmp
