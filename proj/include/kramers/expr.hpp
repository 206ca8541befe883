#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kramers {

enum class ExprOp : std::uint8_t {
    Const,
    Var,   // 0-based variable index
    Neg,
    Sin,
    Cos,
    Exp,
    Tanh,
    Add,
    Sub,
    Mul,
    Div,
    Pow,   // integer exponent >= 0
};

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    ExprOp op;
    double value = 0.0;  // Const
    int var = 0;         // Var
    int ipow = 0;        // Pow exponent
    ExprPtr a, b;
};

struct ParseError : std::runtime_error {
    std::size_t offset;
    ParseError(std::size_t off, const std::string& msg)
        : std::runtime_error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

// Division by exact zero during tree evaluation.
struct EvalFault : std::runtime_error {
    std::string subexpr;
    explicit EvalFault(std::string sub)
        : std::runtime_error("division by zero in subexpression: " + sub),
          subexpr(std::move(sub)) {}
};

// Immutable expression handle.  All builders run a light simplifier
// (constant folding, 0/1 absorption, double negation); no canonical forms.
class Expr {
public:
    Expr() = default;
    explicit Expr(ExprPtr n) : node_(std::move(n)) {}

    static Expr constant(double v);
    static Expr variable(int i);

    const ExprNode& node() const { return *node_; }
    const ExprPtr& ptr() const { return node_; }
    bool valid() const { return node_ != nullptr; }

    double eval(std::span<const double> x) const;
    Expr derivative(int i) const;
    std::string str() const;
    bool same_structure(const Expr& other) const;
    bool is_constant(double v) const;
    int max_var() const;  // largest variable index used, -1 if none

private:
    ExprPtr node_;
};

Expr make_neg(const Expr& a);
Expr make_add(const Expr& a, const Expr& b);
Expr make_sub(const Expr& a, const Expr& b);
Expr make_mul(const Expr& a, const Expr& b);
Expr make_div(const Expr& a, const Expr& b);
Expr make_pow(const Expr& a, int n);
Expr make_unary(ExprOp op, const Expr& a);

// Grammar:
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := base ("^" uint)?
//   base   := number | "pi" | var | fname "(" expr ")" | "(" expr ")" | "-" base
//   var    := "x" uint   (1-based)
//   fname  := sin | cos | exp | tanh
// Whitespace is insignificant.  Variable indices must be < d.
Expr parse_expr(std::string_view src, int d);

}  // namespace kramers
