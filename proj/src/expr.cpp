#include "kramers/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace kramers {

namespace {

ExprPtr mk_node(ExprOp op, double v, int var, int ipow, ExprPtr a, ExprPtr b) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->value = v;
    n->var = var;
    n->ipow = ipow;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

bool is_const(const Expr& e, double v) { return e.valid() && e.is_constant(v); }

double apply_unary(ExprOp op, double v) {
    switch (op) {
        case ExprOp::Neg: return -v;
        case ExprOp::Sin: return std::sin(v);
        case ExprOp::Cos: return std::cos(v);
        case ExprOp::Exp: return std::exp(v);
        case ExprOp::Tanh: return std::tanh(v);
        default: return v;
    }
}

}  // namespace

Expr Expr::constant(double v) { return Expr(mk_node(ExprOp::Const, v, 0, 0, nullptr, nullptr)); }
Expr Expr::variable(int i) { return Expr(mk_node(ExprOp::Var, 0, i, 0, nullptr, nullptr)); }

bool Expr::is_constant(double v) const {
    return node_ && node_->op == ExprOp::Const && node_->value == v;
}

Expr make_unary(ExprOp op, const Expr& a) {
    if (a.node().op == ExprOp::Const) return Expr::constant(apply_unary(op, a.node().value));
    if (op == ExprOp::Neg && a.node().op == ExprOp::Neg) return Expr(a.node().a);
    if (op == ExprOp::Neg && a.node().op == ExprOp::Mul) {
        // Push the sign into a constant or negated factor.
        const Expr l(a.node().a), r(a.node().b);
        if (l.node().op == ExprOp::Neg) return make_mul(Expr(l.node().a), r);
        if (r.node().op == ExprOp::Neg) return make_mul(l, Expr(r.node().a));
        if (l.node().op == ExprOp::Const) return make_mul(Expr::constant(-l.node().value), r);
        if (r.node().op == ExprOp::Const) return make_mul(l, Expr::constant(-r.node().value));
    }
    return Expr(mk_node(op, 0, 0, 0, a.ptr(), nullptr));
}

Expr make_neg(const Expr& a) { return make_unary(ExprOp::Neg, a); }

Expr make_add(const Expr& a, const Expr& b) {
    if (a.node().op == ExprOp::Const && b.node().op == ExprOp::Const)
        return Expr::constant(a.node().value + b.node().value);
    if (is_const(a, 0)) return b;
    if (is_const(b, 0)) return a;
    return Expr(mk_node(ExprOp::Add, 0, 0, 0, a.ptr(), b.ptr()));
}

Expr make_sub(const Expr& a, const Expr& b) {
    if (a.node().op == ExprOp::Const && b.node().op == ExprOp::Const)
        return Expr::constant(a.node().value - b.node().value);
    if (is_const(b, 0)) return a;
    if (is_const(a, 0)) return make_neg(b);
    return Expr(mk_node(ExprOp::Sub, 0, 0, 0, a.ptr(), b.ptr()));
}

Expr make_mul(const Expr& a, const Expr& b) {
    if (a.node().op == ExprOp::Const && b.node().op == ExprOp::Const)
        return Expr::constant(a.node().value * b.node().value);
    if (is_const(a, 0) || is_const(b, 0)) return Expr::constant(0);
    if (is_const(a, 1)) return b;
    if (is_const(b, 1)) return a;
    if (a.node().op == ExprOp::Neg && b.node().op == ExprOp::Neg)
        return make_mul(Expr(a.node().a), Expr(b.node().a));
    if (a.node().op == ExprOp::Neg && b.node().op == ExprOp::Const)
        return make_mul(Expr(a.node().a), Expr::constant(-b.node().value));
    if (a.node().op == ExprOp::Const && b.node().op == ExprOp::Neg)
        return make_mul(Expr::constant(-a.node().value), Expr(b.node().a));
    return Expr(mk_node(ExprOp::Mul, 0, 0, 0, a.ptr(), b.ptr()));
}

Expr make_div(const Expr& a, const Expr& b) {
    if (a.node().op == ExprOp::Const && b.node().op == ExprOp::Const && b.node().value != 0)
        return Expr::constant(a.node().value / b.node().value);
    if (is_const(a, 0) && !is_const(b, 0)) return Expr::constant(0);
    if (is_const(b, 1)) return a;
    return Expr(mk_node(ExprOp::Div, 0, 0, 0, a.ptr(), b.ptr()));
}

Expr make_pow(const Expr& a, int n) {
    if (n == 0) return Expr::constant(1);
    if (n == 1) return a;
    if (a.node().op == ExprOp::Const) return Expr::constant(std::pow(a.node().value, n));
    return Expr(mk_node(ExprOp::Pow, 0, 0, n, a.ptr(), nullptr));
}

double Expr::eval(std::span<const double> x) const {
    const ExprNode& n = *node_;
    switch (n.op) {
        case ExprOp::Const: return n.value;
        case ExprOp::Var: return x[static_cast<std::size_t>(n.var)];
        case ExprOp::Neg: return -Expr(n.a).eval(x);
        case ExprOp::Sin: return std::sin(Expr(n.a).eval(x));
        case ExprOp::Cos: return std::cos(Expr(n.a).eval(x));
        case ExprOp::Exp: return std::exp(Expr(n.a).eval(x));
        case ExprOp::Tanh: return std::tanh(Expr(n.a).eval(x));
        case ExprOp::Add: return Expr(n.a).eval(x) + Expr(n.b).eval(x);
        case ExprOp::Sub: return Expr(n.a).eval(x) - Expr(n.b).eval(x);
        case ExprOp::Mul: return Expr(n.a).eval(x) * Expr(n.b).eval(x);
        case ExprOp::Div: {
            const double denom = Expr(n.b).eval(x);
            if (denom == 0.0) throw EvalFault(Expr(n.b).str());
            return Expr(n.a).eval(x) / denom;
        }
        case ExprOp::Pow: {
            double base = Expr(n.a).eval(x), r = 1;
            for (int k = 0; k < n.ipow; ++k) r *= base;
            return r;
        }
    }
    return 0;
}

Expr Expr::derivative(int i) const {
    const ExprNode& n = *node_;
    const Expr a(n.a), b(n.b);
    switch (n.op) {
        case ExprOp::Const: return Expr::constant(0);
        case ExprOp::Var: return Expr::constant(n.var == i ? 1 : 0);
        case ExprOp::Neg: return make_neg(a.derivative(i));
        case ExprOp::Sin: return make_mul(make_unary(ExprOp::Cos, a), a.derivative(i));
        case ExprOp::Cos: return make_mul(make_neg(make_unary(ExprOp::Sin, a)), a.derivative(i));
        case ExprOp::Exp: return make_mul(*this, a.derivative(i));
        case ExprOp::Tanh:
            // d tanh = 1 - tanh^2
            return make_mul(make_sub(Expr::constant(1), make_pow(make_unary(ExprOp::Tanh, a), 2)),
                            a.derivative(i));
        case ExprOp::Add: return make_add(a.derivative(i), b.derivative(i));
        case ExprOp::Sub: return make_sub(a.derivative(i), b.derivative(i));
        case ExprOp::Mul:
            return make_add(make_mul(a.derivative(i), b), make_mul(a, b.derivative(i)));
        case ExprOp::Div:
            return make_div(make_sub(make_mul(a.derivative(i), b), make_mul(a, b.derivative(i))),
                            make_pow(b, 2));
        case ExprOp::Pow:
            return make_mul(make_mul(Expr::constant(n.ipow), make_pow(a, n.ipow - 1)),
                            a.derivative(i));
    }
    return Expr::constant(0);
}

bool Expr::same_structure(const Expr& other) const {
    const ExprNode& m = *node_;
    const ExprNode& n = *other.node_;
    if (m.op != n.op) return false;
    switch (m.op) {
        case ExprOp::Const: return m.value == n.value;
        case ExprOp::Var: return m.var == n.var;
        case ExprOp::Pow:
            return m.ipow == n.ipow && Expr(m.a).same_structure(Expr(n.a));
        case ExprOp::Neg:
        case ExprOp::Sin:
        case ExprOp::Cos:
        case ExprOp::Exp:
        case ExprOp::Tanh:
            return Expr(m.a).same_structure(Expr(n.a));
        default:
            return Expr(m.a).same_structure(Expr(n.a)) && Expr(m.b).same_structure(Expr(n.b));
    }
}

int Expr::max_var() const {
    const ExprNode& n = *node_;
    switch (n.op) {
        case ExprOp::Const: return -1;
        case ExprOp::Var: return n.var;
        default: {
            int m = n.a ? Expr(n.a).max_var() : -1;
            if (n.b) m = std::max(m, Expr(n.b).max_var());
            return m;
        }
    }
}

namespace {

// Print levels per the grammar: 0 = expr, 1 = term, 2 = factor, 3 = base.
int print_level(const ExprNode& n) {
    switch (n.op) {
        case ExprOp::Add:
        case ExprOp::Sub: return 0;
        case ExprOp::Mul:
        case ExprOp::Div: return 1;
        case ExprOp::Pow: return 2;
        default: return 3;
    }
}

void print_rec(const ExprNode& n, std::string& out, int min_level);

void print_child(const ExprNode& c, std::string& out, int min_level) {
    if (print_level(c) < min_level) {
        out += '(';
        print_rec(c, out, 0);
        out += ')';
    } else {
        print_rec(c, out, min_level);
    }
}

std::string format_double(double v) {
    char buf[40];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

void print_rec(const ExprNode& n, std::string& out, int) {
    switch (n.op) {
        case ExprOp::Const:
            if (n.value == std::numbers::pi) {
                out += "pi";
            } else if (n.value < 0) {
                // "-c" parses as a negated literal; re-fold happens at parse time.
                out += '-';
                out += format_double(-n.value);
            } else {
                out += format_double(n.value);
            }
            return;
        case ExprOp::Var:
            out += 'x';
            out += std::to_string(n.var + 1);
            return;
        case ExprOp::Neg:
            out += '-';
            // A negated base must itself be a base; wrap anything tighter.
            if (print_level(*n.a) < 3) {
                out += '(';
                print_rec(*n.a, out, 0);
                out += ')';
            } else {
                print_rec(*n.a, out, 0);
            }
            return;
        case ExprOp::Sin: out += "sin("; print_rec(*n.a, out, 0); out += ')'; return;
        case ExprOp::Cos: out += "cos("; print_rec(*n.a, out, 0); out += ')'; return;
        case ExprOp::Exp: out += "exp("; print_rec(*n.a, out, 0); out += ')'; return;
        case ExprOp::Tanh: out += "tanh("; print_rec(*n.a, out, 0); out += ')'; return;
        case ExprOp::Add:
            print_child(*n.a, out, 0);
            out += '+';
            print_child(*n.b, out, 1);
            return;
        case ExprOp::Sub:
            print_child(*n.a, out, 0);
            out += '-';
            print_child(*n.b, out, 1);
            return;
        case ExprOp::Mul:
            print_child(*n.a, out, 1);
            out += '*';
            print_child(*n.b, out, 2);
            return;
        case ExprOp::Div:
            print_child(*n.a, out, 1);
            out += '/';
            print_child(*n.b, out, 2);
            return;
        case ExprOp::Pow:
            print_child(*n.a, out, 3);
            out += '^';
            out += std::to_string(n.ipow);
            return;
    }
}

class Parser {
public:
    Parser(std::string_view src, int d) : src_(src), d_(d) {}

    Expr run() {
        Expr e = expr();
        skip_ws();
        if (pos_ != src_.size()) throw ParseError(pos_, "unexpected trailing input");
        return e;
    }

private:
    std::string_view src_;
    int d_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    Expr expr() {
        Expr e = term();
        for (;;) {
            if (eat('+')) e = make_add(e, term());
            else if (eat('-')) e = make_sub(e, term());
            else return e;
        }
    }

    Expr term() {
        Expr e = factor();
        for (;;) {
            if (eat('*')) e = make_mul(e, factor());
            else if (eat('/')) e = make_div(e, factor());
            else return e;
        }
    }

    Expr factor() {
        Expr b = base();
        if (eat('^')) {
            skip_ws();
            return make_pow(b, parse_uint("exponent"));
        }
        return b;
    }

    int parse_uint(const char* what) {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ == start) throw ParseError(start, std::string("expected ") + what);
        int v = 0;
        auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
        if (res.ec != std::errc{}) throw ParseError(start, std::string("invalid ") + what);
        return v;
    }

    Expr base() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError(pos_, "unexpected end of input");
        const char c = src_[pos_];
        if (c == '-') {
            ++pos_;
            Expr inner = base();
            // Fold a negated literal so printing "-2.5" round-trips structurally.
            if (inner.node().op == ExprOp::Const) return Expr::constant(-inner.node().value);
            return make_neg(inner);
        }
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            if (!eat(')')) throw ParseError(pos_, "expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        throw ParseError(pos_, "unexpected character");
    }

    Expr number() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_++;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                    ++pos_;
            } else {
                pos_ = mark;  // "e" was not an exponent
            }
        }
        double v = 0;
        auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
        if (res.ec != std::errc{} || res.ptr != src_.data() + pos_)
            throw ParseError(start, "invalid number");
        return Expr::constant(v);
    }

    Expr identifier() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        std::string_view name = src_.substr(start, pos_ - start);
        if (name == "pi") return Expr::constant(std::numbers::pi);
        if (name == "x") {
            std::size_t dstart = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            if (pos_ == dstart) throw ParseError(dstart, "expected variable index after 'x'");
            int idx = 0;
            std::from_chars(src_.data() + dstart, src_.data() + pos_, idx);
            if (idx < 1) throw ParseError(dstart, "variable indices are 1-based");
            if (idx > d_)
                throw ParseError(start, "variable index " + std::to_string(idx) +
                                            " out of range for dimension " + std::to_string(d_));
            return Expr::variable(idx - 1);
        }
        if (name == "sin" || name == "cos" || name == "exp" || name == "tanh") {
            if (!eat('(')) throw ParseError(pos_, "expected '(' after function name");
            Expr arg = expr();
            if (!eat(')')) throw ParseError(pos_, "expected ')'");
            if (name == "sin") return make_unary(ExprOp::Sin, arg);
            if (name == "cos") return make_unary(ExprOp::Cos, arg);
            if (name == "exp") return make_unary(ExprOp::Exp, arg);
            return make_unary(ExprOp::Tanh, arg);
        }
        throw ParseError(start, "unknown identifier '" + std::string(name) + "'");
    }
};

}  // namespace

std::string Expr::str() const {
    std::string out;
    print_rec(*node_, out, 0);
    return out;
}

Expr parse_expr(std::string_view src, int d) { return Parser(src, d).run(); }

}  // namespace kramers
