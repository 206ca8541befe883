#include "kramers/tape.hpp"

#include "kramers/fastmath.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace kramers {

namespace {

// Structural key for CSE.  Children are already slot indices, so equal keys
// mean equal values.
struct Key {
    ExprOp op;
    double value;
    int a, b;
    bool operator<(const Key& o) const {
        if (op != o.op) return op < o.op;
        if (value != o.value) return value < o.value;
        if (a != o.a) return a < o.a;
        return b < o.b;
    }
};

struct Builder {
    std::vector<Tape::Ins> code;
    std::vector<double> consts;
    std::map<Key, int> seen;
    int n_inputs;
    int next_slot;

    explicit Builder(int d) : n_inputs(d), next_slot(d) {}

    int emit(ExprOp op, double value, int a, int b) {
        Key k{op, value, a, b};
        auto it = seen.find(k);
        if (it != seen.end()) return it->second;
        int dst = next_slot++;
        if (dst > 0xFFFF) throw std::runtime_error("expression too large to compile");
        std::uint16_t operand_b = 0;
        if (op == ExprOp::Const) {
            operand_b = static_cast<std::uint16_t>(consts.size());
            consts.push_back(value);
        } else {
            operand_b = static_cast<std::uint16_t>(b < 0 ? 0 : b);
        }
        code.push_back({op, static_cast<std::uint16_t>(dst),
                        static_cast<std::uint16_t>(a < 0 ? 0 : a), operand_b});
        seen.emplace(k, dst);
        return dst;
    }

    int visit(const ExprNode& n) {
        switch (n.op) {
            case ExprOp::Const: return emit(ExprOp::Const, n.value, -1, -1);
            case ExprOp::Var:
                if (n.var >= n_inputs) throw std::runtime_error("variable index out of range");
                return n.var;
            case ExprOp::Pow: {
                int a = visit(*n.a);
                return emit(ExprOp::Pow, 0, a, n.ipow);
            }
            case ExprOp::Neg:
            case ExprOp::Sin:
            case ExprOp::Cos:
            case ExprOp::Exp:
            case ExprOp::Tanh: {
                int a = visit(*n.a);
                return emit(n.op, 0, a, -1);
            }
            default: {
                int a = visit(*n.a);
                int b = visit(*n.b);
                return emit(n.op, 0, a, b);
            }
        }
    }
};

}  // namespace

Tape Tape::compile(std::span<const Expr> outputs, int n_inputs) {
    Builder b(n_inputs);
    Tape t;
    for (const Expr& e : outputs) {
        if (!e.valid()) throw std::runtime_error("cannot compile empty expression");
        t.outputs_.push_back(static_cast<std::uint16_t>(b.visit(e.node())));
    }
    t.code_ = std::move(b.code);
    t.consts_ = std::move(b.consts);
    t.n_inputs_ = n_inputs;
    t.n_slots_ = b.next_slot;
    return t;
}

Tape Tape::compile(const Expr& output, int n_inputs) {
    return compile(std::span<const Expr>(&output, 1), n_inputs);
}

void Tape::eval(const double* x, double* work, double* out) const {
    for (int i = 0; i < n_inputs_; ++i) work[i] = x[i];
    for (const Ins& ins : code_) {
        switch (ins.op) {
            case ExprOp::Const: work[ins.dst] = consts_[ins.b]; break;
            case ExprOp::Neg: work[ins.dst] = -work[ins.a]; break;
            case ExprOp::Sin: work[ins.dst] = fast_sin(work[ins.a]); break;
            case ExprOp::Cos: work[ins.dst] = fast_cos(work[ins.a]); break;
            case ExprOp::Exp: work[ins.dst] = std::exp(work[ins.a]); break;
            case ExprOp::Tanh: work[ins.dst] = std::tanh(work[ins.a]); break;
            case ExprOp::Add: work[ins.dst] = work[ins.a] + work[ins.b]; break;
            case ExprOp::Sub: work[ins.dst] = work[ins.a] - work[ins.b]; break;
            case ExprOp::Mul: work[ins.dst] = work[ins.a] * work[ins.b]; break;
            case ExprOp::Div: work[ins.dst] = work[ins.a] / work[ins.b]; break;
            case ExprOp::Pow: {
                double base = work[ins.a], r = 1;
                for (int k = 0; k < ins.b; ++k) r *= base;
                work[ins.dst] = r;
                break;
            }
            case ExprOp::Var: break;
        }
    }
    for (std::size_t i = 0; i < outputs_.size(); ++i) out[i] = work[outputs_[i]];
}

double Tape::eval1(const double* x, double* work) const {
    double out;
    eval(x, work, &out);
    return out;
}

}  // namespace kramers
