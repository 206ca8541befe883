#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kramers/expr.hpp"

namespace kramers {

// Expression DAG flattened to a register tape.  Structurally identical
// subexpressions are merged, so e.g. the components of a drift field share
// their trig evaluations.  Division by zero produces inf/nan here (callers
// on the hot path test finiteness); the checked path is Expr::eval.
class Tape {
public:
    struct Ins {
        ExprOp op;
        std::uint16_t dst;
        std::uint16_t a;
        std::uint16_t b;  // slot for binary ops, exponent for Pow, const index for Const
    };

    static Tape compile(std::span<const Expr> outputs, int n_inputs);
    static Tape compile(const Expr& output, int n_inputs);

    // work must hold at least slot_count() doubles; x holds n_inputs().
    void eval(const double* x, double* work, double* out) const;
    double eval1(const double* x, double* work) const;

    int n_inputs() const { return n_inputs_; }
    int n_outputs() const { return static_cast<int>(outputs_.size()); }
    int slot_count() const { return n_slots_; }

private:
    std::vector<Ins> code_;
    std::vector<double> consts_;
    std::vector<std::uint16_t> outputs_;
    int n_inputs_ = 0;
    int n_slots_ = 0;
};

// Convenience wrapper owning a scratch buffer (not thread-safe; each worker
// keeps its own).
class TapeRunner {
public:
    explicit TapeRunner(const Tape& t) : tape_(&t), work_(static_cast<std::size_t>(t.slot_count())) {}
    void operator()(const double* x, double* out) { tape_->eval(x, work_.data(), out); }
    double scalar(const double* x) { return tape_->eval1(x, work_.data()); }

private:
    const Tape* tape_;
    std::vector<double> work_;
};

}  // namespace kramers
