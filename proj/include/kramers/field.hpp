#pragma once

#include <memory>
#include <string>
#include <vector>

#include "kramers/expr.hpp"
#include "kramers/tape.hpp"

namespace kramers {

// A scalar function on the torus together with its symbolic gradient and
// Hessian, compiled for pointwise evaluation.  Immutable after construction;
// evaluation methods are const and take caller-owned scratch via TapeRunner
// when used from hot loops.
class ScalarField {
public:
    ScalarField() = default;
    ScalarField(Expr e, int d, double period);
    static ScalarField parse(const std::string& src, int d, double period);

    int dimension() const { return d_; }
    double period() const { return period_; }
    const Expr& expr() const { return expr_; }
    const Expr& grad_expr(int i) const { return grad_[static_cast<std::size_t>(i)]; }
    const Expr& hess_expr(int i, int j) const {
        return hess_[static_cast<std::size_t>(i * d_ + j)];
    }

    double value(const double* x) const;
    void gradient(const double* x, double* g) const;
    void hessian(const double* x, double* H) const;  // row-major d x d
    double laplacian(const double* x) const;
    double grad_norm2(const double* x) const;

    const Tape& value_tape() const { return *value_tape_; }
    const Tape& grad_tape() const { return *grad_tape_; }

private:
    Expr expr_;
    std::vector<Expr> grad_;
    std::vector<Expr> hess_;
    int d_ = 0;
    double period_ = 0;
    std::shared_ptr<const Tape> value_tape_, grad_tape_, hess_tape_;
};

// The non-gradient drift component ell.  Either explicit components or the
// 2-D rotational shorthand ell = a * (-d2 f, d1 f), which is orthogonal to
// grad f and divergence-free by construction.
class VectorField {
public:
    static VectorField zero(int d, double period);
    static VectorField rotational(const ScalarField& f, double a);
    static VectorField from_components(std::vector<ScalarField> comps);

    bool is_zero() const { return zero_; }
    bool is_rotational() const { return rotational_; }
    double rotation_amplitude() const { return a_; }
    int dimension() const { return d_; }

    const ScalarField& component(int i) const { return comps_[static_cast<std::size_t>(i)]; }
    void value(const double* x, double* out) const;
    void jacobian(const double* x, double* J) const;  // J[i*d+j] = d ell_i / d x_j
    double divergence(const double* x) const;
    double norm(const double* x) const;

private:
    std::vector<ScalarField> comps_;
    int d_ = 0;
    bool zero_ = false;
    bool rotational_ = false;
    double a_ = 0;
};

// A compiled vector-valued map x -> v(x) with symbolic Jacobian, used for the
// drift b = -(grad f + ell) and the ascent field grad f - ell.
class CompiledVectorField {
public:
    static CompiledVectorField drift(const ScalarField& f, const VectorField& ell);
    static CompiledVectorField ascent(const ScalarField& f, const VectorField& ell);

    int dimension() const { return d_; }
    void value(const double* x, double* out) const;
    void jacobian(const double* x, double* J) const;
    const Tape& tape() const { return *tape_; }
    const Tape& jacobian_tape() const { return *jac_tape_; }

private:
    CompiledVectorField(std::vector<Expr> comps, int d);
    std::vector<Expr> comps_;
    std::vector<Expr> jac_;
    int d_;
    std::shared_ptr<const Tape> tape_, jac_tape_;
};

}  // namespace kramers
