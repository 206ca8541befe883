#include "kramers/field.hpp"

#include <cmath>
#include <stdexcept>

namespace kramers {

namespace {
// Evaluation helpers use fixed stack scratch; keep tapes within it.
void check_tape_size(const Tape& t) {
    if (t.slot_count() > 4096) throw std::runtime_error("compiled expression exceeds scratch size");
}
}  // namespace

ScalarField::ScalarField(Expr e, int d, double period) : expr_(std::move(e)), d_(d), period_(period) {
    if (d < 1 || d > 8) throw std::runtime_error("dimension must be in [1,8]");
    if (expr_.max_var() >= d) throw std::runtime_error("expression uses variables beyond dimension");
    grad_.reserve(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) grad_.push_back(expr_.derivative(i));
    hess_.resize(static_cast<std::size_t>(d * d));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) hess_[static_cast<std::size_t>(i * d + j)] = grad_[static_cast<std::size_t>(i)].derivative(j);
    value_tape_ = std::make_shared<Tape>(Tape::compile(expr_, d));
    grad_tape_ = std::make_shared<Tape>(Tape::compile(grad_, d));
    hess_tape_ = std::make_shared<Tape>(Tape::compile(hess_, d));
    check_tape_size(*value_tape_);
    check_tape_size(*grad_tape_);
    check_tape_size(*hess_tape_);
}

ScalarField ScalarField::parse(const std::string& src, int d, double period) {
    return ScalarField(parse_expr(src, d), d, period);
}

double ScalarField::value(const double* x) const {
    double work[4096];
    double out;
    value_tape_->eval(x, work, &out);
    return out;
}

void ScalarField::gradient(const double* x, double* g) const {
    double work[4096];
    grad_tape_->eval(x, work, g);
}

void ScalarField::hessian(const double* x, double* H) const {
    double work[4096];
    hess_tape_->eval(x, work, H);
}

double ScalarField::laplacian(const double* x) const {
    double H[64];
    hessian(x, H);
    double s = 0;
    for (int i = 0; i < d_; ++i) s += H[i * d_ + i];
    return s;
}

double ScalarField::grad_norm2(const double* x) const {
    double g[8];
    gradient(x, g);
    double s = 0;
    for (int i = 0; i < d_; ++i) s += g[i] * g[i];
    return s;
}

VectorField VectorField::zero(int d, double period) {
    VectorField v;
    v.d_ = d;
    v.zero_ = true;
    for (int i = 0; i < d; ++i) v.comps_.emplace_back(Expr::constant(0), d, period);
    return v;
}

VectorField VectorField::rotational(const ScalarField& f, double a) {
    if (f.dimension() != 2) throw std::runtime_error("rotational ell requires d = 2");
    VectorField v;
    v.d_ = 2;
    v.rotational_ = true;
    v.a_ = a;
    v.zero_ = (a == 0);
    const Expr amp = Expr::constant(a);
    v.comps_.emplace_back(make_mul(amp, make_neg(f.grad_expr(1))), 2, f.period());
    v.comps_.emplace_back(make_mul(amp, f.grad_expr(0)), 2, f.period());
    return v;
}

VectorField VectorField::from_components(std::vector<ScalarField> comps) {
    VectorField v;
    v.d_ = static_cast<int>(comps.size());
    v.comps_ = std::move(comps);
    v.zero_ = true;
    for (const auto& c : v.comps_)
        if (!c.expr().is_constant(0)) v.zero_ = false;
    return v;
}

void VectorField::value(const double* x, double* out) const {
    for (int i = 0; i < d_; ++i) out[i] = comps_[static_cast<std::size_t>(i)].value(x);
}

void VectorField::jacobian(const double* x, double* J) const {
    double g[8];
    for (int i = 0; i < d_; ++i) {
        comps_[static_cast<std::size_t>(i)].gradient(x, g);
        for (int j = 0; j < d_; ++j) J[i * d_ + j] = g[j];
    }
}

double VectorField::divergence(const double* x) const {
    double g[8];
    double s = 0;
    for (int i = 0; i < d_; ++i) {
        comps_[static_cast<std::size_t>(i)].gradient(x, g);
        s += g[i];
    }
    return s;
}

double VectorField::norm(const double* x) const {
    double v[8];
    value(x, v);
    double s = 0;
    for (int i = 0; i < d_; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

CompiledVectorField::CompiledVectorField(std::vector<Expr> comps, int d)
    : comps_(std::move(comps)), d_(d) {
    jac_.resize(static_cast<std::size_t>(d * d));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            jac_[static_cast<std::size_t>(i * d + j)] = comps_[static_cast<std::size_t>(i)].derivative(j);
    tape_ = std::make_shared<Tape>(Tape::compile(comps_, d));
    jac_tape_ = std::make_shared<Tape>(Tape::compile(jac_, d));
    check_tape_size(*tape_);
    check_tape_size(*jac_tape_);
}

CompiledVectorField CompiledVectorField::drift(const ScalarField& f, const VectorField& ell) {
    const int d = f.dimension();
    std::vector<Expr> comps;
    comps.reserve(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i)
        comps.push_back(make_neg(make_add(f.grad_expr(i), ell.component(i).expr())));
    return CompiledVectorField(std::move(comps), d);
}

CompiledVectorField CompiledVectorField::ascent(const ScalarField& f, const VectorField& ell) {
    const int d = f.dimension();
    std::vector<Expr> comps;
    comps.reserve(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i)
        comps.push_back(make_sub(f.grad_expr(i), ell.component(i).expr()));
    return CompiledVectorField(std::move(comps), d);
}

void CompiledVectorField::value(const double* x, double* out) const {
    double work[4096];
    tape_->eval(x, work, out);
}

void CompiledVectorField::jacobian(const double* x, double* J) const {
    double work[4096];
    jac_tape_->eval(x, work, J);
}

}  // namespace kramers
