#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "kramers/expr.hpp"
#include "kramers/field.hpp"
#include "kramers/philox.hpp"
#include "kramers/tape.hpp"

using namespace kramers;

namespace {

// Central finite differences, the independent oracle for symbolic derivatives.
double central_diff(const Expr& e, std::vector<double> x, int i, double step) {
    x[static_cast<std::size_t>(i)] += step;
    const double up = e.eval(x);
    x[static_cast<std::size_t>(i)] -= 2 * step;
    const double dn = e.eval(x);
    return (up - dn) / (2 * step);
}

}  // namespace

TEST_CASE("parse basics") {
    CHECK(parse_expr("0", 1).is_constant(0));
    const Expr e = parse_expr("cos(2*pi*x1) + cos(2*pi*x2)", 2);
    CHECK(e.node().op == ExprOp::Add);
    CHECK(e.node().a->op == ExprOp::Cos);
    CHECK(e.node().b->op == ExprOp::Cos);
    CHECK_THROWS_AS(parse_expr("x3", 2), ParseError);
    CHECK_THROWS_AS(parse_expr("foo(x1)", 1), ParseError);
    CHECK_THROWS_AS(parse_expr("x1 +", 1), ParseError);
    CHECK_THROWS_AS(parse_expr("(x1", 1), ParseError);
}

TEST_CASE("parse error carries byte offset") {
    try {
        parse_expr("x1 + $", 1);
        FAIL("expected ParseError");
    } catch (const ParseError& err) {
        CHECK(err.offset == 5);
    }
}

TEST_CASE("eval examples") {
    const double x = 0.5;
    CHECK(parse_expr("cos(2*pi*x1)", 1).eval({&x, 1}) == doctest::Approx(-1).epsilon(1e-15));
    CHECK(parse_expr("pi", 1).eval({&x, 1}) == std::numbers::pi);
    const std::vector<double> p{1.0, 0.0};
    CHECK_THROWS_AS(parse_expr("x1/x2", 2).eval(p), EvalFault);
}

TEST_CASE("pow binds around a negated base") {
    // Per the grammar "-x1^2" is (-x1)^2.
    const double x = 3.0;
    CHECK(parse_expr("-x1^2", 1).eval({&x, 1}) == 9.0);
    CHECK(parse_expr("-(x1^2)", 1).eval({&x, 1}) == -9.0);
}

TEST_CASE("derivative closed forms") {
    const Expr d1 = parse_expr("cos(2*pi*x1)", 1).derivative(0);
    const Expr expect = parse_expr("-(2*pi*sin(2*pi*x1))", 1);
    for (double x : {0.1, 0.37, 0.9}) {
        CHECK(d1.eval({&x, 1}) == doctest::Approx(expect.eval({&x, 1})).epsilon(1e-14));
    }
    CHECK(parse_expr("x1^2", 2).derivative(1).is_constant(0));
    const Expr prod = parse_expr("exp(x1)*x1", 1).derivative(0);
    for (double x : {0.0, 1.0, -2.0}) {
        CHECK(prod.eval({&x, 1}) ==
              doctest::Approx(std::exp(x) * x + std::exp(x)).epsilon(1e-14));
    }
}

TEST_CASE("derivative matches central differences at 100 points") {
    const char* sources[] = {
        "cos(2*pi*x1) + cos(2*pi*x2)",
        "exp(sin(x1))*tanh(x2) + x1^3/(2+cos(x2))",
        "sin(2*pi*x1)*cos(2*pi*x2) - x2^2",
    };
    RandomStream rng(77, 0);
    for (const char* src : sources) {
        const Expr e = parse_expr(src, 2);
        for (int i = 0; i < 2; ++i) {
            const Expr de = e.derivative(i);
            for (int k = 0; k < 100; ++k) {
                std::vector<double> x{rng.uniform(), rng.uniform()};
                const double sym = de.eval(x);
                const double fd = central_diff(e, x, i, 1e-5);
                CHECK(std::abs(sym - fd) <= 1e-6 * (1 + std::abs(sym)));
            }
        }
    }
}

TEST_CASE("print then parse round-trips structurally") {
    const char* sources[] = {
        "cos(2*pi*x1) + cos(2*pi*x2)",
        "-sin(pi*x1)*sin(pi*x2) + 1e-8",
        "x1 - x2 - 3*x1/x2^2",
        "-(x1+x2)^3",
        "exp(x1)*x1 + tanh(x2/4)",
        "1.5e-3*x1 - -x2",
    };
    for (const char* src : sources) {
        const Expr e = parse_expr(src, 2);
        const Expr back = parse_expr(e.str(), 2);
        CHECK(back.same_structure(e));
        // Derivatives round-trip too (exercises negative constants, powers).
        for (int i = 0; i < 2; ++i) {
            const Expr de = e.derivative(i);
            CHECK(parse_expr(de.str(), 2).same_structure(de));
        }
    }
}

TEST_CASE("simplifier folds trivia") {
    CHECK(parse_expr("x1*0 + 0*x1 + 0", 1).is_constant(0));
    CHECK(parse_expr("x1^0", 1).is_constant(1));
    CHECK(make_add(Expr::constant(2), Expr::constant(3)).is_constant(5));
    CHECK(make_neg(make_neg(Expr::variable(0))).node().op == ExprOp::Var);
}

TEST_CASE("tape agrees with tree evaluation and shares subexpressions") {
    const Expr e = parse_expr("sin(2*pi*x1)*cos(2*pi*x1) + sin(2*pi*x1)^2", 1);
    const Tape t = Tape::compile(e, 1);
    TapeRunner run(t);
    RandomStream rng(3, 9);
    for (int k = 0; k < 200; ++k) {
        const double x = 2 * rng.uniform() - 1;
        CHECK(run.scalar(&x) == doctest::Approx(e.eval({&x, 1})).epsilon(1e-14));
    }
}

TEST_CASE("scalar field hessian is symmetric and periodic") {
    const ScalarField f = ScalarField::parse("cos(2*pi*x1) + cos(2*pi*x2)", 2, 1.0);
    RandomStream rng(11, 1);
    for (int k = 0; k < 50; ++k) {
        double x[2] = {rng.uniform(), rng.uniform()};
        double H[4];
        f.hessian(x, H);
        double hnorm = 0;
        for (double v : H) hnorm = std::max(hnorm, std::abs(v));
        CHECK(std::abs(H[1] - H[2]) <= 1e-12 * (1 + hnorm));
        double shifted[2] = {x[0] + 1.0, x[1] - 1.0};
        CHECK(f.value(shifted) == doctest::Approx(f.value(x)).epsilon(1e-12));
    }
}

TEST_CASE("rotational field is orthogonal to the gradient and divergence-free") {
    const ScalarField f = ScalarField::parse("cos(2*pi*x1) + cos(2*pi*x2)", 2, 1.0);
    const VectorField ell = VectorField::rotational(f, 1.0);
    RandomStream rng(13, 2);
    for (int k = 0; k < 1000; ++k) {
        double x[2] = {rng.uniform(), rng.uniform()};
        double g[2], l[2];
        f.gradient(x, g);
        ell.value(x, l);
        const double g2 = g[0] * g[0] + g[1] * g[1];
        CHECK(std::abs(l[0] * g[0] + l[1] * g[1]) <= 1e-10 * (1 + g2));
        CHECK(std::abs(ell.divergence(x)) <= 1e-10 * (1 + g2));
    }
}

TEST_CASE("philox known-answer vectors") {
    const auto r0 = Philox4x32::block({0, 0, 0, 0}, {0, 0});
    CHECK(r0[0] == 0x6627e8d5u);
    CHECK(r0[1] == 0xe169c58du);
    CHECK(r0[2] == 0xbc57ac4cu);
    CHECK(r0[3] == 0x9b00dbd8u);
    const auto r1 = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                      {0xffffffffu, 0xffffffffu});
    CHECK(r1[0] == 0x408f276du);
    CHECK(r1[1] == 0x41c83b0eu);
    CHECK(r1[2] == 0xa20bc7c6u);
    CHECK(r1[3] == 0x6d5451fdu);
    const auto r2 = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                      {0xa4093822u, 0x299f31d0u});
    CHECK(r2[0] == 0xd16cfe09u);
    CHECK(r2[1] == 0x94fdccebu);
    CHECK(r2[2] == 0x5001e420u);
    CHECK(r2[3] == 0x24126ea1u);
}

TEST_CASE("random streams are reproducible and well distributed") {
    RandomStream a(123, 45), b(123, 45), c(123, 46);
    double mean = 0, var = 0;
    bool differ = false;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        if (u != c.uniform()) differ = true;
        mean += u;
        var += (u - 0.5) * (u - 0.5);
    }
    CHECK(differ);
    CHECK(mean / n == doctest::Approx(0.5).epsilon(0.02));
    CHECK(var / n == doctest::Approx(1.0 / 12).epsilon(0.05));

    RandomStream g(9, 9);
    double m1 = 0, m2 = 0;
    for (int i = 0; i < n; ++i) {
        const double z = g.normal();
        m1 += z;
        m2 += z * z;
    }
    CHECK(std::abs(m1 / n) < 0.03);
    CHECK(m2 / n == doctest::Approx(1.0).epsilon(0.05));
}
