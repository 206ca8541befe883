#include <cmath>
#include <cstdio>
#include <numbers>

#include "doctest.h"
#include "kramers/prefactor.hpp"

using namespace kramers;

namespace {

constexpr double kPi = std::numbers::pi;

struct Setup {
    ScalarField f;
    VectorField ell;
    Region region;
    std::vector<CriticalPoint> cps;
    AssumptionReport rep;
};

std::string bent_g_source(double a) {
    const double c = -a / (2 * kPi * (1 + std::sqrt(1 + a * a)));
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "-sin(pi*(x1 + %.17g*sin(2*pi*x2)))*sin(pi*(x2 - %.17g*sin(2*pi*x1))) + 1e-8",
                  c, c);
    return buf;
}

Setup make_flagship(double a, const std::string& f_src = "cos(2*pi*x1) + cos(2*pi*x2)",
                    const std::string& g_src = "") {
    const Torus t{2, 1.0};
    ScalarField f = ScalarField::parse(f_src, 2, 1.0);
    VectorField ell = a == 0 ? VectorField::zero(2, 1.0) : VectorField::rotational(f, a);
    std::string g = g_src;
    if (g.empty()) g = a == 0 ? "-sin(pi*x1)*sin(pi*x2) + 1e-8" : bent_g_source(a);
    Region region(ScalarField::parse(g, 2, 1.0), t, {0.5, 0.5});
    auto cps = find_critical_points(f, t, 8);
    auto rep = validate_assumptions(f, ell, region, cps, 512);
    return Setup{std::move(f), std::move(ell), std::move(region), std::move(cps), std::move(rep)};
}

}  // namespace

TEST_CASE("flagship reversible prefactor equals 16 pi") {
    // Four boundary sheets (two per saddle location), each contributing
    // 2|mu|/sqrt|det H| = 2; prefactor (4 pi^2 / 2 pi) * 8 = 16 pi.
    const Setup s = make_flagship(0.0);
    REQUIRE(s.rep.all_ok());
    const KramersPrediction pred = prefactors(s.rep);
    CHECK(pred.kappa1 == 0);
    CHECK(pred.terms.size() == 4);
    CHECK(pred.kappa2 == doctest::Approx(16 * kPi).epsilon(1e-8));
    CHECK(pred.kappa2_P() == doctest::Approx(32 * kPi).epsilon(1e-8));
    CHECK(pred.barrier == doctest::Approx(2.0).epsilon(1e-7));
    CHECK(pred.validity_note() == "relative error O(h^1/2)");
}

TEST_CASE("flagship rotational prefactor equals 16 pi sqrt 2") {
    const Setup s = make_flagship(1.0);
    REQUIRE(s.rep.all_ok());
    const KramersPrediction pred = prefactors(s.rep);
    CHECK(pred.kappa2 == doctest::Approx(16 * kPi * std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("single case-1 point with unit data gives kappa1 = 1/sqrt(pi)") {
    AssumptionReport rep;
    rep.ortho_ok = rep.divfree_ok = rep.onewell_ok = rep.normal_ok = true;
    rep.barrier = 1;
    CriticalPoint x0;
    x0.z = Vec::Zero(2);
    x0.hessian = Mat::Identity(2, 2);
    x0.morse_index = 0;
    rep.x0 = x0;
    BoundaryMinimizer m;
    m.z = Vec::Zero(2);
    m.normal = Vec::Zero(2);
    m.case_id = 1;
    m.dn_f = 1;
    m.det_hess_boundary = 1;
    rep.minimizers.push_back(m);
    const KramersPrediction pred = prefactors(rep);
    CHECK(pred.kappa1 == doctest::Approx(1 / std::sqrt(kPi)).epsilon(1e-12));
    CHECK(pred.kappa2 == 0);
}

TEST_CASE("prefactors refuse failed verdicts") {
    const Setup s = make_flagship(1.0, "cos(2*pi*x1) + cos(2*pi*x2)",
                                  "-sin(pi*x1)*sin(pi*x2) + 1e-8");
    CHECK_FALSE(s.rep.all_ok());
    CHECK_THROWS_AS(prefactors(s.rep), AssumptionGateError);
}

TEST_CASE("arrhenius exponent") {
    const Setup s = make_flagship(0.0);
    CHECK(arrhenius_exponent(s.rep) == doctest::Approx(4.0).epsilon(1e-7));

    // A shift of f leaves the exponent unchanged.
    const Setup shifted = make_flagship(0.0, "cos(2*pi*x1) + cos(2*pi*x2) + 3");
    CHECK(arrhenius_exponent(shifted.rep) == doctest::Approx(4.0).epsilon(1e-7));

    // Shrinking Omega to the sublevel {f < -1} halves the barrier.
    const Setup shrunk =
        make_flagship(0.0, "cos(2*pi*x1) + cos(2*pi*x2)", "cos(2*pi*x1) + cos(2*pi*x2) + 1");
    CHECK(arrhenius_exponent(shrunk.rep) == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("rate prediction at h = 0.5") {
    const Setup s = make_flagship(0.0);
    const KramersPrediction pred = prefactors(s.rep);
    const double lam = pred.lambda(0.5);
    CHECK(lam == doctest::Approx(16 * kPi * std::exp(-8.0)).epsilon(1e-6));
    CHECK(pred.mean_exit_time(0.5) ==
          doctest::Approx(1 / (16 * kPi * std::exp(-8.0))).epsilon(1e-6));
    CHECK_THROWS(pred.lambda(0.0));
    // Large-h limit: the barrier factor tends to one (monotonicity only).
    CHECK(pred.lambda(1e9) < 16 * kPi + 1e-6);
    CHECK(pred.lambda(1e9) > pred.lambda(10));
}

TEST_CASE("reversible reduction: mu equals the negative Hessian eigenvalue") {
    const Setup s = make_flagship(0.0);
    for (const auto& m : s.rep.minimizers) {
        REQUIRE(m.saddle.has_value());
        CHECK(std::abs(m.saddle->mu) ==
              doctest::Approx(std::abs(m.saddle->lambda_neg)).epsilon(1e-10));
    }
    // kappa2 therefore equals the classical prefactor built from |lambda|.
    const KramersPrediction pred = prefactors(s.rep);
    double classical = 0;
    const double root_det_h0 = std::sqrt(s.rep.x0->hessian.determinant());
    for (const auto& m : s.rep.minimizers)
        classical += 2 * std::abs(m.saddle->lambda_neg) /
                     std::sqrt(-m.saddle->base.hessian.determinant());
    classical *= root_det_h0 / (2 * kPi);
    CHECK(pred.kappa2 == doctest::Approx(classical).epsilon(1e-10));
}

TEST_CASE("non-reversible drift accelerates the predicted exit") {
    double prev = 0;
    for (double a : {0.0, 0.5, 1.0, 2.0}) {
        const Setup s = make_flagship(a);
        REQUIRE(s.rep.all_ok());
        const KramersPrediction pred = prefactors(s.rep);
        CHECK(pred.kappa2 >= prev - 1e-12);
        // Closed form: kappa2(a) = 16 pi sqrt(1 + a^2).
        CHECK(pred.kappa2 == doctest::Approx(16 * kPi * std::sqrt(1 + a * a)).epsilon(1e-6));
        prev = pred.kappa2;
    }
}

TEST_CASE("prediction is covariant under swapping the axes") {
    const Setup s = make_flagship(1.0);
    const KramersPrediction pred = prefactors(s.rep);

    // Swap x1 <-> x2 everywhere; the rotational amplitude flips sign.
    const Torus t{2, 1.0};
    ScalarField f = ScalarField::parse("cos(2*pi*x2) + cos(2*pi*x1)", 2, 1.0);
    VectorField ell = VectorField::rotational(f, -1.0);
    const double c = -1.0 / (2 * kPi * (1 + std::sqrt(2.0)));
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "-sin(pi*(x2 + %.17g*sin(2*pi*x1)))*sin(pi*(x1 - %.17g*sin(2*pi*x2)))"
                  " + 1e-8",
                  c, c);
    Region region(ScalarField::parse(buf, 2, 1.0), t, {0.5, 0.5});
    auto cps = find_critical_points(f, t, 8);
    auto rep = validate_assumptions(f, ell, region, cps, 512);
    REQUIRE(rep.all_ok());
    const KramersPrediction swapped = prefactors(rep);
    for (double h : {0.25, 0.4, 1.0}) {
        CHECK(swapped.lambda(h) == doctest::Approx(pred.lambda(h)).epsilon(1e-8));
    }
}
