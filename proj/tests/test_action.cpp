#include <cmath>
#include <algorithm>
#include <numbers>

#include "doctest.h"
#include "kramers/action.hpp"

using namespace kramers;

namespace {

constexpr double kPi = std::numbers::pi;

struct FlagshipMam {
    ScalarField f = ScalarField::parse("cos(2*pi*x1) + cos(2*pi*x2)", 2, 1.0);
    VectorField ell;
    CompiledVectorField b;
    CompiledVectorField ascent;
    Region region{ScalarField::parse("-sin(pi*x1)*sin(pi*x2) + 1e-8", 2, 1.0), Torus{2, 1.0},
                  {0.5, 0.5}};

    explicit FlagshipMam(double a)
        : ell(a == 0 ? VectorField::zero(2, 1.0) : VectorField::rotational(f, a)),
          b(CompiledVectorField::drift(f, ell)),
          ascent(CompiledVectorField::ascent(f, ell)) {}
};

Vec point2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}

}  // namespace

TEST_CASE("action of a constant path at a critical point is zero") {
    FlagshipMam fm(0.0);
    ActionPath p;
    p.T = 1.0;
    for (int k = 0; k <= 32; ++k) p.nodes.push_back(point2(0.5, 0.5));
    CHECK(action(p, fm.b).value == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("the forward flow path carries no action") {
    FlagshipMam fm(1.0);
    const auto cps = find_critical_points(fm.f, Torus{2, 1.0}, 8);
    const FlowResult flow =
        integrate_flow(fm.b, fm.f, point2(0.3, 0.4), 20.0, 1e-3, cps, Torus{2, 1.0});
    REQUIRE(flow.converged);
    ActionPath p;
    p.T = flow.t_end;
    p.nodes = flow.trajectory;
    REQUIRE(p.nodes.size() > 40);
    CHECK(action(p, fm.b).value <= 1e-6);
}

TEST_CASE("the ascent flow path attains the barrier bound") {
    // Along solutions of X' = grad f - ell the action telescopes to
    // 2 (f(end) - f(start)); flagship: 2 (0 - (-2)) = 4.  The uphill
    // heteroclinic is found by running the ascent field backward in time
    // from just below the saddle, which works for rotational drift too.
    for (double a : {0.0, 1.0}) {
        FlagshipMam fm(a);
        Vec x0 = point2(0.5, 0.5), z = point2(0.5, 0.0);
        Vec start = point2(0.5, 1e-4);  // nudged off the saddle into the well
        std::vector<Vec> poly{z, start};
        double k1[2], k2[2], k3[2], k4[2], xt[2];
        Vec pos = start;
        const double dt = -5e-4;  // backward time
        for (int s = 0; s < 200000; ++s) {
            fm.ascent.value(pos.data(), k1);
            for (int i = 0; i < 2; ++i) xt[i] = pos[i] + 0.5 * dt * k1[i];
            fm.ascent.value(xt, k2);
            for (int i = 0; i < 2; ++i) xt[i] = pos[i] + 0.5 * dt * k2[i];
            fm.ascent.value(xt, k3);
            for (int i = 0; i < 2; ++i) xt[i] = pos[i] + dt * k3[i];
            fm.ascent.value(xt, k4);
            for (int i = 0; i < 2; ++i) pos[i] += dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
            poly.push_back(pos);
            if (Torus{2, 1.0}.distance(pos.data(), x0.data()) < 1e-6) break;
        }
        std::reverse(poly.begin(), poly.end());
        ActionPath p;
        p.nodes = poly;
        p.T = -dt * static_cast<double>(poly.size() - 1);
        const double S = action(p, fm.b).value;
        CHECK(S == doctest::Approx(4.0).epsilon(0.01));
    }
}

TEST_CASE("every evaluated action dominates twice the height gain") {
    FlagshipMam fm(1.0);
    // A handful of arbitrary paths: straight chords across the well.
    const Vec a = point2(0.5, 0.5);
    for (double ye : {0.3, 0.1, 0.05}) {
        const Vec bpt = point2(0.5, ye);
        ActionPath p;
        p.T = 2.0;
        const int N = 64;
        for (int k = 0; k <= N; ++k)
            p.nodes.push_back(a + (static_cast<double>(k) / N) * (bpt - a));
        const double fa = fm.f.value(a.data());
        const double fb = fm.f.value(bpt.data());
        const double slack = 64.0 / N;  // quadrature slack shrinks with N
        CHECK(action(p, fm.b).value >= 2 * (fb - fa) - slack);
    }
}

TEST_CASE("minimum action to the saddle equals twice the barrier") {
    const std::vector<double> t_grid{1, 2, 4, 8};
    for (double a : {0.0, 1.0}) {
        FlagshipMam fm(a);
        const Vec x0 = point2(0.5, 0.5), z = point2(0.5, 0.0);
        const MamResult res =
            minimize_action(x0, z, fm.b, fm.ascent, &fm.region, 128, t_grid);
        CHECK(res.monotone);
        CHECK(res.value == doctest::Approx(4.0).epsilon(0.02));

        // Downhill is free: the flow path realizes (almost) zero action.
        const MamResult back =
            minimize_action(z, x0, fm.b, fm.ascent, &fm.region, 128, t_grid);
        CHECK(back.value <= 1e-3);
    }
}

TEST_CASE("refining the path changes the estimate by less than a percent") {
    FlagshipMam fm(0.0);
    const std::vector<double> t_grid{2, 4};
    const Vec x0 = point2(0.5, 0.5), z = point2(0.5, 0.0);
    const double v1 = minimize_action(x0, z, fm.b, fm.ascent, &fm.region, 96, t_grid).value;
    const double v2 = minimize_action(x0, z, fm.b, fm.ascent, &fm.region, 192, t_grid).value;
    CHECK(std::abs(v2 - v1) <= 0.01 * v1);
}

TEST_CASE("flow endpoints give (nearly) zero quasi-potential") {
    FlagshipMam fm(1.0);
    // y on the forward flow from x.
    const auto cps = find_critical_points(fm.f, Torus{2, 1.0}, 8);
    const FlowResult flow =
        integrate_flow(fm.b, fm.f, point2(0.3, 0.4), 0.05, 1e-3, cps, Torus{2, 1.0});
    const Vec x = point2(0.3, 0.4);
    const Vec y = flow.trajectory.back();
    const MamResult res = minimize_action(x, y, fm.b, fm.ascent, &fm.region, 64, {0.05, 0.1, 0.5});
    CHECK(res.value <= 1e-4);
}

TEST_CASE("w-graph enumeration") {
    SUBCASE("single stable point") {
        Eigen::MatrixXd V(2, 2);
        V << 0, 3.5, 0, 0;
        const auto res = wgraph_bound(1, V);
        CHECK(res.bound == 3.5);
        CHECK(res.targets == std::vector<int>{1});
    }
    SUBCASE("two stable points, hand enumeration") {
        // V(1->2)=1, V(1->D)=5, V(2->1)=2, V(2->D)=3:
        // graphs {1->D,2->D}=8, {1->2,2->D}=4, {1->D,2->1}=7.
        Eigen::MatrixXd V(3, 3);
        V << 0, 1, 5, 2, 0, 3, 0, 0, 0;
        const auto res = wgraph_bound(2, V);
        CHECK(res.bound == 4);
        CHECK(res.targets == std::vector<int>{1, 2});
    }
    SUBCASE("zero matrix gives zero") {
        Eigen::MatrixXd V = Eigen::MatrixXd::Zero(3, 3);
        CHECK(wgraph_bound(2, V).bound == 0);
    }
    SUBCASE("combinatorial cap") {
        Eigen::MatrixXd V = Eigen::MatrixXd::Zero(8, 8);
        CHECK_THROWS(wgraph_bound(7, V));
    }
}
