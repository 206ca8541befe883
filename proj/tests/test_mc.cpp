#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "kramers/mc.hpp"
#include "kramers/philox.hpp"
#include "kramers/prefactor.hpp"

using namespace kramers;

namespace {

constexpr double kPi = std::numbers::pi;

// Free Brownian motion on the interval (1, 3) in a period-4 torus; in chart
// coordinates centred at 2 this is the textbook interval (-1, 1).
struct FreeLine {
    ScalarField f = ScalarField::parse("0", 1, 4.0);
    VectorField ell = VectorField::zero(1, 4.0);
    CompiledVectorField b = CompiledVectorField::drift(f, ell);
    Region region{ScalarField::parse("(x1 - 2)^2 - 1", 1, 4.0), Torus{1, 4.0}, {2.0}};
};

Vec point1(double x) {
    Vec v(1);
    v << x;
    return v;
}

Vec point2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}

}  // namespace

TEST_CASE("free Brownian exit times match the Dirichlet solution") {
    // (h/2) u'' = -1 on (-1,1), u(+-1) = 0  =>  u(0) = 1/h.
    FreeLine fl;
    for (double h : {0.25, 0.5, 1.0}) {
        SimConfig cfg;
        cfg.h = h;
        cfg.dt = 2e-4;
        cfg.n_paths = 4000;
        cfg.seed = 99;
        cfg.starts = {point1(2.0)};
        const auto set = sample_exits(fl.b, fl.region, cfg);
        CHECK(set.summary.censor_fraction == 0);
        const double expected = 1.0 / h;
        CHECK(std::abs(set.summary.mean - expected) <= 3 * set.summary.std_error + 0.03 * expected);
        // Exits happen at the two endpoints.
        for (const auto& r : set.records) {
            const double xe = r.exit_pos[0];
            CHECK((std::abs(xe - 1) < 1e-6 || std::abs(xe - 3) < 1e-6));
        }
    }
}

TEST_CASE("identical configs reproduce bitwise, independent of workers") {
    FreeLine fl;
    SimConfig cfg;
    cfg.h = 0.5;
    cfg.dt = 1e-3;
    cfg.n_paths = 200;
    cfg.seed = 7;
    cfg.starts = {point1(2.0)};

    cfg.threads = 1;
    const auto a = sample_exits(fl.b, fl.region, cfg);
    cfg.threads = 4;
    const auto b4 = sample_exits(fl.b, fl.region, cfg);
    cfg.threads = 8;
    const auto b8 = sample_exits(fl.b, fl.region, cfg);

    std::ostringstream sa, sb, sc;
    write_csv(a, sa);
    write_csv(b4, sb);
    write_csv(b8, sc);
    CHECK(sa.str() == sb.str());
    CHECK(sa.str() == sc.str());
    CHECK(sa.str().find("path,tau,exit_x1,steps,censored\n") == 0);

    // A different seed changes the sample set.
    cfg.seed = 8;
    const auto c = sample_exits(fl.b, fl.region, cfg);
    std::ostringstream sd;
    write_csv(c, sd);
    CHECK(sa.str() != sd.str());
}

TEST_CASE("start outside the region is rejected") {
    FreeLine fl;
    SimConfig cfg;
    cfg.starts = {point1(0.5)};  // outside (1,3)
    CHECK_THROWS(sample_exits(fl.b, fl.region, cfg));
}

TEST_CASE("h = 0 degenerates to the deterministic flow") {
    // Pure drift toward +infinity in the chart: b = 1. Exit at the right
    // endpoint after time ~ distance / speed.
    ScalarField f = ScalarField::parse("0 - x1", 1, 4.0);  // b = -grad f = +1
    VectorField ell = VectorField::zero(1, 4.0);
    CompiledVectorField b = CompiledVectorField::drift(f, ell);
    Region region(ScalarField::parse("(x1 - 2)^2 - 1", 1, 4.0), Torus{1, 4.0}, {2.0});
    SimConfig cfg;
    cfg.h = 0;
    cfg.dt = 1e-4;
    cfg.n_paths = 1;
    cfg.starts = {point1(2.0)};
    const auto set = sample_exits(b, region, cfg);
    REQUIRE(set.summary.n_uncensored == 1);
    CHECK(set.records[0].tau == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(set.records[0].exit_pos[0] == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("committor basics") {
    FreeLine fl;
    SimConfig cfg;
    cfg.h = 0.5;
    cfg.dt = 1e-4;
    cfg.n_paths = 4000;
    cfg.seed = 21;

    SUBCASE("start inside the target ball") {
        cfg.starts = {point1(2.05)};
        const auto res = committor(fl.b, fl.region, point1(2.0), 0.2, cfg);
        CHECK(res.estimate == 1.0);
    }
    SUBCASE("harmonic committor from the midpoint") {
        // For Brownian motion, P[hit [(c-r),(c+r)] before the boundary] from
        // x is linear: (1 - x)/(1 - r) in centred coordinates.
        cfg.starts = {point1(2.6)};
        const auto res = committor(fl.b, fl.region, point1(2.0), 0.2, cfg);
        const double expected = (1 - 0.6) / (1 - 0.2);
        CHECK(res.lo <= expected + 0.02);
        CHECK(res.hi >= expected - 0.02);
    }
    SUBCASE("ball not inside the region") {
        cfg.starts = {point1(2.0)};
        CHECK_THROWS(committor(fl.b, fl.region, point1(3.0), 0.2, cfg));
    }
}

TEST_CASE("committor concentrates in the flagship well") {
    ScalarField f = ScalarField::parse("cos(2*pi*x1) + cos(2*pi*x2)", 2, 1.0);
    VectorField ell = VectorField::zero(2, 1.0);
    CompiledVectorField b = CompiledVectorField::drift(f, ell);
    Region region(ScalarField::parse("-sin(pi*x1)*sin(pi*x2) + 1e-8", 2, 1.0), Torus{2, 1.0},
                  {0.5, 0.5});
    SimConfig cfg;
    cfg.h = 0.3;
    cfg.dt = 1e-3;
    cfg.n_paths = 2000;
    cfg.seed = 5;
    cfg.starts = {point2(0.3, 0.3)};
    const auto res = committor(b, region, point2(0.5, 0.5), 0.05, cfg);
    CHECK(res.estimate >= 0.99);
}

TEST_CASE("KS test on synthetic data") {
    SUBCASE("exponential samples pass") {
        ExitSampleSet set;
        set.dimension = 1;
        RandomStream rng(3, 1);
        const double rate = 2.5;
        for (int i = 0; i < 10000; ++i) {
            PathRecord r;
            r.tau = -std::log(1 - rng.uniform()) / rate;
            set.records.push_back(r);
        }
        const auto ks = exit_law_test(set, rate);
        CHECK(ks.statistic < 1.36 / std::sqrt(10000.0));
        CHECK(ks.pass95);
    }
    SUBCASE("constant samples fail") {
        ExitSampleSet set;
        set.dimension = 1;
        for (int i = 0; i < 1000; ++i) {
            PathRecord r;
            r.tau = 1.0;
            set.records.push_back(r);
        }
        const auto ks = exit_law_test(set, 1.0);
        CHECK(ks.statistic >= 0.5);
        CHECK_FALSE(ks.pass95);
    }
    SUBCASE("too few samples") {
        ExitSampleSet set;
        for (int i = 0; i < 50; ++i) set.records.push_back({});
        CHECK_THROWS(exit_law_test(set, 1.0));
    }
}

TEST_CASE("arrhenius fit recovers exact log-linear data") {
    std::vector<std::pair<double, double>> pts;
    for (double h : {0.25, 0.3, 0.4}) pts.emplace_back(h, 3.7 * std::exp(4.0 / h));
    const auto fit = arrhenius_fit(pts);
    CHECK(fit.slope == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(std::exp(fit.intercept) == doctest::Approx(3.7).epsilon(1e-12));

    std::vector<std::pair<double, double>> flat;
    for (double h : {0.25, 0.3, 0.4}) flat.emplace_back(h, 5.0);
    CHECK(arrhenius_fit(flat).slope == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS(arrhenius_fit({{0.3, 1.0}, {0.4, 2.0}}));
}

TEST_CASE("gibbs invariance of the rotational drift on the full torus") {
    // Long unkilled trajectory, 16x16 occupancy histogram against
    // exp(-2f/h) cell weights.
    ScalarField f = ScalarField::parse("cos(2*pi*x1) + cos(2*pi*x2)", 2, 1.0);
    VectorField ell = VectorField::rotational(f, 1.0);
    CompiledVectorField b = CompiledVectorField::drift(f, ell);
    const double h = 1.0;
    const double dt = 2e-4;
    const int bins = 16;
    const long long steps = 8'000'000;

    RandomStream rng(2718, 0);
    TapeRunner drift(b.tape());
    Torus torus{2, 1.0};
    double x[2] = {0.5, 0.5};
    std::vector<double> counts(bins * bins, 0.0);
    const double sigma = std::sqrt(h * dt);
    double bv[2], z0, z1;
    for (long long s = 0; s < steps; ++s) {
        drift(x, bv);
        rng.normal_pair(z0, z1);
        x[0] += bv[0] * dt + sigma * z0;
        x[1] += bv[1] * dt + sigma * z1;
        torus.canonical(x);
        const int i = std::min(bins - 1, static_cast<int>(x[0] * bins));
        const int j = std::min(bins - 1, static_cast<int>(x[1] * bins));
        counts[static_cast<std::size_t>(i * bins + j)] += 1;
    }
    // Cell-centre Gibbs weights.
    std::vector<double> pi(bins * bins, 0.0);
    double zsum = 0;
    for (int i = 0; i < bins; ++i) {
        for (int j = 0; j < bins; ++j) {
            const double xc[2] = {(i + 0.5) / bins, (j + 0.5) / bins};
            pi[static_cast<std::size_t>(i * bins + j)] = std::exp(-2 * f.value(xc) / h);
            zsum += pi[static_cast<std::size_t>(i * bins + j)];
        }
    }
    double tv = 0;
    for (std::size_t k = 0; k < pi.size(); ++k)
        tv += std::abs(counts[k] / static_cast<double>(steps) - pi[k] / zsum);
    tv /= 2;
    CHECK(tv < 0.02);
}

TEST_CASE("leveling across basin starts (small smoke)") {
    ScalarField f = ScalarField::parse("cos(2*pi*x1) + cos(2*pi*x2)", 2, 1.0);
    VectorField ell = VectorField::zero(2, 1.0);
    CompiledVectorField b = CompiledVectorField::drift(f, ell);
    Region region(ScalarField::parse("-sin(pi*x1)*sin(pi*x2) + 1e-8", 2, 1.0), Torus{2, 1.0},
                  {0.5, 0.5});
    const auto cps = find_critical_points(f, region.torus(), 8);
    const CriticalPoint* x0 = nullptr;
    for (const auto& cp : cps)
        if (cp.morse_index == 0) x0 = &cp;
    REQUIRE(x0);

    SimConfig cfg;
    cfg.h = 0.55;  // fast regime for a smoke test
    cfg.dt = 1e-3;
    cfg.n_paths = 600;
    cfg.seed = 31;
    const auto res =
        leveling_check(b, region, f, *x0, cfg, {point2(0.5, 0.5), point2(0.42, 0.45)});
    CHECK(res.means.size() == 2);
    CHECK(res.max_spread < 0.5);

    CHECK_THROWS(leveling_check(b, region, f, *x0, cfg, {point2(0.5, 1e-10)}));
}
