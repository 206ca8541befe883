#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "kramers/field.hpp"
#include "kramers/torus.hpp"

namespace kramers {

constexpr int kMaxDim = 8;
using Point = std::array<double, kMaxDim>;

struct BoundaryPoint {
    Point z{};       // boundary point, canonical coordinates
    Point normal{};  // unit outward normal grad g / |grad g|
    double f = 0;    // f(z) when a field was supplied
};

struct BoundaryScanResult {
    std::vector<BoundaryPoint> points;
    double f_min = 0;
    std::vector<BoundaryPoint> minimizers;  // clustered near-minimizers of f on the boundary
};

struct CrossingHit {
    double t;  // parameter along the segment in [0,1]
    Point point;
};

// Open region Omega = { x : g(chart(x)) < 0 } on the torus.  chart(x) picks
// the representative of x nearest to a configurable center, so g may be
// written in cell coordinates for shapes that are not periodic expressions
// (balls, intervals).
class Region {
public:
    Region(ScalarField g, Torus torus, std::vector<double> chart_center = {});

    const Torus& torus() const { return torus_; }
    const ScalarField& g_field() const { return g_; }
    int dimension() const { return torus_.d; }

    void chart(const double* x, double* out) const;
    double gval(const double* x) const;
    void ggrad(const double* x, double* out) const;
    bool contains(const double* x) const;
    // Unit outward normal at a (near-)boundary point.
    void normal(const double* x, double* out) const;

    // Spec contract: detects a sign change between the endpoints and bisects
    // g along the min-image segment to |g| <= 1e-10.
    std::optional<Point> first_crossing(const double* x_prev, const double* x_next) const;

    // Robust variant: also finds crossings of thin exterior slivers that the
    // endpoints straddle (both endpoints inside).  delta is the un-wrapped
    // step; returns the first crossing along the segment.
    std::optional<CrossingHit> first_crossing_scan(const double* x_prev, const double* delta) const;

    // All |g|<=1e-10 roots along the segment x(t) = a + t*delta, t in [0,1].
    void crossings_on_segment(const double* a, const double* delta,
                              std::vector<CrossingHit>& out) const;

    // Bound on |grad g| over the torus (sampled, with a safety factor);
    // used by step-skipping logic in callers.
    double grad_bound() const { return grad_bound_; }

    BoundaryScanResult boundary_scan(int n_samples, const ScalarField& f, std::uint64_t seed = 1,
                                     double cluster_ftol = 0) const;

private:
    double bisect_root(const double* a, const double* delta, double t_lo, double t_hi,
                       double g_lo) const;
    void refine_boundary_minimum(Point& z, const ScalarField& f) const;

    ScalarField g_;
    Torus torus_;
    std::vector<double> center_;
    double grad_bound_ = 0;
};

struct EmptyBoundaryError : std::runtime_error {
    EmptyBoundaryError() : std::runtime_error("no boundary found: g has constant sign on sampled chords") {}
};

}  // namespace kramers
