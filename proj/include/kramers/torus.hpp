#pragma once

#include <cmath>

namespace kramers {

// Flat torus (L*T)^d.  Canonical representatives live in [0, L)^d; the
// metric is the minimum-image distance.
struct Torus {
    int d = 1;
    double L = 1.0;

    double wrap(double v) const {
        double r = v - L * std::floor(v / L);
        // floor rounding can land exactly on L for tiny negative v
        if (r >= L) r -= L;
        return r;
    }

    void canonical(double* x) const {
        for (int i = 0; i < d; ++i) x[i] = wrap(x[i]);
    }

    // Map a coordinate difference to [-L/2, L/2).
    double min_image1(double dv) const {
        double r = dv - L * std::floor(dv / L + 0.5);
        if (r >= 0.5 * L) r -= L;
        return r;
    }

    void min_image(double* delta) const {
        for (int i = 0; i < d; ++i) delta[i] = min_image1(delta[i]);
    }

    double distance2(const double* x, const double* y) const {
        double s = 0;
        for (int i = 0; i < d; ++i) {
            const double dv = min_image1(x[i] - y[i]);
            s += dv * dv;
        }
        return s;
    }

    double distance(const double* x, const double* y) const { return std::sqrt(distance2(x, y)); }
};

}  // namespace kramers
