#include "kramers/region.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kramers/philox.hpp"

namespace kramers {

namespace {
constexpr double kBisectTol = 1e-10;  // |g| at returned crossing points
}

Region::Region(ScalarField g, Torus torus, std::vector<double> chart_center)
    : g_(std::move(g)), torus_(torus), center_(std::move(chart_center)) {
    if (center_.empty()) center_.assign(static_cast<std::size_t>(torus_.d), 0.0);
    if (static_cast<int>(center_.size()) != torus_.d)
        throw std::runtime_error("chart center dimension mismatch");
    // Sampled bound on |grad g| with a safety factor; used to certify
    // "no boundary within reach" tests on short segments.
    const int n = torus_.d <= 2 ? 197 : 41;  // odd to avoid symmetry-aligned sampling
    double gb = 0;
    Point x{}, grad{};
    const int total = static_cast<int>(std::pow(n, torus_.d));
    for (int k = 0; k < total; ++k) {
        int rem = k;
        for (int i = 0; i < torus_.d; ++i) {
            x[static_cast<std::size_t>(i)] = torus_.L * (rem % n) / n;
            rem /= n;
        }
        ggrad(x.data(), grad.data());
        double s = 0;
        for (int i = 0; i < torus_.d; ++i) s += grad[static_cast<std::size_t>(i)] * grad[static_cast<std::size_t>(i)];
        gb = std::max(gb, s);
    }
    grad_bound_ = 2.0 * std::sqrt(gb) + 1e-12;
}

void Region::chart(const double* x, double* out) const {
    for (int i = 0; i < torus_.d; ++i)
        out[i] = center_[static_cast<std::size_t>(i)] +
                 torus_.min_image1(x[i] - center_[static_cast<std::size_t>(i)]);
}

double Region::gval(const double* x) const {
    Point c;
    chart(x, c.data());
    return g_.value(c.data());
}

void Region::ggrad(const double* x, double* out) const {
    Point c;
    chart(x, c.data());
    g_.gradient(c.data(), out);
}

bool Region::contains(const double* x) const { return gval(x) < 0; }

void Region::normal(const double* x, double* out) const {
    ggrad(x, out);
    double s = 0;
    for (int i = 0; i < torus_.d; ++i) s += out[i] * out[i];
    const double inv = 1.0 / std::sqrt(s);
    for (int i = 0; i < torus_.d; ++i) out[i] *= inv;
}

double Region::bisect_root(const double* a, const double* delta, double t_lo, double t_hi,
                           double g_lo) const {
    // g(a + t_lo*delta) and g(a + t_hi*delta) have opposite signs.
    Point x;
    double t_mid = 0.5 * (t_lo + t_hi);
    for (int it = 0; it < 200; ++it) {
        t_mid = 0.5 * (t_lo + t_hi);
        for (int i = 0; i < torus_.d; ++i) x[static_cast<std::size_t>(i)] = a[i] + t_mid * delta[i];
        const double gm = gval(x.data());
        if (std::abs(gm) <= kBisectTol) return t_mid;
        if ((gm < 0) == (g_lo < 0)) {
            t_lo = t_mid;
        } else {
            t_hi = t_mid;
        }
        if (t_hi - t_lo < 1e-18) break;
    }
    return t_mid;
}

std::optional<Point> Region::first_crossing(const double* x_prev, const double* x_next) const {
    if (!contains(x_prev)) throw std::runtime_error("first_crossing: x_prev is not inside the region");
    if (contains(x_next)) return std::nullopt;
    Point delta;
    for (int i = 0; i < torus_.d; ++i) delta[static_cast<std::size_t>(i)] = x_next[i] - x_prev[i];
    torus_.min_image(delta.data());
    const double g0 = gval(x_prev);
    const double t = bisect_root(x_prev, delta.data(), 0.0, 1.0, g0);
    Point z;
    for (int i = 0; i < torus_.d; ++i) z[static_cast<std::size_t>(i)] = x_prev[i] + t * delta[static_cast<std::size_t>(i)];
    torus_.canonical(z.data());
    return z;
}

void Region::crossings_on_segment(const double* a, const double* delta,
                                  std::vector<CrossingHit>& out) const {
    out.clear();
    double len = 0;
    for (int i = 0; i < torus_.d; ++i) len += delta[i] * delta[i];
    len = std::sqrt(len);
    if (len == 0) return;

    // Resolve the segment finely enough that a sign dip between samples is
    // caught through the directional-derivative sign pattern.
    const int K = std::clamp(static_cast<int>(len / (0.02 * torus_.L)) * 8, 8, 256);

    Point x, grad;
    auto phi = [&](double t) {
        for (int i = 0; i < torus_.d; ++i) x[static_cast<std::size_t>(i)] = a[i] + t * delta[i];
        return gval(x.data());
    };
    auto dphi = [&](double t) {
        for (int i = 0; i < torus_.d; ++i) x[static_cast<std::size_t>(i)] = a[i] + t * delta[i];
        ggrad(x.data(), grad.data());
        double s = 0;
        for (int i = 0; i < torus_.d; ++i) s += grad[static_cast<std::size_t>(i)] * delta[i];
        return s;
    };
    auto push_root = [&](double t_lo, double t_hi, double g_lo) {
        const double t = bisect_root(a, delta, t_lo, t_hi, g_lo);
        CrossingHit hit;
        hit.t = t;
        for (int i = 0; i < torus_.d; ++i)
            hit.point[static_cast<std::size_t>(i)] = a[i] + t * delta[i];
        torus_.canonical(hit.point.data());
        out.push_back(hit);
    };

    double t0 = 0, g0 = phi(0), d0 = dphi(0);
    for (int k = 1; k <= K; ++k) {
        const double t1 = static_cast<double>(k) / K;
        const double g1 = phi(t1);
        const double d1 = dphi(t1);
        if ((g0 < 0) != (g1 < 0)) {
            push_root(t0, t1, g0);
        } else if (g0 < 0 && d0 > 0 && d1 < 0) {
            // Both ends inside with an interior maximum: a thin exterior
            // sliver may be straddled.  Locate the maximum via bisection on
            // the directional derivative.
            double lo = t0, hi = t1, dlo = d0;
            for (int it = 0; it < 80 && hi - lo > 1e-16; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double dm = dphi(mid);
                if ((dm > 0) == (dlo > 0)) {
                    lo = mid;
                    dlo = dm;
                } else {
                    hi = mid;
                }
            }
            const double tmax = 0.5 * (lo + hi);
            const double gm = phi(tmax);
            if (gm >= 0) {
                push_root(t0, tmax, g0);
                if (gm > 0) push_root(tmax, t1, gm);
            }
        } else if (g0 >= 0 && d0 < 0 && d1 > 0) {
            // Both ends outside with an interior minimum dipping inside.
            double lo = t0, hi = t1, dlo = d0;
            for (int it = 0; it < 80 && hi - lo > 1e-16; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double dm = dphi(mid);
                if ((dm > 0) == (dlo > 0)) {
                    lo = mid;
                    dlo = dm;
                } else {
                    hi = mid;
                }
            }
            const double tmin = 0.5 * (lo + hi);
            if (phi(tmin) < 0) {
                push_root(t0, tmin, g0);
                push_root(tmin, t1, phi(tmin));
            }
        }
        t0 = t1;
        g0 = g1;
        d0 = d1;
    }
}

std::optional<CrossingHit> Region::first_crossing_scan(const double* x_prev,
                                                       const double* delta) const {
    std::vector<CrossingHit> hits;
    crossings_on_segment(x_prev, delta, hits);
    if (hits.empty()) return std::nullopt;
    return hits.front();
}

void Region::refine_boundary_minimum(Point& z, const ScalarField& f) const {
    const int d = torus_.d;
    auto project = [&](Point& p) {
        Point grad;
        for (int it = 0; it < 60; ++it) {
            const double gv = gval(p.data());
            if (std::abs(gv) <= 1e-13) break;
            ggrad(p.data(), grad.data());
            double n2 = 0;
            for (int i = 0; i < d; ++i) n2 += grad[static_cast<std::size_t>(i)] * grad[static_cast<std::size_t>(i)];
            if (n2 == 0) break;
            for (int i = 0; i < d; ++i) p[static_cast<std::size_t>(i)] -= gv * grad[static_cast<std::size_t>(i)] / n2;
        }
    };

    project(z);
    Point fc{};
    Point fg, n, gt;
    for (int iter = 0; iter < 400; ++iter) {
        chart(z.data(), fc.data());
        f.gradient(fc.data(), fg.data());
        normal(z.data(), n.data());
        double fn = 0;
        for (int i = 0; i < d; ++i) fn += fg[static_cast<std::size_t>(i)] * n[static_cast<std::size_t>(i)];
        double gt2 = 0;
        for (int i = 0; i < d; ++i) {
            gt[static_cast<std::size_t>(i)] = fg[static_cast<std::size_t>(i)] - fn * n[static_cast<std::size_t>(i)];
            gt2 += gt[static_cast<std::size_t>(i)] * gt[static_cast<std::size_t>(i)];
        }
        const double gtn = std::sqrt(gt2);
        double fmag = 0;
        for (int i = 0; i < d; ++i) fmag += fg[static_cast<std::size_t>(i)] * fg[static_cast<std::size_t>(i)];
        if (gtn <= 1e-12 * (1 + std::sqrt(fmag))) break;

        const double f0 = f.value(fc.data());
        double step = std::min(0.05 * torus_.L, gtn);
        bool accepted = false;
        for (int bt = 0; bt < 50; ++bt) {
            Point trial = z;
            for (int i = 0; i < d; ++i)
                trial[static_cast<std::size_t>(i)] -= step * gt[static_cast<std::size_t>(i)] / gtn;
            project(trial);
            Point tc;
            chart(trial.data(), tc.data());
            const double f1 = f.value(tc.data());
            if (f1 < f0 - 1e-12 * std::abs(f0)) {
                z = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    torus_.canonical(z.data());
}

BoundaryScanResult Region::boundary_scan(int n_samples, const ScalarField& f, std::uint64_t seed,
                                         double cluster_ftol) const {
    const int d = torus_.d;
    BoundaryScanResult result;
    RandomStream rng(seed, 0xb0face);
    std::vector<CrossingHit> hits;
    Point a, b, delta;

    const int max_chords = 10 * n_samples;
    for (int chord = 0; chord < max_chords && static_cast<int>(result.points.size()) < n_samples;
         ++chord) {
        for (int i = 0; i < d; ++i) {
            a[static_cast<std::size_t>(i)] = torus_.L * rng.uniform();
            b[static_cast<std::size_t>(i)] = torus_.L * rng.uniform();
        }
        for (int i = 0; i < d; ++i) {
            delta[static_cast<std::size_t>(i)] =
                torus_.min_image1(b[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(i)]);
        }
        crossings_on_segment(a.data(), delta.data(), hits);
        for (const auto& h : hits) {
            BoundaryPoint bp;
            bp.z = h.point;
            normal(h.point.data(), bp.normal.data());
            Point c;
            chart(h.point.data(), c.data());
            bp.f = f.value(c.data());
            result.points.push_back(bp);
        }
    }
    if (result.points.empty()) throw EmptyBoundaryError();

    // Polish the most promising candidates to local minima of f on the
    // boundary, then cluster.
    double raw_min = result.points.front().f, raw_max = raw_min;
    for (const auto& p : result.points) {
        raw_min = std::min(raw_min, p.f);
        raw_max = std::max(raw_max, p.f);
    }
    const double fscale = std::max(1.0, raw_max - raw_min);
    if (cluster_ftol <= 0) cluster_ftol = 1e-8 * fscale;

    std::vector<BoundaryPoint> refined;
    for (const auto& p : result.points) {
        if (p.f > raw_min + 0.25 * fscale) continue;
        Point z = p.z;
        refine_boundary_minimum(z, f);
        BoundaryPoint bp;
        bp.z = z;
        normal(z.data(), bp.normal.data());
        Point c;
        chart(z.data(), c.data());
        bp.f = f.value(c.data());
        refined.push_back(bp);
    }

    double f_min = refined.front().f;
    for (const auto& p : refined) f_min = std::min(f_min, p.f);
    result.f_min = f_min;

    // Two boundary sheets can pass through (nearly) the same point: a thin
    // removed sliver is approached from both sides, and each side is its own
    // piece of the boundary with its own exit flux.  Cluster by position AND
    // outward normal so such sheets stay distinct.
    const double rad = 1e-4 * torus_.L;
    for (const auto& p : refined) {
        if (p.f > f_min + cluster_ftol) continue;
        bool dup = false;
        for (const auto& q : result.minimizers) {
            double ndot = 0;
            for (int i = 0; i < d; ++i)
                ndot += p.normal[static_cast<std::size_t>(i)] * q.normal[static_cast<std::size_t>(i)];
            if (torus_.distance(p.z.data(), q.z.data()) <= rad && ndot > 0.5) {
                dup = true;
                break;
            }
        }
        if (!dup) result.minimizers.push_back(p);
    }
    std::sort(result.minimizers.begin(), result.minimizers.end(),
              [&](const BoundaryPoint& u, const BoundaryPoint& v) {
                  for (int i = 0; i < d; ++i) {
                      if (u.z[static_cast<std::size_t>(i)] != v.z[static_cast<std::size_t>(i)])
                          return u.z[static_cast<std::size_t>(i)] < v.z[static_cast<std::size_t>(i)];
                      if (u.normal[static_cast<std::size_t>(i)] != v.normal[static_cast<std::size_t>(i)])
                          return u.normal[static_cast<std::size_t>(i)] < v.normal[static_cast<std::size_t>(i)];
                  }
                  return false;
              });
    return result;
}

}  // namespace kramers
