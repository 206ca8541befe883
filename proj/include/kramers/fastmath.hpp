#pragma once

#include <cmath>
#include <cstdint>

namespace kramers {

// Minimax sine/cosine kernels (fdlibm coefficients) with two-term Cody-Waite
// reduction by pi/2.  Accuracy ~2 ulp for |x| <= 1e6; larger arguments fall
// back to libm.  Pinned here so results do not depend on the host libm.
namespace detail {

constexpr double kInvPio2 = 6.36619772367581382433e-01;
constexpr double kPio2Hi = 1.57079632679489655800e+00;
constexpr double kPio2Lo = 6.12323399573676603587e-17;

constexpr double kS1 = -1.66666666666666324348e-01;
constexpr double kS2 = 8.33333333332248946124e-03;
constexpr double kS3 = -1.98412698298579493134e-04;
constexpr double kS4 = 2.75573137070700676789e-06;
constexpr double kS5 = -2.50507602534068634195e-08;
constexpr double kS6 = 1.58969099521155010221e-10;

constexpr double kC1 = 4.16666666666666019037e-02;
constexpr double kC2 = -1.38888888888741095749e-03;
constexpr double kC3 = 2.48015872894767294178e-05;
constexpr double kC4 = -2.75573143513906633035e-07;
constexpr double kC5 = 2.08757232129817482790e-09;
constexpr double kC6 = -1.13596475577881948265e-11;

inline double sin_kernel(double r) {
    const double z = r * r;
    const double v = z * r;
    const double w = kS2 + z * (kS3 + z * (kS4 + z * (kS5 + z * kS6)));
    return r + v * (kS1 + z * w);
}

inline double cos_kernel(double r) {
    const double z = r * r;
    const double p = z * (kC1 + z * (kC2 + z * (kC3 + z * (kC4 + z * (kC5 + z * kC6)))));
    return 1.0 - 0.5 * z + z * p;
}

inline std::int64_t reduce(double x, double& r) {
    const double fk = x * kInvPio2 + (x >= 0 ? 0.5 : -0.5);
    const auto k = static_cast<std::int64_t>(fk);
    const double dk = static_cast<double>(k);
    r = (x - dk * kPio2Hi) - dk * kPio2Lo;
    return k;
}

}  // namespace detail

inline double fast_sin(double x) {
    if (!(x > -1e6 && x < 1e6)) return std::sin(x);
    double r;
    const std::int64_t q = detail::reduce(x, r) & 3;
    switch (q) {
        case 0: return detail::sin_kernel(r);
        case 1: return detail::cos_kernel(r);
        case 2: return -detail::sin_kernel(r);
        default: return -detail::cos_kernel(r);
    }
}

inline double fast_cos(double x) {
    if (!(x > -1e6 && x < 1e6)) return std::cos(x);
    double r;
    const std::int64_t q = detail::reduce(x, r) & 3;
    switch (q) {
        case 0: return detail::cos_kernel(r);
        case 1: return -detail::sin_kernel(r);
        case 2: return -detail::cos_kernel(r);
        default: return detail::sin_kernel(r);
    }
}

inline void fast_sincos(double x, double& s, double& c) {
    if (!(x > -1e6 && x < 1e6)) {
        s = std::sin(x);
        c = std::cos(x);
        return;
    }
    double r;
    const std::int64_t q = detail::reduce(x, r) & 3;
    const double sk = detail::sin_kernel(r);
    const double ck = detail::cos_kernel(r);
    switch (q) {
        case 0: s = sk; c = ck; break;
        case 1: s = ck; c = -sk; break;
        case 2: s = -sk; c = -ck; break;
        default: s = -ck; c = sk; break;
    }
}

}  // namespace kramers
