#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include "grid.hpp"

namespace vortexiter {

struct GaussianKernelParams {
    double t = 1.0;
    int d = 3;
    double beta = 1.0;

    void validate() const {
        if (!(t > 0.0)) throw InvalidArgument("Gaussian kernel needs t > 0");
        if (d < 1) throw InvalidArgument("Gaussian kernel needs d >= 1");
        if (!(beta >= 1.0)) throw InvalidArgument("Gaussian kernel needs beta >= 1");
    }
};

// G_t(x) = (2 pi t)^{-d/2} exp(-|x|^2 / 2t). beta is not applied here; callers pass beta*t.
inline double gaussian_kernel(const GaussianKernelParams& p, std::span<const double> x) {
    p.validate();
    if (int(x.size()) != p.d) throw InvalidArgument("gaussian_kernel: point dimension mismatch");
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    return std::pow(2.0 * std::numbers::pi * p.t, -0.5 * p.d) * std::exp(-r2 / (2.0 * p.t));
}

inline double gaussian3(double t, const Vec3& x) { return gaussian_kernel({t, 3, 1.0}, x); }

// grad G_t(x) = -x/t * G_t(x).
inline Vec3 gaussian3_grad(double t, const Vec3& x) {
    const double g = gaussian3(t, x);
    return {-x[0] / t * g, -x[1] / t * g, -x[2] / t * g};
}

inline int periodization_terms(double t) { return int(std::ceil(1.0 + 6.0 * std::sqrt(t))); }

namespace detail {

// 1-D periodized Gaussian sum_k g_t(r+k) and its first moment sum_k g_t(r+k)(r+k).
struct Periodic1D {
    double value = 0.0;
    double moment = 0.0;
};

inline Periodic1D periodic_gauss_1d(double t, double x, int K) {
    const double r = x - std::round(x);  // nearest image in [-1/2, 1/2]
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * t);
    Periodic1D out;
    for (int k = -K; k <= K; ++k) {
        const double z = r + k;
        const double g = norm * std::exp(-z * z / (2.0 * t));
        out.value += g;
        out.moment += g * z;
    }
    return out;
}

}  // namespace detail

// h_t(x) = sum over lattice k of G_t(x + k), |k_i| <= K.
inline double periodized_gaussian(const GaussianKernelParams& p, std::span<const double> x) {
    p.validate();
    if (int(x.size()) != p.d) throw InvalidArgument("periodized_gaussian: point dimension mismatch");
    const int K = periodization_terms(p.t);
    double prod = 1.0;
    for (double xi : x) prod *= detail::periodic_gauss_1d(p.t, xi, K).value;
    return prod;
}

inline double periodized_gaussian3(double t, const Vec3& x) { return periodized_gaussian({t, 3, 1.0}, x); }

// sum_k G_t(x+k) * (x+k): the image-summed version of x*G_t(x). Its negative divided by t is grad h_t.
inline Vec3 periodized_gaussian3_moment(double t, const Vec3& x) {
    if (!(t > 0.0)) throw InvalidArgument("periodized Gaussian needs t > 0");
    const int K = periodization_terms(t);
    detail::Periodic1D a[3];
    for (int i = 0; i < 3; ++i) a[i] = detail::periodic_gauss_1d(t, x[i], K);
    return {a[0].moment * a[1].value * a[2].value, a[0].value * a[1].moment * a[2].value,
            a[0].value * a[1].value * a[2].moment};
}

inline Vec3 periodized_gaussian3_grad(double t, const Vec3& x) {
    Vec3 m = periodized_gaussian3_moment(t, x);
    return {-m[0] / t, -m[1] / t, -m[2] / t};
}

// Periodized G_t(. - center) sampled on the grid.
inline PeriodicVectorField sample_periodized_gaussian(GridSpec g, double t, const Vec3& center) {
    return PeriodicVectorField::sample(g, 1, [&](const Vec3& x) {
        return periodized_gaussian3(t, Vec3{x[0] - center[0], x[1] - center[1], x[2] - center[2]});
    });
}

}  // namespace vortexiter
