#pragma once

#include <cmath>
#include <numbers>

#include "spectral.hpp"

namespace vortexiter {

namespace detail {

// 2*pi*k for first derivatives; the Nyquist mode has no odd partner and is dropped.
inline double dk(int k, int n) { return k == n / 2 ? 0.0 : 2.0 * std::numbers::pi * k; }

// |2 pi k|^2 with the full Nyquist value (even operator).
inline double k2(int k1, int k2_, int k3) {
    const double tp = 2.0 * std::numbers::pi;
    return tp * tp * double(k1 * k1 + k2_ * k2_ + k3 * k3);
}

inline void require_components(const SpectralField& F, int c, const char* op) {
    if (F.components() != c)
        throw InvalidArgument(std::string(op) + ": expected " + std::to_string(c) + " components, got " +
                              std::to_string(F.components()));
}

template <class F>
void for_each_index(const GridSpec& g, F&& f) {
    const int n = g.n, h = n / 2 + 1;
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i) {
        const int k1 = i <= n / 2 ? i : i - n;
        for (int j = 0; j < n; ++j) {
            const int k2 = j <= n / 2 ? j : j - n;
            for (int k = 0; k < h; ++k, ++idx) f(idx, k1, k2, k);
        }
    }
}

}  // namespace detail

inline SpectralField spectral_curl(const SpectralField& F) {
    detail::require_components(F, 3, "curl");
    const int n = F.grid().n;
    SpectralField out(F.grid(), 3);
    const cplx I(0.0, 1.0);
    const cplx *a = F.component(0), *b = F.component(1), *c = F.component(2);
    cplx *o0 = out.component(0), *o1 = out.component(1), *o2 = out.component(2);
    detail::for_each_index(F.grid(), [&](std::size_t p, int k1, int k2, int k3) {
        const double q1 = detail::dk(k1, n), q2 = detail::dk(k2, n), q3 = detail::dk(k3, n);
        o0[p] = I * (q2 * c[p] - q3 * b[p]);
        o1[p] = I * (q3 * a[p] - q1 * c[p]);
        o2[p] = I * (q1 * b[p] - q2 * a[p]);
    });
    return out;
}

inline SpectralField spectral_divergence(const SpectralField& F) {
    detail::require_components(F, 3, "divergence");
    const int n = F.grid().n;
    SpectralField out(F.grid(), 1);
    const cplx I(0.0, 1.0);
    const cplx *a = F.component(0), *b = F.component(1), *c = F.component(2);
    cplx* o = out.component(0);
    detail::for_each_index(F.grid(), [&](std::size_t p, int k1, int k2, int k3) {
        o[p] = I * (detail::dk(k1, n) * a[p] + detail::dk(k2, n) * b[p] + detail::dk(k3, n) * c[p]);
    });
    return out;
}

// Scalar -> 3 components; vector -> 9 components with entry i*3+j = d_j f^i.
inline SpectralField spectral_gradient(const SpectralField& F) {
    if (F.components() != 1 && F.components() != 3)
        throw InvalidArgument("gradient: expected a scalar or vector field");
    const int n = F.grid().n, nc = F.components();
    SpectralField out(F.grid(), 3 * nc);
    const cplx I(0.0, 1.0);
    for (int c = 0; c < nc; ++c) {
        const cplx* f = F.component(c);
        cplx *g0 = out.component(c * 3), *g1 = out.component(c * 3 + 1), *g2 = out.component(c * 3 + 2);
        detail::for_each_index(F.grid(), [&](std::size_t p, int k1, int k2, int k3) {
            g0[p] = I * detail::dk(k1, n) * f[p];
            g1[p] = I * detail::dk(k2, n) * f[p];
            g2[p] = I * detail::dk(k3, n) * f[p];
        });
    }
    return out;
}

inline SpectralField spectral_laplacian(const SpectralField& F) {
    SpectralField out = F;
    for (int c = 0; c < F.components(); ++c) {
        cplx* o = out.component(c);
        detail::for_each_index(F.grid(), [&](std::size_t p, int k1, int k2, int k3) { o[p] *= -detail::k2(k1, k2, k3); });
    }
    return out;
}

// 2/3 rule: keep modes with 3|k_i| < n on every axis.
inline bool dealias_keep(int k1, int k2, int k3, int n) {
    return 3 * std::abs(k1) < n && 3 * std::abs(k2) < n && 3 * std::abs(k3) < n;
}

inline void dealias(SpectralField& F) {
    const int n = F.grid().n;
    for (int c = 0; c < F.components(); ++c) {
        cplx* o = F.component(c);
        detail::for_each_index(F.grid(), [&](std::size_t p, int k1, int k2, int k3) {
            if (!dealias_keep(k1, k2, k3, n)) o[p] = 0.0;
        });
    }
}

// Leray projection onto divergence-free fields: F - k (k.F)/|k|^2; k=0 untouched.
// Uses the same Nyquist-free wavevector as the first-derivative operators.
inline void leray_project(SpectralField& F) {
    detail::require_components(F, 3, "leray_project");
    const int n = F.grid().n;
    cplx *a = F.component(0), *b = F.component(1), *c = F.component(2);
    detail::for_each_index(F.grid(), [&](std::size_t p, int k1, int k2, int k3) {
        const double q1 = detail::dk(k1, n), q2 = detail::dk(k2, n), q3 = detail::dk(k3, n);
        const double qq = q1 * q1 + q2 * q2 + q3 * q3;
        if (qq == 0.0) return;
        const cplx s = (q1 * a[p] + q2 * b[p] + q3 * c[p]) / qq;
        a[p] -= q1 * s;
        b[p] -= q2 * s;
        c[p] -= q3 * s;
    });
}

// Multiply every mode by exp(-0.5*|2 pi k|^2 * t): the heat semigroup for (1/2)Laplacian.
inline void apply_heat(SpectralField& F, double t) {
    for (int c = 0; c < F.components(); ++c) {
        cplx* o = F.component(c);
        detail::for_each_index(F.grid(), [&](std::size_t p, int k1, int k2, int k3) {
            o[p] *= std::exp(-0.5 * detail::k2(k1, k2, k3) * t);
        });
    }
}

// Real-space wrappers.

inline PeriodicVectorField curl(const PeriodicVectorField& f) {
    if (f.components() != 3) throw InvalidArgument("curl: expected a 3-component field");
    return from_spectral(spectral_curl(to_spectral(f)));
}

inline PeriodicVectorField divergence(const PeriodicVectorField& f) {
    if (f.components() != 3) throw InvalidArgument("divergence: expected a 3-component field");
    return from_spectral(spectral_divergence(to_spectral(f)));
}

inline PeriodicVectorField gradient(const PeriodicVectorField& f) {
    return from_spectral(spectral_gradient(to_spectral(f)));
}

inline TensorField total_derivative(const PeriodicVectorField& b) {
    if (b.components() != 3) throw InvalidArgument("total_derivative: expected a 3-component field");
    return TensorField(gradient(b));
}

inline PeriodicVectorField laplacian(const PeriodicVectorField& f) {
    return from_spectral(spectral_laplacian(to_spectral(f)));
}

inline std::vector<double> mean(const PeriodicVectorField& f) {
    std::vector<double> m(f.components(), 0.0);
    for (int c = 0; c < f.components(); ++c) {
        double s = 0.0;
        for (double v : f.component(c)) s += v;
        m[c] = s / double(f.grid().points());
    }
    return m;
}

inline double vector_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace vortexiter
