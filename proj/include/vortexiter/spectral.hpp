#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "grid.hpp"

namespace vortexiter {

using cplx = std::complex<double>;

// Fourier coefficients on the half spectrum (last axis k3 = 0..n/2).
// Convention: F(k) = n^-3 * sum_x f(x) exp(-2 pi i k.x), so a constant c maps to c at k=0.
class SpectralField {
public:
    SpectralField() = default;
    SpectralField(GridSpec g, int components) : grid_(g), comps_(components) {
        coeffs_.assign(std::size_t(components) * g.spectral_points(), cplx(0.0, 0.0));
    }

    const GridSpec& grid() const { return grid_; }
    int components() const { return comps_; }
    int nz() const { return grid_.n / 2 + 1; }

    cplx* component(int c) { return coeffs_.data() + std::size_t(c) * grid_.spectral_points(); }
    const cplx* component(int c) const { return coeffs_.data() + std::size_t(c) * grid_.spectral_points(); }

    std::size_t index(int i, int j, int k) const { return (std::size_t(i) * grid_.n + j) * nz() + k; }
    cplx& at(int c, int i, int j, int k) { return component(c)[index(i, j, k)]; }
    cplx at(int c, int i, int j, int k) const { return component(c)[index(i, j, k)]; }

    // Integer wavenumber for storage index i along a full axis, in (-n/2, n/2].
    int wavenumber(int i) const { return i <= grid_.n / 2 ? i : i - grid_.n; }

    // Coefficient for an arbitrary integer wavevector, using Hermitian symmetry for k3 < 0.
    cplx coeff(int c, int k1, int k2, int k3) const {
        const int n = grid_.n;
        auto idx = [n](int k) { return ((k % n) + n) % n; };
        const int k3i = idx(k3);
        if (k3i <= n / 2) return at(c, idx(k1), idx(k2), k3i);
        return std::conj(at(c, idx(-k1), idx(-k2), n - k3i));
    }

    std::vector<cplx>& data() { return coeffs_; }
    const std::vector<cplx>& data() const { return coeffs_; }

    // Apply f(k1,k2,k3, coeff&) over every stored coefficient of every component.
    template <class F>
    void for_each_mode(F&& f) {
        const int n = grid_.n, h = nz();
        for (int c = 0; c < comps_; ++c) {
            cplx* d = component(c);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < h; ++k) f(c, wavenumber(i), wavenumber(j), k, d[index(i, j, k)]);
        }
    }

private:
    GridSpec grid_;
    int comps_ = 0;
    std::vector<cplx> coeffs_;
};

namespace detail {

struct FftPlans {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
};

// One cached plan pair per grid size. Plans are made with FFTW_UNALIGNED and
// driven through the new-array execute API, which is thread safe.
inline const FftPlans& fft_plans(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<FftPlans>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return *it->second;
    auto plans = std::make_unique<FftPlans>();
    const std::size_t np = std::size_t(n) * n * n;
    std::vector<double> re(np);
    std::vector<cplx> sp(std::size_t(n) * n * (n / 2 + 1));
    auto* cp = reinterpret_cast<fftw_complex*>(sp.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    plans->r2c = fftw_plan_dft_r2c_3d(n, n, n, re.data(), cp, flags);
    plans->c2r = fftw_plan_dft_c2r_3d(n, n, n, cp, re.data(), flags);
    if (!plans->r2c || !plans->c2r) throw InvalidArgument("FFTW plan creation failed");
    auto& ref = *plans;
    cache.emplace(n, std::move(plans));
    return ref;
}

}  // namespace detail

// Forward transform of one real component (length n^3) into half-spectrum coeffs.
inline void forward_component(const GridSpec& g, const double* in, cplx* out) {
    const auto& plans = detail::fft_plans(g.n);
    // r2c leaves its input intact.
    fftw_execute_dft_r2c(plans.r2c, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
    const double scale = 1.0 / double(g.points());
    const std::size_t m = g.spectral_points();
    for (std::size_t i = 0; i < m; ++i) out[i] *= scale;
}

// Inverse transform; the input is copied because c2r overwrites it.
inline void inverse_component(const GridSpec& g, const cplx* in, double* out, std::vector<cplx>& scratch) {
    const auto& plans = detail::fft_plans(g.n);
    scratch.assign(in, in + g.spectral_points());
    fftw_execute_dft_c2r(plans.c2r, reinterpret_cast<fftw_complex*>(scratch.data()), out);
}

// Make the stored half spectrum consistent with a real field: the k3=0 and
// k3=n/2 planes must satisfy F(-k) = conj(F(k)).
inline void enforce_hermitian(SpectralField& F) {
    const int n = F.grid().n;
    for (int c = 0; c < F.components(); ++c)
        for (int k : {0, n / 2})
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const int mi = (n - i) % n, mj = (n - j) % n;
                    const std::size_t a = F.index(i, j, k), b = F.index(mi, mj, k);
                    if (a > b) continue;
                    cplx* d = F.component(c);
                    if (a == b) {
                        d[a] = cplx(d[a].real(), 0.0);
                    } else {
                        const cplx avg = 0.5 * (d[a] + std::conj(d[b]));
                        d[a] = avg;
                        d[b] = std::conj(avg);
                    }
                }
}

inline SpectralField to_spectral(const PeriodicVectorField& f) {
    if (!f.all_finite()) throw InvalidArgument("to_spectral: field contains non-finite values");
    SpectralField F(f.grid(), f.components());
    for (int c = 0; c < f.components(); ++c) forward_component(f.grid(), f.component(c).data(), F.component(c));
    return F;
}

inline PeriodicVectorField from_spectral(const SpectralField& F) {
    PeriodicVectorField f(F.grid(), F.components());
    std::vector<cplx> scratch;
    for (int c = 0; c < F.components(); ++c)
        inverse_component(F.grid(), F.component(c), f.component(c).data(), scratch);
    return f;
}

// Evaluate the trigonometric interpolant at an arbitrary point (component c).
// Nyquist planes are weighted by 1/2 on each side so the result is real and exact on grid points.
inline double spectral_evaluate(const SpectralField& F, int c, const Vec3& x) {
    const int n = F.grid().n, h = F.nz();
    const double tp = 2.0 * std::acos(-1.0);
    std::vector<cplx> e1(n), e2(n), e3(h);
    for (int i = 0; i < n; ++i) {
        const int k = F.wavenumber(i);
        e1[i] = std::polar(1.0, tp * k * x[0]);
        e2[i] = std::polar(1.0, tp * k * x[1]);
    }
    for (int k = 0; k < h; ++k) e3[k] = std::polar(1.0, tp * k * x[2]);
    // Nyquist along full axes: use cos instead of a one-sided exponential.
    e1[n / 2] = cplx(std::cos(tp * (n / 2) * x[0]), 0.0);
    e2[n / 2] = cplx(std::cos(tp * (n / 2) * x[1]), 0.0);
    const cplx* d = F.component(c);
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const cplx a = e1[i] * e2[j];
            const cplx* row = d + F.index(i, j, 0);
            cplx s(0.0, 0.0);
            for (int k = 1; k < h - 1; ++k) s += row[k] * e3[k];
            // k3 interior modes appear twice (k and -k); k3=0 and n/2 once.
            total += 2.0 * (a * s).real() + (a * row[0]).real() +
                     (row[h - 1] * a).real() * std::cos(tp * (n / 2) * x[2]);
        }
    return total;
}

}  // namespace vortexiter
