#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "drift.hpp"
#include "gaussian.hpp"

namespace vortexiter {

struct SolveConfig {
    double dt = 1e-3;
    double t_end = 0.1;
    bool dealias = true;
    int store_stride = 1;
    bool check_cfl = true;

    void validate() const {
        if (!(dt > 0.0)) throw InvalidArgument("SolveConfig: dt must be positive");
        if (!(t_end > 0.0)) throw InvalidArgument("SolveConfig: t_end must be positive");
        if (store_stride < 1) throw InvalidArgument("SolveConfig: store_stride must be >= 1");
    }
    int steps() const {
        const double r = t_end / dt;
        const long m = std::lround(r);
        if (m < 1 || std::abs(r - double(m)) > 1e-9 * std::max(1.0, r))
            throw InvalidArgument("SolveConfig: dt must divide t_end (t_end/dt = " + std::to_string(r) + ")");
        return int(m);
    }
};

inline double cfl_limit(const GridSpec& g, double b_sup) { return 0.5 * g.spacing() / std::max(1.0, b_sup); }

inline void check_cfl(const GridSpec& g, double dt, double b_sup) {
    const double lim = cfl_limit(g, b_sup);
    if (dt > lim * (1.0 + 1e-12)) throw CflViolation(dt, lim);
}

// Drift prepared for the pseudo-spectral products at one time level.
struct DriftSample {
    PeriodicVectorField b;  // possibly band-limited to the 2/3 range
    TensorField A;          // d_j b^i from the same band-limited b
};

inline DriftSample prepare_drift(const PeriodicVectorField& b, bool dealias_on) {
    if (b.components() != 3) throw InvalidArgument("drift must have 3 components");
    SpectralField B = to_spectral(b);
    if (dealias_on) dealias(B);
    return {from_spectral(B), TensorField(from_spectral(spectral_gradient(B)))};
}

namespace detail {

// N(w) = -(b.grad)w + A(b) w, pseudo-spectral, optionally dealiased on inputs and output.
// Also reports sup|w| of the (band-limited) real-space w for the blow-up guard.
inline SpectralField vorticity_rhs(const SpectralField& W, const DriftSample& s, bool dealias_on, double* w_sup) {
    const GridSpec& g = W.grid();
    SpectralField Wt = W;
    if (dealias_on) dealias(Wt);
    const PeriodicVectorField w = from_spectral(Wt);
    const PeriodicVectorField gw = from_spectral(spectral_gradient(Wt));
    PeriodicVectorField N(g, 3);
    const std::size_t np = g.points();
    double sup2 = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
        const double b0 = s.b.at(0, p), b1 = s.b.at(1, p), b2 = s.b.at(2, p);
        const double w0 = w.at(0, p), w1 = w.at(1, p), w2 = w.at(2, p);
        sup2 = std::max(sup2, w0 * w0 + w1 * w1 + w2 * w2);
        for (int i = 0; i < 3; ++i) {
            const double adv = b0 * gw.at(i * 3, p) + b1 * gw.at(i * 3 + 1, p) + b2 * gw.at(i * 3 + 2, p);
            const double str = s.A.at(i, 0, p) * w0 + s.A.at(i, 1, p) * w1 + s.A.at(i, 2, p) * w2;
            N.at(i, p) = str - adv;
        }
    }
    if (w_sup) *w_sup = std::sqrt(sup2);
    if (!N.all_finite()) throw NumericalFailure("vorticity solver: non-finite values in nonlinear term");
    SpectralField out = to_spectral(N);
    if (dealias_on) dealias(out);
    return out;
}

// Scalar transport term -b.grad p.
inline SpectralField transport_rhs(const SpectralField& P, const DriftSample& s, bool dealias_on) {
    SpectralField Pt = P;
    if (dealias_on) dealias(Pt);
    const PeriodicVectorField gp = from_spectral(spectral_gradient(Pt));
    PeriodicVectorField N(P.grid(), 1);
    for (std::size_t p = 0; p < P.grid().points(); ++p)
        N.at(0, p) = -(s.b.at(0, p) * gp.at(0, p) + s.b.at(1, p) * gp.at(1, p) + s.b.at(2, p) * gp.at(2, p));
    if (!N.all_finite()) throw NumericalFailure("kernel_pde: non-finite values in transport term");
    SpectralField out = to_spectral(N);
    if (dealias_on) dealias(out);
    return out;
}

// Integrating-factor Heun: w* = E(w + dt N0), w' = E w + dt/2 (E N0 + N1).
template <class Rhs>
SpectralField if_heun(const SpectralField& W, double dt, Rhs&& rhs0, Rhs&& rhs1) {
    SpectralField N0 = rhs0(W);
    SpectralField Ws = W;
    for (std::size_t i = 0; i < Ws.data().size(); ++i) Ws.data()[i] += dt * N0.data()[i];
    apply_heat(Ws, dt);
    SpectralField N1 = rhs1(Ws);
    SpectralField out = W;
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += 0.5 * dt * N0.data()[i];
    apply_heat(out, dt);
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += 0.5 * dt * N1.data()[i];
    return out;
}

// Caches prepared drift samples keyed by the history interval position.
class DriftSampler {
public:
    DriftSampler(const DriftHistory& h, bool dealias_on) : h_(h), dealias_(dealias_on) {}
    const DriftSample& at(double t) {
        const auto key = h_.locate(t);
        for (auto& e : cache_)
            if (e.first == key) return e.second;
        if (cache_.size() >= 2) cache_.erase(cache_.begin());
        cache_.emplace_back(key, prepare_drift(h_.at(t), dealias_));
        return cache_.back().second;
    }

private:
    const DriftHistory& h_;
    bool dealias_;
    std::vector<std::pair<std::pair<std::size_t, double>, DriftSample>> cache_;
};

}  // namespace detail

// One integrating-factor Heun step of  w_t + (b.grad)w - A(b)w - (1/2)Lap w = 0
// with drift samples at t and t+dt.
inline SpectralField step_linearized_vorticity(const SpectralField& W, const DriftSample& s0, const DriftSample& s1,
                                               double dt, bool dealias_on = true) {
    if (W.components() != 3) throw InvalidArgument("step: vorticity must have 3 components");
    if (!(s0.b.grid() == W.grid()) || !(s1.b.grid() == W.grid())) throw InvalidArgument("step: grid mismatch");
    check_cfl(W.grid(), dt, std::max(s0.b.sup_norm(), s1.b.sup_norm()));
    auto r0 = [&](const SpectralField& X) { return detail::vorticity_rhs(X, s0, dealias_on, nullptr); };
    auto r1 = [&](const SpectralField& X) { return detail::vorticity_rhs(X, s1, dealias_on, nullptr); };
    std::function<SpectralField(const SpectralField&)> f0 = r0, f1 = r1;
    return detail::if_heun(W, dt, f0, f1);
}

// Real-space convenience overload.
inline PeriodicVectorField step_linearized_vorticity(const PeriodicVectorField& w, const PeriodicVectorField& b0,
                                                     const PeriodicVectorField& b1, double dt, bool dealias_on = true) {
    return from_spectral(step_linearized_vorticity(to_spectral(w), prepare_drift(b0, dealias_on),
                                                   prepare_drift(b1, dealias_on), dt, dealias_on));
}

// v with curl v = w, div v = 0, mean v = 0: v^ = i q x w^ / |q|^2, q = 2 pi k (Nyquist dropped).
inline SpectralField spectral_biot_savart(const SpectralField& W) {
    detail::require_components(W, 3, "reconstruct_velocity");
    SpectralField V = spectral_curl(W);
    const int n = W.grid().n;
    for (int c = 0; c < 3; ++c) {
        cplx* o = V.component(c);
        detail::for_each_index(W.grid(), [&](std::size_t p, int k1, int k2, int k3) {
            const double q1 = detail::dk(k1, n), q2 = detail::dk(k2, n), q3 = detail::dk(k3, n);
            const double qq = q1 * q1 + q2 * q2 + q3 * q3;
            o[p] = qq == 0.0 ? cplx(0.0, 0.0) : o[p] / qq;
        });
    }
    return V;
}

inline PeriodicVectorField reconstruct_velocity(const PeriodicVectorField& w) {
    if (w.components() != 3) throw InvalidArgument("reconstruct_velocity: expected 3 components");
    const double scale = std::max(1.0, w.sup_norm());
    const double m = vector_norm(mean(w));
    if (m > 1e-10 * scale)
        throw InvalidArgument("reconstruct_velocity: mean(w) = " + std::to_string(m) +
                              " is not zero; the Poisson problem has no periodic solution");
    SpectralField W = to_spectral(w);
    const double div = from_spectral(spectral_divergence(W)).sup_norm();
    if (div > 1e-10 * scale)
        throw InvalidArgument("reconstruct_velocity: w is not divergence-free (max |div w| = " + std::to_string(div) +
                              ")");
    return from_spectral(spectral_biot_savart(W));
}

struct VorticityTrajectory {
    std::vector<double> times;
    std::vector<PeriodicVectorField> w;
    std::vector<PeriodicVectorField> v;
    std::vector<double> max_div_w;
    std::vector<double> mean_w_norm;
    std::vector<double> sup_w;
    std::vector<double> sup_sqrt_t_grad_w;
    std::vector<double> sup_grad_w;  // without the sqrt(t) weight
};

namespace detail {

inline void record_snapshot(VorticityTrajectory& tr, double t, const SpectralField& W) {
    PeriodicVectorField w = from_spectral(W);
    const PeriodicVectorField gw = from_spectral(spectral_gradient(W));
    tr.times.push_back(t);
    tr.max_div_w.push_back(from_spectral(spectral_divergence(W)).sup_norm());
    tr.mean_w_norm.push_back(vector_norm(mean(w)));
    tr.sup_w.push_back(w.sup_norm());
    const double g = gw.sup_norm();
    tr.sup_grad_w.push_back(g);
    tr.sup_sqrt_t_grad_w.push_back(std::sqrt(t) * g);
    tr.v.push_back(from_spectral(spectral_biot_savart(W)));
    tr.w.push_back(std::move(w));
}

}  // namespace detail

inline VorticityTrajectory solve_linearized_vorticity(const PeriodicVectorField& omega0, const DriftHistory& b,
                                                      const SolveConfig& cfg) {
    cfg.validate();
    if (omega0.components() != 3) throw InvalidArgument("solve: omega0 must have 3 components");
    if (!(omega0.grid() == b.grid())) throw InvalidArgument("solve: omega0 and drift grids differ");
    const GridSpec g = omega0.grid();
    const int steps = cfg.steps();
    if (cfg.check_cfl) check_cfl(g, cfg.dt, b.sup_norm());

    SpectralField W = to_spectral(omega0);
    const double w0 = omega0.sup_norm();
    const double scale = std::max(1.0, w0);
    if (vector_norm(mean(omega0)) > 1e-10 * scale) throw InvalidArgument("solve: omega0 must have mean zero");
    if (from_spectral(spectral_divergence(W)).sup_norm() > 1e-10 * scale)
        throw InvalidArgument("solve: omega0 must be divergence-free");
    const double blowup = 1e6 * w0;

    VorticityTrajectory tr;
    detail::record_snapshot(tr, 0.0, W);
    detail::DriftSampler sampler(b, cfg.dealias);
    for (int n = 0; n < steps; ++n) {
        const double t0 = n * cfg.dt, t1 = (n + 1) * cfg.dt;
        double wsup = 0.0;
        const DriftSample s0 = sampler.at(t0);
        const DriftSample s1 = sampler.at(t1);
        std::function<SpectralField(const SpectralField&)> f0 = [&](const SpectralField& X) {
            return detail::vorticity_rhs(X, s0, cfg.dealias, &wsup);
        };
        std::function<SpectralField(const SpectralField&)> f1 = [&](const SpectralField& X) {
            return detail::vorticity_rhs(X, s1, cfg.dealias, nullptr);
        };
        W = detail::if_heun(W, cfg.dt, f0, f1);
        if (!std::isfinite(wsup) || wsup > blowup)
            throw NumericalFailure("vorticity solver blow-up at t=" + std::to_string(t0) + ": sup|w| = " +
                                   std::to_string(wsup) + " exceeds 1e6*|omega0|");
        if ((n + 1) % cfg.store_stride == 0 || n + 1 == steps) {
            detail::record_snapshot(tr, t1, W);
            if (!std::isfinite(tr.sup_w.back()) || tr.sup_w.back() > blowup)
                throw NumericalFailure("vorticity solver blow-up at t=" + std::to_string(t1));
        }
    }
    return tr;
}

// Evolution of a mollified point mass under p_t = (1/2)Lap p - b.grad p.
struct KernelTrajectory {
    Vec3 xi{};
    double t_mollify = 0.0;
    std::vector<double> times;
    std::vector<PeriodicVectorField> p;
    std::vector<double> mass;
    std::vector<double> min_value;
};

inline KernelTrajectory kernel_pde(const Vec3& xi, const DriftHistory& b, double t_end, SolveConfig cfg) {
    cfg.t_end = t_end;
    cfg.validate();
    const GridSpec g = b.grid();
    const int steps = cfg.steps();
    if (cfg.check_cfl) check_cfl(g, cfg.dt, b.sup_norm());
    KernelTrajectory tr;
    tr.xi = xi;
    tr.t_mollify = 4.0 * g.spacing() * g.spacing();
    SpectralField P = to_spectral(sample_periodized_gaussian(g, tr.t_mollify, xi));
    auto record = [&](double t) {
        PeriodicVectorField p = from_spectral(P);
        tr.times.push_back(t);
        tr.mass.push_back(P.component(0)[0].real());
        double mn = std::numeric_limits<double>::infinity();
        for (double v : p.data()) mn = std::min(mn, v);
        tr.min_value.push_back(mn);
        tr.p.push_back(std::move(p));
    };
    record(0.0);
    const double m0 = P.component(0)[0].real();
    detail::DriftSampler sampler(b, cfg.dealias);
    for (int n = 0; n < steps; ++n) {
        const double t0 = n * cfg.dt, t1 = (n + 1) * cfg.dt;
        const DriftSample s0 = sampler.at(t0);
        const DriftSample s1 = sampler.at(t1);
        std::function<SpectralField(const SpectralField&)> f0 = [&](const SpectralField& X) {
            return detail::transport_rhs(X, s0, cfg.dealias);
        };
        std::function<SpectralField(const SpectralField&)> f1 = [&](const SpectralField& X) {
            return detail::transport_rhs(X, s1, cfg.dealias);
        };
        P = detail::if_heun(P, cfg.dt, f0, f1);
        const double m = P.component(0)[0].real();
        if (!std::isfinite(m) || std::abs(m - m0) > 1e-8)
            throw NumericalFailure("kernel_pde: mass drift " + std::to_string(m - m0) + " at t=" + std::to_string(t1));
        if ((n + 1) % cfg.store_stride == 0 || n + 1 == steps) record(t1);
    }
    return tr;
}

// p(t, y) from stored snapshots: linear in time, trilinear in space. t is absolute (tau = 0 at the start).
inline double evaluate_kernel(const KernelTrajectory& tr, double t, const Vec3& y) {
    if (tr.times.empty()) throw InvalidArgument("evaluate_kernel: empty trajectory");
    if (t < tr.times.front() - 1e-12 || t > tr.times.back() + 1e-12)
        throw InvalidArgument("evaluate_kernel: time " + std::to_string(t) + " outside the stored range");
    const auto it = std::upper_bound(tr.times.begin(), tr.times.end(), t);
    std::size_t i = it == tr.times.begin() ? 0 : std::size_t(it - tr.times.begin()) - 1;
    if (i + 1 >= tr.times.size()) return interpolate(tr.p.back(), 0, y);
    const double th = (t - tr.times[i]) / (tr.times[i + 1] - tr.times[i]);
    const double a = interpolate(tr.p[i], 0, y);
    return th == 0.0 ? a : (1.0 - th) * a + th * interpolate(tr.p[i + 1], 0, y);
}

}  // namespace vortexiter
