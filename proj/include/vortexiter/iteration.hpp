#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "vorticity_solver.hpp"

namespace vortexiter {

struct PhysicalProblem {
    double nu = 0.5;
    double L = 1.0;
    PeriodicVectorField u0;

    void validate() const {
        if (!(nu > 0.0)) throw InvalidArgument("PhysicalProblem: nu must be positive");
        if (!(L > 0.0)) throw InvalidArgument("PhysicalProblem: L must be positive");
        if (u0.components() != 3) throw InvalidArgument("PhysicalProblem: u0 must have 3 components");
        if (!u0.all_finite()) throw InvalidArgument("PhysicalProblem: u0 has non-finite values");
        const double scale = std::max(1.0, u0.sup_norm());
        const double m = vector_norm(mean(u0));
        if (m > 1e-12 * scale) throw InvalidArgument("PhysicalProblem: u0 must have mean zero (|mean| = " + std::to_string(m) + ")");
        // The physical divergence is div_unit / L; checking the unit-grid one is equivalent up to that factor.
        const double div = divergence(u0).sup_norm();
        if (div > 1e-10 * scale) throw InvalidArgument("PhysicalProblem: u0 must be divergence-free (max |div| = " + std::to_string(div) + ")");
    }
};

// U(x,t) = (L / 2nu) u(Lx, L^2 t / 2nu); t_scaled = 2 nu t_phys / L^2.
struct TimeMap {
    double nu = 0.5;
    double L = 1.0;
    double to_scaled(double t_phys) const { return 2.0 * nu * t_phys / (L * L); }
    double to_physical(double t_scaled) const { return L * L * t_scaled / (2.0 * nu); }
    double velocity_scale() const { return L / (2.0 * nu); }
};

struct ScaledProblem {
    PeriodicVectorField u0;
    TimeMap map;
};

inline ScaledProblem nondimensionalize(const PhysicalProblem& p) {
    p.validate();
    TimeMap m{p.nu, p.L};
    ScaledProblem s{p.u0, m};
    s.u0 *= m.velocity_scale();
    return s;
}

inline PeriodicVectorField to_physical_velocity(const PeriodicVectorField& U, const TimeMap& m) {
    PeriodicVectorField u = U;
    u *= 1.0 / m.velocity_scale();
    return u;
}

// T0 = C1 nu^2 L^-4 |omega0|_inf^-2; +inf when omega0 vanishes.
inline double estimate_T0(double omega0_sup, double nu, double L, double C1 = 1.0) {
    if (!(nu > 0.0) || !(L > 0.0) || !(C1 > 0.0)) throw InvalidArgument("estimate_T0: nu, L, C1 must be positive");
    if (omega0_sup == 0.0) return std::numeric_limits<double>::infinity();
    return C1 * nu * nu / (L * L * L * L * omega0_sup * omega0_sup);
}

struct VResult {
    DriftHistory v;
    VorticityTrajectory trajectory;
};

// V(b): solve the linearized vorticity problem with drift b, then rebuild velocity.
inline VResult apply_V(const DriftHistory& b, const PeriodicVectorField& omega0, const SolveConfig& cfg) {
    const PeriodicVectorField u0 = reconstruct_velocity(omega0);
    const double scale = std::max(1.0, u0.sup_norm());
    if ((b.fields().front() - u0).sup_norm() > 1e-10 * scale)
        throw InvalidArgument("apply_V: b(., 0) must equal the velocity of omega0");
    VorticityTrajectory tr = solve_linearized_vorticity(omega0, b, cfg);
    DriftHistory v(tr.times, tr.v, false);
    return {std::move(v), std::move(tr)};
}

struct IterationConfig {
    std::optional<double> T;  // scaled time; default min(T_max, T0)
    double T_max = 0.1;
    double C1 = 1.0;
    double tol = 1e-8;
    int max_iter = 50;
    bool compute_residual = true;
    SolveConfig solver;
};

struct DiagnosticTable {
    std::vector<double> times;
    std::vector<double> sup_u;            // each divided by |omega0|_inf
    std::vector<double> sqrt_t_grad_u;
    std::vector<double> sup_w;
    std::vector<double> sqrt_t_grad_w;
    double sup_u_ratio = 0.0;              // sup_t |u|_inf / |omega0|_inf
    double grad_u_parabolic_ratio = 0.0;   // |grad u|_{0->T} / |omega0|_inf
    double sup_w_ratio = 0.0;
    double grad_w_parabolic_ratio = 0.0;
};

struct IterationReport {
    std::vector<double> delta;
    std::vector<double> sup_u;
    std::vector<double> sup_w;
    std::vector<double> residual;  // NaN when not computed
    bool converged = false;
    int iterations = 0;
    double T = 0.0;               // scaled horizon actually used
    double T0 = 0.0;              // physical T0 estimate
    double omega0_sup = 0.0;      // scaled |omega0|_inf
    TimeMap map;
    std::vector<double> times;    // scaled
    std::vector<PeriodicVectorField> u;
    std::vector<PeriodicVectorField> w;
    VorticityTrajectory last_solve;
};

namespace detail {

// (u.grad)u with the same band limiting as the vorticity products.
inline SpectralField convective_term(const SpectralField& U, bool dealias_on) {
    SpectralField Ut = U;
    if (dealias_on) dealias(Ut);
    const PeriodicVectorField u = from_spectral(Ut);
    const PeriodicVectorField gu = from_spectral(spectral_gradient(Ut));
    PeriodicVectorField N(U.grid(), 3);
    for (std::size_t p = 0; p < U.grid().points(); ++p)
        for (int i = 0; i < 3; ++i)
            N.at(i, p) = u.at(0, p) * gu.at(i * 3, p) + u.at(1, p) * gu.at(i * 3 + 1, p) + u.at(2, p) * gu.at(i * 3 + 2, p);
    SpectralField out = to_spectral(N);
    if (dealias_on) dealias(out);
    return out;
}

}  // namespace detail

// max over interior stored times of |Pi(u_t + (u.grad)u - (1/2)Lap u)|_inf.
// The time derivative is a central difference taken in the integrating-factor frame
// u~_k = exp(|2 pi k|^2 t / 2) u^_k, which removes the stiff diffusion from the difference quotient.
inline double momentum_residual(const std::vector<double>& times, const std::vector<PeriodicVectorField>& u,
                                bool dealias_on = true) {
    if (times.size() != u.size()) throw InvalidArgument("momentum_residual: size mismatch");
    if (times.size() < 3) return 0.0;
    std::vector<SpectralField> U;
    U.reserve(u.size());
    for (const auto& f : u) U.push_back(to_spectral(f));
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < U.size(); ++i) {
        const double dp = times[i + 1] - times[i], dm = times[i] - times[i - 1];
        SpectralField R = detail::convective_term(U[i], dealias_on);
        for (int c = 0; c < 3; ++c) {
            cplx* r = R.component(c);
            const cplx* a = U[i + 1].component(c);
            const cplx* b = U[i - 1].component(c);
            detail::for_each_index(R.grid(), [&](std::size_t p, int k1, int k2, int k3) {
                const double lam = 0.5 * detail::k2(k1, k2, k3);
                r[p] += (std::exp(lam * dp) * a[p] - std::exp(-lam * dm) * b[p]) / (dp + dm);
            });
        }
        leray_project(R);
        worst = std::max(worst, from_spectral(R).sup_norm());
    }
    return worst;
}

inline IterationReport picard_iterate(const PhysicalProblem& problem, const IterationConfig& cfg) {
    if (!(cfg.tol > 0.0)) throw InvalidArgument("IterationConfig: tol must be positive");
    if (cfg.max_iter < 1) throw InvalidArgument("IterationConfig: max_iter must be >= 1");
    const ScaledProblem sp = nondimensionalize(problem);
    const PeriodicVectorField omega0 = curl(sp.u0);
    const PeriodicVectorField u0 = from_spectral(spectral_biot_savart(to_spectral(omega0)));
    if ((u0 - sp.u0).sup_norm() > 1e-10 * std::max(1.0, sp.u0.sup_norm()))
        throw InvalidArgument("u0 has Nyquist-mode content that the spectral curl cannot represent");

    IterationReport rep;
    rep.map = sp.map;
    rep.omega0_sup = omega0.sup_norm();
    rep.T0 = estimate_T0(problem.u0.sup_norm() > 0 ? curl(problem.u0).sup_norm() / problem.L : 0.0, problem.nu,
                         problem.L, cfg.C1);
    double T = cfg.T.value_or(std::min(cfg.T_max, sp.map.to_scaled(rep.T0)));
    if (!cfg.T) T = std::max(cfg.solver.dt, std::floor(T / cfg.solver.dt + 1e-9) * cfg.solver.dt);
    if (!(T > 0.0)) throw InvalidArgument("IterationConfig: T must be positive");
    rep.T = T;
    SolveConfig scfg = cfg.solver;
    scfg.t_end = T;

    DriftHistory current = DriftHistory::frozen(u0);
    for (int it = 1; it <= cfg.max_iter; ++it) {
        VResult vr = apply_V(current, omega0, scfg);
        const auto& ts = vr.trajectory.times;
        double delta = 0.0, supu = 0.0, supw = 0.0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            delta = std::max(delta, (vr.v.fields()[i] - current.at(ts[i])).sup_norm());
            supu = std::max(supu, vr.v.fields()[i].sup_norm());
            supw = std::max(supw, vr.trajectory.sup_w[i]);
        }
        if (!std::isfinite(delta)) throw NumericalFailure("picard_iterate: non-finite iteration distance");
        rep.delta.push_back(delta);
        rep.sup_u.push_back(supu);
        rep.sup_w.push_back(supw);
        rep.residual.push_back(cfg.compute_residual ? momentum_residual(ts, vr.v.fields(), scfg.dealias)
                                                    : std::numeric_limits<double>::quiet_NaN());
        rep.iterations = it;
        current = std::move(vr.v);
        rep.last_solve = std::move(vr.trajectory);
        if (delta <= cfg.tol * supu) {
            rep.converged = true;
            break;
        }
    }
    rep.times = current.times();
    rep.u = current.fields();
    rep.w = rep.last_solve.w;
    return rep;
}

// Mean-zero P with Lap P = -div((u.grad)u), per stored snapshot.
inline std::vector<PeriodicVectorField> recover_pressure(const std::vector<PeriodicVectorField>& u, bool dealias_on = true) {
    std::vector<PeriodicVectorField> out;
    out.reserve(u.size());
    for (const auto& f : u) {
        if (f.components() != 3) throw InvalidArgument("recover_pressure: velocity must have 3 components");
        const SpectralField N = detail::convective_term(to_spectral(f), dealias_on);
        SpectralField P(f.grid(), 1);
        const int n = f.grid().n;
        const cplx I(0.0, 1.0);
        cplx* o = P.component(0);
        detail::for_each_index(f.grid(), [&](std::size_t p, int k1, int k2, int k3) {
            const double q1 = detail::dk(k1, n), q2 = detail::dk(k2, n), q3 = detail::dk(k3, n);
            const double qq = q1 * q1 + q2 * q2 + q3 * q3;
            if (qq == 0.0) return;
            o[p] = I * (q1 * N.component(0)[p] + q2 * N.component(1)[p] + q3 * N.component(2)[p]) / qq;
        });
        out.push_back(from_spectral(P));
    }
    return out;
}

// Ratios against |omega0|_inf; all zero when omega0 vanishes.
inline DiagnosticTable regularity_diagnostics(const std::vector<double>& times, const std::vector<PeriodicVectorField>& u,
                                            const std::vector<PeriodicVectorField>& w, double omega0_sup) {
    if (times.size() != u.size() || times.size() != w.size()) throw InvalidArgument("regularity_diagnostics: size mismatch");
    DiagnosticTable d;
    d.times = times;
    const double inv = omega0_sup > 0.0 ? 1.0 / omega0_sup : 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double st = std::sqrt(times[i]);
        d.sup_u.push_back(u[i].sup_norm() * inv);
        d.sqrt_t_grad_u.push_back(st * gradient(u[i]).sup_norm() * inv);
        d.sup_w.push_back(w[i].sup_norm() * inv);
        d.sqrt_t_grad_w.push_back(st * gradient(w[i]).sup_norm() * inv);
    }
    auto mx = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, x);
        return m;
    };
    d.sup_u_ratio = mx(d.sup_u);
    d.grad_u_parabolic_ratio = mx(d.sqrt_t_grad_u);
    d.sup_w_ratio = mx(d.sup_w);
    d.grad_w_parabolic_ratio = mx(d.sqrt_t_grad_w);
    return d;
}

inline DiagnosticTable regularity_diagnostics(const IterationReport& rep) {
    return regularity_diagnostics(rep.times, rep.u, rep.w, rep.omega0_sup);
}

}  // namespace vortexiter
