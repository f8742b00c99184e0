// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "support/nse_reference.hpp"
#include "support/random_fields.hpp"
#include "support/taylor_green.hpp"
#include "vortexiter/vortexiter.hpp"

using namespace vortexiter;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SdeConfig sde(double dt, std::size_t n, std::uint64_t seed) {
    SdeConfig c;
    c.dt = dt;
    c.n_paths = n;
    c.seed = seed;
    return c;
}

PeriodicVectorField tg_field(int n, double A, bool vorticity) {
    return PeriodicVectorField::sample(GridSpec(n), 3, [&](const Vec3& x) {
        return vorticity ? oracle::tg_vorticity(A, x) : oracle::tg_velocity(A, x);
    });
}

// 1
Outcome spectral_calculus() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int n : {16, 32})
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const GridSpec g(n);
            const auto f = oracle::random_field(g, 3, 100 * n + seed);
            const auto s = oracle::random_field(g, 1, 200 * n + seed);
            const auto c = curl(f);
            worst = std::max(worst, divergence(c).sup_norm() / c.sup_norm());
            const auto gs = gradient(s);
            worst = std::max(worst, curl(gs).sup_norm() / gs.sup_norm());
        }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 10.0, fmt("max relative residual %.2e (tol 1e-12), %.2f s", worst, secs)};
}

// 2
Outcome heat_semigroup() {
    const int n = 32;
    const GridSpec g(n);
    const auto w0 = oracle::random_solenoidal(g, 7, n / 2 - 1);
    SolveConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 0.1;
    const auto tr = solve_linearized_vorticity(w0, DriftHistory::frozen(PeriodicVectorField(g, 3)), cfg);
    const SpectralField W0 = to_spectral(w0);
    double cmax = 0.0;
    for (const auto& v : W0.data()) cmax = std::max(cmax, std::abs(v));
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const SpectralField W = to_spectral(tr.w[i]);
        for (int c = 0; c < 3; ++c)
            detail::for_each_index(g, [&](std::size_t p, int a, int b, int d) {
                const double k2 = 4 * pi * pi * (a * a + b * b + d * d);
                const auto expect = W0.component(c)[p] * std::exp(-0.5 * k2 * tr.times[i]);
                worst = std::max(worst, std::abs(W.component(c)[p] - expect) / cmax);
            });
    }
    return {worst <= 1e-12, fmt("max per-mode error %.2e relative to max|coef| over %zu snapshots (tol 1e-12)", worst,
                                tr.times.size())};
}

// 3
Outcome structure_preservation() {
    const int n = 32;
    const GridSpec g(n);
    const auto b = sample_drift(TaylorGreenDrift{1.0}, g, 0.0);
    SolveConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 0.1;
    double div_ratio = 0.0, mean_abs = 0.0;
    std::size_t snaps = 0;
    for (const auto& w0 : {tg_field(n, 1.0, true), oracle::random_solenoidal(g, 11, 8)}) {
        const auto tr = solve_linearized_vorticity(w0, DriftHistory::frozen(b), cfg);
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            div_ratio = std::max(div_ratio, tr.max_div_w[i] / tr.sup_w[i]);
            mean_abs = std::max(mean_abs, tr.mean_w_norm[i]);
        }
        snaps += tr.times.size();
    }
    return {div_ratio <= 1e-10 && mean_abs <= 1e-12,
            fmt("max |div w|/|w|_inf %.2e (tol 1e-10), max |mean w| %.2e (tol 1e-12), %zu snapshots", div_ratio,
                mean_abs, snaps)};
}

// 4
Outcome hodge() {
    const GridSpec g(32);
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto w = oracle::random_solenoidal(g, 500 + seed);
        const auto v = reconstruct_velocity(w);
        auto d = curl(v);
        d -= w;
        worst = std::max(worst, d.sup_norm() / w.sup_norm());
    }
    return {worst <= 1e-10, fmt("max |curl v - w|/|w| over 20 fields %.2e (tol 1e-10)", worst)};
}

// 5, 6 and 7 share the Picard run.
struct PicardRun {
    IterationReport rep;
    double seconds = 0.0;
};

PicardRun picard(double dt) {
    PhysicalProblem p;
    p.u0 = tg_field(32, 0.1, false);
    IterationConfig cfg;
    cfg.T = 0.1;
    cfg.solver.dt = dt;
    const auto t0 = std::chrono::steady_clock::now();
    PicardRun r{picard_iterate(p, cfg), 0.0};
    r.seconds = seconds_since(t0);
    return r;
}

Outcome picard_convergence(const PicardRun& r) {
    const auto& d = r.rep.delta;
    bool mono = true;
    for (std::size_t i = 2; i < d.size(); ++i) mono = mono && d[i] <= d[i - 1];
    const double res = r.rep.residual.empty() ? NAN : r.rep.residual.back();
    const bool ok = r.rep.converged && r.rep.iterations <= 50 && mono && res <= 1e-4 && r.seconds < 600.0;
    return {ok, fmt("converged=%d in %d iterations, final delta %.2e, delta monotone from n=2: %s, residual %.2e "
                    "(tol 1e-4), T=%.3g <= T0=%.3g, %.1f s",
                    int(r.rep.converged), r.rep.iterations, d.empty() ? NAN : d.back(), mono ? "yes" : "no", res,
                    r.rep.T, r.rep.T0, r.seconds)};
}

Outcome nse_agreement(const PicardRun& r) {
    const double dt = 1e-3;
    const auto ref = oracle::nse_reference(tg_field(32, 0.1, false), dt, int(std::lround(r.rep.T / dt)));
    double worst = 0.0;
    std::string s;
    for (double t : {0.05, 0.1}) {
        const std::size_t k = std::size_t(std::lround(t / dt));
        auto diff = ref.u[k];
        diff -= r.rep.u[k];
        const double e = diff.sup_norm();
        worst = std::max(worst, e);
        s += fmt("t=%.2f sup err %.2e; ", t, e);
    }
    return {worst <= 1e-4, s + "tol 1e-4"};
}

Outcome regularity(const PicardRun& r, const PicardRun& half) {
    const auto a = regularity_diagnostics(r.rep), b = regularity_diagnostics(half.rep);
    const double rel = std::abs(b.grad_w_parabolic_ratio / a.grad_w_parabolic_ratio - 1.0);
    const bool ok = a.sup_w_ratio <= 2.0 && std::isfinite(a.grad_w_parabolic_ratio) && rel <= 0.10;
    return {ok, fmt("sup_t|w|/|w0| %.4f (<= 2), |grad w|_{0->T}/|w0| %.5f at dt=1e-3, %.5f at dt=5e-4 (change %.2f%%, "
                    "tol 10%%)",
                    a.sup_w_ratio, a.grad_w_parabolic_ratio, b.grad_w_parabolic_ratio, 100 * rel)};
}

// 8
Outcome kernel_mc_exact() {
    const auto t0 = std::chrono::steady_clock::now();
    const Vec3 xi{0.0, 0.0, 0.0};
    const double t = 0.2;
    const std::vector<Vec3> ys{{0.2, 0.1, 0.0}, {0.0, 0.0, 0.0}, {0.4, -0.2, 0.3}, {-0.3, 0.25, 0.1}};
    bool ok = true;
    double zero_err = 0.0, zero_se = 0.0;
    for (const auto& e : kernel_mc(0.0, xi, t, ys, ZeroDrift{}, sde(1e-3, 1000, 3))) {
        zero_err = std::max(zero_err, std::abs(e.value - gaussian3(t, e.target)));
        zero_se = std::max(zero_se, e.std_error);
    }
    ok = ok && zero_err == 0.0 && zero_se == 0.0;
    const Vec3 c{1.0, 0.5, 0.0};
    double worst = 0.0;
    for (const auto& e : kernel_mc(0.0, xi, t, ys, ConstantDrift{c}, sde(1e-3, 100000, 5))) {
        const Vec3 r{e.target[0] - c[0] * t, e.target[1] - c[1] * t, e.target[2] - c[2] * t};
        worst = std::max(worst, std::abs(e.value - gaussian3(t, r)) / e.std_error);
    }
    const double secs = seconds_since(t0);
    ok = ok && worst <= 3.0 && secs < 60.0;
    return {ok, fmt("b=0: max error %.1e, max std err %.1e; b=const: max |err|/sigma %.2f (tol 3) at 1e5 paths; %.1f s",
                    zero_err, zero_se, worst, secs)};
}

// 9
Outcome kernel_mc_vs_pde() {
    const auto t0 = std::chrono::steady_clock::now();
    const int n = 32;
    const ShearDrift drift{1.0};
    const Vec3 xi{0.5, 0.5, 0.5};
    const double t = 0.1;
    SolveConfig sc;
    sc.dt = 1e-3;
    const auto tr = kernel_pde(xi, DriftHistory::frozen(sample_drift(drift, GridSpec(n), 0.0)), t, sc);
    const SpectralField P = to_spectral(tr.p.back());
    const std::vector<Vec3> ys{{0.5, 0.5, 0.5}, {0.6, 0.55, 0.5}, {0.4, 0.45, 0.55}, {0.55, 0.35, 0.5}, {0.7, 0.5, 0.45}};
    KernelMcOptions opt;
    opt.periodic = true;
    opt.initial_variance = tr.t_mollify;
    bool ok = true;
    double worst = 0.0, worst_rel = 0.0;
    for (const auto& e : kernel_mc(0.0, xi, t, ys, drift, sde(1e-3, 100000, 9), opt)) {
        const double p = spectral_evaluate(P, 0, e.target);
        const double tol = std::max(3.0 * e.std_error, 0.05 * std::abs(p));
        worst = std::max(worst, std::abs(e.value - p) / tol);
        worst_rel = std::max(worst_rel, std::abs(e.value / p - 1.0));
        ok = ok && std::abs(e.value - p) <= tol;
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < 600.0;
    return {ok, fmt("5 targets, max relative error %.2e, max error/tolerance %.3f, 1e5 paths, %.1f s", worst_rel, worst,
                    secs)};
}

// 10
Outcome integrals() {
    const auto reps = check_integral_sweep(standard_integral_sweep(), 1000000, 2024);
    std::size_t nmc = 0, nheat = 0, failed = 0;
    double worst_mc = 0.0, worst_heat = 0.0;
    for (const auto& r : reps) {
        failed += r.pass ? 0 : 1;
        if (r.id == "I_closed_vs_mc") {
            ++nmc;
            worst_mc = std::max(worst_mc, r.max_ratio);
        } else {
            ++nheat;
            worst_heat = std::max(worst_heat, r.max_ratio);
        }
    }
    return {failed == 0 && nmc > 0 && nheat > 0,
            fmt("%zu closed-form vs MC checks, worst error/tolerance %.3f; %zu heat collapses, worst rel err %.1e; "
                "%zu failed",
                nmc, worst_mc, nheat, worst_heat * 1e-12, failed)};
}

// 11
template <Drift D>
std::string pathwise(const char* name, const D& drift, bool& ok) {
    const double t = 0.1;
    const SdeConfig cfg = sde(1e-3, 10000, 17);
    const Vec3 x{0.3, 0.6, 0.2};
    const auto pf = sample_paths(x, 0.0, t, drift, cfg);
    const auto q = integrate_Q(pf, drift);
    const double qb = std::exp(4.0 * std::sqrt(t) * drift.grad_parabolic_norm(0.0, t));
    double qc = 0.0;  // tightest constant in place of 9
    std::size_t qfail = 0;
    for (std::size_t i = 0; i < q.Q.size(); ++i) {
        const double f2 = frobenius(q.Q[i]) * frobenius(q.Q[i]);
        qc = std::max(qc, f2 / qb);
        qfail += (q.flags[i] || f2 > 9.0 * qb) ? 1 : 0;
    }
    const auto pb = sample_backward_paths(x, 0.0, t, drift, cfg);
    const auto z = integrate_Z(pb, drift);
    double zd = 0.0, zh = 0.0;
    std::size_t zfail = 0;
    for (std::size_t i = 0; i < z.Z.size(); ++i) {
        zd = std::max(zd, z.max_ratio_d[i]);
        zh = std::max(zh, z.max_ratio_hs[i]);
        zfail += (z.flags[i] || z.max_ratio_d[i] > 1.0) ? 1 : 0;
    }
    ok = ok && qfail == 0 && zfail == 0;
    return fmt("%s: Q fails %zu, tightest Q constant %.3f (vs 9); Z fails %zu, max ratio %.3f (|Z(0)|=d), %.3f "
               "(|Z(0)|=sqrt d); ",
               name, qfail, qc, zfail, zd, zh);
}

Outcome pathwise_bounds() {
    bool ok = true;
    std::string s;
    s += pathwise("zero", ZeroDrift{}, ok);
    s += pathwise("const", ConstantDrift{Vec3{1.0, 0.5, 0.0}}, ok);
    s += pathwise("shear", ShearDrift{1.0}, ok);
    s += pathwise("taylor-green", TaylorGreenDrift{1.0}, ok);
    return {ok, s + "1e4 paths each"};
}

// 12
Outcome bismut() {
    bool ok = true;
    std::string s;
    {
        const Vec3 xi{0.0, 0.0, 0.0}, x{0.3, -0.2, 0.1};
        const double T = 0.2;
        auto kernel = [&](double time, const Vec3& y) { return gaussian3(time, y); };
        const auto e = bismut_gradient(0.0, xi, T, x, ZeroDrift{}, kernel, sde(1e-3, 100000, 21));
        double worst = 0.0;
        for (int a = 0; a < 3; ++a) worst = std::max(worst, std::abs(e.value[a] + (x[a] - xi[a]) / T) / e.std_error[a]);
        ok = ok && worst <= 3.0;
        s += fmt("b=0: max |err|/sigma %.2f (tol 3); ", worst);
    }
    {
        const int n = 32;
        const ShearDrift drift{1.0};
        const Vec3 xi{0.5, 0.5, 0.5};
        const double T = 0.1;
        SolveConfig sc;
        sc.dt = 1e-3;
        const auto tr = kernel_pde(xi, DriftHistory::frozen(sample_drift(drift, GridSpec(n), 0.0)), T, sc);
        const SpectralField P = to_spectral(tr.p.back());
        auto kernel = [&](double time, const Vec3& y) { return evaluate_kernel(tr, time, y); };
        const double h = 1e-4;
        double worst = 0.0;
        for (const Vec3& x : {Vec3{0.6, 0.4, 0.55}, Vec3{0.45, 0.6, 0.4}, Vec3{0.55, 0.5, 0.5}}) {
            const auto e = bismut_gradient(0.0, xi, T, x, drift, kernel, sde(1e-3, 100000, 23));
            for (int a = 0; a < 3; ++a) {
                Vec3 xp = x, xm = x;
                xp[a] += h;
                xm[a] -= h;
                const double fd =
                    (std::log(spectral_evaluate(P, 0, xp)) - std::log(spectral_evaluate(P, 0, xm))) / (2 * h);
                const double tol = std::max(3.0 * e.std_error[a], 0.07 * std::abs(fd));
                worst = std::max(worst, std::abs(e.value[a] - fd) / tol);
                ok = ok && std::abs(e.value[a] - fd) <= tol;
            }
        }
        s += fmt("shear: 3 targets x 3 components, max error/tolerance %.3f (tol max(3 sigma, 7%%)); 1e5 paths", worst);
    }
    return {ok, s};
}

// 13
Outcome feynman_kac() {
    const int n = 32;
    const double A = 4.0, t = 0.05;
    const TaylorGreenDrift drift{A};
    SolveConfig sc;
    sc.dt = 1e-3;
    sc.t_end = t;
    const auto tr = solve_linearized_vorticity(tg_field(n, 1.0, true),
                                               DriftHistory::frozen(sample_drift(drift, GridSpec(n), 0.0)), sc);
    const SpectralField W = to_spectral(tr.w.back());
    const std::vector<Vec3> probes{{0.7, 0.15, 0.6}, {0.33, 0.8, 0.12}, {0.1, 0.2, 0.3},  {0.55, 0.45, 0.9},
                                   {0.9, 0.65, 0.4}, {0.25, 0.35, 0.7}, {0.6, 0.9, 0.05}, {0.15, 0.6, 0.85}};
    const auto es = feynman_kac_vorticity(probes, t, drift, [](const Vec3& y) { return oracle::tg_vorticity(1.0, y); },
                                          sde(1e-3, 1000000, 42));
    bool ok = true;
    double worst = 0.0;
    for (const auto& e : es) {
        Vec3 ref;
        for (int c = 0; c < 3; ++c) ref[c] = spectral_evaluate(W, c, e.target);
        const double rn = norm(ref);
        for (int c = 0; c < 3; ++c) {
            const double tol = std::max(3.0 * e.std_error[c], 0.05 * rn);
            worst = std::max(worst, std::abs(e.value[c] - ref[c]) / tol);
            ok = ok && std::abs(e.value[c] - ref[c]) <= tol && e.flagged == 0;
        }
    }
    return {ok, fmt("8 probes x 3 components, amplitude 4, max error/tolerance %.3f (tol max(3 sigma_j, 5%% |ref|)); "
                    "1e6 paths per probe",
                    worst)};
}

// 14
Outcome envelopes() {
    bool ok = true;
    std::string s;
    std::size_t lattice_n = 0;
    double lattice_worst = 0.0;
    for (const auto& r : check_gaussian_inequalities()) {
        ++lattice_n;
        lattice_worst = std::max(lattice_worst, r.max_ratio);
        ok = ok && r.pass;
    }
    s += fmt("lattice: %zu checks, max ratio %.4f; ", lattice_n, lattice_worst);
    const std::vector<double> betas{1.5, 2.0, 4.0}, times{0.02, 0.05, 0.1};
    const int n = 32;
    auto run = [&](const char* name, const auto& drift) {
        const auto b = sample_drift(drift, GridSpec(n), 0.0);
        SolveConfig sc;
        sc.dt = 1e-3;
        const auto tr = kernel_pde(Vec3{0.5, 0.5, 0.5}, DriftHistory::frozen(b), 0.1, sc);
        EnvelopeOptions opt;
        opt.t_offset = tr.t_mollify;
        auto gb = [&](double tt) { return drift.grad_parabolic_norm(0.0, tt); };
        std::vector<double> ck, cg;
        bool finite = true;
        for (double beta : betas) {
            const auto ek = verify_kernel_envelope(kernel_probes(tr, times, beta), tr.xi, beta, b.sup_norm(), opt);
            const auto eg = verify_gradient_envelope(kernel_probes(tr, times, beta, 2, 1e-6, true), tr.xi, beta,
                                                     b.sup_norm(), gb, opt);
            finite = finite && ek.fit.finite && eg.fit.finite && ek.report.pass && eg.report.pass;
            ck.push_back(ek.normalized_C1);
            cg.push_back(eg.normalized_C1);
        }
        sc.t_end = 0.1;
        const auto w0 = tg_field(n, 1.0, true);
        const auto vt = solve_linearized_vorticity(w0, DriftHistory::frozen(b), sc);
        for (double beta : betas) {
            VorticityBoundInputs in;
            in.beta = beta;
            in.b_sup = b.sup_norm();
            in.grad_b_norm = gb;
            for (const auto& r : verify_vorticity_bounds(vt, w0, in))
                if (r.id != "norm_closure") finite = finite && std::isfinite(r.C1_fit) && std::isfinite(r.C2_fit) && r.pass;
        }
        bool mono = true;
        for (std::size_t i = 1; i < betas.size(); ++i) mono = mono && ck[i] <= ck[i - 1] && cg[i] <= cg[i - 1];
        ok = ok && finite && mono;
        s += fmt("%s: finite %s, kernel C1/beta^1.5 %.3f %.3f %.3f, gradient %.3f %.3f %.3f, monotone %s; ", name,
                 finite ? "yes" : "no", ck[0], ck[1], ck[2], cg[0], cg[1], cg[2], mono ? "yes" : "no");
    };
    run("zero", ZeroDrift{});
    run("shear", ShearDrift{1.0});
    run("taylor-green", TaylorGreenDrift{1.0});
    s += "betas 1.5, 2, 4";
    return {ok, s};
}

}  // namespace

int main() {
    int failed = 0;
    auto report = [&](int id, const char* title, const std::function<Outcome()>& f) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("criterion %2d %s  %s | %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    };
    report(1, "spectral calculus identities", spectral_calculus);
    report(2, "heat semigroup exactness", heat_semigroup);
    report(3, "divergence and mean preserved", structure_preservation);
    report(4, "Hodge reconstruction", hodge);
    std::optional<PicardRun> base, half;
    try {
        base = picard(1e-3);
    } catch (const std::exception& e) {
        std::printf("picard run failed: %s\n", e.what());
    }
    auto need = [&](std::optional<PicardRun>& r) -> const PicardRun& {
        if (!r) throw NumericalFailure("Picard run unavailable");
        return *r;
    };
    report(5, "Picard convergence", [&] { return picard_convergence(need(base)); });
    report(6, "fixed point vs NSE reference", [&] { return nse_agreement(need(base)); });
    report(7, "regularity diagnostics", [&] {
        if (!half) half = picard(5e-4);
        return regularity(need(base), need(half));
    });
    report(8, "MC kernel, zero and constant drift", kernel_mc_exact);
    report(9, "MC kernel vs PDE kernel, shear", kernel_mc_vs_pde);
    report(10, "I_{alpha,beta} closed form vs MC", integrals);
    report(11, "pathwise Q and Z bounds", pathwise_bounds);
    report(12, "Bismut gradient estimator", bismut);
    report(13, "Feynman-Kac vorticity vs solver", feynman_kac);
    report(14, "envelope verification", envelopes);
    std::printf("%d of 14 criteria failed\n", failed);
    return failed ? 1 : 0;
}
