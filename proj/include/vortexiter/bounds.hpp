#pragma once

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "gaussian.hpp"
#include "parallel.hpp"
#include "vorticity_solver.hpp"

namespace vortexiter {

// Parameters of I_{alpha,beta}(tau, x, s, t, y) = E[(|y - X_s|/(t-s))^alpha G_{t-s}(y - X_s))^beta],
// X_s ~ N(x, (s - tau) I).
struct IntegralParams {
    double alpha = 0.0;
    double beta = 1.0;
    double tau = 0.0;
    double s = 0.5;
    double t = 1.0;
    std::vector<double> x{0.0};
    std::vector<double> y{0.0};
    int d = 1;

    void validate() const {
        if (d < 1 || d > 3) throw InvalidArgument("IntegralParams: d must be 1, 2 or 3");
        if (int(x.size()) != d || int(y.size()) != d) throw InvalidArgument("IntegralParams: x, y must have dimension d");
        if (!(alpha >= 0.0)) throw InvalidArgument("IntegralParams: alpha must be >= 0");
        if (!(beta > 0.0)) throw InvalidArgument("IntegralParams: beta must be > 0");
        if (!(t > s && s > tau)) throw InvalidArgument("IntegralParams: need t > s > tau");
    }
    double dist2() const {
        double r = 0.0;
        for (int i = 0; i < d; ++i) r += (y[i] - x[i]) * (y[i] - x[i]);
        return r;
    }
    nlohmann::json to_json() const {
        return {{"alpha", alpha}, {"beta", beta}, {"tau", tau}, {"s", s}, {"t", t}, {"x", x}, {"y", y}, {"d", d}};
    }
};

// E|Z|^p for Z ~ N(0, I_d).
inline double central_abs_moment(double p, int d) {
    return std::pow(2.0, 0.5 * p) * std::exp(std::lgamma(0.5 * (d + p)) - std::lgamma(0.5 * d));
}

// E|sigma Z + c|^p, Z ~ N(0, I_d): noncentral chi moment,
// 2^{p/2} Gamma((d+p)/2) / Gamma(d/2) 1F1(-p/2; d/2; -|c|^2 / (2 sigma^2)) sigma^p.
inline double gaussian_abs_moment(double p, double sigma, const std::vector<double>& c) {
    const int d = int(c.size());
    double c2 = 0.0;
    for (double v : c) c2 += v * v;
    if (p == 0.0) return 1.0;
    if (c2 == 0.0) return std::pow(sigma, p) * central_abs_moment(p, d);
    if (p == 2.0) return d * sigma * sigma + c2;
    if (sigma == 0.0) return std::pow(c2, 0.5 * p);
    const double lam = c2 / (sigma * sigma);
    return std::pow(sigma, p) * central_abs_moment(p, d) *
           boost::math::hypergeometric_1F1(-0.5 * p, 0.5 * d, -0.5 * lam);
}

inline double I_constant_C1(double alpha, double beta, int d) {
    return std::pow(2.0 * std::numbers::pi, -0.5 * d * (beta - 1.0)) * std::pow(beta, -(0.5 * d + alpha) * beta);
}

inline double I_closed_form(const IntegralParams& p) {
    p.validate();
    const int d = p.d;
    const double t1 = (p.t - p.s) / p.beta, t2 = p.s - p.tau;
    const double sigma = std::sqrt(t1 * t2 / (t1 + t2));
    std::vector<double> c(d);
    for (int i = 0; i < d; ++i) c[i] = t1 * (p.x[i] - p.y[i]) / (t1 + t2);
    const double G = std::pow(2.0 * std::numbers::pi * (t1 + t2), -0.5 * d) * std::exp(-p.dist2() / (2.0 * (t1 + t2)));
    const double expo = 0.5 * d * (p.beta - 1.0) + p.alpha * p.beta;
    return I_constant_C1(p.alpha, p.beta, d) * std::pow(t1, -expo) * G *
           gaussian_abs_moment(p.alpha * p.beta, sigma, c);
}

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

// Direct sampling of X_s; blocks of 4096 samples each own the stream seed ^ block.
inline McEstimate I_mc(const IntegralParams& p, std::size_t n_samples, std::uint64_t seed, int threads = 0) {
    p.validate();
    if (n_samples < 2) throw InvalidArgument("I_mc: need at least 2 samples");
    constexpr std::size_t block = 4096;
    const std::size_t nb = (n_samples + block - 1) / block;
    std::vector<double> sums(nb, 0.0), sums2(nb, 0.0);
    const double sd = std::sqrt(p.s - p.tau), h = p.t - p.s;
    const double gnorm = std::pow(2.0 * std::numbers::pi * h, -0.5 * p.d);
    parallel_for(nb, resolve_threads(threads), [&](std::size_t b) {
        std::mt19937_64 rng(seed ^ std::uint64_t(b));
        std::normal_distribution<double> nd;
        const std::size_t lo = b * block, hi = std::min(n_samples, lo + block);
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            double r2 = 0.0;
            for (int a = 0; a < p.d; ++a) {
                const double xa = p.x[a] + sd * nd(rng);
                r2 += (p.y[a] - xa) * (p.y[a] - xa);
            }
            const double g = gnorm * std::exp(-r2 / (2.0 * h));
            const double f = std::pow(std::pow(std::sqrt(r2) / h, p.alpha) * g, p.beta);
            s1 += f;
            s2 += f * f;
        }
        sums[b] = s1;
        sums2[b] = s2;
    });
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        s1 += sums[b];
        s2 += sums2[b];
    }
    const double n = double(n_samples), m = s1 / n;
    const double var = std::max(0.0, (s2 - n * m * m) / (n - 1.0));
    return {m, std::sqrt(var / n), n_samples};
}

// pass <=> max_ratio <= 1 with the declared (or fitted) constants.
struct BoundCheckReport {
    std::string id;
    std::string params_json;
    double max_ratio = 0.0;
    double C1_fit = std::numeric_limits<double>::quiet_NaN();
    double C2_fit = std::numeric_limits<double>::quiet_NaN();
    bool pass = false;
    std::string note;
};

// Fixed sweep: alpha in {0,1,2}, beta in {1,1.5,2,3}, d in {1,3}; tau=0, s=0.4, t=1.
inline std::vector<IntegralParams> standard_integral_sweep() {
    const std::vector<double> xs{0.1, -0.05, 0.2}, ys{0.35, -0.2, 0.15};
    std::vector<IntegralParams> out;
    for (int d : {1, 3})
        for (double alpha : {0.0, 1.0, 2.0})
            for (double beta : {1.0, 1.5, 2.0, 3.0}) {
                IntegralParams p;
                p.alpha = alpha;
                p.beta = beta;
                p.d = d;
                p.tau = 0.0;
                p.s = 0.4;
                p.t = 1.0;
                p.x.assign(xs.begin(), xs.begin() + d);
                p.y.assign(ys.begin(), ys.begin() + d);
                out.push_back(p);
            }
    return out;
}

// Closed form against I_mc: pass when |mc - cf| <= max(3 se, 1% cf). max_ratio is the error over that tolerance.
// Entry k uses seed + k.
inline std::vector<BoundCheckReport> check_integral_sweep(const std::vector<IntegralParams>& sweep, std::size_t n_samples,
                                                          std::uint64_t seed, int threads = 0) {
    std::vector<BoundCheckReport> out;
    for (std::size_t k = 0; k < sweep.size(); ++k) {
        const IntegralParams& p = sweep[k];
        const double cf = I_closed_form(p);
        const McEstimate mc = I_mc(p, n_samples, seed + k, threads);
        const double tol = std::max(3.0 * mc.std_error, 0.01 * std::abs(cf));
        const double ratio = std::abs(mc.value - cf) / tol;
        nlohmann::json pj = p.to_json();
        pj["closed_form"] = cf;
        pj["mc"] = mc.value;
        pj["std_error"] = mc.std_error;
        pj["n_samples"] = n_samples;
        pj["seed"] = seed + k;
        out.push_back({"I_closed_vs_mc", pj.dump(), ratio, std::nan(""), std::nan(""), ratio <= 1.0, ""});
        if (p.alpha == 0.0 && p.beta == 1.0) {
            const double G = std::pow(2.0 * std::numbers::pi * (p.t - p.tau), -0.5 * p.d) *
                             std::exp(-p.dist2() / (2.0 * (p.t - p.tau)));
            const double rel = std::abs(cf / G - 1.0);
            nlohmann::json pc = p.to_json();
            pc["heat_kernel"] = G;
            out.push_back({"I_heat_collapse", pc.dump(), rel / 1e-12, std::nan(""), std::nan(""), rel <= 1e-12,
                           "max_ratio = relative error / 1e-12"});
        }
    }
    return out;
}

struct GaussianLatticeSpec {
    std::vector<double> betas{1.5, 2.0, 4.0};
    std::vector<double> alphas{1.0, 2.0, 3.0};
    std::vector<int> dims{1, 3};
    std::vector<double> elapsed{1e-3, 1e-2, 0.1, 1.0, 10.0};  // t - s
    std::vector<double> scaled_dist{0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0};  // |y-x|/sqrt(t-s)
};

namespace detail {

// Deterministic lattice of (x, y, t - s) for dimension d.
template <class F>
void gaussian_lattice(const GaussianLatticeSpec& spec, int d, F&& f) {
    std::vector<std::vector<double>> dirs;
    if (d == 1) {
        dirs = {{1.0}, {-1.0}};
    } else {
        for (int a = 0; a < d; ++a) {
            std::vector<double> e(d, 0.0);
            e[a] = 1.0;
            dirs.push_back(e);
        }
        dirs.push_back(std::vector<double>(d, 1.0 / std::sqrt(double(d))));
    }
    for (double h : spec.elapsed)
        for (double rho : spec.scaled_dist)
            for (const auto& e : dirs) {
                std::vector<double> x(d), y(d);
                for (int a = 0; a < d; ++a) {
                    x[a] = 0.1 * (a + 1);
                    y[a] = x[a] + rho * std::sqrt(h) * e[a];
                }
                f(x, y, h);
            }
}

inline double diff_norm(const std::vector<double>& x, const std::vector<double>& y) {
    double r = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) r += (y[a] - x[a]) * (y[a] - x[a]);
    return std::sqrt(r);
}

}  // namespace detail

inline int moment_envelope_k(double alpha) {
    const double half = 0.5 * alpha;
    return half == std::floor(half) ? int(half) : int(std::floor(half)) + 1;
}

// Rescaling identity, the gradient envelope and the moment envelope of the Gaussian on a fixed lattice.
inline std::vector<BoundCheckReport> check_gaussian_inequalities(const GaussianLatticeSpec& spec = {}) {
    std::vector<BoundCheckReport> out;
    for (int d : spec.dims)
        for (double beta : spec.betas) {
            if (!(beta > 1.0)) throw InvalidArgument("check_gaussian_inequalities: beta must be > 1");
            double id_err = 0.0, grad_ratio = 0.0;
            detail::gaussian_lattice(spec, d, [&](const std::vector<double>& x, const std::vector<double>& y, double h) {
                std::vector<double> r(d);
                for (int a = 0; a < d; ++a) r[a] = y[a] - x[a];
                const double dist = detail::diff_norm(x, y);
                const double g = gaussian_kernel({h, d, 1.0}, r);
                const double gb = gaussian_kernel({beta * h, d, 1.0}, r);
                const double rhs = std::pow(beta, 0.5 * d) * std::exp(-(beta - 1.0) / beta * dist * dist / (2.0 * h)) * gb;
                id_err = std::max(id_err, std::abs(g / rhs - 1.0));
                const double lhs = std::sqrt(h) * (dist / h) * g;  // sqrt(t-s) |grad_x G_{t-s}(y-x)|
                const double bound = std::pow(beta, 0.5 * (d + 1)) / std::sqrt(2.0 * (beta - 1.0)) * gb;
                grad_ratio = std::max(grad_ratio, lhs / bound);
            });
            nlohmann::json pj{{"d", d}, {"beta", beta}, {"tolerance", 1e-12}};
            out.push_back({"gauss_rescale_identity", pj.dump(), id_err / 1e-12, std::nan(""), std::nan(""), id_err <= 1e-12,
                           "max_ratio = max relative error / 1e-12"});
            pj.erase("tolerance");
            out.push_back({"grad_gauss_envelope", pj.dump(), grad_ratio, std::nan(""), std::nan(""), grad_ratio <= 1.0, ""});
            for (double alpha : spec.alphas) {
                const int k = moment_envelope_k(alpha);
                double fact = 1.0;
                for (int i = 2; i <= k; ++i) fact *= i;
                double ratio = 0.0;
                detail::gaussian_lattice(spec, d, [&](const std::vector<double>& x, const std::vector<double>& y, double h) {
                    std::vector<double> r(d);
                    for (int a = 0; a < d; ++a) r[a] = y[a] - x[a];
                    const double dist = detail::diff_norm(x, y);
                    const double lhs = std::pow(dist / std::sqrt(h), alpha) * gaussian_kernel({h, d, 1.0}, r);
                    const double bound = std::pow(beta, 0.5 * d) * fact * std::pow(2.0 * beta / (beta - 1.0), k) *
                                         gaussian_kernel({beta * h, d, 1.0}, r);
                    ratio = std::max(ratio, lhs / bound);
                });
                nlohmann::json pa{{"d", d}, {"beta", beta}, {"alpha", alpha}, {"k", k}};
                out.push_back({"moment_gauss_envelope", pa.dump(), ratio, std::nan(""), std::nan(""), ratio <= 1.0, ""});
            }
        }
    return out;
}

struct IntegratedBoundResult {
    BoundCheckReport report;
    double integral = 0.0;
    double bound = 0.0;
    double kappa1 = 0.0;
    double kappa0 = 0.0;       // kappa1 * B(alpha/2 + 1, 1 - a - alpha/2)
    double kappa0_quad = 0.0;  // same by quadrature
    double kappa3 = 0.0;       // 1 / (1 - a)
    double kappa3_quad = 0.0;
    double C1 = 0.0, C3 = 0.0, C4 = 0.0;
};

// int_tau^t I^{1/beta} ds against C4 (t-tau)^{1-alpha/2} G_{beta(t-tau)}(y-x) (1 + |x-y|^alpha/(t-tau)^{alpha/2}),
// a = d(beta-1)/(2 beta). Requires a + alpha/2 < 1.
inline IntegratedBoundResult check_integrated_bound(const IntegralParams& p_in) {
    IntegralParams p = p_in;
    if (!(p.beta >= 1.0)) throw InvalidArgument("check_integrated_bound: beta must be >= 1");
    if (!(p.alpha >= 0.0)) throw InvalidArgument("check_integrated_bound: alpha must be >= 0");
    if (!(p.t > p.tau)) throw InvalidArgument("check_integrated_bound: need t > tau");
    const int d = p.d;
    const double a = d * (p.beta - 1.0) / (2.0 * p.beta);
    if (!(a + 0.5 * p.alpha < 1.0))
        throw InvalidArgument("check_integrated_bound: exponent condition d(beta-1)/(2beta) + alpha/2 < 1 violated (" +
                              std::to_string(a) + " + " + std::to_string(0.5 * p.alpha) + " = " +
                              std::to_string(a + 0.5 * p.alpha) + ")");
    p.s = 0.5 * (p.tau + p.t);
    p.validate();

    IntegratedBoundResult r;
    boost::math::quadrature::tanh_sinh<double> ts;
    const double tol = 1e-12;
    r.integral = ts.integrate(
        [&](double s) {
            IntegralParams q = p;
            q.s = s;
            if (!(s > p.tau && s < p.t)) return 0.0;
            return std::pow(I_closed_form(q), 1.0 / p.beta);
        },
        p.tau, p.t, tol);

    r.kappa1 = std::pow(central_abs_moment(p.alpha * p.beta, d), 1.0 / p.beta);
    r.kappa0 = r.kappa1 * std::beta(0.5 * p.alpha + 1.0, 1.0 - a - 0.5 * p.alpha);
    r.kappa0_quad = r.kappa1 * ts.integrate([&](double s) { return std::pow(1.0 - s, 0.5 * p.alpha) * std::pow(s, -a - 0.5 * p.alpha); },
                                            0.0, 1.0, 1e-14);
    r.kappa3 = 1.0 / (1.0 - a);
    r.kappa3_quad = a == 0.0 ? 1.0 : ts.integrate([&](double s) { return std::pow(s, -a); }, 0.0, 1.0, 1e-14);
    r.C1 = I_constant_C1(p.alpha, p.beta, d);
    r.C3 = std::pow(p.beta, (2.0 * d + p.alpha) / 2.0 + a + 0.5 * p.alpha) * std::pow(2.0 * std::numbers::pi, a) *
           std::pow(r.C1, 1.0 / p.beta);
    r.C4 = std::max(r.kappa3, r.kappa0) * r.C3;
    const double T = p.t - p.tau, dist = std::sqrt(p.dist2());
    const double Gb = std::pow(2.0 * std::numbers::pi * p.beta * T, -0.5 * d) * std::exp(-p.dist2() / (2.0 * p.beta * T));
    r.bound = r.C4 * std::pow(T, 1.0 - 0.5 * p.alpha) * Gb * (1.0 + std::pow(dist, p.alpha) / std::pow(T, 0.5 * p.alpha));
    nlohmann::json pj = p.to_json();
    pj.erase("s");
    const double ratio = r.integral / r.bound;
    r.report = {"integrated_I_bound", pj.dump(), ratio, r.C4, std::nan(""), std::isfinite(ratio) && ratio <= 1.0, ""};
    return r;
}

// ---------------------------------------------------------------------------
// Envelope fitting: lhs_i <= C1 exp(C2 t_i |b|^2) base_i.

struct EnvelopeProbe {
    double t = 0.0;     // elapsed time used in the exponent
    double lhs = 0.0;
    double base = 0.0;  // envelope shape without C1 and the exponential
};

struct EnvelopeFit {
    double C1 = 0.0;
    double C2 = 0.0;
    double max_ratio = 0.0;  // at the fitted constants
    bool finite = false;
};

// Grid search over C2 in [0, c2_max]; C1(C2) = max_i ratio_i exp(-C2 t_i |b|^2).
// Picks the C2 minimizing log C1 + C2 |b|^2 mean(t); ties go to the smaller C2.
inline EnvelopeFit fit_envelope(const std::vector<EnvelopeProbe>& probes, double b_sup, double c2_max = 10.0,
                                double c2_step = 0.01) {
    EnvelopeFit fit;
    if (probes.empty()) return fit;
    double tbar = 0.0;
    for (const auto& p : probes) tbar += p.t;
    tbar /= double(probes.size());
    const double b2 = b_sup * b_sup;
    const int steps = int(std::lround(c2_max / c2_step));
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= (b2 > 0.0 ? steps : 0); ++k) {
        const double C2 = k * c2_step;
        double C1 = 0.0;
        for (const auto& p : probes) C1 = std::max(C1, p.lhs / p.base * std::exp(-C2 * p.t * b2));
        const double obj = std::log(C1) + C2 * b2 * tbar;
        if (obj < best - 1e-12) {
            best = obj;
            fit.C1 = C1;
            fit.C2 = C2;
        }
    }
    double mr = 0.0;
    for (const auto& p : probes) mr = std::max(mr, p.lhs / (fit.C1 * std::exp(fit.C2 * p.t * b2) * p.base));
    fit.max_ratio = mr;
    fit.finite = std::isfinite(fit.C1) && std::isfinite(fit.C2) && fit.C1 > 0.0;
    return fit;
}

struct KernelProbe {
    double t = 0.0;  // elapsed time since tau
    Vec3 y{};
    double value = 0.0;  // kernel value, or |grad kernel| for gradient envelopes
};

struct EnvelopeOptions {
    bool periodic = true;
    double t_offset = 0.0;   // added to t inside G_{beta t} (mollified start of kernel_pde)
    double c2_max = 10.0;
    double c2_step = 0.01;
};

struct EnvelopeReport {
    BoundCheckReport report;
    EnvelopeFit fit;
    double normalized_C1 = 0.0;  // C1 / beta^{d/2}
};

namespace detail {

inline double envelope_gauss(double t, const Vec3& r, bool periodic) {
    return periodic ? periodized_gaussian3(t, r) : gaussian3(t, r);
}

inline EnvelopeReport finish_envelope(const std::string& id, const std::vector<EnvelopeProbe>& pr, double beta,
                                      double b_sup, const EnvelopeOptions& opt, nlohmann::json pj) {
    EnvelopeReport er;
    er.fit = fit_envelope(pr, b_sup, opt.c2_max, opt.c2_step);
    er.normalized_C1 = er.fit.C1 / std::pow(beta, 1.5);
    pj["beta"] = beta;
    pj["b_sup"] = b_sup;
    pj["n_probes"] = pr.size();
    pj["periodic"] = opt.periodic;
    pj["t_offset"] = opt.t_offset;
    pj["normalized_C1"] = er.normalized_C1;
    er.report = {id, pj.dump(), er.fit.max_ratio, er.fit.C1, er.fit.C2, er.fit.finite && er.fit.max_ratio <= 1.0 + 1e-12, ""};
    return er;
}

}  // namespace detail

// p_b(tau, xi, tau + t, y) <= C1 exp(C2 t |b|^2) G_{beta t}(y - xi).
inline EnvelopeReport verify_kernel_envelope(const std::vector<KernelProbe>& probes, const Vec3& xi, double beta,
                                             double b_sup, const EnvelopeOptions& opt = {}) {
    if (!(beta > 1.0)) throw InvalidArgument("verify_kernel_envelope: beta must be > 1");
    std::vector<EnvelopeProbe> pr;
    for (const auto& k : probes) {
        const Vec3 r{k.y[0] - xi[0], k.y[1] - xi[1], k.y[2] - xi[2]};
        pr.push_back({k.t, k.value, detail::envelope_gauss(beta * (k.t + opt.t_offset), r, opt.periodic)});
    }
    return detail::finish_envelope("kernel_envelope", pr, beta, b_sup, opt, {{"xi", xi}});
}

// |grad p_b| <= C1 / sqrt(t) exp(C2 t |b|^2 + sqrt(t) |grad b|_{tau->tau+t} / 2) G_{beta t}(y - xi).
// grad_b_norm(t) returns |grad b|_{tau -> tau + t}.
inline EnvelopeReport verify_gradient_envelope(const std::vector<KernelProbe>& probes, const Vec3& xi, double beta,
                                               double b_sup, const std::function<double(double)>& grad_b_norm,
                                               const EnvelopeOptions& opt = {}) {
    if (!(beta > 1.0)) throw InvalidArgument("verify_gradient_envelope: beta must be > 1");
    std::vector<EnvelopeProbe> pr;
    for (const auto& k : probes) {
        const Vec3 r{k.y[0] - xi[0], k.y[1] - xi[1], k.y[2] - xi[2]};
        const double te = k.t + opt.t_offset;
        const double base = std::exp(0.5 * std::sqrt(k.t) * grad_b_norm(k.t)) / std::sqrt(te) *
                            detail::envelope_gauss(beta * te, r, opt.periodic);
        pr.push_back({k.t, k.value, base});
    }
    return detail::finish_envelope("gradient_envelope", pr, beta, b_sup, opt, {{"xi", xi}});
}

// Probes from a kernel_pde trajectory: every `stride`-th grid node at the stored times listed,
// keeping nodes where G_{beta t_eff}(y - xi) is at least `floor` times its peak.
inline std::vector<KernelProbe> kernel_probes(const KernelTrajectory& tr, const std::vector<double>& times, double beta,
                                              int stride = 2, double floor = 1e-6, bool use_gradient = false) {
    std::vector<KernelProbe> out;
    for (double t : times) {
        std::size_t idx = tr.times.size();
        for (std::size_t i = 0; i < tr.times.size(); ++i)
            if (std::abs(tr.times[i] - t) < 1e-12) idx = i;
        if (idx == tr.times.size()) throw InvalidArgument("kernel_probes: time not stored in trajectory");
        const PeriodicVectorField& p = tr.p[idx];
        const GridSpec g = p.grid();
        PeriodicVectorField gp;
        if (use_gradient) gp = gradient(p);
        const double te = beta * (t + tr.t_mollify);
        const double peak = periodized_gaussian3(te, Vec3{0, 0, 0});
        for (int i = 0; i < g.n; i += stride)
            for (int j = 0; j < g.n; j += stride)
                for (int k = 0; k < g.n; k += stride) {
                    const Vec3 y{g.coord(i), g.coord(j), g.coord(k)};
                    const Vec3 r{y[0] - tr.xi[0], y[1] - tr.xi[1], y[2] - tr.xi[2]};
                    if (periodized_gaussian3(te, r) < floor * peak) continue;
                    const std::size_t q = g.index(i, j, k);
                    const double v = use_gradient ? norm(gp.vec(q)) : p.at(0, q);
                    out.push_back({t, y, v});
                }
    }
    return out;
}

// G_{s}(|f|) on the grid: circular convolution with the periodized Gaussian sampled on the
// grid and normalized to unit sum (positive, and the identity when s is far below the spacing).
inline PeriodicVectorField heat_convolve_abs(const PeriodicVectorField& f, double s) {
    const PeriodicVectorField a = f.pointwise_norm();
    const GridSpec g = f.grid();
    if (s <= 0.0) return a;
    PeriodicVectorField k = sample_periodized_gaussian(g, s, Vec3{0, 0, 0});
    double sum = 0.0;
    for (double v : k.data()) sum += v;
    if (!(sum > 0.0)) return a;  // kernel below resolution: identity
    k *= 1.0 / sum;
    SpectralField A = to_spectral(a), K = to_spectral(k);
    const double np = double(g.points());
    for (std::size_t i = 0; i < A.data().size(); ++i) A.data()[i] *= np * K.data()[i];
    return from_spectral(A);
}

struct VorticityBoundInputs {
    double beta = 2.0;
    double b_sup = 0.0;
    std::function<double(double)> grad_b_norm;  // t -> |grad b|_{0 -> t}
    double closure_threshold = 2.0;
};

// Pointwise envelope fits for w and grad w against G_{beta t}(|omega0|), the v and grad v bounds
// against |omega0|_inf, and the sup-norm closure check at the trajectory's horizon.
inline std::vector<BoundCheckReport> verify_vorticity_bounds(const VorticityTrajectory& tr,
                                                             const PeriodicVectorField& omega0,
                                                             const VorticityBoundInputs& in) {
    if (!(in.beta >= 1.0)) throw InvalidArgument("verify_vorticity_bounds: beta must be >= 1");
    const double w0 = omega0.sup_norm();
    std::vector<EnvelopeProbe> pw, pgw, pv, pgv;
    double closure = 0.0;
    const double T = tr.times.back();
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const double t = tr.times[i];
        const double gb = in.grad_b_norm ? in.grad_b_norm(t) : 0.0;
        const double e2 = std::exp(2.0 * std::sqrt(t) * gb), e3 = std::exp(3.0 * std::sqrt(t) * gb);
        const PeriodicVectorField& v = tr.v[i];
        const double vs = v.sup_norm();
        const double gv = gradient(v).sup_norm();
        closure = std::max({closure, vs, std::sqrt(t) * gv});
        if (w0 == 0.0) continue;
        pv.push_back({t, vs, e2 * w0});
        if (t > 0.0) pgv.push_back({t, std::sqrt(t) * gv, e3 * w0});
        if (t == 0.0) continue;
        const PeriodicVectorField conv = heat_convolve_abs(omega0, in.beta * t);
        const PeriodicVectorField wn = tr.w[i].pointwise_norm();
        const PeriodicVectorField gwn = gradient(tr.w[i]).pointwise_norm();
        double cmax = 0.0;
        for (double c : conv.data()) cmax = std::max(cmax, c);
        double rw = 0.0, rgw = 0.0;
        for (std::size_t q = 0; q < conv.data().size(); ++q) {
            const double c = conv.data()[q];
            if (c < 1e-12 * cmax) continue;
            rw = std::max(rw, wn.data()[q] / (e2 * c));
            rgw = std::max(rgw, std::sqrt(t) * gwn.data()[q] / (e3 * c));
        }
        // One probe per time carrying the pointwise max ratio (base normalized to 1).
        pw.push_back({t, rw, 1.0});
        pgw.push_back({t, rgw, 1.0});
    }
    nlohmann::json pj{{"beta", in.beta}, {"b_sup", in.b_sup}, {"T", T}, {"omega0_sup", w0}};
    std::vector<BoundCheckReport> out;
    auto add = [&](const std::string& id, const std::vector<EnvelopeProbe>& pr) {
        if (pr.empty()) {
            out.push_back({id, pj.dump(), 0.0, 0.0, 0.0, true, "no probes (omega0 = 0)"});
            return;
        }
        const EnvelopeFit f = fit_envelope(pr, in.b_sup);
        out.push_back({id, pj.dump(), f.max_ratio, f.C1, f.C2, f.finite && f.max_ratio <= 1.0 + 1e-12, ""});
    };
    add("vorticity_envelope", pw);
    add("vorticity_gradient_envelope", pgw);
    add("velocity_bound", pv);
    add("velocity_gradient_bound", pgv);
    const double cl = w0 > 0.0 ? closure / w0 : 0.0;
    nlohmann::json pc = pj;
    pc["threshold"] = in.closure_threshold;
    pc["closure_ratio"] = cl;
    out.push_back({"norm_closure", pc.dump(), cl / in.closure_threshold, cl, std::nan(""), cl <= in.closure_threshold,
                   "max(sup_t |v|, |grad v|_{0->T}) / |omega0|"});
    return out;
}

}  // namespace vortexiter
