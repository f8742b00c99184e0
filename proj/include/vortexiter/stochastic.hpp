#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "drift.hpp"
#include "gaussian.hpp"
#include "parallel.hpp"

namespace vortexiter {

struct SdeConfig {
    double dt = 1e-3;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 1;
    int threads = 0;

    void validate() const {
        if (!(dt > 0.0)) throw InvalidArgument("SdeConfig: dt must be positive");
        if (n_paths < 1) throw InvalidArgument("SdeConfig: n_paths must be >= 1");
    }
    int steps_for(double span) const {
        const double r = span / dt;
        const long m = std::lround(r);
        if (m < 1 || std::abs(r - double(m)) > 1e-9 * std::max(1.0, r))
            throw InvalidArgument("SdeConfig: dt must divide the time span (span/dt = " + std::to_string(r) + ")");
        return int(m);
    }
};

// Per-path stream: the generator is seeded with seed XOR path_index.
inline std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path_index) {
    return std::mt19937_64(seed ^ path_index);
}

struct BrownianSource {
    std::mt19937_64 rng;
    std::normal_distribution<double> normal{0.0, 1.0};
    double sqrt_dt;
    BrownianSource(std::uint64_t seed, std::uint64_t index, double dt) : rng(path_rng(seed, index)), sqrt_dt(std::sqrt(dt)) {}
    Vec3 increment() {
        const double a = normal(rng), b = normal(rng), c = normal(rng);
        return {sqrt_dt * a, sqrt_dt * b, sqrt_dt * c};
    }
};

struct PathBundle {
    std::vector<double> times;  // n_steps + 1 entries
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::uint64_t seed = 0;
    bool backward = false;  // Y paths: times are r in [0, T], drift -b(., T + tau - r)
    double tau = 0.0;
    double T = 0.0;
    std::vector<double> positions;   // wrapped into [0,1)^3, [path][step][3]
    std::vector<double> unwrapped;   // same layout, covering-space positions
    std::vector<double> increments;  // [path][step][3], n_steps per path
    std::vector<std::uint8_t> flags; // nonzero: path flagged (non-finite drift, overflow, ...)

    std::size_t pos_index(std::size_t path, std::size_t step) const { return (path * (n_steps + 1) + step) * 3; }
    Vec3 position(std::size_t path, std::size_t step) const {
        const double* p = &positions[pos_index(path, step)];
        return {p[0], p[1], p[2]};
    }
    Vec3 unwrapped_position(std::size_t path, std::size_t step) const {
        const double* p = &unwrapped[pos_index(path, step)];
        return {p[0], p[1], p[2]};
    }
    Vec3 increment(std::size_t path, std::size_t step) const {
        const double* p = &increments[(path * n_steps + step) * 3];
        return {p[0], p[1], p[2]};
    }
    double dt() const { return n_steps ? (times.back() - times.front()) / double(n_steps) : 0.0; }
    // Absolute time at which the drift is evaluated for step k.
    double drift_time(std::size_t step) const { return backward ? T + tau - times[step] : times[step]; }
};

namespace detail {

template <Drift D>
PathBundle simulate(const Vec3& start, double t0, int steps, const D& drift, const SdeConfig& cfg, bool backward,
                    double tau, double T) {
    PathBundle pb;
    pb.n_paths = cfg.n_paths;
    pb.n_steps = std::size_t(steps);
    pb.seed = cfg.seed;
    pb.backward = backward;
    pb.tau = tau;
    pb.T = T;
    pb.times.resize(pb.n_steps + 1);
    for (std::size_t k = 0; k <= pb.n_steps; ++k) pb.times[k] = t0 + double(k) * cfg.dt;
    pb.positions.resize(pb.n_paths * (pb.n_steps + 1) * 3);
    pb.unwrapped.resize(pb.positions.size());
    pb.increments.resize(pb.n_paths * pb.n_steps * 3);
    pb.flags.assign(pb.n_paths, 0);
    const double sign = backward ? -1.0 : 1.0;
    parallel_for(pb.n_paths, resolve_threads(cfg.threads), [&](std::size_t i) {
        BrownianSource src(cfg.seed, i, cfg.dt);
        Vec3 x = start;
        for (std::size_t k = 0;; ++k) {
            double* u = &pb.unwrapped[pb.pos_index(i, k)];
            double* w = &pb.positions[pb.pos_index(i, k)];
            for (int a = 0; a < 3; ++a) {
                u[a] = x[a];
                w[a] = wrap01(x[a]);
            }
            if (k == pb.n_steps) break;
            const Vec3 b = drift.value(x, pb.drift_time(k));
            if (!std::isfinite(b[0]) || !std::isfinite(b[1]) || !std::isfinite(b[2]))
                throw NumericalFailure("sample_paths: non-finite drift on path " + std::to_string(i));
            const Vec3 dB = src.increment();
            double* inc = &pb.increments[(i * pb.n_steps + k) * 3];
            for (int a = 0; a < 3; ++a) {
                inc[a] = dB[a];
                x[a] += sign * b[a] * cfg.dt + dB[a];
            }
        }
    });
    return pb;
}

}  // namespace detail

// Euler-Maruyama for dX = b(X,t) dt + dB on [tau, t_end], X_tau = xi.
template <Drift D>
PathBundle sample_paths(const Vec3& xi, double tau, double t_end, const D& drift, const SdeConfig& cfg) {
    cfg.validate();
    if (!(t_end > tau)) throw InvalidArgument("sample_paths: need t_end > tau");
    return detail::simulate(xi, tau, cfg.steps_for(t_end - tau), drift, cfg, false, tau, t_end);
}

// dY = dB - b(Y, T + tau - r) dr on r in [0, T], Y_0 = x.
template <Drift D>
PathBundle sample_backward_paths(const Vec3& x, double tau, double T, const D& drift, const SdeConfig& cfg) {
    cfg.validate();
    if (!(T > 0.0)) throw InvalidArgument("sample_backward_paths: need T > 0");
    return detail::simulate(x, 0.0, cfg.steps_for(T), drift, cfg, true, tau, T);
}

struct WeightResult {
    std::vector<double> log_weight;
    std::vector<double> weight;
    std::vector<std::uint8_t> overflow;  // log-weight above 700
};

// U = exp(sum_k b(X_k, t_k).dB_k - 1/2 |b(X_k,t_k)|^2 dt), left-point sums.
template <Drift D>
WeightResult cameron_martin_weight(const PathBundle& pb, const D& drift) {
    if (pb.increments.empty() && pb.n_steps > 0) throw InvalidArgument("cameron_martin_weight: bundle has no increments");
    WeightResult r;
    r.log_weight.assign(pb.n_paths, 0.0);
    r.weight.assign(pb.n_paths, 1.0);
    r.overflow.assign(pb.n_paths, 0);
    const double dt = pb.dt();
    for (std::size_t i = 0; i < pb.n_paths; ++i) {
        double lw = 0.0;
        for (std::size_t k = 0; k < pb.n_steps; ++k) {
            const Vec3 b = drift.value(pb.unwrapped_position(i, k), pb.drift_time(k));
            lw += dot(b, pb.increment(i, k)) - 0.5 * dot(b, b) * dt;
        }
        r.log_weight[i] = lw;
        if (lw > 700.0) {
            r.overflow[i] = 1;
            r.weight[i] = std::exp(700.0);
        } else {
            r.weight[i] = std::exp(lw);
        }
    }
    return r;
}

struct KernelEstimate {
    Vec3 target{};
    double t = 0.0;
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::size_t flagged = 0;
    bool precision_met = true;  // false when std_error > target_rel_error * |value|
};

struct KernelMcOptions {
    bool periodic = false;          // torus kernel: periodized G and its image-summed gradient
    double initial_variance = 0.0;  // start from N(xi, v I); leading term becomes G_{t - tau + v}
    double target_rel_error = 0.0;  // 0: no requirement
};

struct MeanAccumulator {
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    void add(double x) {
        sum += x;
        sum2 += x * x;
        ++n;
    }
    double mean() const { return n ? sum / double(n) : 0.0; }
    double std_error() const {
        if (n < 2) return 0.0;
        const double m = mean();
        const double var = std::max(0.0, (sum2 - double(n) * m * m) / double(n - 1));
        return std::sqrt(var / double(n));
    }
};

// p_b(tau,xi,t,y) = G_{t-tau}(y-xi) + int_tau^t E[U_s G_{t-s}(y-X_s) b(X_s,s).(y-X_s)/(t-s)] ds,
// X a Brownian motion from xi, left Riemann sum over s_k = tau + k dt, k = 0..M-1 (last s = t - dt).
template <Drift D>
std::vector<KernelEstimate> kernel_mc(double tau, const Vec3& xi, double t, const std::vector<Vec3>& targets,
                                      const D& drift, const SdeConfig& cfg, const KernelMcOptions& opt = {}) {
    cfg.validate();
    if (!(t > tau)) throw InvalidArgument("kernel_mc: need t > tau");
    if (opt.initial_variance < 0.0) throw InvalidArgument("kernel_mc: initial_variance must be >= 0");
    const int M = cfg.steps_for(t - tau);
    const std::size_t nt = targets.size();
    std::vector<double> per_path(cfg.n_paths * nt, 0.0);
    std::vector<std::uint8_t> flags(cfg.n_paths, 0);
    const double dt = cfg.dt;
    const double sqv = std::sqrt(opt.initial_variance);
    parallel_for(cfg.n_paths, resolve_threads(cfg.threads), [&](std::size_t i) {
        BrownianSource src(cfg.seed, i, dt);
        Vec3 x = xi;
        if (opt.initial_variance > 0.0)
            for (int a = 0; a < 3; ++a) x[a] += sqv * src.normal(src.rng);
        double lw = 0.0;
        double* acc = &per_path[i * nt];
        for (int k = 0; k < M; ++k) {
            const double s = tau + k * dt;
            const Vec3 b = drift.value(x, s);
            const double U = std::exp(lw);
            const double h = t - s;
            for (std::size_t j = 0; j < nt; ++j) {
                const Vec3 r{targets[j][0] - x[0], targets[j][1] - x[1], targets[j][2] - x[2]};
                Vec3 m;
                if (opt.periodic) {
                    m = periodized_gaussian3_moment(h, r);
                } else {
                    const double g = gaussian3(h, r);
                    m = {g * r[0], g * r[1], g * r[2]};
                }
                acc[j] += dt * U * dot(b, m) / h;
            }
            const Vec3 dB = src.increment();
            lw += dot(b, dB) - 0.5 * dot(b, b) * dt;
            if (lw > 700.0) {
                flags[i] = 1;
                lw = 700.0;
            }
            for (int a = 0; a < 3; ++a) x[a] += dB[a];
        }
        for (std::size_t j = 0; j < nt; ++j)
            if (!std::isfinite(acc[j])) {
                flags[i] = 1;
                acc[j] = 0.0;
            }
    });
    std::size_t flagged = 0;
    for (auto f : flags) flagged += f;
    std::vector<KernelEstimate> out(nt);
    for (std::size_t j = 0; j < nt; ++j) {
        MeanAccumulator m;
        for (std::size_t i = 0; i < cfg.n_paths; ++i) m.add(per_path[i * nt + j]);
        const Vec3 r{targets[j][0] - xi[0], targets[j][1] - xi[1], targets[j][2] - xi[2]};
        const double lead_t = t - tau + opt.initial_variance;
        const double lead = opt.periodic ? periodized_gaussian3(lead_t, r) : gaussian3(lead_t, r);
        auto& e = out[j];
        e.target = targets[j];
        e.t = t;
        e.value = lead + m.mean();
        e.std_error = m.std_error();
        e.n_paths = cfg.n_paths;
        e.seed = cfg.seed;
        e.flagged = flagged;
        e.precision_met = opt.target_rel_error <= 0.0 || e.std_error <= opt.target_rel_error * std::abs(e.value);
    }
    return out;
}

template <Drift D>
KernelEstimate kernel_mc(double tau, const Vec3& xi, double t, const Vec3& y, const D& drift, const SdeConfig& cfg,
                         const KernelMcOptions& opt = {}) {
    return kernel_mc(tau, xi, t, std::vector<Vec3>{y}, drift, cfg, opt).front();
}

struct QResult {
    std::vector<Mat3> Q;
    std::vector<std::uint8_t> flags;
};

// dQ/ds = -Q A(X_s, s), Q(t,t) = I, integrated backward along each stored path with Heun.
// Returns Q(times.front(), times.back()).
template <Drift D>
QResult integrate_Q(const PathBundle& pb, const D& drift) {
    QResult r;
    r.Q.assign(pb.n_paths, identity3());
    r.flags.assign(pb.n_paths, 0);
    const double dt = pb.dt();
    for (std::size_t i = 0; i < pb.n_paths; ++i) {
        Mat3 Q = identity3();
        Mat3 Ahi = drift.jacobian(pb.unwrapped_position(i, pb.n_steps), pb.drift_time(pb.n_steps));
        for (std::size_t k = pb.n_steps; k-- > 0;) {
            const Mat3 Alo = drift.jacobian(pb.unwrapped_position(i, k), pb.drift_time(k));
            // going backward: Q(s - dt) = Q(s) + dt Q A.
            const Mat3 K1 = matmul(Q, Ahi);
            Mat3 Qs;
            for (int a = 0; a < 9; ++a) Qs[a] = Q[a] + dt * K1[a];
            const Mat3 K2 = matmul(Qs, Alo);
            for (int a = 0; a < 9; ++a) Q[a] += 0.5 * dt * (K1[a] + K2[a]);
            Ahi = Alo;
        }
        for (double v : Q)
            if (!std::isfinite(v)) r.flags[i] = 1;
        r.Q[i] = Q;
    }
    return r;
}

struct ZResult {
    std::vector<Mat3> Z;               // at the final time
    std::vector<double> max_ratio_d;   // max_r |Z(r)|_HS / (d e^{2(sqrt T - sqrt(T-r)) |grad b|})
    std::vector<double> max_ratio_hs;  // same with |Z(0)| = |I|_HS = sqrt(d)
    std::vector<std::uint8_t> flags;
    double grad_norm = 0.0;            // |grad b|_{tau -> tau+T}
};

// dZ/dr = -A(Y_r, T + tau - r) Z, Z(0) = I, forward Heun along backward paths.
template <Drift D>
ZResult integrate_Z(const PathBundle& pb, const D& drift) {
    if (!pb.backward) throw InvalidArgument("integrate_Z: bundle must hold backward (Y) paths");
    ZResult r;
    r.Z.assign(pb.n_paths, identity3());
    r.max_ratio_d.assign(pb.n_paths, 0.0);
    r.max_ratio_hs.assign(pb.n_paths, 0.0);
    r.flags.assign(pb.n_paths, 0);
    r.grad_norm = drift.grad_parabolic_norm(pb.tau, pb.tau + pb.T);
    const double dt = pb.dt(), T = pb.T;
    auto bound = [&](double rr) { return std::exp(2.0 * (std::sqrt(T) - std::sqrt(std::max(0.0, T - rr))) * r.grad_norm); };
    for (std::size_t i = 0; i < pb.n_paths; ++i) {
        Mat3 Z = identity3();
        double mrd = frobenius(Z) / (3.0 * bound(0.0)), mrh = frobenius(Z) / (std::sqrt(3.0) * bound(0.0));
        Mat3 Alo = drift.jacobian(pb.unwrapped_position(i, 0), pb.drift_time(0));
        for (std::size_t k = 0; k < pb.n_steps; ++k) {
            const Mat3 Ahi = drift.jacobian(pb.unwrapped_position(i, k + 1), pb.drift_time(k + 1));
            const Mat3 K1 = matmul(Alo, Z);
            Mat3 Zs;
            for (int a = 0; a < 9; ++a) Zs[a] = Z[a] - dt * K1[a];
            const Mat3 K2 = matmul(Ahi, Zs);
            for (int a = 0; a < 9; ++a) Z[a] -= 0.5 * dt * (K1[a] + K2[a]);
            const double nz = frobenius(Z), bd = bound(pb.times[k + 1]);
            mrd = std::max(mrd, nz / (3.0 * bd));
            mrh = std::max(mrh, nz / (std::sqrt(3.0) * bd));
            Alo = Ahi;
        }
        for (double v : Z)
            if (!std::isfinite(v)) r.flags[i] = 1;
        r.Z[i] = Z;
        r.max_ratio_d[i] = mrd;
        r.max_ratio_hs[i] = mrh;
    }
    return r;
}

struct VectorEstimate {
    Vec3 target{};
    double t = 0.0;
    Vec3 value{};
    Vec3 std_error{};
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::size_t flagged = 0;
};

// w(x,t) = E[Q(0,t) omega0(Y_t)] with dY = dB - b(Y, t - r) dr from Y_0 = x and
// dQ~/dr = Q~ A(Y_r, t - r), Q~(0) = I, so that Q~(t) = Q(0,t) along the reversed path.
// Paths for probe p use global indices p * n_paths + i.
template <Drift D, class Omega0>
std::vector<VectorEstimate> feynman_kac_vorticity(const std::vector<Vec3>& probes, double t, const D& drift,
                                                  Omega0&& omega0, const SdeConfig& cfg) {
    cfg.validate();
    const int M = cfg.steps_for(t);
    const double dt = cfg.dt;
    const std::size_t np = probes.size(), n = cfg.n_paths;
    std::vector<Vec3> samples(np * n);
    std::vector<std::uint8_t> flags(np * n, 0);
    parallel_for(np * n, resolve_threads(cfg.threads), [&](std::size_t gi) {
        const std::size_t p = gi / n;
        BrownianSource src(cfg.seed, gi, dt);
        Vec3 y = probes[p];
        Mat3 Q = identity3();
        Mat3 Alo = drift.jacobian(y, t);
        for (int k = 0; k < M; ++k) {
            const double r0 = k * dt;
            const Vec3 b = drift.value(y, t - r0);
            const Vec3 dB = src.increment();
            for (int a = 0; a < 3; ++a) y[a] += -b[a] * dt + dB[a];
            const Mat3 Ahi = drift.jacobian(y, t - r0 - dt);
            const Mat3 K1 = matmul(Q, Alo);
            Mat3 Qs;
            for (int a = 0; a < 9; ++a) Qs[a] = Q[a] + dt * K1[a];
            const Mat3 K2 = matmul(Qs, Ahi);
            for (int a = 0; a < 9; ++a) Q[a] += 0.5 * dt * (K1[a] + K2[a]);
            Alo = Ahi;
        }
        const Vec3 w0 = omega0(y);
        Vec3 v = matvec(Q, w0);
        if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2])) {
            flags[gi] = 1;
            v = {0, 0, 0};
        }
        samples[gi] = v;
    });
    std::vector<VectorEstimate> out(np);
    for (std::size_t p = 0; p < np; ++p) {
        MeanAccumulator m[3];
        std::size_t fl = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (int a = 0; a < 3; ++a) m[a].add(samples[p * n + i][a]);
            fl += flags[p * n + i];
        }
        auto& e = out[p];
        e.target = probes[p];
        e.t = t;
        for (int a = 0; a < 3; ++a) {
            e.value[a] = m[a].mean();
            e.std_error[a] = m[a].std_error();
        }
        e.n_paths = n;
        e.seed = cfg.seed;
        e.flagged = fl;
    }
    return out;
}

// grad_x ln p_b(tau, xi, T + tau, x) = E[R_{T-eps} int_0^{T-eps} Z^T dB] / (T - eps), eps = T/2,
// R_{T-eps} = p(tau + eps, Y_{T-eps}) / p(tau + T, x). kernel(time, point) evaluates p_b(tau, xi, time, point).
template <Drift D, class Kernel>
VectorEstimate bismut_gradient(double tau, const Vec3& xi, double T, const Vec3& x, const D& drift, Kernel&& kernel,
                               const SdeConfig& cfg) {
    cfg.validate();
    (void)xi;  // enters only through the kernel evaluator
    const double eps = 0.5 * T;
    const int K = cfg.steps_for(T - eps);
    const double dt = cfg.dt;
    const double p_end = kernel(tau + T, x);
    if (!(p_end > 1e-300)) throw NumericalFailure("bismut_gradient: kernel is not positive at the target point");
    std::vector<Vec3> samples(cfg.n_paths);
    std::vector<std::uint8_t> flags(cfg.n_paths, 0);
    parallel_for(cfg.n_paths, resolve_threads(cfg.threads), [&](std::size_t i) {
        BrownianSource src(cfg.seed, i, dt);
        Vec3 y = x;
        Mat3 Z = identity3();
        Vec3 M{0, 0, 0};
        Mat3 Alo = drift.jacobian(y, T + tau);
        for (int k = 0; k < K; ++k) {
            const double r0 = k * dt;
            const Vec3 b = drift.value(y, T + tau - r0);
            const Vec3 dB = src.increment();
            const Vec3 zb = matTvec(Z, dB);  // left-point Ito sum of Z^k_j dB^k
            for (int a = 0; a < 3; ++a) M[a] += zb[a];
            for (int a = 0; a < 3; ++a) y[a] += -b[a] * dt + dB[a];
            const Mat3 Ahi = drift.jacobian(y, T + tau - r0 - dt);
            const Mat3 K1 = matmul(Alo, Z);
            Mat3 Zs;
            for (int a = 0; a < 9; ++a) Zs[a] = Z[a] - dt * K1[a];
            const Mat3 K2 = matmul(Ahi, Zs);
            for (int a = 0; a < 9; ++a) Z[a] -= 0.5 * dt * (K1[a] + K2[a]);
            Alo = Ahi;
        }
        double pk = kernel(tau + eps, y);
        if (!(pk > 1e-300) || !std::isfinite(pk)) {
            flags[i] = 1;
            pk = 1e-300;
        }
        const double R = pk / p_end;
        samples[i] = {R * M[0] / (T - eps), R * M[1] / (T - eps), R * M[2] / (T - eps)};
    });
    VectorEstimate e;
    MeanAccumulator m[3];
    for (std::size_t i = 0; i < cfg.n_paths; ++i) {
        for (int a = 0; a < 3; ++a) m[a].add(samples[i][a]);
        e.flagged += flags[i];
    }
    e.target = x;
    e.t = tau + T;
    for (int a = 0; a < 3; ++a) {
        e.value[a] = m[a].mean();
        e.std_error[a] = m[a].std_error();
    }
    e.n_paths = cfg.n_paths;
    e.seed = cfg.seed;
    return e;
}

// PB3D debug dump: "PB3D", u32 version=1, u32 n_paths, u32 n_steps, then wrapped positions
// (n_paths * (n_steps+1) * 3 f64, little-endian host assumed).
inline void write_paths(const PathBundle& pb, const std::string& path) {
    static_assert(std::endian::native == std::endian::little, "PB3D writer assumes a little-endian host");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    os.write("PB3D", 4);
    const std::uint32_t hdr[3] = {1u, std::uint32_t(pb.n_paths), std::uint32_t(pb.n_steps)};
    os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
    os.write(reinterpret_cast<const char*>(pb.positions.data()), std::streamsize(pb.positions.size() * sizeof(double)));
    if (!os) throw FormatError("write to '" + path + "' failed");
}

}  // namespace vortexiter
