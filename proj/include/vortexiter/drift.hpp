#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "ops.hpp"

namespace vortexiter {

// A drift b(x,t) on the unit torus with its Jacobian A[i*3+j] = d_j b^i.
// sup_norm() bounds |b| over space-time; grad_parabolic_norm(tau,T) is
// sup_{tau<=s<=T} sqrt(s-tau) sup_x |grad b(x,s)| (Frobenius), or an upper bound of it.
template <class D>
concept Drift = requires(const D& d, const Vec3& x, double t) {
    { d.value(x, t) } -> std::convertible_to<Vec3>;
    { d.jacobian(x, t) } -> std::convertible_to<Mat3>;
    { d.sup_norm() } -> std::convertible_to<double>;
    { d.grad_parabolic_norm(t, t) } -> std::convertible_to<double>;
};

struct ZeroDrift {
    Vec3 value(const Vec3&, double) const { return {0, 0, 0}; }
    Mat3 jacobian(const Vec3&, double) const { return {}; }
    double sup_norm() const { return 0.0; }
    double grad_parabolic_norm(double, double) const { return 0.0; }
};

struct ConstantDrift {
    Vec3 c{0, 0, 0};
    Vec3 value(const Vec3&, double) const { return c; }
    Mat3 jacobian(const Vec3&, double) const { return {}; }
    double sup_norm() const { return norm(c); }
    double grad_parabolic_norm(double, double) const { return 0.0; }
};

// b = a * (sin 2 pi x2, 0, 0).
struct ShearDrift {
    double amplitude = 1.0;
    Vec3 value(const Vec3& x, double) const {
        return {amplitude * std::sin(2.0 * std::numbers::pi * x[1]), 0.0, 0.0};
    }
    Mat3 jacobian(const Vec3& x, double) const {
        Mat3 m{};
        m[1] = amplitude * 2.0 * std::numbers::pi * std::cos(2.0 * std::numbers::pi * x[1]);
        return m;
    }
    double sup_norm() const { return std::abs(amplitude); }
    double grad_parabolic_norm(double tau, double T) const {
        return std::sqrt(std::max(0.0, T - tau)) * 2.0 * std::numbers::pi * std::abs(amplitude);
    }
};

// u = a (sin k x1 cos k x2 cos k x3, -cos k x1 sin k x2 cos k x3, 0), k = 2 pi.
struct TaylorGreenDrift {
    double amplitude = 1.0;

    Vec3 value(const Vec3& x, double) const {
        const double k = 2.0 * std::numbers::pi;
        const double s1 = std::sin(k * x[0]), c1 = std::cos(k * x[0]);
        const double s2 = std::sin(k * x[1]), c2 = std::cos(k * x[1]);
        const double c3 = std::cos(k * x[2]);
        return {amplitude * s1 * c2 * c3, -amplitude * c1 * s2 * c3, 0.0};
    }
    Mat3 jacobian(const Vec3& x, double) const {
        const double k = 2.0 * std::numbers::pi, a = amplitude * k;
        const double s1 = std::sin(k * x[0]), c1 = std::cos(k * x[0]);
        const double s2 = std::sin(k * x[1]), c2 = std::cos(k * x[1]);
        const double s3 = std::sin(k * x[2]), c3 = std::cos(k * x[2]);
        return {a * c1 * c2 * c3, -a * s1 * s2 * c3, -a * s1 * c2 * s3,
                a * s1 * s2 * c3, -a * c1 * c2 * c3, a * c1 * s2 * s3,
                0.0,              0.0,               0.0};
    }
    // curl of the velocity.
    Vec3 vorticity(const Vec3& x) const {
        const double k = 2.0 * std::numbers::pi, a = amplitude * k;
        const double s1 = std::sin(k * x[0]), c1 = std::cos(k * x[0]);
        const double s2 = std::sin(k * x[1]), c2 = std::cos(k * x[1]);
        const double s3 = std::sin(k * x[2]), c3 = std::cos(k * x[2]);
        return {-a * c1 * s2 * s3, -a * s1 * c2 * s3, 2.0 * a * s1 * s2 * c3};
    }
    double sup_norm() const { return std::abs(amplitude); }
    // max |grad u|_F = sqrt(2) * 2 pi |a| (multilinear in the squared trig factors, max at a vertex).
    double grad_sup() const { return std::sqrt(2.0) * 2.0 * std::numbers::pi * std::abs(amplitude); }
    double grad_parabolic_norm(double tau, double T) const { return std::sqrt(std::max(0.0, T - tau)) * grad_sup(); }
};

template <Drift D>
PeriodicVectorField sample_drift(const D& drift, GridSpec g, double t) {
    return PeriodicVectorField::sample(g, 3, [&](const Vec3& x) { return drift.value(x, t); });
}

// Time-indexed divergence-free fields, linear in time, clamped outside [t_0, t_last].
class DriftHistory {
public:
    DriftHistory() = default;
    DriftHistory(std::vector<double> times, std::vector<PeriodicVectorField> fields, bool validate = true)
        : times_(std::move(times)), fields_(std::move(fields)) {
        if (times_.empty() || times_.size() != fields_.size())
            throw InvalidArgument("DriftHistory: need matching, non-empty times and fields");
        if (times_.front() != 0.0) throw InvalidArgument("DriftHistory: times must start at 0");
        for (std::size_t i = 1; i < times_.size(); ++i)
            if (!(times_[i] > times_[i - 1])) throw InvalidArgument("DriftHistory: times must be strictly increasing");
        for (const auto& f : fields_) {
            if (f.components() != 3) throw InvalidArgument("DriftHistory: fields must have 3 components");
            if (!(f.grid() == fields_.front().grid())) throw InvalidArgument("DriftHistory: grid mismatch");
            if (!f.all_finite()) throw InvalidArgument("DriftHistory: non-finite drift values");
        }
        if (validate) {
            for (std::size_t i = 0; i < fields_.size(); ++i) {
                const double div = divergence(fields_[i]).sup_norm();
                const double scale = std::max(1.0, fields_[i].sup_norm());
                if (div > 1e-10 * scale)
                    throw InvalidArgument("DriftHistory: field at t=" + std::to_string(times_[i]) +
                                          " is not divergence-free (max |div b| = " + std::to_string(div) + ")");
            }
        }
    }

    static DriftHistory frozen(PeriodicVectorField b, bool validate = true) {
        return DriftHistory({0.0}, {std::move(b)}, validate);
    }

    const std::vector<double>& times() const { return times_; }
    const std::vector<PeriodicVectorField>& fields() const { return fields_; }
    const GridSpec& grid() const { return fields_.front().grid(); }
    std::size_t size() const { return times_.size(); }

    // Locate t: returns index i and weight theta so that b(t) = (1-theta) f[i] + theta f[i+1].
    std::pair<std::size_t, double> locate(double t) const {
        if (times_.size() == 1 || t <= times_.front()) return {0, 0.0};
        if (t >= times_.back()) return {times_.size() - 1, 0.0};
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        const std::size_t i = std::size_t(it - times_.begin()) - 1;
        const double theta = (t - times_[i]) / (times_[i + 1] - times_[i]);
        return {i, theta};
    }

    PeriodicVectorField at(double t) const {
        const auto [i, theta] = locate(t);
        if (theta == 0.0) return fields_[i];
        PeriodicVectorField out = fields_[i];
        auto& d = out.data();
        const auto& b = fields_[i + 1].data();
        for (std::size_t k = 0; k < d.size(); ++k) d[k] = (1.0 - theta) * d[k] + theta * b[k];
        return out;
    }

    double sup_norm() const {
        double s = 0.0;
        for (const auto& f : fields_) s = std::max(s, f.sup_norm());
        return s;
    }

private:
    std::vector<double> times_;
    std::vector<PeriodicVectorField> fields_;
};

namespace detail {

struct TrilinearStencil {
    std::size_t idx[8];
    double w[8];
};

inline TrilinearStencil trilinear_stencil(const GridSpec& g, const Vec3& x) {
    const int n = g.n;
    int i0[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
        const double s = wrap01(x[a]) * n;
        int i = int(std::floor(s));
        f[a] = s - i;
        if (i >= n) i -= n;
        i0[a] = i;
    }
    TrilinearStencil st;
    int m = 0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c, ++m) {
                const int i = (i0[0] + a) % n, j = (i0[1] + b) % n, k = (i0[2] + c) % n;
                st.idx[m] = g.index(i, j, k);
                st.w[m] = (a ? f[0] : 1.0 - f[0]) * (b ? f[1] : 1.0 - f[1]) * (c ? f[2] : 1.0 - f[2]);
            }
    return st;
}

}  // namespace detail

// Periodic trilinear interpolation of one component.
inline double interpolate(const PeriodicVectorField& f, int c, const Vec3& x) {
    const auto st = detail::trilinear_stencil(f.grid(), x);
    double v = 0.0;
    for (int m = 0; m < 8; ++m) v += st.w[m] * f.at(c, st.idx[m]);
    return v;
}

// DriftHistory seen as a pointwise drift: trilinear in space, linear in time.
// Jacobians come from spectral differentiation of each stored snapshot.
class HistoryDrift {
public:
    explicit HistoryDrift(std::shared_ptr<const DriftHistory> h) : hist_(std::move(h)) {
        grads_.reserve(hist_->size());
        grad_sups_.reserve(hist_->size());
        for (const auto& f : hist_->fields()) {
            grads_.push_back(total_derivative(f));
            grad_sups_.push_back(grads_.back().sup_norm());
        }
        sup_ = hist_->sup_norm();
    }

    Vec3 value(const Vec3& x, double t) const {
        const auto [i, theta] = hist_->locate(t);
        const auto st = detail::trilinear_stencil(hist_->grid(), x);
        Vec3 v = eval3(hist_->fields()[i], st);
        if (theta != 0.0) {
            const Vec3 u = eval3(hist_->fields()[i + 1], st);
            for (int a = 0; a < 3; ++a) v[a] = (1.0 - theta) * v[a] + theta * u[a];
        }
        return v;
    }

    Mat3 jacobian(const Vec3& x, double t) const {
        const auto [i, theta] = hist_->locate(t);
        const auto st = detail::trilinear_stencil(hist_->grid(), x);
        Mat3 m = eval9(grads_[i], st);
        if (theta != 0.0) {
            const Mat3 u = eval9(grads_[i + 1], st);
            for (int a = 0; a < 9; ++a) m[a] = (1.0 - theta) * m[a] + theta * u[a];
        }
        return m;
    }

    double sup_norm() const { return sup_; }

    // Upper bound: on each interval the interpolated |grad b| is at most the larger endpoint value.
    double grad_parabolic_norm(double tau, double T) const {
        const auto& ts = hist_->times();
        double best = 0.0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            double g = grad_sups_[i];
            if (i + 1 < ts.size()) g = std::max(g, grad_sups_[i + 1]);
            const double hi = (i + 1 < ts.size()) ? std::min(ts[i + 1], T) : T;
            if (hi < tau) continue;
            best = std::max(best, std::sqrt(std::max(0.0, hi - tau)) * g);
            if (i + 1 < ts.size() && ts[i + 1] >= T) break;
        }
        return best;
    }

    const DriftHistory& history() const { return *hist_; }

private:
    static Vec3 eval3(const PeriodicVectorField& f, const detail::TrilinearStencil& st) {
        Vec3 v{0, 0, 0};
        for (int m = 0; m < 8; ++m)
            for (int a = 0; a < 3; ++a) v[a] += st.w[m] * f.at(a, st.idx[m]);
        return v;
    }
    static Mat3 eval9(const PeriodicVectorField& f, const detail::TrilinearStencil& st) {
        Mat3 v{};
        for (int m = 0; m < 8; ++m)
            for (int a = 0; a < 9; ++a) v[a] += st.w[m] * f.at(a, st.idx[m]);
        return v;
    }

    std::shared_ptr<const DriftHistory> hist_;
    std::vector<TensorField> grads_;
    std::vector<double> grad_sups_;
    double sup_ = 0.0;
};

}  // namespace vortexiter
