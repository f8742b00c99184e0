#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "error.hpp"

namespace vortexiter {

using Vec3 = std::array<double, 3>;
// Row-major 3x3, m[i*3+j]. For a drift gradient: m[i*3+j] = d b^i / d x^j.
using Mat3 = std::array<double, 9>;

inline double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline double frobenius(const Mat3& m) {
    double s = 0.0;
    for (double x : m) s += x * x;
    return std::sqrt(s);
}

inline Mat3 identity3() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

inline Mat3 matmul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            const double aik = a[i * 3 + k];
            for (int j = 0; j < 3; ++j) c[i * 3 + j] += aik * b[k * 3 + j];
        }
    return c;
}

inline Vec3 matvec(const Mat3& a, const Vec3& v) {
    return {a[0] * v[0] + a[1] * v[1] + a[2] * v[2], a[3] * v[0] + a[4] * v[1] + a[5] * v[2],
            a[6] * v[0] + a[7] * v[1] + a[8] * v[2]};
}

inline Vec3 matTvec(const Mat3& a, const Vec3& v) {
    return {a[0] * v[0] + a[3] * v[1] + a[6] * v[2], a[1] * v[0] + a[4] * v[1] + a[7] * v[2],
            a[2] * v[0] + a[5] * v[1] + a[8] * v[2]};
}

// Wrap a coordinate into [0,1).
inline double wrap01(double x) {
    double r = x - std::floor(x);
    return r >= 1.0 ? 0.0 : r;
}

struct GridSpec {
    int n = 0;

    GridSpec() = default;
    explicit GridSpec(int n_) : n(n_) {
        if (n < 4 || n % 2 != 0)
            throw InvalidArgument("grid size must be even and >= 4, got " + std::to_string(n));
    }

    double period() const { return 1.0; }
    double spacing() const { return 1.0 / n; }
    std::size_t points() const { return std::size_t(n) * n * n; }
    // Number of complex coefficients in the half spectrum (last axis n/2+1).
    std::size_t spectral_points() const { return std::size_t(n) * n * (n / 2 + 1); }
    std::size_t index(int i, int j, int k) const { return (std::size_t(i) * n + j) * n + k; }
    double coord(int i) const { return double(i) / n; }

    bool operator==(const GridSpec&) const = default;
};

// Samples of a scalar (1), vector (3) or tensor (9) field on the n^3 grid.
// Layout: component-major, then row-major over (x1,x2,x3) with x3 fastest.
class PeriodicVectorField {
public:
    PeriodicVectorField() = default;
    PeriodicVectorField(GridSpec g, int components) : grid_(g), comps_(components) {
        if (components != 1 && components != 3 && components != 9)
            throw InvalidArgument("field components must be 1, 3 or 9, got " +
                                  std::to_string(components));
        data_.assign(std::size_t(components) * g.points(), 0.0);
    }

    const GridSpec& grid() const { return grid_; }
    int components() const { return comps_; }
    std::size_t size() const { return data_.size(); }

    std::span<double> component(int c) {
        return {data_.data() + std::size_t(c) * grid_.points(), grid_.points()};
    }
    std::span<const double> component(int c) const {
        return {data_.data() + std::size_t(c) * grid_.points(), grid_.points()};
    }
    double& at(int c, std::size_t p) { return data_[std::size_t(c) * grid_.points() + p]; }
    double at(int c, std::size_t p) const { return data_[std::size_t(c) * grid_.points() + p]; }

    Vec3 vec(std::size_t p) const { return {at(0, p), at(1, p), at(2, p)}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // Max over grid points of the Euclidean norm across components.
    double sup_norm() const {
        const std::size_t np = grid_.points();
        double best = 0.0;
        for (std::size_t p = 0; p < np; ++p) {
            double s = 0.0;
            for (int c = 0; c < comps_; ++c) s += at(c, p) * at(c, p);
            if (s > best) best = s;
        }
        return std::sqrt(best);
    }

    // Pointwise Euclidean norm as a scalar field.
    PeriodicVectorField pointwise_norm() const {
        PeriodicVectorField out(grid_, 1);
        const std::size_t np = grid_.points();
        for (std::size_t p = 0; p < np; ++p) {
            double s = 0.0;
            for (int c = 0; c < comps_; ++c) s += at(c, p) * at(c, p);
            out.at(0, p) = std::sqrt(s);
        }
        return out;
    }

    PeriodicVectorField& operator+=(const PeriodicVectorField& o) {
        check_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    PeriodicVectorField& operator-=(const PeriodicVectorField& o) {
        check_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    PeriodicVectorField& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }
    friend PeriodicVectorField operator-(PeriodicVectorField a, const PeriodicVectorField& b) {
        a -= b;
        return a;
    }
    friend PeriodicVectorField operator+(PeriodicVectorField a, const PeriodicVectorField& b) {
        a += b;
        return a;
    }
    friend PeriodicVectorField operator*(double s, PeriodicVectorField a) {
        a *= s;
        return a;
    }

    void check_same(const PeriodicVectorField& o) const {
        if (!(grid_ == o.grid_) || comps_ != o.comps_)
            throw InvalidArgument("field shape mismatch");
    }

    // Fill from f(x) -> value array of length components().
    template <class F>
    static PeriodicVectorField sample(GridSpec g, int components, F&& f) {
        PeriodicVectorField out(g, components);
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                for (int k = 0; k < g.n; ++k) {
                    const Vec3 x{g.coord(i), g.coord(j), g.coord(k)};
                    const std::size_t p = g.index(i, j, k);
                    if constexpr (std::is_same_v<std::invoke_result_t<F, const Vec3&>, double>) {
                        out.at(0, p) = f(x);
                    } else {
                        const auto v = f(x);
                        for (int c = 0; c < components; ++c) out.at(c, p) = v[c];
                    }
                }
        return out;
    }

protected:
    GridSpec grid_;
    int comps_ = 0;
    std::vector<double> data_;
};

// A_j^i = d b^i / d x^j stored as component i*3+j.
class TensorField : public PeriodicVectorField {
public:
    TensorField() = default;
    explicit TensorField(GridSpec g) : PeriodicVectorField(g, 9) {}
    explicit TensorField(PeriodicVectorField f) : PeriodicVectorField(std::move(f)) {
        if (comps_ != 9) throw InvalidArgument("tensor field needs 9 components");
    }

    double& at(int i, int j, std::size_t p) { return PeriodicVectorField::at(i * 3 + j, p); }
    double at(int i, int j, std::size_t p) const { return PeriodicVectorField::at(i * 3 + j, p); }
    using PeriodicVectorField::at;

    Mat3 mat(std::size_t p) const {
        Mat3 m;
        for (int c = 0; c < 9; ++c) m[c] = PeriodicVectorField::at(c, p);
        return m;
    }
    PeriodicVectorField trace() const {
        PeriodicVectorField out(grid_, 1);
        for (std::size_t p = 0; p < grid_.points(); ++p) out.at(0, p) = at(0, 0, p) + at(1, 1, p) + at(2, 2, p);
        return out;
    }
};

}  // namespace vortexiter
