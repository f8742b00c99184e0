#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "grid.hpp"

namespace vortexiter {

// sup over samples with tau <= t_i <= T of sqrt(t_i - tau) * sup_abs[i].
// sup_abs[i] is the spatial sup of |f(., t_i)|. A sample sitting exactly at tau
// contributes 0 even if |f| is infinite there.
inline double parabolic_norm(std::span<const double> times, std::span<const double> sup_abs, double tau, double T) {
    if (times.empty()) throw InvalidArgument("parabolic_norm: empty series");
    if (times.size() != sup_abs.size()) throw InvalidArgument("parabolic_norm: times/values size mismatch");
    if (!(tau < T)) throw InvalidArgument("parabolic_norm: need tau < T");
    double best = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        if (t < tau || t > T) continue;
        any = true;
        if (t == tau) continue;
        best = std::max(best, std::sqrt(t - tau) * std::abs(sup_abs[i]));
    }
    if (!any) throw InvalidArgument("parabolic_norm: no samples inside [tau, T]");
    return best;
}

// Field-series overload: uses the pointwise Euclidean norm of each snapshot.
inline double parabolic_norm(std::span<const double> times, std::span<const PeriodicVectorField> fields, double tau,
                             double T) {
    if (times.size() != fields.size()) throw InvalidArgument("parabolic_norm: times/fields size mismatch");
    std::vector<double> sups(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) sups[i] = fields[i].sup_norm();
    return parabolic_norm(times, std::span<const double>(sups), tau, T);
}

}  // namespace vortexiter
