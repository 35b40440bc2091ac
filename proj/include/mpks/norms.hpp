#pragma once

#include <cmath>
#include <limits>

#include "mpks/field.hpp"

namespace mpks {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Discrete L^q norm: (h^d * sum |f|^q)^{1/q}; q = inf is the grid maximum of
// |f| (a lower bound on the continuum sup for well-resolved fields).
inline double lq_norm(const Field& f, double q) {
    if (q < 1.0) throw ConfigError("lq_norm: q must be >= 1");
    detail::RealView view(f);
    const auto& v = *view;
    if (std::isinf(q)) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
    const double cell = std::pow(f.grid().spacing(), f.grid().dim());
    double s = 0.0;
    if (q == 1.0) {
        for (double x : v) s += std::abs(x);
        return cell * s;
    }
    if (q == 2.0) {
        for (double x : v) s += x * x;
        return std::sqrt(cell * s);
    }
    for (double x : v) s += std::pow(std::abs(x), q);
    return std::pow(cell * s, 1.0 / q);
}

// L^q norm of the Euclidean magnitude of a vector field.
inline double lq_norm_magnitude(const std::vector<Field>& comps, double q) {
    if (comps.empty()) return 0.0;
    const SpectralGrid& g = comps[0].grid();
    std::vector<double> mag(g.size(), 0.0);
    for (const Field& c : comps) {
        detail::RealView view(c);
        const auto& v = *view;
        for (std::size_t i = 0; i < mag.size(); ++i) mag[i] += v[i] * v[i];
    }
    for (auto& x : mag) x = std::sqrt(x);
    return lq_norm(Field::from_real(comps[0].grid_ptr(), std::move(mag)), q);
}

}  // namespace mpks
