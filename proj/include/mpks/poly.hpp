#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mpks/errors.hpp"

namespace mpks {

// Dense polynomials in t, coefficient order low to high. Small degrees only;
// all arithmetic is exact in double until coefficients approach 2^53.
using Poly = std::vector<double>;

inline Poly poly_mul(const Poly& a, const Poly& b) {
    if (a.empty() || b.empty()) return {};
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

inline Poly poly_derivative(const Poly& a) {
    if (a.size() <= 1) return {0.0};
    Poly out(a.size() - 1);
    for (std::size_t i = 1; i < a.size(); ++i) out[i - 1] = a[i] * static_cast<double>(i);
    return out;
}

inline Poly poly_derivative(Poly a, int k) {
    for (int i = 0; i < k; ++i) a = poly_derivative(a);
    return a;
}

// t^k * a
inline Poly poly_shift(const Poly& a, int k) {
    Poly out(a.size() + k, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) out[i + k] = a[i];
    return out;
}

inline Poly poly_axpy(Poly a, const Poly& b, double w) {
    if (b.size() > a.size()) a.resize(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += w * b[i];
    return a;
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double v = 1.0;
    for (int i = 0; i < k; ++i) v = v * (n - i) / (i + 1);
    return std::round(v);
}

// Residual of the product rule for weighted time derivatives,
//   dt^k (t^k f g) = sum_j C(k,j) dt^j(t^j f) dt^{k-j}(t^{k-j} g)
//                    - k sum_j C(k-1,j) dt^j(t^j f) dt^{k-1-j}(t^{k-1-j} g),
// evaluated exactly on polynomial f, g. Returns max coefficient error
// relative to the largest coefficient of the left side.
inline double leibniz_identity_check(const Poly& f, const Poly& g, int k) {
    if (k < 1) throw ConfigError("leibniz_identity_check: k must be >= 1");
    const Poly lhs = poly_derivative(poly_shift(poly_mul(f, g), k), k);

    Poly rhs{0.0};
    for (int j = 0; j <= k; ++j) {
        const Poly left = poly_derivative(poly_shift(f, j), j);
        const Poly right = poly_derivative(poly_shift(g, k - j), k - j);
        rhs = poly_axpy(std::move(rhs), poly_mul(left, right), binomial(k, j));
    }
    for (int j = 0; j <= k - 1; ++j) {
        const Poly left = poly_derivative(poly_shift(f, j), j);
        const Poly right = poly_derivative(poly_shift(g, k - 1 - j), k - 1 - j);
        rhs = poly_axpy(std::move(rhs), poly_mul(left, right), -k * binomial(k - 1, j));
    }

    Poly diff = poly_axpy(rhs, lhs, -1.0);
    double scale = 0.0;
    for (double c : lhs) scale = std::max(scale, std::abs(c));
    double worst = 0.0;
    for (double c : diff) worst = std::max(worst, std::abs(c));
    return worst / std::max(scale, 1.0);
}

}  // namespace mpks
