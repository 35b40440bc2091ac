#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include "mpks/fft.hpp"
#include "mpks/grid.hpp"

namespace mpks {

// Multi-index beta in N^d; beta.size() == grid dim.
using MultiIndex = std::vector<int>;

inline int order(const MultiIndex& beta) {
    int s = 0;
    for (int b : beta) s += b;
    return s;
}

inline std::string to_string(const MultiIndex& beta) {
    std::string s;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        if (i) s += '|';
        s += std::to_string(beta[i]);
    }
    return s;
}

// A scalar function on a SpectralGrid carrying paired real-space samples and
// spectral coefficients. Fields are immutable: every operation returns a new
// field, so sharing across threads is safe.
//
// Normalization: spectral coefficient c(0) equals the box mean of the
// samples, i.e. (1/L^d) * integral(f). The discrete L2 norms are related by
// Plancherel as ||f||_{L2}^2 = L^d * sum |c(xi)|^2.
class Field {
  public:
    Field() = default;

    static Field from_real(GridPtr grid, std::vector<double> samples) {
        if (samples.size() != grid->size()) throw ConfigError("field: sample count mismatch");
        Field f;
        f.grid_ = std::move(grid);
        f.real_ = std::move(samples);
        f.has_real_ = true;
        return f;
    }

    static Field from_spectral(GridPtr grid, std::vector<std::complex<double>> coeffs) {
        if (coeffs.size() != grid->size()) throw ConfigError("field: coefficient count mismatch");
        Field f;
        f.grid_ = std::move(grid);
        f.spec_ = std::move(coeffs);
        f.has_spec_ = true;
        return f;
    }

    static Field zeros(GridPtr grid) {
        std::vector<double> v(grid->size(), 0.0);
        return from_real(std::move(grid), std::move(v));
    }

    const SpectralGrid& grid() const { return *grid_; }
    GridPtr grid_ptr() const { return grid_; }
    bool has_real() const { return has_real_; }
    bool has_spectral() const { return has_spec_; }

    const std::vector<double>& real() const& {
        if (!has_real_) throw Error("field: real representation not current");
        return real_;
    }
    const std::vector<std::complex<double>>& spectral() const& {
        if (!has_spec_) throw Error("field: spectral representation not current");
        return spec_;
    }
    // Rvalue overloads return by value so `g(f).real()` cannot dangle.
    std::vector<double> real() && {
        if (!has_real_) throw Error("field: real representation not current");
        return std::move(real_);
    }
    std::vector<std::complex<double>> spectral() && {
        if (!has_spec_) throw Error("field: spectral representation not current");
        return std::move(spec_);
    }

    // Returns a copy with both representations populated.
    Field with_spectral() const {
        if (has_spec_) return *this;
        Field f = *this;
        fft::forward(*grid_, real_, f.spec_);
        f.has_spec_ = true;
        return f;
    }

    // Returns a copy with real samples populated. When `check_hermitian` is
    // set, coefficients that are not conjugate-symmetric within
    // `hermitian_tol * max|c|` are rejected (a real output was demanded from
    // a genuinely complex spectrum).
    Field with_real(bool check_hermitian = false, double hermitian_tol = 1e-9) const {
        if (has_real_) return *this;
        if (check_hermitian) {
            const double asym = hermitian_asymmetry();
            if (asym > hermitian_tol)
                throw DiagnosticError("field: spectrum is not Hermitian (asymmetry " +
                                      std::to_string(asym) + "), no real representation");
        }
        Field f = *this;
        std::vector<std::complex<double>> buf;
        fft::inverse(*grid_, spec_, buf);
        f.real_.resize(buf.size());
        for (std::size_t i = 0; i < buf.size(); ++i) f.real_[i] = buf[i].real();
        f.has_real_ = true;
        return f;
    }

    // max over xi of |c(xi) - conj(c(-xi))| relative to max |c|.
    double hermitian_asymmetry() const {
        const auto& c = spectral();
        const int n = grid_->n_per_axis();
        const int d = grid_->dim();
        double cmax = 0.0;
        for (const auto& v : c) cmax = std::max(cmax, std::abs(v));
        if (cmax == 0.0) return 0.0;
        double worst = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            auto idx = grid_->unflatten(i);
            std::array<int, 3> conj_idx{0, 0, 0};
            for (int a = 0; a < d; ++a) conj_idx[a] = (n - idx[a]) % n;
            const std::size_t j = grid_->flatten(conj_idx);
            worst = std::max(worst, std::abs(c[i] - std::conj(c[j])));
        }
        return worst / cmax;
    }

    // Discrete integral h^d * sum(f).
    double integral() const {
        const auto& v = real();
        const double cell = std::pow(grid_->spacing(), grid_->dim());
        double s = std::accumulate(v.begin(), v.end(), 0.0);
        return cell * s;
    }

    double min_value() const {
        const auto& v = real();
        return *std::min_element(v.begin(), v.end());
    }
    double max_value() const {
        const auto& v = real();
        return *std::max_element(v.begin(), v.end());
    }

  private:
    GridPtr grid_;
    std::vector<double> real_;
    std::vector<std::complex<double>> spec_;
    bool has_real_ = false;
    bool has_spec_ = false;
};

inline Field forward_transform(const Field& f) { return f.with_spectral(); }

inline Field inverse_transform(const Field& f, double hermitian_tol = 1e-9) {
    return f.with_real(true, hermitian_tol);
}

namespace detail {

// Borrow a field's samples, materializing them only when needed. The view
// owns any materialized copy, so the reference stays valid for its lifetime.
class RealView {
  public:
    explicit RealView(const Field& f) {
        if (f.has_real()) {
            ptr_ = &f.real();
        } else {
            own_ = f.with_real();
            ptr_ = &own_.real();
        }
    }
    RealView(const RealView&) = delete;
    const std::vector<double>& operator*() const { return *ptr_; }

  private:
    Field own_;
    const std::vector<double>* ptr_;
};

class SpectralView {
  public:
    explicit SpectralView(const Field& f) {
        if (f.has_spectral()) {
            ptr_ = &f.spectral();
        } else {
            own_ = f.with_spectral();
            ptr_ = &own_.spectral();
        }
    }
    SpectralView(const SpectralView&) = delete;
    const std::vector<std::complex<double>>& operator*() const { return *ptr_; }

  private:
    Field own_;
    const std::vector<std::complex<double>>* ptr_;
};

// Multiplier value prod_a (i xi_a)^{beta_a} at one lattice point.
inline std::complex<double> derivative_symbol(const SpectralGrid& g,
                                              const std::array<int, 3>& idx,
                                              const MultiIndex& beta) {
    std::complex<double> m{1.0, 0.0};
    for (int a = 0; a < g.dim(); ++a) {
        const std::complex<double> ix{0.0, g.freq(idx[a])};
        for (int p = 0; p < beta[a]; ++p) m *= ix;
    }
    return m;
}

}  // namespace detail

// D^beta f realized as the diagonal multiplier prod (i xi_j)^{beta_j}.
// Commutes exactly with transforms and with other spectral derivatives.
inline Field spectral_derivative(const Field& f, const MultiIndex& beta, int max_order = 12) {
    const SpectralGrid& g = f.grid();
    if (static_cast<int>(beta.size()) != g.dim())
        throw ConfigError("spectral_derivative: beta dimension mismatch");
    for (int b : beta)
        if (b < 0) throw ConfigError("spectral_derivative: negative multi-index entry");
    const int ord = order(beta);
    if (ord > max_order)
        throw ConfigError("spectral_derivative: |beta| exceeds configured maximum");
    // Overflow guard: (max xi)^{|beta|} must stay inside double range.
    if (ord > 0 && ord * std::log10(std::max(g.max_freq(), 1.0)) > 290.0)
        throw DiagnosticError("spectral_derivative: multiplier overflows double range");

    Field fs = f.with_spectral();
    std::vector<std::complex<double>> out(fs.spectral());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= detail::derivative_symbol(g, g.unflatten(i), beta);
    }
    return Field::from_spectral(f.grid_ptr(), std::move(out));
}

// 2/3-rule dealiasing: zero every coefficient whose index on any axis
// satisfies |m| > n/3.
inline Field dealias(const Field& f) {
    const SpectralGrid& g = f.grid();
    const int n = g.n_per_axis();
    const double cut = n / 3.0;
    Field fs = f.with_spectral();
    std::vector<std::complex<double>> out(fs.spectral());
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto idx = g.unflatten(i);
        for (int a = 0; a < g.dim(); ++a) {
            const int m = (idx[a] < n / 2) ? idx[a] : idx[a] - n;
            if (std::abs(m) > cut) {
                out[i] = 0.0;
                break;
            }
        }
    }
    return Field::from_spectral(f.grid_ptr(), std::move(out));
}

// Pointwise algebra used by the engines; all pure.
inline Field add(const Field& a, const Field& b, double wa = 1.0, double wb = 1.0) {
    if (!a.grid().same_layout(b.grid())) throw ConfigError("field add: grid mismatch");
    if (a.has_spectral() && b.has_spectral()) {
        std::vector<std::complex<double>> out(a.spectral());
        const auto& bs = b.spectral();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = wa * out[i] + wb * bs[i];
        return Field::from_spectral(a.grid_ptr(), std::move(out));
    }
    detail::RealView ar(a), br(b);
    std::vector<double> out((*ar).size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = wa * (*ar)[i] + wb * (*br)[i];
    return Field::from_real(a.grid_ptr(), std::move(out));
}

inline Field scale(const Field& a, double w) {
    if (a.has_spectral()) {
        std::vector<std::complex<double>> out(a.spectral());
        for (auto& c : out) c *= w;
        Field f = Field::from_spectral(a.grid_ptr(), std::move(out));
        return f;
    }
    std::vector<double> out(a.real());
    for (auto& v : out) v *= w;
    return Field::from_real(a.grid_ptr(), std::move(out));
}

// Real-space product of two fields (no dealiasing; callers protecting a
// quadratic nonlinearity should dealias the result).
inline Field multiply(const Field& a, const Field& b) {
    if (!a.grid().same_layout(b.grid())) throw ConfigError("field multiply: grid mismatch");
    detail::RealView ar(a), br(b);
    std::vector<double> out((*ar).size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*ar)[i] * (*br)[i];
    return Field::from_real(a.grid_ptr(), std::move(out));
}

}  // namespace mpks
