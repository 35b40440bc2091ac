#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <vector>

#include "mpks/field.hpp"
#include "mpks/norms.hpp"
#include "mpks/shapes.hpp"

namespace mpks {

// --------------------------------------------------------------------------
// Heat kernel and semigroup
// --------------------------------------------------------------------------

// Samples of G(x,t) = (4 pi t)^{-d/2} exp(-|x|^2 / 4t), x measured from the
// box center. No image summation: the box is assumed large enough that the
// periodization error is far below diagnostic tolerances.
inline Field gaussian_kernel_values(GridPtr grid, double t,
                                    std::vector<std::string>* warnings = nullptr) {
    if (!(t > 0.0)) throw ConfigError("gaussian_kernel_values: t must be positive");
    const SpectralGrid& g = *grid;
    if (warnings && 4.0 * std::sqrt(t) > 0.25 * g.box_length())
        warnings->push_back("heat kernel at t=" + std::to_string(t) +
                            " spreads beyond the validity horizon of this box");
    // G(.,t) is the mass-1 Gaussian with per-axis variance 2t.
    return make_gaussian(std::move(grid), 1.0, std::sqrt(2.0 * t));
}

// e^{dt Laplacian} f via the multiplier exp(-|xi|^2 dt). Preserves the zero
// mode exactly and maps real fields to real fields.
inline Field apply_semigroup(const Field& f, double dt) {
    if (dt < 0.0) throw ConfigError("apply_semigroup: negative dt");
    if (dt == 0.0) return f;
    const SpectralGrid& g = f.grid();
    Field fs = f.with_spectral();
    std::vector<std::complex<double>> out(fs.spectral());
    std::vector<double> damp(g.n_per_axis());
    for (int i = 0; i < g.n_per_axis(); ++i) {
        const double xi = g.freq(i);
        damp[i] = std::exp(-xi * xi * dt);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto idx = g.unflatten(i);
        double m = 1.0;
        for (int a = 0; a < g.dim(); ++a) m *= damp[idx[a]];
        out[i] *= m;
    }
    return Field::from_spectral(f.grid_ptr(), std::move(out));
}

// --------------------------------------------------------------------------
// Kernel derivative norms at t = 1 (reference quadrature)
// --------------------------------------------------------------------------

namespace detail {

// D^beta Laplacian^k G(.,1) synthesized directly from the closed-form
// spectrum (1/L^d) prod_a (i xi_a)^{beta_a} (-|xi|^2)^k exp(-|xi|^2).
// Time derivatives of the kernel are realized as Laplacians throughout.
inline Field kernel_derivative_field(GridPtr grid, const MultiIndex& beta, int k) {
    const SpectralGrid& g = *grid;
    const int d = g.dim();
    const int n = g.n_per_axis();
    std::vector<std::vector<std::complex<double>>> pw(d);
    std::vector<double> xi2(n), ex(n);
    for (int i = 0; i < n; ++i) {
        const double xi = g.freq(i);
        xi2[i] = xi * xi;
        ex[i] = std::exp(-xi2[i]);
    }
    for (int a = 0; a < d; ++a) {
        pw[a].resize(n);
        for (int i = 0; i < n; ++i) {
            std::complex<double> v{1.0, 0.0};
            const std::complex<double> ix{0.0, g.freq(i)};
            for (int p = 0; p < beta[a]; ++p) v *= ix;
            pw[a][i] = v * ex[i];
        }
    }
    const double invLd = std::pow(g.box_length(), -d);
    std::vector<std::complex<double>> coeff(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto idx = g.unflatten(i);
        std::complex<double> c{invLd, 0.0};
        double s2 = 0.0;
        for (int a = 0; a < d; ++a) {
            c *= pw[a][idx[a]];
            s2 += xi2[idx[a]];
        }
        double lap = 1.0;
        for (int p = 0; p < k; ++p) lap *= -s2;
        coeff[i] = c * lap;
    }
    std::vector<std::complex<double>> buf;
    fft::inverse(g, coeff, buf);
    std::vector<double> out(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i].real();
    return Field::from_real(std::move(grid), std::move(out));
}

// Grid max of |f| with a per-axis parabolic vertex correction on f^2, which
// removes the O(h^2) under-reading of the plain sample maximum.
inline double refined_max_abs(const Field& f) {
    RealView view(f);
    const auto& v = *view;
    const SpectralGrid& g = f.grid();
    const int n = g.n_per_axis();
    std::size_t best = 0;
    double y0 = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double y = v[i] * v[i];
        if (y > y0) {
            y0 = y;
            best = i;
        }
    }
    if (y0 == 0.0) return 0.0;
    auto idx = g.unflatten(best);
    double total = y0;
    for (int a = 0; a < g.dim(); ++a) {
        auto lo = idx, hi = idx;
        lo[a] = (idx[a] + n - 1) % n;
        hi[a] = (idx[a] + 1) % n;
        const double ym = v[g.flatten(lo)] * v[g.flatten(lo)];
        const double yp = v[g.flatten(hi)] * v[g.flatten(hi)];
        const double denom = yp + ym - 2.0 * y0;
        if (denom < 0.0) total += -(yp - ym) * (yp - ym) / (8.0 * denom);
    }
    return std::sqrt(std::max(total, y0));
}

inline double ref_norm_of_field(const Field& f, double q) {
    if (std::isinf(q)) return refined_max_abs(f);
    return lq_norm(f, q);
}

// Box and starting resolution for the t=1 reference quadrature. The box is
// fixed per dimension; the resolution must carry the spectrum of the highest
// requested derivative, |xi|^deg exp(-|xi|^2), down to ~1e-14.
inline std::pair<double, int> ref_grid_start(int d, int degree) {
    const double L = (d == 3) ? 28.0 : 40.0;
    double xi = 6.0;
    for (int it = 0; it < 3; ++it) xi = std::sqrt(34.0 + degree * std::log(std::max(xi, 3.0)));
    const double need = L * (xi + 1.0) / M_PI;
    static const int sizes[] = {64, 96, 128, 192, 256, 384, 512, 768, 1024, 1536, 2048, 4096};
    for (int s : sizes)
        if (s >= need) return {L, s};
    throw ResolutionError("kernel reference norms: required resolution out of range");
}

inline int ref_grid_cap(int d) { return d == 3 ? 256 : (d == 2 ? 4096 : 16384); }

struct RefNorms {
    std::map<double, double> fine;    // q -> norm at the accepted resolution
    std::map<double, double> coarse;  // q -> norm one doubling below
    int n_fine = 0;
};

// t = 1 norms ||D^beta Laplacian^k G(.,1)||_q for all requested q, with the
// resolution doubled until every norm moves by less than 0.1%.
inline RefNorms kernel_reference_norms(int d, const MultiIndex& beta, int k,
                                       const std::vector<double>& qs) {
    struct Key {
        int d;
        std::string beta;
        int k;
        bool operator<(const Key& o) const {
            return std::tie(d, beta, k) < std::tie(o.d, o.beta, o.k);
        }
    };
    static std::map<Key, RefNorms> cache;
    static std::mutex mutex;

    const Key key{d, to_string(beta), k};
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(key);
        if (it != cache.end()) {
            bool all = true;
            for (double q : qs)
                if (!it->second.fine.count(q)) all = false;
            if (all) return it->second;
        }
    }

    const int degree = order(beta) + 2 * k;
    auto [L, n0] = ref_grid_start(d, degree);
    const int cap = ref_grid_cap(d);

    auto norms_at = [&](int n) {
        Field f = kernel_derivative_field(make_grid(d, n, L), beta, k);
        std::map<double, double> m;
        for (double q : qs) m[q] = ref_norm_of_field(f, q);
        return m;
    };

    int n = n0;
    std::map<double, double> lo = norms_at(n), hi = norms_at(2 * n);
    while (true) {
        bool ok = true;
        for (double q : qs) {
            const double a = lo[q], b = hi[q];
            if (std::abs(a - b) > 1e-3 * std::max(std::abs(b), 1e-300)) ok = false;
        }
        if (ok) break;
        n *= 2;
        if (2 * n > cap)
            throw ResolutionError("kernel reference norms for beta=" + to_string(beta) +
                                  " k=" + std::to_string(k) +
                                  " did not stabilize below the resolution cap");
        lo = std::move(hi);
        hi = norms_at(2 * n);
    }

    RefNorms result{hi, lo, 2 * n};
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[key];
    slot.n_fine = result.n_fine;
    for (auto& [q, v] : result.fine) slot.fine[q] = v;
    for (auto& [q, v] : result.coarse) slot.coarse[q] = v;
    return slot;
}

}  // namespace detail

// t-exponent of ||D^beta dt^k G(.,t)||_q from the kernel scaling identities.
inline double kernel_norm_exponent(int d, const MultiIndex& beta, int k, double q) {
    const double oneminus = std::isinf(q) ? 1.0 : 1.0 - 1.0 / q;
    return -0.5 * (order(beta) + 2 * k) - 0.5 * d * oneminus;
}

// ||D^beta dt^k G(.,t)||_{L^q} via the exact scaling identity
//   ||D^beta dt^k G(.,t)||_q = t^{-(|beta|+2k)/2 - (d/2)(1-1/q)}
//                              * ||D^beta Laplacian^k G(.,1)||_q,
// with the t = 1 norm computed once by quadrature.
inline double kernel_derivative_norm(const MultiIndex& beta, int k, double t, double q,
                                     int max_order = 12) {
    if (beta.empty()) throw ConfigError("kernel_derivative_norm: empty multi-index");
    if (!(t > 0.0)) throw ConfigError("kernel_derivative_norm: t must be positive");
    if (k < 0) throw ConfigError("kernel_derivative_norm: k must be >= 0");
    if (!(q >= 1.0)) throw ConfigError("kernel_derivative_norm: q must be in [1, inf]");
    const int d = static_cast<int>(beta.size());
    if (order(beta) + 2 * k > max_order)
        throw ConfigError("kernel_derivative_norm: |beta| + 2k exceeds configured maximum");
    const auto ref = detail::kernel_reference_norms(d, beta, k, {q});
    return std::pow(t, kernel_norm_exponent(d, beta, k, q)) * ref.fine.at(q);
}

// --------------------------------------------------------------------------
// Kernel bound verification
// --------------------------------------------------------------------------

struct KernelBoundEntry {
    MultiIndex beta;
    int k = 0;
    double q = 1.0;
    double t = 1.0;
    double measured = 0.0;
    double paper_bound = 0.0;
    double ratio = 0.0;
    double t_exponent = 0.0;
};

struct KernelBoundReport {
    int dim = 0;
    std::vector<KernelBoundEntry> entries;
    double implied_C0 = 0.0;
    double implied_M0 = 0.0;
    // Same constants re-measured one grid refinement below, for the
    // stability check.
    double implied_C0_coarse = 0.0;
    double implied_M0_coarse = 0.0;
    std::vector<double> p_grid;
};

inline std::vector<MultiIndex> all_multi_indices(int d, int max_total) {
    std::vector<MultiIndex> out;
    if (d == 1) {
        for (int i = 0; i <= max_total; ++i) out.push_back({i});
    } else if (d == 2) {
        for (int s = 0; s <= max_total; ++s)
            for (int i = 0; i <= s; ++i) out.push_back({i, s - i});
    } else {
        for (int s = 0; s <= max_total; ++s)
            for (int i = 0; i <= s; ++i)
                for (int j = 0; j <= s - i; ++j) out.push_back({i, j, s - i - j});
    }
    return out;
}

namespace detail {

// The paper's recipe for C0: twice the larger of sup_p ||grad G(.,1)||_p and
// sup_p ||grad^2 G(.,1)||_p over the tested p grid, with the gradient taken
// in Euclidean magnitude and the Hessian in Frobenius magnitude.
inline std::pair<double, double> implied_c0_at(int d, int n, double L,
                                               const std::vector<double>& ps) {
    GridPtr g = make_grid(d, n, L);
    std::vector<Field> grad;
    for (int a = 0; a < d; ++a) {
        MultiIndex e(d, 0);
        e[a] = 1;
        grad.push_back(kernel_derivative_field(g, e, 0));
    }
    // Frobenius magnitude of the Hessian, off-diagonal entries counted twice.
    std::vector<double> fro(g->size(), 0.0);
    for (int a = 0; a < d; ++a) {
        for (int b = a; b < d; ++b) {
            MultiIndex e(d, 0);
            e[a] += 1;
            e[b] += 1;
            const Field comp = kernel_derivative_field(g, e, 0);
            const auto& v = comp.real();
            const double w = (a == b) ? 1.0 : 2.0;
            for (std::size_t i = 0; i < fro.size(); ++i) fro[i] += w * v[i] * v[i];
        }
    }
    for (auto& x : fro) x = std::sqrt(x);
    Field hess = Field::from_real(g, std::move(fro));

    double sup_grad = 0.0, sup_hess = 0.0;
    for (double p : ps) {
        sup_grad = std::max(sup_grad, lq_norm_magnitude(grad, p));
        sup_hess = std::max(sup_hess, std::isinf(p) ? refined_max_abs(hess) : lq_norm(hess, p));
    }
    return {sup_grad, sup_hess};
}

}  // namespace detail

// Measures ||D^beta dt^k G(.,t)||_q across the requested battery and checks
// each value against the kernel bounds, with C0 and M0 set to the implied
// constants (M0 = 2 d C0). Entries with k = 0 use the spatial-derivative
// bound shape; entries with k > 0 use the space-time shape.
inline KernelBoundReport verify_kernel_bounds(int dim, int beta_max, int k_max,
                                              std::vector<double> q_list,
                                              std::vector<double> t_list) {
    if (dim < 1 || dim > 3) throw ConfigError("verify_kernel_bounds: dim must be 1..3");
    for (double q : q_list)
        if (!(q >= 1.0)) throw ConfigError("verify_kernel_bounds: q outside [1, inf]");

    KernelBoundReport report;
    report.dim = dim;
    report.p_grid = q_list;

    // Implied constants at the reference resolution and one doubling below.
    auto [L, n0] = detail::ref_grid_start(dim, 4);
    auto coarse = detail::implied_c0_at(dim, n0, L, q_list);
    auto fine = detail::implied_c0_at(dim, 2 * n0, L, q_list);
    report.implied_C0 = 2.0 * std::max(fine.first, fine.second);
    report.implied_M0 = 2.0 * dim * report.implied_C0;
    report.implied_C0_coarse = 2.0 * std::max(coarse.first, coarse.second);
    report.implied_M0_coarse = 2.0 * dim * report.implied_C0_coarse;

    const double C0 = report.implied_C0;
    const double M0 = report.implied_M0;

    for (const MultiIndex& beta : all_multi_indices(dim, beta_max)) {
        const int ob = order(beta);
        for (int k = 0; k <= k_max; ++k) {
            const auto ref = detail::kernel_reference_norms(dim, beta, k, q_list);
            for (double q : q_list) {
                const double dq = std::isinf(q) ? 1.0 : 1.0 - 1.0 / q;
                const double texp = kernel_norm_exponent(dim, beta, k, q);
                double bound_const;
                if (ob == 0 && k == 0) {
                    bound_const = 1.0;  // (|beta|+k)^0 with the 0^p = 1 convention
                } else if (k == 0) {
                    bound_const = std::pow(C0, 0.5 * ob) *
                                  std::pow(0.5 * ob, 0.5 * ob + 0.5 * dim * dq);
                } else {
                    bound_const = std::pow(M0, 0.5 * ob + k) *
                                  std::pow(ob + k, 0.5 * ob + k + 0.5 * dim * dq);
                }
                for (double t : t_list) {
                    KernelBoundEntry e;
                    e.beta = beta;
                    e.k = k;
                    e.q = q;
                    e.t = t;
                    e.t_exponent = texp;
                    e.measured = std::pow(t, texp) * ref.fine.at(q);
                    e.paper_bound = bound_const * std::pow(t, texp);
                    e.ratio = e.measured / e.paper_bound;
                    report.entries.push_back(std::move(e));
                }
            }
        }
    }
    return report;
}

inline std::string q_label(double q) {
    if (std::isinf(q)) return "inf";
    std::ostringstream os;
    os.precision(17);
    os << q;
    return os.str();
}

inline void write_csv(const KernelBoundReport& report, std::ostream& os) {
    os << "beta,k,q,t,measured,bound,ratio\n";
    os.precision(17);
    os << std::scientific;
    for (const auto& e : report.entries) {
        os << to_string(e.beta) << ',' << e.k << ',' << q_label(e.q) << ',' << e.t << ','
           << e.measured << ',' << e.paper_bound << ',' << e.ratio << '\n';
    }
}

// --------------------------------------------------------------------------
// Small-time vanishing probe
// --------------------------------------------------------------------------

struct VanishingProbe {
    std::vector<std::pair<double, double>> values;  // (t, t^alpha ||G(t)*f||_q), t decreasing
    double fitted_slope = 0.0;                      // slope of log(value) against log(t)
    bool decreasing_toward_zero = false;
    bool informational_only = false;  // q == p, exponent zero
};

// Tracks t^{(d/2)(1/p - 1/q)} ||G(.,t) * f||_q along a sequence of times
// decreasing to 0; the sequence must decrease toward 0 when q > p.
inline VanishingProbe small_time_vanishing_probe(const Field& f, double p, double q,
                                                 std::vector<double> ts) {
    if (!(p >= 1.0) || !(q >= 1.0)) throw ConfigError("vanishing probe: p, q must be >= 1");
    if (q < p) throw ConfigError("vanishing probe: q must be >= p");
    if (ts.size() < 2) throw ConfigError("vanishing probe: need at least two times");
    const SpectralGrid& g = f.grid();
    const double floor = 4.0 * g.spacing() * g.spacing();
    const double horizon = validity_horizon(g);
    std::sort(ts.begin(), ts.end(), std::greater<double>());
    for (double t : ts) {
        if (t < floor)
            throw ResolutionError("vanishing probe: t below the resolution floor 4 h^2");
        if (t > horizon) throw ConfigError("vanishing probe: t beyond the validity horizon");
    }

    const int d = g.dim();
    const double ip = 1.0 / p;
    const double iq = std::isinf(q) ? 0.0 : 1.0 / q;
    const double alpha = 0.5 * d * (ip - iq);

    VanishingProbe probe;
    probe.informational_only = (q == p);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double t : ts) {
        const double value = std::pow(t, alpha) * lq_norm(apply_semigroup(f, t), q);
        probe.values.emplace_back(t, value);
        const double x = std::log(t), y = std::log(std::max(value, 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = static_cast<double>(ts.size());
    probe.fitted_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    probe.decreasing_toward_zero = probe.values.back().second < probe.values.front().second;
    return probe;
}

}  // namespace mpks
