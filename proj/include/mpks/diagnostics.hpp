#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mpks/evolution.hpp"
#include "mpks/heat.hpp"
#include "mpks/norms.hpp"

namespace mpks {

// --------------------------------------------------------------------------
// Least-squares helper
// --------------------------------------------------------------------------

namespace detail {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double rms_residual = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) throw DiagnosticError("fit_line: need at least two points");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw DiagnosticError("fit_line: zero variance in abscissa");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += r * r;
    }
    f.r_squared = (syy > 0.0) ? std::max(0.0, 1.0 - ss_res / syy) : 1.0;
    f.rms_residual = std::sqrt(ss_res / n);
    return f;
}

}  // namespace detail

// --------------------------------------------------------------------------
// Theta functional
// --------------------------------------------------------------------------

struct ThetaEntry {
    double q = 1.0;
    double supremum = 0.0;
    double t_at_supremum = 0.0;
};

struct ThetaReport {
    double T = 0.0;
    double mass = 0.0;  // the paper-style comparison scale C ||rho0||_L1
    std::vector<ThetaEntry> entries;
};

// sup over the sampled times of t^{(d/2)(1-1/q)} ||G(.,t) * rho0||_{L^q} per
// q. The q = 1 entry equals the mass for nonnegative data (heat flow
// preserves it), and the q = 2d/(2d-1) entry is the contraction gate.
inline ThetaReport theta_functional(const Field& rho0, double T, std::vector<double> q_list,
                                    std::vector<double> t_samples) {
    if (!(T > 0.0)) throw ConfigError("theta_functional: T must be positive");
    const SpectralGrid& g = rho0.grid();
    const double floor = 4.0 * g.spacing() * g.spacing();
    std::sort(t_samples.begin(), t_samples.end());
    for (double t : t_samples) {
        if (!(t > 0.0) || t > T * (1.0 + 1e-12))
            throw ConfigError("theta_functional: samples must lie in (0, T]");
        if (t < floor)
            throw ResolutionError("theta_functional: sample below the resolution floor 4 h^2");
    }
    const int d = g.dim();
    ThetaReport report;
    report.T = T;
    report.mass = rho0.integral();
    report.entries.reserve(q_list.size());
    for (double q : q_list) report.entries.push_back({q, 0.0, 0.0});
    for (double t : t_samples) {
        Field evolved = apply_semigroup(rho0, t);
        for (auto& e : report.entries) {
            const double oneminus = std::isinf(e.q) ? 1.0 : 1.0 - 1.0 / e.q;
            const double v = std::pow(t, 0.5 * d * oneminus) * lq_norm(evolved, e.q);
            if (v > e.supremum) {
                e.supremum = v;
                e.t_at_supremum = t;
            }
        }
    }
    return report;
}

// --------------------------------------------------------------------------
// Decay fits
// --------------------------------------------------------------------------

struct DecayFit {
    MultiIndex beta;
    int k = 0;
    double q = kInf;
    double t_lo = 0.0, t_hi = 0.0;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double predicted_slope = 0.0;  // -|beta|/2 - k - (d/2)(1 - 1/q)
    double slope_error = 0.0;
    int samples = 0;
};

inline double predicted_decay_slope(int d, const MultiIndex& beta, int k, double q) {
    const double oneminus = std::isinf(q) ? 1.0 : 1.0 - 1.0 / q;
    return -0.5 * order(beta) - k - 0.5 * d * oneminus;
}

// Log-log fit of ||D^beta dt^k rho(t)||_q against t over the window, using
// the trajectory snapshots inside it. Spatial derivatives are spectral; time
// derivatives come from the exact ladder at each snapshot.
inline DecayFit decay_fit(const Trajectory& traj, const MultiIndex& beta, int k, double q,
                          double t_lo, double t_hi, const LadderOptions& ladder_opts = {}) {
    if (traj.snapshots.empty()) throw ConfigError("decay_fit: empty trajectory");
    const SpectralGrid& g = traj.snapshots.front().grid();
    if (!(t_lo > 0.0) || !(t_lo < t_hi)) throw ConfigError("decay_fit: bad window");
    if (t_hi > validity_horizon(g) * (1.0 + 1e-12))
        throw ConfigError("decay_fit: window beyond the validity horizon");

    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i];
        if (t < t_lo * (1.0 - 1e-12) || t > t_hi * (1.0 + 1e-12)) continue;
        Field df;
        if (k == 0) {
            df = spectral_derivative(traj.snapshots[i], beta);
        } else {
            auto ladder = time_derivative_ladder(traj.snapshots[i], k, ladder_opts);
            df = spectral_derivative(ladder[k], beta);
        }
        const double v = lq_norm(df, q);
        if (!(v > 0.0)) continue;
        xs.push_back(std::log(t));
        ys.push_back(std::log(v));
    }
    if (xs.size() < 8)
        throw DiagnosticError("decay_fit: fewer than 8 usable samples in the window");

    const auto line = detail::fit_line(xs, ys);
    DecayFit fit;
    fit.beta = beta;
    fit.k = k;
    fit.q = q;
    fit.t_lo = t_lo;
    fit.t_hi = t_hi;
    fit.slope = line.slope;
    fit.intercept = line.intercept;
    fit.r_squared = line.r_squared;
    fit.predicted_slope = predicted_decay_slope(g.dim(), beta, k, q);
    fit.slope_error = fit.slope - fit.predicted_slope;
    fit.samples = static_cast<int>(xs.size());
    return fit;
}

// --------------------------------------------------------------------------
// Analyticity radii
// --------------------------------------------------------------------------

struct SpaceRadiusEstimate {
    double r_space = 0.0;
    double fit_rms = 0.0;
    int shells_used = 0;
    double band_lo = 0.0, band_hi = 0.0;
    bool gaussian_decay = false;  // spectrum decays faster than exponential
    bool degenerate = false;      // no usable decay band
    bool underflow = false;       // band clipped by the floating-point floor
};

struct SpaceRadiusOptions {
    double amp_hi = 1e-2;   // band upper edge relative to the peak coefficient
    double amp_lo = 1e-11;  // band lower edge, above the transform noise floor
    int min_shells = 6;
};

// Fits log of the shell maximum of |f_hat| against |xi| over the
// mid-amplitude band; minus the slope estimates the spatial analyticity
// radius. A significantly better quadratic fit flags super-exponential
// (Gaussian-type) decay, where the linear rate depends on the band.
inline SpaceRadiusEstimate analyticity_radius_space(const Field& f,
                                                    const SpaceRadiusOptions& opts = {}) {
    detail::SpectralView view(f);
    const auto& c = *view;
    const SpectralGrid& g = f.grid();
    const double dxi = 2.0 * M_PI / g.box_length();

    // shell maxima of |c| with the |xi| of each maximizer
    const int nshell = g.n_per_axis();  // radius up to sqrt(d) xi_max
    std::vector<double> shell_max(nshell, 0.0), shell_xi(nshell, 0.0);
    double cmax = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double a = std::abs(c[i]);
        if (a == 0.0) continue;
        auto idx = g.unflatten(i);
        double s2 = 0.0;
        for (int ax = 0; ax < g.dim(); ++ax) {
            const double xi = g.freq(idx[ax]);
            s2 += xi * xi;
        }
        const double r = std::sqrt(s2);
        const int bin = static_cast<int>(r / dxi + 0.5);
        if (bin >= nshell) continue;
        if (a > shell_max[bin]) {
            shell_max[bin] = a;
            shell_xi[bin] = r;
        }
        cmax = std::max(cmax, a);
    }

    SpaceRadiusEstimate est;
    if (cmax == 0.0) {
        est.degenerate = true;
        return est;
    }

    std::vector<double> xs, ys;
    bool any_below_floor = false;
    for (int b = 1; b < nshell; ++b) {
        if (shell_max[b] <= 0.0) continue;
        const double rel = shell_max[b] / cmax;
        if (shell_max[b] < 1e-300) any_below_floor = true;
        if (rel > opts.amp_hi || rel < opts.amp_lo) continue;
        xs.push_back(shell_xi[b]);
        ys.push_back(std::log(shell_max[b]));
    }
    if (static_cast<int>(xs.size()) < opts.min_shells) {
        est.degenerate = true;
        est.underflow = any_below_floor;
        return est;
    }

    const auto line = detail::fit_line(xs, ys);
    est.r_space = std::max(0.0, -line.slope);
    est.fit_rms = line.rms_residual;
    est.shells_used = static_cast<int>(xs.size());
    est.band_lo = *std::min_element(xs.begin(), xs.end());
    est.band_hi = *std::max_element(xs.begin(), xs.end());
    est.underflow = any_below_floor;

    // curvature check: residual of a quadratic fit vs the linear one
    {
        const std::size_t n = xs.size();
        double sx = 0, sx2 = 0, sx3 = 0, sx4 = 0, sy = 0, sxy = 0, sx2y = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = xs[i], y = ys[i];
            sx += x;
            sx2 += x * x;
            sx3 += x * x * x;
            sx4 += x * x * x * x;
            sy += y;
            sxy += x * y;
            sx2y += x * x * y;
        }
        // normal equations for y = a + b x + c x^2 (3x3 Cramer)
        const double m[3][3] = {{static_cast<double>(n), sx, sx2},
                                {sx, sx2, sx3},
                                {sx2, sx3, sx4}};
        const double rhs[3] = {sy, sxy, sx2y};
        const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if (std::abs(det) > 1e-30) {
            auto solve_col = [&](int col) {
                double mm[3][3];
                for (int r = 0; r < 3; ++r)
                    for (int cc = 0; cc < 3; ++cc) mm[r][cc] = (cc == col) ? rhs[r] : m[r][cc];
                return mm[0][0] * (mm[1][1] * mm[2][2] - mm[1][2] * mm[2][1]) -
                       mm[0][1] * (mm[1][0] * mm[2][2] - mm[1][2] * mm[2][0]) +
                       mm[0][2] * (mm[1][0] * mm[2][1] - mm[1][1] * mm[2][0]);
            };
            const double a = solve_col(0) / det, b = solve_col(1) / det, cq = solve_col(2) / det;
            double ss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = ys[i] - (a + b * xs[i] + cq * xs[i] * xs[i]);
                ss += r * r;
            }
            const double rms_quad = std::sqrt(ss / n);
            if (cq < 0.0 && line.rms_residual > 3.0 * std::max(rms_quad, 1e-12))
                est.gaussian_decay = true;
        }
    }
    return est;
}

// Root-test estimate of the temporal analyticity radius from the ladder of
// L^inf norms: r = min over j >= 2 of (||dt^j rho||_inf / j!)^{-1/j}. Zero
// norms contribute an infinite radius and are skipped; if everything is
// zero the sentinel +inf is returned.
inline double analyticity_radius_time(const std::vector<double>& ladder_linf) {
    if (ladder_linf.size() < 5)
        throw ConfigError("analyticity_radius_time: need k_max >= 4 ladder norms");
    double r = std::numeric_limits<double>::infinity();
    double log_fact = std::log(2.0);  // log(2!)
    for (std::size_t j = 2; j < ladder_linf.size(); ++j) {
        if (j > 2) log_fact += std::log(static_cast<double>(j));
        const double norm = ladder_linf[j];
        if (!(norm > 0.0)) continue;
        const double log_r = -(std::log(norm) - log_fact) / static_cast<double>(j);
        r = std::min(r, std::exp(log_r));
    }
    return r;
}

// --------------------------------------------------------------------------
// Derivative growth fit
// --------------------------------------------------------------------------

struct GrowthRateFit {
    std::vector<double> m_j;  // M_j for j = 1..k_max
    double max_m = 0.0;
    double median_m = 0.0;
};

// M_j = ( ||dt^j rho(t)||_inf * t^{j + d/2} / j^j )^{1/j}: a bounded
// sequence witnesses the factorial-type derivative bound with constant
// max_j M_j.
inline GrowthRateFit growth_rate_fit(const std::vector<double>& ladder_linf, double t, int d) {
    if (ladder_linf.size() < 2) throw ConfigError("growth_rate_fit: need at least j = 1");
    if (!(t > 0.0)) throw ConfigError("growth_rate_fit: t must be positive");
    GrowthRateFit fit;
    for (std::size_t j = 1; j < ladder_linf.size(); ++j) {
        const double jd = static_cast<double>(j);
        const double norm = ladder_linf[j];
        if (!(norm > 0.0)) {
            fit.m_j.push_back(0.0);
            continue;
        }
        const double log_m =
            (std::log(norm) + (jd + 0.5 * d) * std::log(t) - jd * std::log(jd)) / jd;
        fit.m_j.push_back(std::exp(log_m));
    }
    std::vector<double> sorted = fit.m_j;
    std::sort(sorted.begin(), sorted.end());
    fit.max_m = sorted.back();
    fit.median_m = sorted[sorted.size() / 2];
    return fit;
}

// --------------------------------------------------------------------------
// Blow-up monitor
// --------------------------------------------------------------------------

enum class TrajectoryClass { decaying, growing, aborted_blow_up_candidate };

inline const char* to_string(TrajectoryClass c) {
    switch (c) {
        case TrajectoryClass::decaying: return "decaying";
        case TrajectoryClass::growing: return "growing";
        default: return "aborted-blow-up-candidate";
    }
}

struct BlowUpReport {
    TrajectoryClass classification = TrajectoryClass::decaying;
    double linf_slope = 0.0;           // log-log trend over the final third
    double second_moment_slope = 0.0;  // same trend for int |x|^2 rho
    double tail_amplitude = 0.0;       // spectral edge amplitude at the end
    double linf_growth_factor = 1.0;   // max ||rho||_inf over initial
};

namespace detail {

inline double second_moment(const Field& rho) {
    RealView view(rho);
    const auto& v = *view;
    const SpectralGrid& g = rho.grid();
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        auto idx = g.unflatten(i);
        double r2 = 0.0;
        for (int a = 0; a < g.dim(); ++a) r2 += g.coord(idx[a]) * g.coord(idx[a]);
        acc += r2 * v[i];
    }
    return acc * std::pow(g.spacing(), g.dim());
}

}  // namespace detail

// Classifies a trajectory by monotone-trend tests over its final third:
// an engine abort marks a blow-up candidate outright; otherwise the sign of
// the fitted log-log slope of ||rho||_inf decides growing vs decaying.
inline BlowUpReport blow_up_monitor(const Trajectory& traj) {
    if (traj.per_step.size() < 10)
        throw ConfigError("blow_up_monitor: trajectory too short (< 10 steps)");

    BlowUpReport report;
    const std::size_t n = traj.per_step.size();
    const std::size_t start = (2 * n) / 3;

    std::vector<double> xs, ys, ms;
    for (std::size_t i = start; i < n; ++i) {
        const double t = traj.per_step[i].time;
        if (!(t > 0.0)) continue;
        xs.push_back(std::log(t));
        ys.push_back(std::log(std::max(traj.per_step[i].max_value, 1e-300)));
        ms.push_back(std::log(std::max(detail::second_moment(traj.snapshots[i]), 1e-300)));
    }
    if (xs.size() >= 3) {
        report.linf_slope = detail::fit_line(xs, ys).slope;
        report.second_moment_slope = detail::fit_line(xs, ms).slope;
    }
    report.tail_amplitude = detail::spectral_edge_amplitude(traj.snapshots.back());

    double linf0 = traj.per_step.front().max_value;
    double linf_max = 0.0;
    for (const auto& s : traj.per_step) linf_max = std::max(linf_max, s.max_value);
    report.linf_growth_factor = (linf0 > 0.0) ? linf_max / linf0 : 1.0;

    if (traj.aborted) {
        report.classification = TrajectoryClass::aborted_blow_up_candidate;
    } else if (report.linf_slope > 0.0) {
        report.classification = TrajectoryClass::growing;
    } else {
        report.classification = TrajectoryClass::decaying;
    }
    return report;
}

// --------------------------------------------------------------------------
// Kahane multi-index sum
// --------------------------------------------------------------------------

struct KahaneResult {
    double lhs = 0.0;
    double ratio = 0.0;  // lhs / |kappa|^{|kappa| + max(delta, epsilon)}
};

// Exact enumeration of
//   sum_{beta + gamma = kappa} kappa!/(beta! gamma!)
//       |beta|^{|beta| + delta} |gamma|^{|gamma| + epsilon}
// with the convention 0^p = 1. Requires delta < -1/2 or epsilon < -1/2.
inline KahaneResult kahane_sum_check(const MultiIndex& kappa, double delta, double epsilon) {
    const int total = order(kappa);
    if (total < 1) throw ConfigError("kahane_sum_check: |kappa| must be >= 1");
    if (total > 20) throw ConfigError("kahane_sum_check: |kappa| beyond combinatorial budget");
    if (!(delta < -0.5) && !(epsilon < -0.5))
        throw ConfigError("kahane_sum_check: need delta < -1/2 or epsilon < -1/2");

    auto pow0 = [](double base, double expo) {
        return (base == 0.0) ? 1.0 : std::pow(base, expo);
    };

    const int d = static_cast<int>(kappa.size());
    MultiIndex beta(d, 0);
    double lhs = 0.0;
    while (true) {
        double multinom = 1.0;
        for (int a = 0; a < d; ++a) multinom *= binomial(kappa[a], beta[a]);
        const int ob = order(beta);
        const int og = total - ob;
        lhs += multinom * pow0(ob, ob + delta) * pow0(og, og + epsilon);
        // odometer over beta <= kappa
        int a = 0;
        while (a < d) {
            if (beta[a] < kappa[a]) {
                ++beta[a];
                break;
            }
            beta[a] = 0;
            ++a;
        }
        if (a == d) break;
    }
    KahaneResult r;
    r.lhs = lhs;
    r.ratio = lhs / pow0(total, total + std::max(delta, epsilon));
    return r;
}

}  // namespace mpks
