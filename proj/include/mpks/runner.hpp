#pragma once

#include <chrono>
#include <fstream>
#include <future>
#include <thread>

#include "mpks/config.hpp"
#include "mpks/diagnostics.hpp"
#include "mpks/drift.hpp"
#include "mpks/io.hpp"

namespace mpks {

struct RunReport {
    std::string config_hash;
    RunConfig config;
    fs::path run_dir;

    std::string classification = "unclassified";
    bool engine_aborted = false;
    std::string abort_reason;
    std::vector<std::string> warnings;

    int steps_recorded = 0;
    double wall_seconds = 0.0;
    double mass_initial = 0.0;
    double mass_drift = 0.0;      // max |mass(t) - mass(0)| / mass(0)
    double worst_negativity = 0.0;  // max over t of -min/max (0 when nonnegative)
    double linf_growth_factor = 1.0;

    std::vector<DecayFit> fits;
    std::vector<AnalyticityRow> radii;
    GrowthRateFit growth;
    ThetaReport theta;
    std::vector<HlsRow> hls;
    PicardDiagnostics picard;
    BlowUpReport blowup;
    bool blowup_valid = false;
};

namespace detail {

inline std::vector<double> snapshot_times(const RunConfig& c) {
    std::vector<double> ts;
    if (c.snapshots == 1) {
        ts.push_back(c.T);
    } else if (c.t_first > 0.0 && c.t_first < c.T) {
        const double r = std::pow(c.T / c.t_first, 1.0 / (c.snapshots - 1));
        for (int i = 0; i < c.snapshots; ++i) ts.push_back(c.t_first * std::pow(r, i));
        ts.back() = c.T;
    } else {
        for (int i = 1; i <= c.snapshots; ++i) ts.push_back(c.T * i / c.snapshots);
        ts.back() = c.T;
    }
    return ts;
}

inline nlohmann::json report_json(const RunReport& r) {
    nlohmann::json j;
    j["config_hash"] = r.config_hash;
    j["classification"] = r.classification;
    j["engine_aborted"] = r.engine_aborted;
    j["abort_reason"] = r.abort_reason;
    j["warnings"] = r.warnings;
    j["steps_recorded"] = r.steps_recorded;
    j["wall_seconds"] = r.wall_seconds;
    j["mass_initial"] = r.mass_initial;
    j["mass_drift"] = r.mass_drift;
    j["worst_negativity"] = r.worst_negativity;
    j["linf_growth_factor"] = r.linf_growth_factor;
    if (!r.fits.empty()) {
        nlohmann::json fits = nlohmann::json::array();
        for (const auto& f : r.fits) {
            fits.push_back({{"beta", to_string(f.beta)},
                            {"k", f.k},
                            {"q", q_label(f.q)},
                            {"slope", f.slope},
                            {"predicted", f.predicted_slope},
                            {"error", f.slope_error},
                            {"r2", f.r_squared}});
        }
        j["decay_fits"] = fits;
    }
    if (!r.radii.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& a : r.radii)
            rows.push_back({{"t", a.t},
                            {"r_space", a.r_space},
                            {"r_time", a.r_time},
                            {"gaussian_decay", a.space.gaussian_decay},
                            {"degenerate", a.space.degenerate}});
        j["analyticity"] = rows;
    }
    if (!r.growth.m_j.empty()) {
        j["growth"] = {{"m_j", r.growth.m_j},
                       {"max", r.growth.max_m},
                       {"median", r.growth.median_m}};
    }
    if (!r.theta.entries.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& e : r.theta.entries)
            rows.push_back({{"q", q_label(e.q)},
                            {"supremum", e.supremum},
                            {"t_at_supremum", e.t_at_supremum}});
        j["theta"] = {{"mass", r.theta.mass}, {"entries", rows}};
    }
    if (!r.hls.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& h : r.hls)
            rows.push_back({{"shape", h.shape},
                            {"lhs", h.result.lhs},
                            {"rhs", h.result.rhs},
                            {"ratio", h.result.ratio}});
        j["hls"] = rows;
    }
    if (r.config.engine == "picard") {
        j["picard"] = {{"converged", r.picard.converged},
                       {"aborted", r.picard.aborted},
                       {"theta_measured", r.picard.theta_measured},
                       {"theta_gate_exceeded", r.picard.theta_gate_exceeded},
                       {"iterate_gaps", r.picard.iterate_gaps},
                       {"contraction_ratios", r.picard.contraction_ratios}};
    }
    return j;
}

}  // namespace detail

// Runs one configured experiment end to end: engine, requested diagnostics,
// artifacts (config copy, trajectory binaries + JSON sidecar, diagnostic
// CSVs, report JSON) under output_dir/<config-hash>/. Deterministic given
// the config; engine aborts are recorded in the report, not thrown.
inline RunReport run_scenario(const RunConfig& cfg_in) {
    RunConfig cfg = cfg_in;
    validate_config(cfg);
    const auto t_start = std::chrono::steady_clock::now();

    RunReport report;
    report.config = cfg;
    report.config_hash = config_hash(cfg);
    report.run_dir = fs::path(cfg.output_dir) / report.config_hash;
    fs::create_directories(report.run_dir);
    {
        std::ofstream out(report.run_dir / "config.txt");
        out << serialize_config(cfg);
    }

    GridPtr grid = make_grid(cfg.dim, cfg.n_per_axis, cfg.box_length);
    Field rho0 = build_initial_datum(cfg, grid);
    report.mass_initial = rho0.integral();

    Trajectory traj;
    if (cfg.engine == "picard") {
        PicardOptions popts;
        popts.max_iters = cfg.picard_max_iters;
        popts.tol = cfg.picard_tol;
        popts.quad_nodes = cfg.picard_quad_nodes;
        popts.mesh_points = cfg.picard_mesh_points;
        auto [ptraj, diag] = picard_solve(rho0, cfg.T, popts);
        traj = std::move(ptraj);
        report.picard = diag;
        report.engine_aborted = diag.aborted;
        report.abort_reason = diag.abort_reason;
    } else {
        EtdOptions eopts;
        eopts.scheme = cfg.etd_scheme;
        eopts.drift_enabled = (cfg.engine != "heat_only");
        traj = etd_evolve(rho0, detail::snapshot_times(cfg), cfg.dt_max, eopts);
        report.engine_aborted = traj.aborted;
        report.abort_reason = traj.abort_reason;
    }
    traj.config_hash = report.config_hash;
    for (const auto& w : traj.warnings) report.warnings.push_back(w);
    report.steps_recorded = static_cast<int>(traj.times.size());

    // trajectory-level summaries
    for (const auto& s : traj.per_step) {
        if (report.mass_initial != 0.0)
            report.mass_drift = std::max(
                report.mass_drift, std::abs(s.mass - report.mass_initial) /
                                       std::abs(report.mass_initial));
        if (s.max_value > 0.0)
            report.worst_negativity =
                std::max(report.worst_negativity, -s.min_value / s.max_value);
    }

    save_trajectory(report.run_dir / "trajectory", traj);

    // classification
    if (traj.per_step.size() >= 10) {
        report.blowup = blow_up_monitor(traj);
        report.blowup_valid = true;
        report.classification = to_string(report.blowup.classification);
        report.linf_growth_factor = report.blowup.linf_growth_factor;
    } else if (report.engine_aborted) {
        report.classification = "aborted-blow-up-candidate";
    }

    const LadderOptions lopts{.drift_enabled = cfg.engine != "heat_only"};

    // requested diagnostics; individual failures are recorded, not fatal
    for (const auto& f : cfg.fits) {
        try {
            report.fits.push_back(decay_fit(traj, f.beta, f.k, f.q, f.t_lo, f.t_hi, lopts));
        } catch (const Error& e) {
            report.warnings.push_back("decay_fit(beta=" + to_string(f.beta) +
                                      ", k=" + std::to_string(f.k) + ") failed: " + e.what());
        }
    }
    if (!report.fits.empty()) {
        std::ofstream out(report.run_dir / "decay_fits.csv");
        write_decay_fit_csv(out, cfg.dim, report.fits);
    }

    if (cfg.radii_enabled) {
        LadderOptions ropts = lopts;
        for (double t : cfg.radii_times) {
            try {
                const Field& snap = traj.at_time(t);
                AnalyticityRow row;
                row.t = t;
                row.space = analyticity_radius_space(snap);
                row.r_space = row.space.r_space;
                auto ladder = time_derivative_ladder(snap, cfg.radii_k_max, ropts);
                std::vector<double> norms;
                for (const auto& lv : ladder) norms.push_back(lq_norm(lv, kInf));
                row.r_time = analyticity_radius_time(norms);
                report.radii.push_back(row);
            } catch (const Error& e) {
                report.warnings.push_back("analyticity at t=" + std::to_string(t) +
                                          " failed: " + std::string(e.what()));
            }
        }
        std::ofstream out(report.run_dir / "analyticity.csv");
        write_analyticity_csv(out, report.radii);
    }

    if (cfg.growth_enabled) {
        try {
            const Field& snap = traj.at_time(cfg.growth_time);
            auto ladder = time_derivative_ladder(snap, cfg.growth_k_max, lopts);
            std::vector<double> norms;
            for (const auto& lv : ladder) norms.push_back(lq_norm(lv, kInf));
            report.growth = growth_rate_fit(norms, cfg.growth_time, cfg.dim);
        } catch (const Error& e) {
            report.warnings.push_back(std::string("growth_rate_fit failed: ") + e.what());
        }
    }

    if (cfg.theta_enabled) {
        try {
            std::vector<double> ts;
            const double floor = 4.0 * grid->spacing() * grid->spacing();
            const double lo = std::max(floor, 1e-4 * cfg.T);
            const double r = std::pow(cfg.T / lo, 1.0 / std::max(1, cfg.theta_samples - 1));
            for (int i = 0; i < cfg.theta_samples; ++i) ts.push_back(lo * std::pow(r, i));
            report.theta = theta_functional(rho0, cfg.T, cfg.theta_q, ts);
            std::ofstream out(report.run_dir / "theta.csv");
            write_theta_csv(out, report.theta);
        } catch (const Error& e) {
            report.warnings.push_back(std::string("theta_functional failed: ") + e.what());
        }
    }

    if (cfg.hls_enabled) {
        try {
            DriftMultiplier mult = build_drift_multiplier(grid);
            report.hls.push_back({"initial", hls_check(mult, rho0)});
            report.hls.push_back({"final", hls_check(mult, traj.snapshots.back())});
            for (double lambda : {0.5, 2.0}) {
                Field dil = make_gaussian(grid, cfg.mass, cfg.sigma / lambda, cfg.center);
                report.hls.push_back(
                    {"gaussian_dilated_" + detail::fmt_double(lambda), hls_check(mult, dil)});
            }
            std::ofstream out(report.run_dir / "hls.csv");
            write_hls_csv(out, report.hls);
        } catch (const Error& e) {
            report.warnings.push_back(std::string("hls_check failed: ") + e.what());
        }
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    {
        std::ofstream out(report.run_dir / "report.json");
        out << detail::report_json(report).dump(2) << '\n';
    }
    return report;
}

// --------------------------------------------------------------------------
// Sweeps
// --------------------------------------------------------------------------

struct SweepAxis {
    std::string key;
    std::vector<std::string> values;
};

struct SweepResult {
    std::vector<RunReport> reports;                 // successful runs
    std::vector<std::pair<std::string, std::string>> failures;  // (point, error)
    std::string summary_csv;
};

// Cartesian product of the axes over the base config; independent points run
// concurrently. Individual failures are recorded and the sweep continues.
inline SweepResult sweep(const RunConfig& base, const std::vector<SweepAxis>& axes,
                         int max_parallel = 0, std::size_t max_points = 512) {
    std::size_t total = 1;
    for (const auto& ax : axes) {
        if (ax.values.empty()) throw ConfigError("sweep: axis '" + ax.key + "' has no values");
        total *= ax.values.size();
    }
    if (total > max_points) throw ConfigError("sweep: grid exceeds the configured cap");

    auto kv_base = to_key_values(base);
    std::vector<std::map<std::string, std::string>> points;
    std::vector<std::string> labels;
    for (std::size_t p = 0; p < total; ++p) {
        auto kv = kv_base;
        std::string label;
        std::size_t rest = p;
        for (const auto& ax : axes) {
            const std::string& val = ax.values[rest % ax.values.size()];
            rest /= ax.values.size();
            kv[ax.key] = val;
            if (!label.empty()) label += ' ';
            label += ax.key + "=" + val;
        }
        points.push_back(std::move(kv));
        labels.push_back(label.empty() ? "base" : label);
    }

    if (max_parallel <= 0)
        max_parallel = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    struct Outcome {
        bool ok = false;
        RunReport report;
        std::string error;
    };
    std::vector<Outcome> outcomes(total);
    std::size_t next = 0;
    while (next < total) {
        const std::size_t batch = std::min<std::size_t>(max_parallel, total - next);
        std::vector<std::future<void>> futs;
        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t idx = next + b;
            futs.push_back(std::async(std::launch::async, [&outcomes, &points, idx] {
                try {
                    RunConfig cfg = config_from_key_values(points[idx]);
                    outcomes[idx].report = run_scenario(cfg);
                    outcomes[idx].ok = true;
                } catch (const std::exception& e) {
                    outcomes[idx].error = e.what();
                }
            }));
        }
        for (auto& f : futs) f.get();
        next += batch;
    }

    SweepResult result;
    std::ostringstream csv;
    csv << "point,hash,classification,aborted,mass_drift,linf_growth,first_fit_slope\n";
    for (std::size_t p = 0; p < total; ++p) {
        if (!outcomes[p].ok) {
            result.failures.emplace_back(labels[p], outcomes[p].error);
            csv << '"' << labels[p] << "\",,failed,,,,\n";
            continue;
        }
        const RunReport& r = outcomes[p].report;
        csv << '"' << labels[p] << "\"," << r.config_hash << ',' << r.classification << ','
            << (r.engine_aborted ? 1 : 0) << ',' << detail::csv_num(r.mass_drift) << ','
            << detail::csv_num(r.linf_growth_factor) << ','
            << (r.fits.empty() ? "" : detail::csv_num(r.fits.front().slope)) << '\n';
        result.reports.push_back(std::move(outcomes[p].report));
    }
    result.summary_csv = csv.str();
    return result;
}

}  // namespace mpks
