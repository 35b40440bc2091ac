// Command-line surface of the mPKS harness.
//
// Exit codes: 0 success, 2 config error, 3 engine abort, 4 diagnostic
// failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "mpks/mpks.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitEngine = 3;
constexpr int kExitDiagnostic = 4;

mpks::RunConfig resolve_config(const std::string& config_path, const std::string& preset,
                               const std::vector<std::string>& overrides) {
    mpks::RunConfig cfg;
    if (!preset.empty()) {
        cfg = mpks::preset_config(preset);
    } else if (!config_path.empty()) {
        cfg = mpks::load_config(config_path);
    } else {
        throw mpks::ConfigError("no config file or --preset given");
    }
    if (!overrides.empty()) {
        auto kv = mpks::to_key_values(cfg);
        for (const auto& ov : overrides) {
            const auto eq = ov.find('=');
            if (eq == std::string::npos)
                throw mpks::ConfigError("--set expects key=value, got '" + ov + "'");
            kv[ov.substr(0, eq)] = ov.substr(eq + 1);
        }
        cfg = mpks::config_from_key_values(std::move(kv));
    }
    return cfg;
}

void print_report_summary(const mpks::RunReport& r) {
    std::cout << "run " << r.config_hash << " -> " << r.run_dir.string() << "\n"
              << "  classification: " << r.classification << "\n"
              << "  steps: " << r.steps_recorded << ", wall: " << r.wall_seconds << " s\n"
              << "  mass drift: " << r.mass_drift
              << ", worst negativity: " << r.worst_negativity << "\n";
    for (const auto& f : r.fits) {
        std::cout << "  fit beta=" << mpks::to_string(f.beta) << " k=" << f.k
                  << " q=" << mpks::q_label(f.q) << ": slope " << f.slope << " (predicted "
                  << f.predicted_slope << ", error " << f.slope_error << ")\n";
    }
    for (const auto& a : r.radii) {
        std::cout << "  radii t=" << a.t << ": r_space " << a.r_space << ", r_time " << a.r_time
                  << "\n";
    }
    if (r.engine_aborted) std::cout << "  engine abort: " << r.abort_reason << "\n";
    for (const auto& w : r.warnings) std::cout << "  warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pseudo-spectral mPKS simulator and verification harness"};
    app.require_subcommand(1);

    // --- simulate ---
    auto* sim = app.add_subcommand("simulate", "run one scenario from a config file or preset");
    std::string sim_config, sim_preset;
    std::vector<std::string> sim_sets;
    sim->add_option("config", sim_config, "config file (flat key = value text)");
    sim->add_option("--preset", sim_preset, "use a built-in preset instead of a file");
    sim->add_option("--set", sim_sets, "override a config key, e.g. --set time.T=4");

    // --- sweep ---
    auto* sw = app.add_subcommand("sweep", "run the Cartesian product of parameter axes");
    std::string sw_config, sw_preset, sw_out;
    std::vector<std::string> sw_sets, sw_axes;
    int sw_parallel = 0;
    sw->add_option("config", sw_config, "base config file");
    sw->add_option("--preset", sw_preset, "base preset");
    sw->add_option("--set", sw_sets, "override a base config key");
    sw->add_option("--axis", sw_axes, "axis spec key=v1,v2,..., repeatable")->required();
    sw->add_option("--parallel", sw_parallel, "max concurrent runs (default: hardware)");
    sw->add_option("--summary", sw_out, "write the combined summary CSV here");

    // --- verify-kernel ---
    auto* vk = app.add_subcommand("verify-kernel", "check the heat-kernel derivative bounds");
    int vk_dim = 2, vk_beta_max = 6, vk_k_max = 3;
    std::vector<std::string> vk_q;
    std::vector<double> vk_t;
    std::string vk_out;
    vk->add_option("--dim", vk_dim, "spatial dimension (1-3)");
    vk->add_option("--beta-max", vk_beta_max, "largest |beta|");
    vk->add_option("--k-max", vk_k_max, "largest time-derivative order");
    vk->add_option("--q", vk_q, "L^q exponents (numbers or 'inf')");
    vk->add_option("--t", vk_t, "times to tabulate");
    vk->add_option("--out", vk_out, "output CSV path (default stdout)");

    // --- fit-decay ---
    auto* fd = app.add_subcommand("fit-decay", "decay-exponent fit on a stored trajectory");
    std::string fd_traj, fd_beta = "0 0", fd_q = "inf", fd_out;
    int fd_k = 0;
    std::vector<double> fd_window;
    fd->add_option("trajectory", fd_traj, "trajectory directory")->required();
    fd->add_option("--beta", fd_beta, "multi-index, space separated");
    fd->add_option("--k", fd_k, "time-derivative order");
    fd->add_option("--q", fd_q, "norm exponent (number or 'inf')");
    fd->add_option("--window", fd_window, "fit window t_lo t_hi")->expected(2);
    fd->add_option("--out", fd_out, "output CSV path (default stdout)");

    // --- presets ---
    auto* pr = app.add_subcommand("presets", "list built-in scenario presets");
    std::string pr_write;
    pr->add_option("--write-config", pr_write, "print the named preset as a config file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            mpks::RunConfig cfg = resolve_config(sim_config, sim_preset, sim_sets);
            mpks::RunReport report = mpks::run_scenario(cfg);
            print_report_summary(report);
            return report.engine_aborted ? kExitEngine : kExitOk;
        }

        if (sw->parsed()) {
            mpks::RunConfig base = resolve_config(sw_config, sw_preset, sw_sets);
            std::vector<mpks::SweepAxis> axes;
            for (const auto& spec : sw_axes) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos)
                    throw mpks::ConfigError("--axis expects key=v1,v2,..., got '" + spec + "'");
                mpks::SweepAxis ax;
                ax.key = spec.substr(0, eq);
                std::string vals = spec.substr(eq + 1);
                std::size_t pos = 0;
                while (pos != std::string::npos) {
                    const auto comma = vals.find(',', pos);
                    ax.values.push_back(vals.substr(
                        pos, comma == std::string::npos ? std::string::npos : comma - pos));
                    pos = (comma == std::string::npos) ? std::string::npos : comma + 1;
                }
                axes.push_back(std::move(ax));
            }
            mpks::SweepResult result = mpks::sweep(base, axes, sw_parallel);
            if (!sw_out.empty()) {
                std::ofstream out(sw_out);
                out << result.summary_csv;
            } else {
                std::cout << result.summary_csv;
            }
            for (const auto& [point, err] : result.failures)
                std::cerr << "failed: " << point << ": " << err << "\n";
            std::cout << result.reports.size() << " runs completed, "
                      << result.failures.size() << " failed\n";
            return result.failures.empty() ? kExitOk : kExitEngine;
        }

        if (vk->parsed()) {
            std::vector<double> qs;
            for (const auto& s : vk_q)
                qs.push_back(s == "inf" ? mpks::kInf : mpks::detail::parse_double(s));
            if (qs.empty()) qs = {1.0, 4.0 / 3.0, 2.0, 4.0, mpks::kInf};
            if (vk_t.empty()) vk_t = {0.1, 1.0, 10.0};
            mpks::KernelBoundReport rep =
                mpks::verify_kernel_bounds(vk_dim, vk_beta_max, vk_k_max, qs, vk_t);
            if (!vk_out.empty()) {
                std::ofstream out(vk_out);
                mpks::write_csv(rep, out);
            } else {
                mpks::write_csv(rep, std::cout);
            }
            std::cerr << "implied C0 = " << rep.implied_C0 << " (coarse "
                      << rep.implied_C0_coarse << "), implied M0 = " << rep.implied_M0 << "\n";
            double worst = 0.0;
            for (const auto& e : rep.entries) worst = std::max(worst, e.ratio);
            std::cerr << "max measured/bound ratio = " << worst << "\n";
            return worst <= 1.0 ? kExitOk : kExitDiagnostic;
        }

        if (fd->parsed()) {
            mpks::Trajectory traj = mpks::load_trajectory(fd_traj);
            const int dim = traj.snapshots.front().grid().dim();
            mpks::MultiIndex beta = mpks::detail::parse_multi_index(fd_beta, dim);
            const double q = (fd_q == "inf") ? mpks::kInf : mpks::detail::parse_double(fd_q);
            double t_lo, t_hi;
            if (fd_window.size() == 2) {
                t_lo = fd_window[0];
                t_hi = fd_window[1];
            } else {
                t_lo = traj.times.size() > 1 ? traj.times[1] : traj.times[0];
                t_hi = traj.times.back();
            }
            mpks::LadderOptions lopts;
            lopts.drift_enabled = (traj.scheme_tag != "heat_only");
            mpks::DecayFit fit = mpks::decay_fit(traj, beta, fd_k, q, t_lo, t_hi, lopts);
            std::vector<mpks::DecayFit> fits{fit};
            if (!fd_out.empty()) {
                std::ofstream out(fd_out);
                mpks::write_decay_fit_csv(out, dim, fits);
            } else {
                mpks::write_decay_fit_csv(std::cout, dim, fits);
            }
            return kExitOk;
        }

        if (pr->parsed()) {
            if (!pr_write.empty()) {
                std::cout << mpks::serialize_config(mpks::preset_config(pr_write));
                return kExitOk;
            }
            for (const auto& p : mpks::preset_list())
                std::cout << p.name << "\n    " << p.description << "\n";
            return kExitOk;
        }
    } catch (const mpks::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const mpks::EngineAbort& e) {
        std::cerr << "engine abort: " << e.what() << "\n";
        return kExitEngine;
    } catch (const mpks::DiagnosticError& e) {
        std::cerr << "diagnostic failure: " << e.what() << "\n";
        return kExitDiagnostic;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
