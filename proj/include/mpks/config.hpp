#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mpks/errors.hpp"
#include "mpks/field.hpp"
#include "mpks/heat.hpp"
#include "mpks/shapes.hpp"

namespace mpks {

// One requested decay fit.
struct FitRequest {
    MultiIndex beta;
    int k = 0;
    double q = kInf;
    double t_lo = 0.0;
    double t_hi = 0.0;
};

// Full description of one experiment. Serializes to a flat key-value text
// file with dotted sections; the round trip is lossless.
struct RunConfig {
    int dim = 2;
    int n_per_axis = 128;
    double box_length = 32.0;

    std::string preset_name;  // informational: which preset seeded this config

    // initial datum
    std::string initial = "gaussian";  // gaussian | two_bump | annulus
    double mass = 1.0;
    double sigma = 1.0;                          // gaussian / two_bump width
    std::array<double, 3> center{0.0, 0.0, 0.0};  // gaussian only
    double separation = 4.0;                      // two_bump
    double radius = 2.0, width = 0.5;             // annulus

    // engine
    std::string engine = "etd";  // etd | picard | heat_only
    std::string etd_scheme = "strang";
    double T = 1.0;
    double dt_max = 0.02;
    int snapshots = 12;
    double t_first = 0.0;  // 0: linear grid over (0, T]; >0: geometric from t_first

    // picard
    int picard_max_iters = 15;
    double picard_tol = 1e-8;
    int picard_quad_nodes = 32;
    int picard_mesh_points = 64;

    // diagnostics
    std::vector<FitRequest> fits;
    bool radii_enabled = false;
    int radii_k_max = 6;
    std::vector<double> radii_times;
    bool growth_enabled = false;
    int growth_k_max = 6;
    double growth_time = 1.0;
    bool theta_enabled = false;
    std::vector<double> theta_q{1.0, 2.0, kInf};
    int theta_samples = 16;
    bool hls_enabled = false;

    std::string output_dir = "runs";
    std::uint64_t seed = 0;  // randomized test fields only
};

namespace detail {

inline std::string fmt_double(double v) {
    if (std::isinf(v)) return "inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline double parse_double(const std::string& s) {
    if (s == "inf") return kInf;
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: cannot parse number '" + s + "'");
    }
    if (pos != s.size()) throw ConfigError("config: trailing junk in number '" + s + "'");
    return v;
}

inline std::vector<double> parse_doubles(const std::string& s) {
    std::istringstream in(s);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_double(tok));
    return out;
}

inline std::string fmt_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += fmt_double(v[i]);
    }
    return out;
}

inline MultiIndex parse_multi_index(const std::string& s, int dim) {
    std::istringstream in(s);
    MultiIndex beta;
    int b = 0;
    while (in >> b) {
        if (b < 0) throw ConfigError("config: negative multi-index entry");
        beta.push_back(b);
    }
    if (static_cast<int>(beta.size()) != dim)
        throw ConfigError("config: multi-index '" + s + "' does not match dim");
    return beta;
}

}  // namespace detail

// Canonical flat serialization, keys sorted; the config hash is FNV-1a over
// this text, so identical configs map to identical run directories.
inline std::map<std::string, std::string> to_key_values(const RunConfig& c) {
    using detail::fmt_double;
    std::map<std::string, std::string> kv;
    kv["dim"] = std::to_string(c.dim);
    kv["grid.n"] = std::to_string(c.n_per_axis);
    kv["grid.box_length"] = fmt_double(c.box_length);
    if (!c.preset_name.empty()) kv["preset"] = c.preset_name;
    kv["initial.kind"] = c.initial;
    kv["initial.mass"] = fmt_double(c.mass);
    kv["initial.sigma"] = fmt_double(c.sigma);
    kv["initial.center"] = detail::fmt_doubles({c.center.begin(), c.center.begin() + c.dim});
    kv["initial.separation"] = fmt_double(c.separation);
    kv["initial.radius"] = fmt_double(c.radius);
    kv["initial.width"] = fmt_double(c.width);
    kv["engine"] = c.engine;
    kv["etd.scheme"] = c.etd_scheme;
    kv["time.T"] = fmt_double(c.T);
    kv["time.dt_max"] = fmt_double(c.dt_max);
    kv["time.snapshots"] = std::to_string(c.snapshots);
    kv["time.t_first"] = fmt_double(c.t_first);
    kv["picard.max_iters"] = std::to_string(c.picard_max_iters);
    kv["picard.tol"] = fmt_double(c.picard_tol);
    kv["picard.quad_nodes"] = std::to_string(c.picard_quad_nodes);
    kv["picard.mesh_points"] = std::to_string(c.picard_mesh_points);
    kv["fit.count"] = std::to_string(c.fits.size());
    for (std::size_t i = 0; i < c.fits.size(); ++i) {
        const std::string p = "fit." + std::to_string(i) + ".";
        std::string beta;
        for (std::size_t a = 0; a < c.fits[i].beta.size(); ++a) {
            if (a) beta += ' ';
            beta += std::to_string(c.fits[i].beta[a]);
        }
        kv[p + "beta"] = beta;
        kv[p + "k"] = std::to_string(c.fits[i].k);
        kv[p + "q"] = fmt_double(c.fits[i].q);
        kv[p + "window"] = detail::fmt_doubles({c.fits[i].t_lo, c.fits[i].t_hi});
    }
    kv["radii.enabled"] = c.radii_enabled ? "1" : "0";
    kv["radii.k_max"] = std::to_string(c.radii_k_max);
    kv["radii.times"] = detail::fmt_doubles(c.radii_times);
    kv["growth.enabled"] = c.growth_enabled ? "1" : "0";
    kv["growth.k_max"] = std::to_string(c.growth_k_max);
    kv["growth.time"] = fmt_double(c.growth_time);
    kv["theta.enabled"] = c.theta_enabled ? "1" : "0";
    kv["theta.q_list"] = detail::fmt_doubles(c.theta_q);
    kv["theta.samples"] = std::to_string(c.theta_samples);
    kv["hls.enabled"] = c.hls_enabled ? "1" : "0";
    kv["output_dir"] = c.output_dir;
    kv["seed"] = std::to_string(c.seed);
    return kv;
}

inline std::string serialize_config(const RunConfig& c) {
    std::string out;
    for (const auto& [k, v] : to_key_values(c)) out += k + " = " + v + "\n";
    return out;
}

inline void validate_config(const RunConfig& c) {
    if (c.dim < 1 || c.dim > 3) throw ConfigError("config: dim must be 1..3");
    if (c.n_per_axis < 8 || c.n_per_axis % 2)
        throw ConfigError("config: grid.n must be even and >= 8");
    if (!(c.box_length > 0.0)) throw ConfigError("config: grid.box_length must be positive");
    if (c.initial != "gaussian" && c.initial != "two_bump" && c.initial != "annulus")
        throw ConfigError("config: unknown initial.kind '" + c.initial + "'");
    if (!(c.mass > 0.0)) throw ConfigError("config: initial.mass must be positive");
    if (!(c.sigma > 0.0)) throw ConfigError("config: initial.sigma must be positive");
    if (c.initial == "annulus" && (!(c.radius > 0.0) || !(c.width > 0.0)))
        throw ConfigError("config: annulus radius/width must be positive");
    if (c.engine != "etd" && c.engine != "picard" && c.engine != "heat_only")
        throw ConfigError("config: unknown engine '" + c.engine + "'");
    if (c.etd_scheme != "strang" && c.etd_scheme != "exp_euler")
        throw ConfigError("config: unknown etd.scheme '" + c.etd_scheme + "'");
    if (!(c.T > 0.0)) throw ConfigError("config: time.T must be positive");
    if (!(c.dt_max > 0.0)) throw ConfigError("config: time.dt_max must be positive");
    if (c.snapshots < 1) throw ConfigError("config: time.snapshots must be >= 1");
    if (c.t_first < 0.0 || c.t_first > c.T)
        throw ConfigError("config: time.t_first must lie in [0, T]");
    for (const auto& f : c.fits) {
        if (static_cast<int>(f.beta.size()) != c.dim)
            throw ConfigError("config: fit multi-index does not match dim");
        if (f.k < 0 || f.k > 8) throw ConfigError("config: fit k must be in [0, 8]");
        if (!(f.q >= 1.0)) throw ConfigError("config: fit q must be in [1, inf]");
        if (!(f.t_lo > 0.0) || !(f.t_lo < f.t_hi)) throw ConfigError("config: bad fit window");
    }
    for (double t : c.radii_times)
        if (!(t > 0.0)) throw ConfigError("config: radii.times must be positive");
}

inline RunConfig config_from_key_values(std::map<std::string, std::string> kv) {
    RunConfig c;
    auto take = [&kv](const std::string& key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    using detail::parse_double;

    if (auto v = take("dim")) c.dim = static_cast<int>(parse_double(*v));
    if (auto v = take("grid.n")) c.n_per_axis = static_cast<int>(parse_double(*v));
    if (auto v = take("grid.box_length")) c.box_length = parse_double(*v);
    if (auto v = take("preset")) c.preset_name = *v;
    if (auto v = take("initial.kind")) c.initial = *v;
    if (auto v = take("initial.mass")) c.mass = parse_double(*v);
    if (auto v = take("initial.sigma")) c.sigma = parse_double(*v);
    if (auto v = take("initial.center")) {
        auto vals = detail::parse_doubles(*v);
        if (static_cast<int>(vals.size()) != c.dim)
            throw ConfigError("config: initial.center does not match dim");
        for (std::size_t i = 0; i < vals.size(); ++i) c.center[i] = vals[i];
    }
    if (auto v = take("initial.separation")) c.separation = parse_double(*v);
    if (auto v = take("initial.radius")) c.radius = parse_double(*v);
    if (auto v = take("initial.width")) c.width = parse_double(*v);
    if (auto v = take("engine")) c.engine = *v;
    if (auto v = take("etd.scheme")) c.etd_scheme = *v;
    if (auto v = take("time.T")) c.T = parse_double(*v);
    if (auto v = take("time.dt_max")) c.dt_max = parse_double(*v);
    if (auto v = take("time.snapshots")) c.snapshots = static_cast<int>(parse_double(*v));
    if (auto v = take("time.t_first")) c.t_first = parse_double(*v);
    if (auto v = take("picard.max_iters")) c.picard_max_iters = static_cast<int>(parse_double(*v));
    if (auto v = take("picard.tol")) c.picard_tol = parse_double(*v);
    if (auto v = take("picard.quad_nodes"))
        c.picard_quad_nodes = static_cast<int>(parse_double(*v));
    if (auto v = take("picard.mesh_points"))
        c.picard_mesh_points = static_cast<int>(parse_double(*v));

    int fit_count = 0;
    if (auto v = take("fit.count")) fit_count = static_cast<int>(parse_double(*v));
    for (int i = 0; i < fit_count; ++i) {
        const std::string p = "fit." + std::to_string(i) + ".";
        FitRequest f;
        auto beta = take(p + "beta");
        if (!beta) throw ConfigError("config: missing " + p + "beta");
        f.beta = detail::parse_multi_index(*beta, c.dim);
        if (auto v = take(p + "k")) f.k = static_cast<int>(parse_double(*v));
        if (auto v = take(p + "q")) f.q = parse_double(*v);
        if (auto v = take(p + "window")) {
            auto w = detail::parse_doubles(*v);
            if (w.size() != 2) throw ConfigError("config: fit window needs two numbers");
            f.t_lo = w[0];
            f.t_hi = w[1];
        }
        c.fits.push_back(std::move(f));
    }

    if (auto v = take("radii.enabled")) c.radii_enabled = (*v == "1" || *v == "true");
    if (auto v = take("radii.k_max")) c.radii_k_max = static_cast<int>(parse_double(*v));
    if (auto v = take("radii.times")) c.radii_times = detail::parse_doubles(*v);
    if (auto v = take("growth.enabled")) c.growth_enabled = (*v == "1" || *v == "true");
    if (auto v = take("growth.k_max")) c.growth_k_max = static_cast<int>(parse_double(*v));
    if (auto v = take("growth.time")) c.growth_time = parse_double(*v);
    if (auto v = take("theta.enabled")) c.theta_enabled = (*v == "1" || *v == "true");
    if (auto v = take("theta.q_list")) c.theta_q = detail::parse_doubles(*v);
    if (auto v = take("theta.samples")) c.theta_samples = static_cast<int>(parse_double(*v));
    if (auto v = take("hls.enabled")) c.hls_enabled = (*v == "1" || *v == "true");
    if (auto v = take("output_dir")) c.output_dir = *v;
    if (auto v = take("seed")) c.seed = static_cast<std::uint64_t>(parse_double(*v));

    if (!kv.empty()) throw ConfigError("config: unknown key '" + kv.begin()->first + "'");
    validate_config(c);
    return c;
}

inline RunConfig parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string{};
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " has no '='");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key at line " + std::to_string(lineno));
        if (!kv.emplace(key, value).second)
            throw ConfigError("config: duplicate key '" + key + "'");
    }
    return config_from_key_values(std::move(kv));
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

inline std::string config_hash(const RunConfig& c) {
    // FNV-1a over the canonical serialization
    const std::string text = serialize_config(c);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

inline Field build_initial_datum(const RunConfig& c, GridPtr grid) {
    if (c.initial == "gaussian") return make_gaussian(std::move(grid), c.mass, c.sigma, c.center);
    if (c.initial == "two_bump")
        return make_two_bump(std::move(grid), c.mass, c.sigma, c.separation);
    return make_annulus(std::move(grid), c.mass, c.radius, c.width);
}

// --------------------------------------------------------------------------
// Presets: the paper's regimes as ready-to-run configs
// --------------------------------------------------------------------------

struct Preset {
    std::string name;
    std::string description;
    RunConfig config;
};

inline std::vector<Preset> preset_list() {
    std::vector<Preset> out;

    {
        // Global small-mass regime: mass well below the 2D threshold, long
        // horizon, full diagnostics.
        RunConfig c;
        c.preset_name = "small_mass_2d";
        c.dim = 2;
        c.n_per_axis = 512;
        c.box_length = 64.0;
        c.initial = "gaussian";
        c.mass = 0.1 * 8.0 * M_PI;
        c.sigma = 0.4;
        c.engine = "etd";
        c.T = 16.0;
        c.dt_max = 0.04;
        c.snapshots = 13;  // geometric from 1 to 16 landing on 2, 4, 8
        c.t_first = 1.0;
        c.fits = {{{0, 0}, 0, kInf, 1.0, 16.0},      {{0, 0}, 0, 2.0, 1.0, 16.0},
                  {{0, 0}, 0, 4.0, 1.0, 16.0},       {{1, 0}, 0, kInf, 1.0, 16.0},
                  {{0, 0}, 1, kInf, 1.0, 16.0}};
        c.radii_enabled = true;
        c.radii_times = {1.0, 2.0, 4.0, 8.0, 16.0};
        c.growth_enabled = true;
        c.growth_time = 1.0;
        c.theta_enabled = true;
        c.theta_q = {1.0, 4.0 / 3.0, 2.0, kInf};
        out.push_back({c.preset_name,
                       "2D Gaussian at 10% of the 8 pi threshold: global decay, fits, radii",
                       c});
    }
    {
        RunConfig c;
        c.preset_name = "small_mass_1d";
        c.dim = 1;
        c.n_per_axis = 1024;
        c.box_length = 64.0;
        c.initial = "gaussian";
        c.mass = 0.5;
        c.sigma = 0.4;
        c.engine = "etd";
        c.T = 16.0;
        c.dt_max = 0.04;
        c.snapshots = 16;
        c.t_first = 1.0;
        c.fits = {{{0}, 0, kInf, 1.0, 16.0}, {{1}, 0, kInf, 1.0, 16.0}};
        out.push_back({c.preset_name, "1D small-mass decay run", c});
    }
    {
        RunConfig c;
        c.preset_name = "small_mass_3d";
        c.dim = 3;
        c.n_per_axis = 64;
        c.box_length = 20.0;
        c.initial = "gaussian";
        c.mass = 0.5;
        c.sigma = 0.7;
        c.engine = "etd";
        c.T = 1.5;
        c.dt_max = 0.01;
        c.snapshots = 10;
        c.t_first = 0.1;
        out.push_back({c.preset_name, "3D small-mass run within the box horizon", c});
    }
    {
        // Contraction-friendly interval for the Picard engine.
        RunConfig c;
        c.preset_name = "picard_contraction_2d";
        c.dim = 2;
        c.n_per_axis = 192;
        c.box_length = 24.0;
        c.initial = "gaussian";
        c.mass = 0.05 * 8.0 * M_PI;
        c.sigma = 1.0;
        c.engine = "picard";
        c.T = 0.5;
        c.dt_max = 0.01;
        c.picard_mesh_points = 48;
        c.theta_enabled = true;
        c.theta_q = {1.0, 4.0 / 3.0};
        out.push_back({c.preset_name, "small-mass 2D problem where the fixed point contracts",
                       c});
    }
    {
        // Moderate mass on a short window: the bounded-solution regime.
        RunConfig c;
        c.preset_name = "bounded_window_2d";
        c.dim = 2;
        c.n_per_axis = 256;
        c.box_length = 32.0;
        c.initial = "gaussian";
        c.mass = 0.5 * 8.0 * M_PI;
        c.sigma = 0.85;
        c.engine = "etd";
        c.T = 2.0;
        c.dt_max = 0.01;
        c.snapshots = 20;
        c.t_first = 0.05;
        out.push_back({c.preset_name,
                       "moderate mass, short window: bounded-solution regime", c});
    }
    {
        // Above the 2D threshold: aggregation wins, run ends as a blow-up
        // candidate.
        RunConfig c;
        c.preset_name = "supercritical_2d";
        c.dim = 2;
        c.n_per_axis = 256;
        c.box_length = 16.0;
        c.initial = "gaussian";
        c.mass = 1.25 * 8.0 * M_PI;
        c.sigma = 1.0;
        c.engine = "etd";
        c.T = 4.0;
        c.dt_max = 0.002;
        c.snapshots = 60;
        c.t_first = 0.02;
        out.push_back({c.preset_name, "mass 25% above 8 pi: finite-time blow-up candidate", c});
    }
    {
        // Mass exactly at 2 d^2 pi (= 8 pi in 2D): the global-extension
        // boundary used as a scenario parameter.
        RunConfig c;
        c.preset_name = "mpks_boundary_2d";
        c.dim = 2;
        c.n_per_axis = 256;
        c.box_length = 32.0;
        c.initial = "gaussian";
        c.mass = 2.0 * 2.0 * 2.0 * M_PI;
        c.sigma = 1.0;
        c.engine = "etd";
        c.T = 2.0;
        c.dt_max = 0.005;
        c.snapshots = 20;
        c.t_first = 0.05;
        out.push_back({c.preset_name, "mass at the 2 d^2 pi boundary (equals 8 pi in 2D)", c});
    }
    {
        RunConfig c;
        c.preset_name = "mpks_boundary_3d";
        c.dim = 3;
        c.n_per_axis = 64;
        c.box_length = 20.0;
        c.initial = "gaussian";
        c.mass = 2.0 * 9.0 * M_PI;
        c.sigma = 1.0;
        c.engine = "etd";
        c.T = 1.0;
        c.dt_max = 0.005;
        c.snapshots = 12;
        c.t_first = 0.05;
        out.push_back({c.preset_name, "3D run at the 2 d^2 pi mass boundary", c});
    }
    {
        RunConfig c;
        c.preset_name = "heat_oracle_2d";
        c.dim = 2;
        c.n_per_axis = 128;
        c.box_length = 40.0;
        c.initial = "gaussian";
        c.mass = 2.0;
        c.sigma = 1.0;
        c.engine = "heat_only";
        c.T = 1.0;
        c.dt_max = 0.25;
        c.snapshots = 4;
        out.push_back({c.preset_name, "pure diffusion against the closed-form Gaussian", c});
    }
    return out;
}

inline RunConfig preset_config(const std::string& name) {
    for (const auto& p : preset_list())
        if (p.name == name) return p.config;
    throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace mpks
