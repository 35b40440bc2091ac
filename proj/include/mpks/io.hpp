#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "mpks/diagnostics.hpp"
#include "mpks/evolution.hpp"
#include "mpks/heat.hpp"

namespace mpks {

namespace fs = std::filesystem;

// --------------------------------------------------------------------------
// Snapshot binary format: header (uint32 dim, uint32 n, float64 L, float64
// time) followed by n^dim row-major float64 samples, little-endian.
// --------------------------------------------------------------------------

inline void write_snapshot(const fs::path& path, const Field& f, double time) {
    detail::RealView view(f);
    const SpectralGrid& g = f.grid();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_snapshot: cannot open " + path.string());
    const std::uint32_t dim = static_cast<std::uint32_t>(g.dim());
    const std::uint32_t n = static_cast<std::uint32_t>(g.n_per_axis());
    const double L = g.box_length();
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(&L), 8);
    out.write(reinterpret_cast<const char*>(&time), 8);
    out.write(reinterpret_cast<const char*>((*view).data()),
              static_cast<std::streamsize>((*view).size() * sizeof(double)));
    if (!out) throw Error("write_snapshot: write failed for " + path.string());
}

inline std::pair<Field, double> read_snapshot(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("read_snapshot: cannot open " + path.string());
    std::uint32_t dim = 0, n = 0;
    double L = 0.0, time = 0.0;
    in.read(reinterpret_cast<char*>(&dim), 4);
    in.read(reinterpret_cast<char*>(&n), 4);
    in.read(reinterpret_cast<char*>(&L), 8);
    in.read(reinterpret_cast<char*>(&time), 8);
    if (!in) throw Error("read_snapshot: truncated header in " + path.string());
    GridPtr g = make_grid(static_cast<int>(dim), static_cast<int>(n), L);
    std::vector<double> v(g->size());
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw Error("read_snapshot: truncated payload in " + path.string());
    return {Field::from_real(std::move(g), std::move(v)), time};
}

// --------------------------------------------------------------------------
// Trajectory directory: snapshot_NNNN.bin files plus trajectory.json sidecar
// --------------------------------------------------------------------------

inline void save_trajectory(const fs::path& dir, const Trajectory& traj) {
    fs::create_directories(dir);
    nlohmann::json side;
    side["scheme_tag"] = traj.scheme_tag;
    side["config_hash"] = traj.config_hash;
    side["aborted"] = traj.aborted;
    side["abort_reason"] = traj.abort_reason;
    side["warnings"] = traj.warnings;
    side["times"] = traj.times;
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : traj.per_step) {
        nlohmann::json row;
        row["time"] = s.time;
        row["mass"] = s.mass;
        row["min"] = s.min_value;
        row["max"] = s.max_value;
        nlohmann::json lq;
        for (const auto& [q, v] : s.lq) lq[q_label(q)] = v;
        row["lq"] = lq;
        steps.push_back(row);
    }
    side["per_step"] = steps;
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
        std::ostringstream name;
        name << "snapshot_" << std::setw(4) << std::setfill('0') << i << ".bin";
        write_snapshot(dir / name.str(), traj.snapshots[i], traj.times[i]);
        files.push_back(name.str());
    }
    side["snapshots"] = files;
    std::ofstream out(dir / "trajectory.json");
    out << side.dump(2) << '\n';
}

inline Trajectory load_trajectory(const fs::path& dir) {
    std::ifstream in(dir / "trajectory.json");
    if (!in) throw Error("load_trajectory: missing sidecar in " + dir.string());
    nlohmann::json side = nlohmann::json::parse(in);
    Trajectory traj;
    traj.scheme_tag = side.value("scheme_tag", "");
    traj.config_hash = side.value("config_hash", "");
    traj.aborted = side.value("aborted", false);
    traj.abort_reason = side.value("abort_reason", "");
    for (const auto& w : side.value("warnings", nlohmann::json::array()))
        traj.warnings.push_back(w.get<std::string>());
    for (const auto& t : side.at("times")) traj.times.push_back(t.get<double>());
    for (const auto& row : side.at("per_step")) {
        StepDiagnostics s;
        s.time = row.at("time").get<double>();
        s.mass = row.at("mass").get<double>();
        s.min_value = row.at("min").get<double>();
        s.max_value = row.at("max").get<double>();
        for (const auto& [key, v] : row.at("lq").items()) {
            const double q = (key == "inf") ? kInf : std::stod(key);
            s.lq[q] = v.get<double>();
        }
        traj.per_step.push_back(std::move(s));
    }
    for (const auto& name : side.at("snapshots")) {
        auto [field, time] = read_snapshot(dir / name.get<std::string>());
        traj.snapshots.push_back(std::move(field));
        (void)time;
    }
    if (traj.snapshots.size() != traj.times.size())
        throw Error("load_trajectory: snapshot count does not match times");
    return traj;
}

// --------------------------------------------------------------------------
// CSV writers (full-precision scientific, deterministic order)
// --------------------------------------------------------------------------

namespace detail {

inline std::string csv_num(double v) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(16) << v;
    return os.str();
}

}  // namespace detail

inline void write_decay_fit_csv(std::ostream& os, int dim, const std::vector<DecayFit>& fits) {
    os << "d,beta,k,q,t_lo,t_hi,slope,predicted,error,r2\n";
    for (const auto& f : fits) {
        os << dim << ',' << to_string(f.beta) << ',' << f.k << ',' << q_label(f.q) << ','
           << detail::csv_num(f.t_lo) << ',' << detail::csv_num(f.t_hi) << ','
           << detail::csv_num(f.slope) << ',' << detail::csv_num(f.predicted_slope) << ','
           << detail::csv_num(f.slope_error) << ',' << detail::csv_num(f.r_squared) << '\n';
    }
}

struct AnalyticityRow {
    double t = 0.0;
    double r_space = 0.0;
    double r_time = 0.0;
    SpaceRadiusEstimate space;  // quality detail for the space fit
};

inline void write_analyticity_csv(std::ostream& os, const std::vector<AnalyticityRow>& rows) {
    os << "t,r_space,r_time,shells,fit_rms,gaussian_decay,degenerate,underflow\n";
    for (const auto& r : rows) {
        os << detail::csv_num(r.t) << ',' << detail::csv_num(r.r_space) << ','
           << detail::csv_num(r.r_time) << ',' << r.space.shells_used << ','
           << detail::csv_num(r.space.fit_rms) << ',' << (r.space.gaussian_decay ? 1 : 0) << ','
           << (r.space.degenerate ? 1 : 0) << ',' << (r.space.underflow ? 1 : 0) << '\n';
    }
}

inline void write_theta_csv(std::ostream& os, const ThetaReport& rep) {
    os << "q,supremum,t_at_supremum,mass\n";
    for (const auto& e : rep.entries) {
        os << q_label(e.q) << ',' << detail::csv_num(e.supremum) << ','
           << detail::csv_num(e.t_at_supremum) << ',' << detail::csv_num(rep.mass) << '\n';
    }
}

struct HlsRow {
    std::string shape;
    HlsResult result;
};

inline void write_hls_csv(std::ostream& os, const std::vector<HlsRow>& rows) {
    os << "shape,lhs,rhs,ratio\n";
    for (const auto& r : rows) {
        os << r.shape << ',' << detail::csv_num(r.result.lhs) << ','
           << detail::csv_num(r.result.rhs) << ',' << detail::csv_num(r.result.ratio) << '\n';
    }
}

}  // namespace mpks
