#pragma once

// CSV and JSON readers/writers for matrices, trajectories, events, reports and
// experiment tables. Doubles are written with 17 significant digits.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "opdyn/analysis.hpp"
#include "opdyn/error.hpp"
#include "opdyn/gossip.hpp"
#include "opdyn/linear_dynamics.hpp"
#include "opdyn/net_graph.hpp"
#include "opdyn/types.hpp"

namespace opdyn::io {

using nlohmann::json;

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes `content` to a sibling temporary file and renames it over `path`.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out.flush()) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    return cells;
}

inline double parse_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw InvalidArgument("not a number: '" + s + "'");
    }
    if (used != s.size()) throw InvalidArgument("not a number: '" + s + "'");
    return v;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Matrices
// ---------------------------------------------------------------------------

/// Rows of comma-separated numbers; blank lines and lines starting with '#' are skipped.
inline Matrix matrix_from_csv(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        std::vector<double> row;
        for (const auto& cell : detail::split_csv_line(line)) row.push_back(detail::parse_double(cell));
        if (!rows.empty() && row.size() != rows.front().size()) throw InvalidArgument("ragged matrix CSV");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidArgument("empty matrix CSV");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

inline std::string matrix_to_csv(const Matrix& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

/// A JSON array of equal-length numeric arrays.
inline Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw InvalidArgument("matrix must be a nonempty array of rows");
    const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
    if (cols == 0) throw InvalidArgument("matrix rows must be nonempty arrays");
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw InvalidArgument("ragged matrix rows");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) throw InvalidArgument("matrix entries must be numbers");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
        }
    }
    return m;
}

inline json matrix_to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(std::move(row));
    }
    return out;
}

/// Inline matrix, or {"file": path} with a CSV or JSON file relative to `base`.
inline Matrix load_matrix(const json& j, const std::filesystem::path& base = {}) {
    if (j.is_object() && j.contains("file")) {
        std::filesystem::path p = j.at("file").get<std::string>();
        if (p.is_relative()) p = base / p;
        if (!std::filesystem::exists(p)) throw InvalidArgument("matrix file not found: " + p.string());
        const std::string text = read_file(p);
        if (p.extension() == ".json") return matrix_from_json(json::parse(text));
        return matrix_from_csv(text);
    }
    return matrix_from_json(j);
}

/// A scalar list [x1, ...] or a list of points [[x11, ...], ...].
inline OpinionState state_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw InvalidArgument("opinion list must be a nonempty array");
    if (j.front().is_array()) return OpinionState(matrix_from_json(j));
    std::vector<double> xs;
    for (const auto& v : j) {
        if (!v.is_number()) throw InvalidArgument("opinions must be numbers");
        xs.push_back(v.get<double>());
    }
    return OpinionState::scalar(xs);
}

inline json state_to_json(const OpinionState& x) {
    if (x.m() == 1) return json(x.column(0));
    return matrix_to_json(x.values());
}

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

/// [{"until": t, "matrix": [[...]]}, ...]
inline Schedule schedule_from_json(const json& j, bool periodic = false, const std::filesystem::path& base = {}) {
    if (!j.is_array() || j.empty()) throw InvalidArgument("schedule must be a nonempty array");
    Schedule s;
    s.periodic = periodic;
    for (const auto& seg : j) {
        if (!seg.is_object() || !seg.contains("until") || !seg.contains("matrix"))
            throw InvalidArgument("schedule segments need 'until' and 'matrix'");
        s.segments.push_back({seg.at("until").get<double>(), load_matrix(seg.at("matrix"), base)});
    }
    s.validate();
    return s;
}

inline json schedule_to_json(const Schedule& s) {
    json out = json::array();
    for (const auto& seg : s.segments) out.push_back({{"until", seg.until}, {"matrix", matrix_to_json(seg.matrix)}});
    return out;
}

// ---------------------------------------------------------------------------
// Trajectories and events
// ---------------------------------------------------------------------------

/// step,time,agent,dim,value with step the record index and time its stamp.
inline std::string trajectory_to_csv(const Trajectory& traj) {
    std::string out = "step,time,agent,dim,value\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const OpinionState& x = traj.states[k];
        const std::string prefix = std::to_string(k) + ',' + format_double(traj.stamps[k]) + ',';
        for (std::size_t i = 0; i < x.n(); ++i)
            for (std::size_t d = 0; d < x.m(); ++d)
                out += prefix + std::to_string(i) + ',' + std::to_string(d) + ',' + format_double(x(i, d)) + '\n';
    }
    return out;
}

inline Trajectory trajectory_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument("empty trajectory CSV");
    const auto header = detail::split_csv_line(line);
    if (header != std::vector<std::string>{"step", "time", "agent", "dim", "value"})
        throw InvalidArgument("trajectory CSV header must be step,time,agent,dim,value");
    struct Cell {
        std::size_t step, agent, dim;
        double time, value;
    };
    std::vector<Cell> cells;
    std::size_t n = 0, m = 0, steps = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto c = detail::split_csv_line(line);
        if (c.size() != 5) throw InvalidArgument("trajectory CSV rows need 5 fields");
        Cell cell{static_cast<std::size_t>(detail::parse_double(c[0])), static_cast<std::size_t>(detail::parse_double(c[2])),
                  static_cast<std::size_t>(detail::parse_double(c[3])), detail::parse_double(c[1]),
                  detail::parse_double(c[4])};
        n = std::max(n, cell.agent + 1);
        m = std::max(m, cell.dim + 1);
        steps = std::max(steps, cell.step + 1);
        cells.push_back(cell);
    }
    if (cells.empty()) throw InvalidArgument("trajectory CSV has no rows");
    if (cells.size() != n * m * steps) throw InvalidArgument("trajectory CSV is incomplete");
    std::vector<Matrix> values(steps, Matrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m),
                                                       std::numeric_limits<double>::quiet_NaN()));
    std::vector<double> times(steps, std::numeric_limits<double>::quiet_NaN());
    for (const auto& c : cells) {
        values[c.step](static_cast<Eigen::Index>(c.agent), static_cast<Eigen::Index>(c.dim)) = c.value;
        times[c.step] = c.time;
    }
    Trajectory traj;
    for (std::size_t k = 0; k < steps; ++k) traj.push(OpinionState(std::move(values[k])), times[k]);
    return traj;
}

inline std::string events_to_csv(const std::vector<InteractionEvent>& events) {
    std::string out = "step,i,j,interacted\n";
    for (const auto& e : events)
        out += std::to_string(e.step) + ',' + std::to_string(e.i) + ',' + std::to_string(e.j) + ',' +
               (e.interacted ? "1" : "0") + '\n';
    return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline json balance_to_json(const BalanceResult& b) {
    return {{"balanced", b.balanced}, {"camps", {b.camp1, b.camp2}}, {"witness", b.witness}};
}

inline json clusters_to_json(const ClusterProfile& p) {
    json list = json::array();
    for (const auto& c : p.clusters) {
        json rep = json::array();
        for (Eigen::Index k = 0; k < c.representative.size(); ++k) rep.push_back(c.representative(k));
        list.push_back({{"representative", c.representative.size() == 1 ? json(c.representative(0)) : rep},
                        {"members", c.members}});
    }
    return {{"count", p.count()},
            {"gap_tol", p.gap_tol},
            {"min_separation", std::isfinite(p.min_separation) ? json(p.min_separation) : json(nullptr)},
            {"clusters", std::move(list)}};
}

inline json outcome_to_json(const Outcome& o) {
    json out = {{"label", to_string(o.kind)}, {"count", o.count}, {"values", o.values}};
    if (o.kind == OutcomeKind::Polarization) out["camps"] = o.camps;
    return out;
}

inline json gossip_summary(std::uint64_t seed, const OpinionState& final_state,
                           const std::optional<OpinionState>& cesaro_final, const ClusterProfile& profile) {
    return {{"seed", seed},
            {"final_state", state_to_json(final_state)},
            {"cesaro_final", cesaro_final ? state_to_json(*cesaro_final) : json(nullptr)},
            {"clusters", clusters_to_json(profile)}};
}

inline std::string two_r_to_csv(const std::vector<TwoRRow>& rows) {
    std::string out = "d,trials,mean_clusters,std,conjecture\n";
    for (const auto& r : rows)
        out += format_double(r.d) + ',' + std::to_string(r.trials) + ',' + format_double(r.mean_clusters) + ',' +
               format_double(r.std_clusters) + ',' + std::to_string(r.conjecture) + '\n';
    return out;
}

inline json two_r_to_json(const std::vector<TwoRRow>& rows) {
    json out = json::array();
    for (const auto& r : rows)
        out.push_back({{"d", r.d},
                       {"trials", r.trials},
                       {"mean_clusters", r.mean_clusters},
                       {"std", r.std_clusters},
                       {"conjecture", r.conjecture},
                       {"counts", r.counts}});
    return out;
}

inline json error_json(const std::string& stage, const std::string& message, const std::string& hint) {
    return {{"stage", stage}, {"message", message}, {"hint", hint}};
}

} // namespace opdyn::io
