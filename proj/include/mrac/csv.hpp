#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mrac/errors.hpp"
#include "mrac/harness.hpp"

namespace mrac {

namespace csv_detail {

/// %.17g round-trips IEEE doubles exactly.
inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace csv_detail

inline constexpr const char* kTrajectoryCsvHeader =
    "k,t,y_ref,y,e,u,k0,k1,k2,greedy_k0,greedy_k1,greedy_k2,V,U,bellman_residual,critic_change";

/// Trajectory CSV: one schema comment line, one header row, one row per
/// step, full-precision numbers.
inline std::string trajectory_csv(const TrajectoryLog& log) {
    using csv_detail::num;
    std::ostringstream out;
    out << "# mrac trajectory csv v1\n" << kTrajectoryCsvHeader << "\n";
    for (const auto& r : log.records) {
        out << r.k << ',' << num(r.t) << ',' << num(r.y_ref) << ',' << num(r.y) << ','
            << num(r.e) << ',' << num(r.u) << ',' << num(r.k0) << ',' << num(r.k1) << ','
            << num(r.k2) << ',' << num(r.gk0) << ',' << num(r.gk1) << ',' << num(r.gk2) << ','
            << num(r.V) << ',' << num(r.U) << ',' << num(r.bellman_residual) << ','
            << num(r.critic_change) << "\n";
    }
    return out.str();
}

inline void write_trajectory_csv(const TrajectoryLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << trajectory_csv(log);
}

/// Parse a trajectory CSV back into records (numeric fields bit-exact).
inline std::vector<StepRecord> parse_trajectory_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<StepRecord> out;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != kTrajectoryCsvHeader)
                throw ConfigError("unexpected trajectory CSV header: " + line);
            header_seen = true;
            continue;
        }
        const auto f = csv_detail::split(line, ',');
        if (f.size() != 16) throw ConfigError("trajectory CSV row needs 16 fields");
        StepRecord r;
        r.k = std::stol(f[0]);
        const double* dst_end = nullptr;
        (void)dst_end;
        double vals[15];
        for (int i = 0; i < 15; ++i) vals[i] = std::strtod(f[static_cast<size_t>(i) + 1].c_str(), nullptr);
        r.t = vals[0];
        r.y_ref = vals[1];
        r.y = vals[2];
        r.e = vals[3];
        r.u = vals[4];
        r.k0 = vals[5];
        r.k1 = vals[6];
        r.k2 = vals[7];
        r.gk0 = vals[8];
        r.gk1 = vals[9];
        r.gk2 = vals[10];
        r.V = vals[11];
        r.U = vals[12];
        r.bellman_residual = vals[13];
        r.critic_change = vals[14];
        out.push_back(r);
    }
    return out;
}

inline std::vector<StepRecord> load_trajectory_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_trajectory_csv(buf.str());
}

/// Plant states companion file (not part of the trajectory schema).
inline std::string states_csv(const TrajectoryLog& log) {
    using csv_detail::num;
    std::ostringstream out;
    out << "# mrac states csv v1\n";
    const Eigen::Index n = log.states.empty() ? 0 : log.states.front().size();
    out << "k,t";
    for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
    out << "\n";
    for (size_t k = 0; k < log.states.size() && k < log.records.size(); ++k) {
        out << log.records[k].k << ',' << num(log.records[k].t);
        for (Eigen::Index i = 0; i < log.states[k].size(); ++i)
            out << ',' << num(log.states[k][i]);
        out << "\n";
    }
    return out.str();
}

inline void write_states_csv(const TrajectoryLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << states_csv(log);
}

/// Human-readable run report.
inline std::string summary_text(const TrajectoryLog& log, const Summary& s,
                                const ExperimentConfig& cfg) {
    using csv_detail::num;
    std::ostringstream out;
    out << "mrac run summary\n";
    out << "================\n";
    out << "status: " << log.status.str() << "\n";
    out << "steps logged: " << log.records.size() << "\n";
    out << "dt: " << num(cfg.dt) << " s, horizon: " << num(cfg.dt * double(cfg.steps)) << " s\n";
    out << "settling step: "
        << (s.settling_step ? std::to_string(*s.settling_step) : std::string("none")) << "\n";
    out << "mean |e| over final 10%: " << num(s.mean_abs_e_final_10pct) << "\n";
    out << "max |u|: " << num(s.max_abs_u) << "\n";
    out << "mean |bellman residual| over final 20 steps: " << num(s.mean_abs_residual_final20)
        << "\n";
    out << "final actor gains: " << num(log.final_actor.K(0)) << " " << num(log.final_actor.K(1))
        << " " << num(log.final_actor.K(2)) << "\n";
    out << "\nsegments (disturbance schedule):\n";
    for (const auto& seg : s.segments) {
        out << "  steps [" << seg.start_step << ", " << seg.end_step
            << "): mean|e| first10 = " << num(seg.mean_abs_e_first10)
            << ", last10 = " << num(seg.mean_abs_e_last10) << "\n";
    }
    return out.str();
}

inline void write_summary(const TrajectoryLog& log, const Summary& s, const ExperimentConfig& cfg,
                          const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << summary_text(log, s, cfg);
}

}  // namespace mrac
