#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mrac/errors.hpp"
#include "mrac/harness.hpp"

namespace mrac {

/// Flat `key = value` config text: one pair per line, `#` comments, dotted
/// key paths. Later occurrences of a key win, so command-line overrides are
/// plain appends; `disturbance.segment` is the one key where every
/// occurrence counts.
struct ConfigMap {
    std::vector<std::pair<std::string, std::string>> entries;

    std::optional<std::string> last(const std::string& key) const {
        for (auto it = entries.rbegin(); it != entries.rend(); ++it)
            if (it->first == key) return it->second;
        return std::nullopt;
    }

    std::vector<std::string> all(const std::string& key) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries)
            if (k == key) out.push_back(v);
        return out;
    }

    void set(const std::string& key, const std::string& value) {
        entries.emplace_back(key, value);
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline double parse_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse number from '" + v + "'");
    }
}

inline long parse_long(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse integer from '" + v + "'");
    }
}

inline std::vector<double> parse_doubles(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::istringstream in(v);
    std::string tok;
    while (in >> tok) out.push_back(parse_double(tok, key));
    return out;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline ConfigMap parse_config(const std::string& text) {
    ConfigMap map;
    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        map.set(key, value);
    }
    return map;
}

inline ConfigMap load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

/// Apply one `key=value` override string (the --set flag syntax).
inline void apply_override(ConfigMap& map, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like key=value: " + assignment);
    const std::string key = detail::trim(assignment.substr(0, eq));
    const std::string value = detail::trim(assignment.substr(eq + 1));
    if (key.empty()) throw ConfigError("override has an empty key: " + assignment);
    map.set(key, value);
}

namespace detail {

inline const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "sim.steps", "sim.dt", "sim.x0", "sim.seed",
        "adapt.rate_critic", "adapt.rate_actor", "adapt.mode", "adapt.normalization",
        "adapt.quadrature", "adapt.substeps", "adapt.deadzone", "adapt.h_min",
        "adapt.actor_min", "adapt.actor_max",
        "init.critic", "init.coupling", "init.actor",
        "converge.tol", "converge.window",
        "cost.Q", "cost.R",
        "plant.A", "plant.B", "plant.C",
        "disturbance.segment",
        "reference.kind", "reference.amplitude", "reference.period", "reference.filter_tau",
        "reference.phase_offset", "reference.distortion_fraction", "reference.distortion_hz",
        "reference.table_file",
    };
    return keys;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

}  // namespace detail

/// Materialize an ExperimentConfig from parsed text. Unknown keys are
/// rejected so typos fail loudly. The caller still runs cfg.validate().
inline ExperimentConfig to_experiment_config(const ConfigMap& map) {
    for (const auto& [k, v] : map.entries) {
        const auto& keys = detail::known_keys();
        if (std::find(keys.begin(), keys.end(), k) == keys.end())
            throw ConfigError("unknown config key: " + k);
    }

    ExperimentConfig cfg;
    auto num = [&](const char* key, double dflt) {
        auto v = map.last(key);
        return v ? detail::parse_double(*v, key) : dflt;
    };
    auto integer = [&](const char* key, long dflt) {
        auto v = map.last(key);
        return v ? detail::parse_long(*v, key) : dflt;
    };

    cfg.steps = integer("sim.steps", 180);
    cfg.dt = num("sim.dt", 0.1);
    cfg.rate_critic = num("adapt.rate_critic", 0.5);
    cfg.rate_actor = num("adapt.rate_actor", 0.5);
    cfg.substeps = static_cast<int>(integer("adapt.substeps", 10));
    cfg.deadzone = num("adapt.deadzone", 0.0);
    cfg.h_uu_floor = num("adapt.h_min", kDefaultHuuFloor);
    cfg.init_coupling = num("init.coupling", 0.1);
    cfg.converge_tol = num("converge.tol", 1e-8);
    cfg.converge_window = integer("converge.window", 10);
    cfg.seed = static_cast<unsigned long>(integer("sim.seed", 0));

    if (auto v = map.last("adapt.mode")) {
        if (*v == "residual") cfg.mode = UpdateMode::residual;
        else if (*v == "as_printed") cfg.mode = UpdateMode::as_printed;
        else throw ConfigError("adapt.mode must be residual or as_printed");
    }
    if (auto v = map.last("adapt.normalization")) {
        if (*v == "regressor") cfg.normalization = StepNormalization::regressor;
        else if (*v == "none") cfg.normalization = StepNormalization::none;
        else throw ConfigError("adapt.normalization must be regressor or none");
    }
    if (auto v = map.last("adapt.quadrature")) {
        if (*v == "left") cfg.quadrature = Quadrature::left;
        else if (*v == "substate_trapezoid") cfg.quadrature = Quadrature::substate_trapezoid;
        else throw ConfigError("adapt.quadrature must be left or substate_trapezoid");
    }
    if (auto v = map.last("init.critic")) {
        if (*v == "identity") cfg.init_critic = CriticInit::identity;
        else if (*v == "coupled") cfg.init_critic = CriticInit::coupled;
        else throw ConfigError("init.critic must be identity or coupled");
    }
    if (auto v = map.last("init.actor")) {
        const auto vals = detail::parse_doubles(*v, "init.actor");
        if (vals.size() != 3) throw ConfigError("init.actor needs 3 values");
        cfg.init_actor << vals[0], vals[1], vals[2];
    }
    auto bound = [&](const char* key) -> std::optional<Eigen::RowVector3d> {
        auto v = map.last(key);
        if (!v || detail::trim(*v).empty()) return std::nullopt;
        const auto vals = detail::parse_doubles(*v, key);
        if (vals.size() != 3) throw ConfigError(std::string(key) + " needs 3 values");
        Eigen::RowVector3d r;
        r << vals[0], vals[1], vals[2];
        return r;
    };
    cfg.actor_min = bound("adapt.actor_min");
    cfg.actor_max = bound("adapt.actor_max");

    if (auto v = map.last("cost.Q")) {
        const auto vals = detail::parse_doubles(*v, "cost.Q");
        if (vals.size() != 9) throw ConfigError("cost.Q needs 9 row-major values");
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cfg.cost.Q(r, c) = vals[static_cast<size_t>(3 * r + c)];
    }
    cfg.cost.R = num("cost.R", 1.0);

    // Plant: row-major A, then B and C; default is the bundled aircraft.
    const auto a_txt = map.last("plant.A");
    if (a_txt) {
        const auto a = detail::parse_doubles(*a_txt, "plant.A");
        const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(double(a.size()))));
        if (n * n != static_cast<Eigen::Index>(a.size()))
            throw ConfigError("plant.A needs a square row-major matrix");
        cfg.plant.A.resize(n, n);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c)
                cfg.plant.A(r, c) = a[static_cast<size_t>(r * n + c)];
        const auto b = detail::parse_doubles(map.last("plant.B").value_or(""), "plant.B");
        const auto c = detail::parse_doubles(map.last("plant.C").value_or(""), "plant.C");
        if (static_cast<Eigen::Index>(b.size()) != n) throw ConfigError("plant.B needs n values");
        if (static_cast<Eigen::Index>(c.size()) != n) throw ConfigError("plant.C needs n values");
        cfg.plant.B = detail::to_vector(b);
        cfg.plant.C = detail::to_vector(c).transpose();
    } else {
        cfg.plant = PlantModel::aircraft();
    }
    const Eigen::Index n = cfg.plant.A.rows();

    if (auto v = map.last("sim.x0")) {
        cfg.x0 = detail::to_vector(detail::parse_doubles(*v, "sim.x0"));
    } else {
        cfg.x0 = Eigen::VectorXd::Zero(n);
    }

    const auto segs = map.all("disturbance.segment");
    if (segs.empty()) {
        cfg.schedule = DisturbanceSchedule::identity(n);
    } else {
        cfg.schedule.segments.clear();
        for (const auto& s : segs) {
            const auto vals = detail::parse_doubles(s, "disturbance.segment");
            if (static_cast<Eigen::Index>(vals.size()) != n + 2)
                throw ConfigError("disturbance.segment needs: start_step rho xi_1..xi_n");
            DisturbanceSchedule::Segment seg;
            seg.start_step = static_cast<long>(std::llround(vals[0]));
            seg.d.rho = vals[1];
            seg.d.xi.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) seg.d.xi[i] = vals[static_cast<size_t>(i) + 2];
            cfg.schedule.segments.push_back(std::move(seg));
        }
    }

    if (auto v = map.last("reference.kind")) {
        if (*v == "constant") cfg.reference.kind = ReferenceKind::constant;
        else if (*v == "filtered_square") cfg.reference.kind = ReferenceKind::filtered_square;
        else if (*v == "washout_square") cfg.reference.kind = ReferenceKind::washout_square;
        else if (*v == "distorted_square") cfg.reference.kind = ReferenceKind::distorted_square;
        else if (*v == "table") cfg.reference.kind = ReferenceKind::table;
        else throw ConfigError("reference.kind is not one of the known kinds");
    } else {
        cfg.reference.kind = ReferenceKind::washout_square;
    }
    cfg.reference.amplitude = num("reference.amplitude", 30.0);
    cfg.reference.period = num("reference.period", 12.0);
    cfg.reference.filter_time_constant = num("reference.filter_tau", 0.2);
    cfg.reference.phase_offset = num("reference.phase_offset", 0.1);
    cfg.reference.distortion_fraction = num("reference.distortion_fraction", 0.0);
    cfg.reference.distortion_hz = num("reference.distortion_hz", 0.25);
    if (auto v = map.last("reference.table_file")) {
        std::ifstream in(*v);
        if (!in) throw ConfigError("cannot read reference.table_file: " + *v);
        cfg.reference.table.clear();
        std::string line;
        while (std::getline(in, line)) {
            const std::string t = detail::trim(line);
            if (t.empty() || t[0] == '#') continue;
            std::string row = t;
            std::replace(row.begin(), row.end(), ',', ' ');
            const auto vals = detail::parse_doubles(row, "reference.table_file");
            if (vals.size() != 2)
                throw ConfigError("reference table rows must be: t,value");
            cfg.reference.table.emplace_back(vals[0], vals[1]);
        }
    }
    return cfg;
}

/// Canonical config text for an ExperimentConfig; parsing it back yields an
/// equivalent config.
inline std::string serialize_config(const ExperimentConfig& cfg) {
    using detail::format_double;
    std::ostringstream out;
    out << "# mrac experiment config v1\n";
    out << "sim.steps = " << cfg.steps << "\n";
    out << "sim.dt = " << format_double(cfg.dt) << "\n";
    out << "sim.x0 =";
    for (Eigen::Index i = 0; i < cfg.x0.size(); ++i) out << " " << format_double(cfg.x0[i]);
    out << "\n";
    out << "sim.seed = " << cfg.seed << "\n";
    out << "adapt.rate_critic = " << format_double(cfg.rate_critic) << "\n";
    out << "adapt.rate_actor = " << format_double(cfg.rate_actor) << "\n";
    out << "adapt.mode = " << (cfg.mode == UpdateMode::residual ? "residual" : "as_printed")
        << "\n";
    out << "adapt.normalization = "
        << (cfg.normalization == StepNormalization::regressor ? "regressor" : "none") << "\n";
    out << "adapt.quadrature = "
        << (cfg.quadrature == Quadrature::left ? "left" : "substate_trapezoid") << "\n";
    out << "adapt.substeps = " << cfg.substeps << "\n";
    out << "adapt.deadzone = " << format_double(cfg.deadzone) << "\n";
    out << "adapt.h_min = " << format_double(cfg.h_uu_floor) << "\n";
    if (cfg.actor_min && cfg.actor_max) {
        out << "adapt.actor_min = " << format_double((*cfg.actor_min)(0)) << " "
            << format_double((*cfg.actor_min)(1)) << " " << format_double((*cfg.actor_min)(2))
            << "\n";
        out << "adapt.actor_max = " << format_double((*cfg.actor_max)(0)) << " "
            << format_double((*cfg.actor_max)(1)) << " " << format_double((*cfg.actor_max)(2))
            << "\n";
    }
    out << "init.critic = " << (cfg.init_critic == CriticInit::coupled ? "coupled" : "identity")
        << "\n";
    out << "init.coupling = " << format_double(cfg.init_coupling) << "\n";
    out << "init.actor = " << format_double(cfg.init_actor(0)) << " "
        << format_double(cfg.init_actor(1)) << " " << format_double(cfg.init_actor(2)) << "\n";
    out << "converge.tol = " << format_double(cfg.converge_tol) << "\n";
    out << "converge.window = " << cfg.converge_window << "\n";
    out << "cost.Q =";
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out << " " << format_double(cfg.cost.Q(r, c));
    out << "\n";
    out << "cost.R = " << format_double(cfg.cost.R) << "\n";
    out << "plant.A =";
    for (Eigen::Index r = 0; r < cfg.plant.A.rows(); ++r)
        for (Eigen::Index c = 0; c < cfg.plant.A.cols(); ++c)
            out << " " << format_double(cfg.plant.A(r, c));
    out << "\n";
    out << "plant.B =";
    for (Eigen::Index i = 0; i < cfg.plant.B.size(); ++i)
        out << " " << format_double(cfg.plant.B[i]);
    out << "\n";
    out << "plant.C =";
    for (Eigen::Index i = 0; i < cfg.plant.C.size(); ++i)
        out << " " << format_double(cfg.plant.C[i]);
    out << "\n";
    for (const auto& seg : cfg.schedule.segments) {
        out << "disturbance.segment = " << seg.start_step << " " << format_double(seg.d.rho);
        for (Eigen::Index i = 0; i < seg.d.xi.size(); ++i)
            out << " " << format_double(seg.d.xi[i]);
        out << "\n";
    }
    const char* kind = "washout_square";
    switch (cfg.reference.kind) {
        case ReferenceKind::constant: kind = "constant"; break;
        case ReferenceKind::filtered_square: kind = "filtered_square"; break;
        case ReferenceKind::washout_square: kind = "washout_square"; break;
        case ReferenceKind::distorted_square: kind = "distorted_square"; break;
        case ReferenceKind::table: kind = "table"; break;
    }
    out << "reference.kind = " << kind << "\n";
    out << "reference.amplitude = " << format_double(cfg.reference.amplitude) << "\n";
    out << "reference.period = " << format_double(cfg.reference.period) << "\n";
    out << "reference.filter_tau = " << format_double(cfg.reference.filter_time_constant) << "\n";
    out << "reference.phase_offset = " << format_double(cfg.reference.phase_offset) << "\n";
    out << "reference.distortion_fraction = " << format_double(cfg.reference.distortion_fraction)
        << "\n";
    out << "reference.distortion_hz = " << format_double(cfg.reference.distortion_hz) << "\n";
    return out.str();
}

/// Bundled scenario: tracking a washout-filtered square on the aircraft
/// model with the published learning parameters.
inline std::string preset_case1() {
    return R"(# bundled scenario: aircraft tracking, no disturbance
sim.steps = 180
sim.dt = 0.1
sim.x0 = 0 0
adapt.rate_critic = 0.5
adapt.rate_actor = 0.5
adapt.mode = residual
adapt.normalization = regressor
adapt.quadrature = left
adapt.substeps = 10
adapt.deadzone = 3
adapt.h_min = 0.25
adapt.actor_min = -2 -0.2 -0.2
adapt.actor_max = 0 0 0
init.critic = coupled
init.coupling = 0.1
init.actor = 0 0 0
converge.tol = 1e-8
converge.window = 10
cost.Q = 1 0 0  0 1 0  0 0 1
cost.R = 1
plant.A = -8.76 0.954 -177 -9.92
plant.B = -0.697 -168
plant.C = -0.8 -0.04
disturbance.segment = 0 1 0 0
reference.kind = washout_square
reference.amplitude = 30
reference.period = 12
reference.filter_tau = 0.2
reference.phase_offset = 0.1
reference.distortion_fraction = 0
reference.distortion_hz = 0.25
sim.seed = 0
)";
}

/// Bundled scenario: same plant with the three-segment matched disturbance
/// and a distorted reference.
inline std::string preset_case2() {
    return R"(# bundled scenario: aircraft tracking under a scheduled matched disturbance
sim.steps = 180
sim.dt = 0.1
sim.x0 = 0 0
adapt.rate_critic = 0.5
adapt.rate_actor = 0.5
adapt.mode = residual
adapt.normalization = regressor
adapt.quadrature = left
adapt.substeps = 10
adapt.deadzone = 3
adapt.h_min = 0.25
adapt.actor_min = -2 -0.2 -0.2
adapt.actor_max = 0 0 0
init.critic = coupled
init.coupling = 0.1
init.actor = 0 0 0
converge.tol = 1e-8
converge.window = 10
cost.Q = 1 0 0  0 1 0  0 0 1
cost.R = 1
plant.A = -8.76 0.954 -177 -9.92
plant.B = -0.697 -168
plant.C = -0.8 -0.04
disturbance.segment = 0 0.8052 -0.2760 -0.0858
disturbance.segment = 60 0.5693 -0.1959 -0.0028
disturbance.segment = 120 0.4187 -0.5324 -0.0002
reference.kind = washout_square
reference.amplitude = 30
reference.period = 12
reference.filter_tau = 0.2
reference.phase_offset = 0.1
reference.distortion_fraction = 0.2
reference.distortion_hz = 0.25
sim.seed = 0
)";
}

/// Look up a bundled preset by name; empty when unknown.
inline std::string preset_by_name(const std::string& name) {
    if (name == "case1") return preset_case1();
    if (name == "case2") return preset_case2();
    return {};
}

}  // namespace mrac
