// mracsim: run, sweep and validate data-driven MRAC tracking experiments.

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "mrac/config.hpp"
#include "mrac/csv.hpp"
#include "mrac/harness.hpp"
#include "mrac/svg_plot.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

struct CommonOpts {
    std::string scenario;
    std::string config_path;
    std::vector<std::string> overrides;
    std::string mode;
    std::string out_dir;
};

std::string default_out_root() {
    if (const char* env = std::getenv("MRAC_OUT_ROOT")) return env;
    return "out";
}

mrac::ConfigMap build_map(const CommonOpts& o) {
    mrac::ConfigMap map;
    if (!o.config_path.empty()) {
        map = mrac::load_config_file(o.config_path);
    } else {
        const std::string name = o.scenario.empty() ? "case1" : o.scenario;
        const std::string text = mrac::preset_by_name(name);
        if (text.empty()) throw mrac::ConfigError("unknown scenario: " + name);
        map = mrac::parse_config(text);
    }
    for (const auto& s : o.overrides) mrac::apply_override(map, s);
    if (!o.mode.empty()) map.set("adapt.mode", o.mode);
    return map;
}

void write_plots(const mrac::TrajectoryLog& log, const fs::path& dir) {
    std::vector<double> t, yref, y, e, u, k0, k1, k2, g0, g1, g2;
    for (const auto& r : log.records) {
        t.push_back(r.t);
        yref.push_back(r.y_ref);
        y.push_back(r.y);
        e.push_back(r.e);
        u.push_back(r.u);
        k0.push_back(r.k0);
        k1.push_back(r.k1);
        k2.push_back(r.k2);
        g0.push_back(r.gk0);
        g1.push_back(r.gk1);
        g2.push_back(r.gk2);
    }
    mrac::write_svg_plot((dir / "plot_tracking.svg").string(),
                         "Reference vs measured output", "t [s]", "y [m/s^2]",
                         {{"y_ref", t, yref}, {"y", t, y}});
    mrac::write_svg_plot((dir / "plot_error.svg").string(), "Tracking error", "t [s]",
                         "e [m/s^2]", {{"e", t, e}});
    std::vector<mrac::PlotSeries> state_series;
    if (!log.states.empty()) {
        const Eigen::Index n = log.states.front().size();
        static const char* names[] = {"alpha [rad]", "q [rad/s]"};
        for (Eigen::Index i = 0; i < n; ++i) {
            mrac::PlotSeries s;
            s.label = (i < 2 && n == 2) ? names[i] : ("x" + std::to_string(i));
            for (size_t k = 0; k < log.states.size(); ++k) {
                s.x.push_back(log.records[k].t);
                s.y.push_back(log.states[k][i]);
            }
            state_series.push_back(std::move(s));
        }
    }
    mrac::write_svg_plot((dir / "plot_states.svg").string(), "Plant states", "t [s]", "state",
                         state_series);
    mrac::write_svg_plot((dir / "plot_control.svg").string(), "Control signal", "t [s]",
                         "u (elevator)", {{"u", t, u}});
    mrac::write_svg_plot((dir / "plot_gains.svg").string(), "Control gains", "t [s]", "gain",
                         {{"K0", t, k0},
                          {"Kd", t, k1},
                          {"K2d", t, k2},
                          {"greedy K0", t, g0},
                          {"greedy Kd", t, g1},
                          {"greedy K2d", t, g2}});
}

int write_run_outputs(const mrac::ExperimentConfig& cfg, const mrac::TrajectoryLog& log,
                      const fs::path& dir, bool plots) {
    fs::create_directories(dir);
    mrac::write_trajectory_csv(log, (dir / "trajectory.csv").string());
    mrac::write_states_csv(log, (dir / "states.csv").string());
    const mrac::Summary s = mrac::metrics(log, cfg);
    mrac::write_summary(log, s, cfg, (dir / "summary.txt").string());
    {
        std::ofstream out(dir / "config_resolved.cfg", std::ios::binary);
        out << mrac::serialize_config(cfg);
    }
    if (plots) write_plots(log, dir);
    return log.status.diverged() ? kExitDiverged : kExitOk;
}

int cmd_run(const CommonOpts& o, bool no_plots) {
    mrac::ExperimentConfig cfg;
    try {
        cfg = mrac::to_experiment_config(build_map(o));
        cfg.validate();
    } catch (const mrac::ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kExitConfig;
    }
    const mrac::TrajectoryLog log = mrac::run_episode(cfg);
    const fs::path dir = o.out_dir.empty() ? fs::path(default_out_root()) / "run" : fs::path(o.out_dir);
    const int code = write_run_outputs(cfg, log, dir, !no_plots);
    std::cout << "status: " << log.status.str() << "\n";
    std::cout << "outputs: " << dir.string() << "\n";
    if (code == kExitDiverged) std::cerr << "run diverged at step " << log.status.step << "\n";
    return code;
}

int cmd_validate(const CommonOpts& o) {
    try {
        const mrac::ExperimentConfig cfg = mrac::to_experiment_config(build_map(o));
        cfg.validate();
    } catch (const mrac::ConfigError& err) {
        std::cerr << "invalid: " << err.what() << "\n";
        return kExitConfig;
    }
    std::cout << "ok\n";
    return kExitOk;
}

struct GridAxis {
    std::string key;
    std::vector<std::string> values;
};

std::vector<GridAxis> parse_grid(const std::vector<std::string>& specs) {
    std::vector<GridAxis> axes;
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 >= s.size())
            throw mrac::ConfigError("grid axis must look like key=v1,v2,...: " + s);
        GridAxis ax;
        ax.key = s.substr(0, eq);
        std::string rest = s.substr(eq + 1);
        size_t pos = 0;
        while (pos != std::string::npos) {
            const size_t comma = rest.find(',', pos);
            const std::string tok = rest.substr(pos, comma == std::string::npos ? comma : comma - pos);
            if (tok.empty()) throw mrac::ConfigError("grid axis has an empty value: " + s);
            ax.values.push_back(tok);
            pos = (comma == std::string::npos) ? comma : comma + 1;
        }
        axes.push_back(std::move(ax));
    }
    return axes;
}

int cmd_sweep(const CommonOpts& o, const std::vector<std::string>& grid_specs, int jobs) {
    std::vector<GridAxis> axes;
    std::vector<std::vector<std::string>> cells;  // one override list per cell
    std::vector<mrac::ExperimentConfig> cfgs;
    try {
        axes = parse_grid(grid_specs);
        long total = 1;
        for (const auto& ax : axes) total *= static_cast<long>(ax.values.size());
        if (total < 1) throw mrac::ConfigError("empty sweep grid");
        for (long idx = 0; idx < total; ++idx) {
            long rem = idx;
            std::vector<std::string> cell;
            for (const auto& ax : axes) {
                const size_t vi = static_cast<size_t>(rem) % ax.values.size();
                rem /= static_cast<long>(ax.values.size());
                cell.push_back(ax.key + "=" + ax.values[vi]);
            }
            cells.push_back(std::move(cell));
        }
        // Build every cell config up front so a malformed grid fails before
        // any episode runs.
        for (const auto& cell : cells) {
            CommonOpts co = o;
            co.overrides.insert(co.overrides.end(), cell.begin(), cell.end());
            mrac::ExperimentConfig cfg = mrac::to_experiment_config(build_map(co));
            cfg.validate();
            cfgs.push_back(std::move(cfg));
        }
    } catch (const mrac::ConfigError& err) {
        std::cerr << "grid error: " << err.what() << "\n";
        return kExitConfig;
    }

    const fs::path root =
        o.out_dir.empty() ? fs::path(default_out_root()) / "sweep" : fs::path(o.out_dir);
    fs::create_directories(root);

    std::vector<mrac::TrajectoryLog> logs(cfgs.size());
    std::atomic<size_t> next{0};
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const size_t workers =
        std::min<size_t>(cfgs.size(), jobs > 0 ? static_cast<size_t>(jobs) : std::min(hw, 8u));
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= cfgs.size()) return;
                logs[i] = mrac::run_episode(cfgs[i]);
            }
        });
    }
    for (auto& th : pool) th.join();

    std::ostringstream agg;
    agg << "# mrac sweep aggregate v1\ncell";
    for (const auto& ax : axes) agg << ',' << ax.key;
    agg << ",status,settling_step,mean_abs_e_final_10pct,max_abs_u,mean_abs_residual_final20\n";
    for (size_t i = 0; i < cfgs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "cell_%03zu", i);
        const fs::path dir = root / name;
        write_run_outputs(cfgs[i], logs[i], dir, false);
        const mrac::Summary s = mrac::metrics(logs[i], cfgs[i]);
        agg << name;
        for (const auto& ov : cells[i]) agg << ',' << ov.substr(ov.find('=') + 1);
        agg << ',' << logs[i].status.str() << ','
            << (s.settling_step ? std::to_string(*s.settling_step) : std::string("none")) << ','
            << mrac::csv_detail::num(s.mean_abs_e_final_10pct) << ','
            << mrac::csv_detail::num(s.max_abs_u) << ','
            << mrac::csv_detail::num(s.mean_abs_residual_final20) << "\n";
    }
    std::ofstream out(root / "aggregate.csv", std::ios::binary);
    out << agg.str();
    std::cout << "sweep cells: " << cfgs.size() << "\noutputs: " << root.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-driven model-reference adaptive control simulator"};
    app.require_subcommand(1);

    CommonOpts run_o, val_o, sweep_o;
    bool no_plots = false;
    std::vector<std::string> grid_specs;
    int jobs = 0;

    auto add_common = [](CLI::App* cmd, CommonOpts& o) {
        cmd->add_option("--scenario", o.scenario, "bundled scenario name (case1, case2)");
        cmd->add_option("--config", o.config_path, "experiment config file");
        cmd->add_option("--set", o.overrides, "override: key=value (repeatable)");
        cmd->add_option("--mode", o.mode, "update mode: residual | as_printed");
        cmd->add_option("--out", o.out_dir, "output directory");
    };

    CLI::App* run = app.add_subcommand("run", "run one episode and write logs and plots");
    add_common(run, run_o);
    run->add_flag("--no-plots", no_plots, "skip SVG plot files");

    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid");
    add_common(sweep, sweep_o);
    sweep->add_option("--grid", grid_specs, "grid axis: key=v1,v2,... (repeatable)")->required();
    sweep->add_option("--jobs", jobs, "worker threads (default: min(hw, 8))");

    CLI::App* val = app.add_subcommand("validate", "check a config and exit");
    add_common(val, val_o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_o, no_plots);
        if (sweep->parsed()) return cmd_sweep(sweep_o, grid_specs, jobs);
        if (val->parsed()) return cmd_validate(val_o);
    } catch (const mrac::ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
