#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mrac/controller.hpp"
#include "mrac/errors.hpp"
#include "mrac/plant.hpp"
#include "mrac/reference.hpp"

namespace mrac {

/// How the one-step utility integral in the Bellman target is approximated.
///  - left: U(k dt) * dt, the Euler form
///  - substate_trapezoid: trapezoid over the plant's substep outputs, which
///    tracks the true integral even when the plant moves a lot within a step
enum class Quadrature { left, substate_trapezoid };

enum class CriticInit { identity, coupled };

/// Everything one episode needs. Validation errors name the offending
/// config key.
struct ExperimentConfig {
    long steps = 180;  ///< N, max adaptation steps
    double dt = 0.1;   ///< control/sampling interval [s]
    Eigen::VectorXd x0;

    double rate_critic = 0.5;
    double rate_actor = 0.5;
    UpdateMode mode = UpdateMode::residual;
    StepNormalization normalization = StepNormalization::regressor;
    Quadrature quadrature = Quadrature::left;
    int substeps = 10;       ///< substates per interval for substate_trapezoid
    double deadzone = 0.0;   ///< skip updates when |residual| <= deadzone * U_int; 0 disables
    double h_uu_floor = kDefaultHuuFloor;

    CriticInit init_critic = CriticInit::identity;
    double init_coupling = 0.1;
    Eigen::RowVector3d init_actor = Eigen::RowVector3d::Zero();
    /// Componentwise actor gain bounds (projection after each update);
    /// disabled when empty.
    std::optional<Eigen::RowVector3d> actor_min;
    std::optional<Eigen::RowVector3d> actor_max;

    double converge_tol = 1e-8;
    long converge_window = 10;

    CostWeights cost;
    PlantModel plant;
    DisturbanceSchedule schedule;
    ReferenceSpec reference;

    unsigned long seed = 0;  ///< reserved; episodes are currently deterministic

    void validate() const {
        if (steps < 1) throw ConfigError("sim.steps must be >= 1");
        if (!(dt > 0.0)) throw ConfigError("sim.dt must be positive");
        if (!(rate_critic >= 0.0 && rate_critic < 1.0))
            throw ConfigError("adapt.rate_critic must lie in [0, 1)");
        if (!(rate_actor >= 0.0 && rate_actor < 1.0))
            throw ConfigError("adapt.rate_actor must lie in [0, 1)");
        if (substeps < 1) throw ConfigError("adapt.substeps must be >= 1");
        if (!(deadzone >= 0.0)) throw ConfigError("adapt.deadzone must be >= 0");
        if (!(h_uu_floor > 0.0)) throw ConfigError("adapt.h_min must be positive");
        if (!(converge_tol > 0.0)) throw ConfigError("converge.tol must be positive");
        if (converge_window < 1) throw ConfigError("converge.window must be >= 1");
        if (actor_min.has_value() != actor_max.has_value())
            throw ConfigError("adapt.actor_min and adapt.actor_max must be set together");
        if (actor_min && ((*actor_max - *actor_min).minCoeff() < 0.0))
            throw ConfigError("adapt.actor_min must not exceed adapt.actor_max");
        cost.validate();
        plant.validate();
        schedule.validate(plant.A.rows());
        reference.validate();
        if (x0.size() != plant.A.rows()) throw ConfigError("sim.x0 dimension must match plant.A");
        if (!x0.allFinite()) throw ConfigError("sim.x0 must be finite");
    }
};

/// Per-step observables, in CSV column order.
struct StepRecord {
    long k = 0;
    double t = 0.0;
    double y_ref = 0.0;
    double y = 0.0;
    double e = 0.0;
    double u = 0.0;
    double k0 = 0.0, k1 = 0.0, k2 = 0.0;           ///< actor gains after this step
    double gk0 = 0.0, gk1 = 0.0, gk2 = 0.0;        ///< critic-derived greedy gains
    double V = 0.0;                                ///< critic value at (E_k, u_k)
    double U = 0.0;                                ///< utility at (E_k, u_k)
    double bellman_residual = 0.0;                 ///< V - (U_int + V_next)
    double critic_change = 0.0;                    ///< Frobenius norm of the critic step
};

struct Status {
    enum class Kind { converged, max_steps, diverged };
    Kind kind = Kind::max_steps;
    long step = -1;  ///< convergence or divergence step; -1 for max_steps

    bool diverged() const { return kind == Kind::diverged; }
    std::string str() const {
        switch (kind) {
            case Kind::converged: return "converged_at(" + std::to_string(step) + ")";
            case Kind::diverged: return "diverged(" + std::to_string(step) + ")";
            default: return "max_steps";
        }
    }
};

struct TrajectoryLog {
    std::vector<StepRecord> records;
    std::vector<Eigen::VectorXd> states;  ///< plant state at each record's time
    Status status;
    CriticWeights final_critic;
    ActorGains final_actor;
};

namespace detail {

inline constexpr double kDivergenceGuard = 1e9;

inline bool guard(double v) { return !std::isfinite(v) || std::abs(v) > kDivergenceGuard; }

}  // namespace detail

template <class P>
concept EpisodePlant = requires(P p, const P cp, double u) {
    { cp.read_output() } -> std::convertible_to<double>;
    { p.apply(u) };
    { cp.substep_outputs() } -> std::convertible_to<const std::vector<double>&>;
};

template <EpisodePlant P>
Eigen::VectorXd plant_state_or_empty(const P& plant) {
    if constexpr (requires { plant.state(); }) {
        return plant.state().x;
    } else {
        return Eigen::VectorXd();
    }
}

inline void fill_gains(StepRecord& rec, const ActorGains& actor, const CriticWeights& critic,
                       double floor) {
    rec.k0 = actor.K(0);
    rec.k1 = actor.K(1);
    rec.k2 = actor.K(2);
    try {
        const ActorGains g = greedy_gains(critic, floor);
        rec.gk0 = g.K(0);
        rec.gk1 = g.K(1);
        rec.gk2 = g.K(2);
    } catch (const SingularCriticError&) {
        rec.gk0 = rec.gk1 = rec.gk2 = 0.0;
    }
}

/// Run one adaptation episode against an arbitrary plant. The controller
/// side touches nothing but the plant's measured output and the reference
/// samples; plant matrices stay on the other side of the interface.
///
/// Critic updates, then actor updates against the refreshed critic, then the
/// windowed convergence test; after convergence the gains freeze but the
/// simulation and the log continue to the horizon.
template <EpisodePlant P>
TrajectoryLog run_episode(const ExperimentConfig& cfg, P& plant, ReferenceSignal& ref) {
    cfg.validate();
    const long n_steps = cfg.steps;
    const double dt = cfg.dt;
    const int
        sub = (cfg.quadrature == Quadrature::substate_trapezoid) ? cfg.substeps : 1;

    CriticWeights critic = (cfg.init_critic == CriticInit::coupled)
                               ? CriticWeights::seeded(cfg.init_coupling)
                               : CriticWeights{};
    ActorGains actor;
    actor.K = cfg.init_actor;

    TrajectoryLog log;
    log.records.reserve(static_cast<size_t>(n_steps));
    std::vector<CriticWeights> history;
    history.reserve(static_cast<size_t>(n_steps) + 1);
    history.push_back(critic);

    // Substep error ring over the last two control intervals, for the
    // substate quadrature; taps at multiples of `sub`.
    std::vector<double> ering(static_cast<size_t>(2 * sub + 1), 0.0);

    double y = plant.read_output();
    double y_ref = ref.sample(0.0);
    ErrorWindow window = push_error(ErrorWindow{}, y - y_ref);
    ering.back() = window.e0;

    bool frozen = false;
    Status status;
    status.kind = Status::Kind::max_steps;

    for (long k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const double u = policy(actor, window);

        StepRecord rec;
        rec.k = k;
        rec.t = t;
        rec.y_ref = y_ref;
        rec.y = y;
        rec.e = window.e0;
        rec.u = u;
        log.states.push_back(plant_state_or_empty(plant));

        double y_next = 0.0, y_ref_next = 0.0;
        try {
            plant.apply(u);
            y_next = plant.read_output();
            y_ref_next = ref.sample(static_cast<double>(k + 1) * dt);
        } catch (const DivergenceError&) {
            rec.V = value(critic, window, u);
            rec.U = utility(window, u, cfg.cost);
            fill_gains(rec, actor, critic, cfg.h_uu_floor);
            log.records.push_back(rec);
            status = {Status::Kind::diverged, k};
            break;
        }

        const ErrorWindow next_window = push_error(window, y_next - y_ref_next);
        const double u_next = policy(actor, next_window);

        const double u_now = utility(window, u, cfg.cost);
        const double v_now = value(critic, window, u);
        const double v_next = value(critic, next_window, u_next);

        // One-step utility integral.
        double u_int;
        if (cfg.quadrature == Quadrature::substate_trapezoid) {
            const std::vector<double>& ys = plant.substep_outputs();
            double acc = 0.0;
            double prev_u = u_now;
            for (int s = 0; s < sub; ++s) {
                const double frac = static_cast<double>(s + 1) / sub;
                const double yr = y_ref + frac * (y_ref_next - y_ref);
                ering.push_back(ys[static_cast<size_t>(s)] - yr);
                const size_t m = ering.size();
                ErrorWindow sub_w{ering[m - 1], ering[m - 1 - static_cast<size_t>(sub)],
                                  ering[m - 1 - static_cast<size_t>(2 * sub)]};
                const double u_s = utility(sub_w, u, cfg.cost);
                acc += 0.5 * (prev_u + u_s) * (dt / sub);
                prev_u = u_s;
            }
            ering.erase(ering.begin(), ering.end() - (2 * sub + 1));
            u_int = acc;
        } else {
            u_int = u_now * dt;
        }

        const double v_target = critic_target(u_int, v_next);
        const double residual = v_now - v_target;

        double critic_change = 0.0;
        if (!frozen) {
            const bool dead = cfg.deadzone > 0.0 && std::abs(residual) <= cfg.deadzone * u_int;
            if (!dead) {
                CriticWeights updated;
                ActorGains next_actor;
                try {
                    updated = update_critic(critic, window, u, v_target, cfg.rate_critic,
                                            cfg.mode, cfg.normalization, cfg.h_uu_floor);
                    next_actor = update_actor(actor, u, window, updated, cfg.rate_actor,
                                              cfg.mode, cfg.normalization, cfg.h_uu_floor);
                } catch (const NumericError&) {
                    rec.V = v_now;
                    rec.U = u_now;
                    rec.bellman_residual = residual;
                    fill_gains(rec, actor, critic, cfg.h_uu_floor);
                    log.records.push_back(rec);
                    status = {Status::Kind::diverged, k};
                    break;
                }
                if (cfg.actor_min)
                    next_actor.K = next_actor.K.cwiseMax(*cfg.actor_min).cwiseMin(*cfg.actor_max);
                critic_change = (updated.H - critic.H).norm();
                critic = updated;
                actor = next_actor;
            }
        }
        history.push_back(critic);

        rec.V = v_now;
        rec.U = u_now;
        rec.bellman_residual = residual;
        rec.critic_change = critic_change;
        fill_gains(rec, actor, critic, cfg.h_uu_floor);
        log.records.push_back(rec);

        if (detail::guard(y_next) || detail::guard(u) || detail::guard(v_now) ||
            detail::guard(residual) || detail::guard(rec.k0) || detail::guard(rec.k1) ||
            detail::guard(rec.k2)) {
            status = {Status::Kind::diverged, k};
            break;
        }

        if (!frozen && k > cfg.converge_window &&
            check_convergence(history, cfg.converge_window, cfg.converge_tol)) {
            status = {Status::Kind::converged, k};
            frozen = true;
        }

        y = y_next;
        y_ref = y_ref_next;
        window = next_window;
    }

    log.status = status;
    log.final_critic = critic;
    log.final_actor = actor;
    return log;
}

/// Convenience entry point: builds the simulated plant and reference from
/// the config and runs the episode.
inline TrajectoryLog run_episode(const ExperimentConfig& cfg) {
    cfg.validate();
    const int sub = (cfg.quadrature == Quadrature::substate_trapezoid) ? cfg.substeps : 1;
    SimulatedPlant plant(cfg.plant, cfg.schedule, cfg.x0, cfg.dt, sub);
    ReferenceSignal ref(cfg.reference, cfg.dt);
    return run_episode(cfg, plant, ref);
}

/// Per-disturbance-segment error statistics.
struct SegmentStats {
    long start_step = 0;
    long end_step = 0;  ///< exclusive
    double mean_abs_e_first10 = 0.0;
    double mean_abs_e_last10 = 0.0;
};

struct Summary {
    std::optional<long> settling_step;
    double mean_abs_e_final_10pct = 0.0;
    double max_abs_u = 0.0;
    double mean_abs_residual_final20 = 0.0;
    std::vector<SegmentStats> segments;
};

/// Post-run metrics. The settling step is recomputed from the logged critic
/// changes with the same window rule the episode used.
inline Summary metrics(const TrajectoryLog& log, const ExperimentConfig& cfg) {
    if (log.records.empty()) throw ConfigError("metrics on an empty log");
    const auto& r = log.records;
    const long n = static_cast<long>(r.size());
    Summary s;

    const long L = cfg.converge_window;
    for (long k = L + 1; k < n; ++k) {
        bool ok = true;
        for (long l = 0; l <= L && ok; ++l) {
            if (k - l < 0 || r[static_cast<size_t>(k - l)].critic_change > cfg.converge_tol)
                ok = false;
        }
        if (ok) {
            s.settling_step = k;
            break;
        }
    }

    const long tail = std::max<long>(1, n / 10);
    double acc = 0.0;
    for (long k = n - tail; k < n; ++k) acc += std::abs(r[static_cast<size_t>(k)].e);
    s.mean_abs_e_final_10pct = acc / static_cast<double>(tail);

    for (const auto& rec : r) s.max_abs_u = std::max(s.max_abs_u, std::abs(rec.u));

    const long rtail = std::min<long>(20, n);
    acc = 0.0;
    for (long k = n - rtail; k < n; ++k)
        acc += std::abs(r[static_cast<size_t>(k)].bellman_residual);
    s.mean_abs_residual_final20 = acc / static_cast<double>(rtail);

    const auto& segs = cfg.schedule.segments;
    for (size_t i = 0; i < segs.size(); ++i) {
        SegmentStats st;
        st.start_step = segs[i].start_step;
        st.end_step = (i + 1 < segs.size()) ? segs[i + 1].start_step : n;
        st.end_step = std::min(st.end_step, n);
        if (st.end_step <= st.start_step) continue;
        const long len = st.end_step - st.start_step;
        const long w = std::min<long>(10, len);
        double f = 0.0, l10 = 0.0;
        for (long k = st.start_step; k < st.start_step + w; ++k)
            f += std::abs(r[static_cast<size_t>(k)].e);
        for (long k = st.end_step - w; k < st.end_step; ++k)
            l10 += std::abs(r[static_cast<size_t>(k)].e);
        st.mean_abs_e_first10 = f / static_cast<double>(w);
        st.mean_abs_e_last10 = l10 / static_cast<double>(w);
        s.segments.push_back(st);
    }
    return s;
}

}  // namespace mrac
