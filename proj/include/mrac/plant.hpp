#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <utility>
#include <vector>

#include "mrac/errors.hpp"

namespace mrac {

/// Continuous-time LTI plant: x' = A x + B u, y = C x.
/// Single-input single-output (B is one column, C one row); the state
/// dimension is free. Simulation ground truth only -- the controller side
/// never sees these matrices.
struct PlantModel {
    Eigen::MatrixXd A;     ///< n x n drift dynamics [1/s]
    Eigen::VectorXd B;     ///< n x 1 input map
    Eigen::RowVectorXd C;  ///< 1 x n output map

    void validate() const {
        if (A.rows() != A.cols()) throw ConfigError("plant.A must be square");
        if (B.rows() != A.rows()) throw ConfigError("plant.B rows must match plant.A");
        if (C.cols() != A.cols()) throw ConfigError("plant.C cols must match plant.A");
        if (!A.allFinite() || !B.allFinite() || !C.allFinite())
            throw ConfigError("plant matrices must be finite");
    }

    /// The linearized longitudinal aircraft model used by the bundled scenarios.
    /// States: angle of attack [rad] and pitch rate [rad/s]; input: elevator
    /// deflection; output: vertical acceleration [m/s^2].
    static PlantModel aircraft() {
        PlantModel m;
        m.A.resize(2, 2);
        m.A << -8.76, 0.954, -177.0, -9.92;
        m.B.resize(2);
        m.B << -0.697, -168.0;
        m.C.resize(2);
        m.C << -0.8, -0.04;
        return m;
    }
};

/// Plant state vector plus simulation time.
struct PlantState {
    Eigen::VectorXd x;
    double t = 0.0;
};

/// Matched input-channel disturbance: x' = A x + B (rho u + xi x).
struct Disturbance {
    double rho = 1.0;
    Eigen::RowVectorXd xi;  ///< 1 x n

    static Disturbance identity(Eigen::Index n) {
        return Disturbance{1.0, Eigen::RowVectorXd::Zero(n)};
    }
};

/// Piecewise-constant disturbance segments keyed by step index. A switch
/// takes effect at its start step; the first segment must start at step 0 so
/// every step maps to exactly one segment.
struct DisturbanceSchedule {
    struct Segment {
        long start_step = 0;
        Disturbance d;
    };
    std::vector<Segment> segments;

    static DisturbanceSchedule identity(Eigen::Index n) {
        return DisturbanceSchedule{{Segment{0, Disturbance::identity(n)}}};
    }

    void validate(Eigen::Index n) const {
        if (segments.empty()) throw ConfigError("disturbance schedule is empty");
        if (segments.front().start_step != 0)
            throw ConfigError("disturbance schedule must start at step 0");
        long prev = -1;
        for (const auto& s : segments) {
            if (s.start_step <= prev)
                throw ConfigError("disturbance segments must be ordered by start step");
            if (s.d.rho == 0.0) throw ConfigError("disturbance rho must be nonzero");
            if (s.d.xi.cols() != n) throw ConfigError("disturbance xi must be 1 x n");
            if (!s.d.xi.allFinite() || !std::isfinite(s.d.rho))
                throw ConfigError("disturbance entries must be finite");
            prev = s.start_step;
        }
    }
};

/// Segment lookup. Total over k >= 0.
inline const Disturbance& disturbance_at(const DisturbanceSchedule& schedule, long k) {
    if (schedule.segments.empty()) throw ConfigError("disturbance schedule is empty");
    const Disturbance* hit = nullptr;
    for (const auto& s : schedule.segments) {
        if (s.start_step <= k) hit = &s.d;
    }
    if (!hit) throw ConfigError("no disturbance segment covers step " + std::to_string(k));
    return *hit;
}

/// Exact zero-order-hold discretization of the effective pair
/// (A + B xi, rho B) over one step.
struct DiscretePlant {
    Eigen::MatrixXd Ad;
    Eigen::VectorXd Bd;
    double dt = 0.0;
};

/// Discretize under ZOH control via the augmented-matrix exponential
///   exp([A_eff  B_eff; 0  0] dt) = [Ad  Bd; 0  I],
/// which needs no inversion of A_eff.
inline DiscretePlant discretize_zoh(const PlantModel& model, const Disturbance& d, double dt) {
    model.validate();
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    const Eigen::Index n = model.A.rows();
    Eigen::MatrixXd a_eff = model.A + model.B * d.xi;
    Eigen::VectorXd b_eff = d.rho * model.B;

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n + 1, n + 1);
    m.topLeftCorner(n, n) = a_eff * dt;
    m.topRightCorner(n, 1) = b_eff * dt;
    Eigen::MatrixXd phi = m.exp();

    DiscretePlant out;
    out.Ad = phi.topLeftCorner(n, n);
    out.Bd = phi.topRightCorner(n, 1);
    out.dt = dt;
    if (!out.Ad.allFinite() || !out.Bd.allFinite())
        throw NumericError("ZOH discretization produced non-finite entries");
    return out;
}

/// One ZOH step: x+ = Ad x + Bd u, t+ = t + dt.
inline PlantState step(const DiscretePlant& plant, const PlantState& state, double u) {
    if (!std::isfinite(u)) throw NumericError("control input is not finite");
    PlantState next;
    next.x = plant.Ad * state.x + plant.Bd * u;
    next.t = state.t + plant.dt;
    if (!next.x.allFinite())
        throw DivergenceError("plant state became non-finite",
                              static_cast<long>(std::llround(state.t / plant.dt)));
    return next;
}

/// y = C x.
inline double output(const PlantModel& model, const PlantState& state) {
    return model.C * state.x;
}

/// Owns the hidden simulation truth for one episode: holds the continuous
/// model, applies the disturbance schedule, and re-discretizes exactly at
/// each segment switch. The episode loop talks to it through read_output(),
/// apply() and substep_outputs() only.
///
/// With substeps > 1 each control interval is integrated as that many exact
/// ZOH sub-intervals (identical end state by the semigroup property) and the
/// intermediate outputs are kept for quadrature.
class SimulatedPlant {
  public:
    SimulatedPlant(PlantModel model, DisturbanceSchedule schedule, Eigen::VectorXd x0, double dt,
                   int substeps = 1)
        : model_(std::move(model)), schedule_(std::move(schedule)), dt_(dt), substeps_(substeps) {
        model_.validate();
        schedule_.validate(model_.A.rows());
        if (!(dt > 0.0)) throw ConfigError("dt must be positive");
        if (substeps < 1) throw ConfigError("substeps must be >= 1");
        if (x0.size() != model_.A.rows()) throw ConfigError("x0 dimension must match plant.A");
        state_.x = std::move(x0);
        state_.t = 0.0;
        substep_outputs_.resize(static_cast<size_t>(substeps));
    }

    double read_output() const { return output(model_, state_); }

    /// Outputs at the substep instants of the most recent control interval;
    /// the last entry equals read_output().
    const std::vector<double>& substep_outputs() const { return substep_outputs_; }

    const PlantState& state() const { return state_; }
    long step_index() const { return k_; }

    /// Advance one control interval with u held constant.
    void apply(double u) {
        const Disturbance& d = disturbance_at(schedule_, k_);
        if (&d != active_segment_) {
            discrete_ = discretize_zoh(model_, d, dt_ / substeps_);
            active_segment_ = &d;
        }
        for (int s = 0; s < substeps_; ++s) {
            state_ = step(discrete_, state_, u);
            substep_outputs_[static_cast<size_t>(s)] = output(model_, state_);
        }
        ++k_;
    }

  private:
    PlantModel model_;
    DisturbanceSchedule schedule_;
    double dt_;
    int substeps_;
    PlantState state_;
    DiscretePlant discrete_;
    const Disturbance* active_segment_ = nullptr;
    std::vector<double> substep_outputs_;
    long k_ = 0;
};

}  // namespace mrac
