#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "mrac/errors.hpp"

namespace mrac {

/// Stacked tracking-error window E(t) = [e(t), e(t-dt), e(t-2dt)].
/// Taps older than the run start are zero.
struct ErrorWindow {
    double e0 = 0.0;  ///< e(t)
    double e1 = 0.0;  ///< e(t - dt)
    double e2 = 0.0;  ///< e(t - 2 dt)

    Eigen::Vector3d vec() const { return {e0, e1, e2}; }
};

/// Shift a new error sample into the window.
inline ErrorWindow push_error(const ErrorWindow& w, double e_new) {
    if (!std::isfinite(e_new)) throw NumericError("error sample is not finite");
    return ErrorWindow{e_new, w.e0, w.e1};
}

/// Quadratic cost weights: U = 1/2 (E^T Q E + R u^2).
struct CostWeights {
    Eigen::Matrix3d Q = Eigen::Matrix3d::Identity();
    double R = 1.0;

    void validate() const {
        if (!Q.allFinite() || !std::isfinite(R)) throw ConfigError("cost weights must be finite");
        if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw ConfigError("cost.Q must be symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(Q);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw ConfigError("cost.Q must be positive definite");
        if (R <= 0.0) throw ConfigError("cost.R must be positive");
    }
};

/// Instantaneous utility. Nonnegative for valid weights; zero only at
/// E = 0, u = 0.
inline double utility(const ErrorWindow& e, double u, const CostWeights& w) {
    const Eigen::Vector3d ev = e.vec();
    return 0.5 * (ev.dot(w.Q * ev) + w.R * u * u);
}

/// The stacked critic input z = [E; u].
inline Eigen::Vector4d stacked(const ErrorWindow& e, double u) {
    Eigen::Vector4d z;
    z << e.e0, e.e1, e.e2, u;
    return z;
}

/// Default floor that keeps H_uu invertible through early transients.
inline constexpr double kDefaultHuuFloor = 1e-6;

/// Quadratic critic V(E, u) = 1/2 z^T H z with z = [E; u]. H is kept
/// symmetric; H_uu is floored so the greedy policy stays defined.
struct CriticWeights {
    Eigen::Matrix4d H = Eigen::Matrix4d::Identity();

    Eigen::Matrix3d h_ee() const { return H.topLeftCorner<3, 3>(); }
    Eigen::Vector3d h_eu() const { return H.topRightCorner<3, 1>(); }
    Eigen::RowVector3d h_ue() const { return H.bottomLeftCorner<1, 3>(); }
    double h_uu() const { return H(3, 3); }

    bool is_symmetric(double tol = 1e-12) const {
        return (H - H.transpose()).cwiseAbs().maxCoeff() <= tol;
    }

    /// Identity start with a small symmetric error-control coupling. A plain
    /// identity leaves H_uE = 0, and with zero actor gains the loop then
    /// produces u = 0 forever: the outer products z z^T carry no information
    /// into the H_uE row and no gain can ever form. The coupling seeds small
    /// negative greedy gains and lets the data take over.
    static CriticWeights seeded(double coupling) {
        CriticWeights c;
        c.H.topRightCorner<3, 1>().setConstant(coupling);
        c.H.bottomLeftCorner<1, 3>().setConstant(coupling);
        return c;
    }
};

/// Three-tap control gains u = K0 e(t) + Kd e(t-dt) + K2d e(t-2dt).
struct ActorGains {
    Eigen::RowVector3d K = Eigen::RowVector3d::Zero();
};

/// Apply the 3-tap policy.
inline double policy(const ActorGains& actor, const ErrorWindow& e) {
    return actor.K * e.vec();
}

/// Greedy gains K* = -H_uu^-1 H_uE, the minimizer of the quadratic value
/// over u. Invariant under positive scaling of H.
inline ActorGains greedy_gains(const CriticWeights& critic, double h_uu_floor = kDefaultHuuFloor) {
    if (!(critic.h_uu() >= h_uu_floor))
        throw SingularCriticError("critic H_uu below floor; greedy policy undefined");
    ActorGains g;
    g.K = -critic.h_ue() / critic.h_uu();
    return g;
}

/// Critic value estimate.
inline double value(const CriticWeights& critic, const ErrorWindow& e, double u) {
    const Eigen::Vector4d z = stacked(e, u);
    return 0.5 * z.dot(critic.H * z);
}

/// Integral-Bellman target: V~ = integral of U over one step plus the
/// next-step value.
inline double critic_target(double u_int, double v_next) {
    return u_int + v_next;
}

/// Which residual multiplies the update direction. `residual` uses the
/// signed prediction error (the gradient of the squared-residual loss, with
/// constant factors absorbed into the rate). `as_printed` multiplies by the
/// squared error itself, which is sign-blind; it is kept for fidelity
/// experiments.
enum class UpdateMode { residual, as_printed };

/// Step conditioning. `regressor` divides the update by the squared norm of
/// its regressor (floored at one), the usual normalized-gradient scheme that
/// makes rates in (0,1) stable at any signal scale. `none` applies the raw
/// law, which is only stable for |z| of order one.
enum class StepNormalization { regressor, none };

/// One critic adaptation step toward the Bellman target.
inline CriticWeights update_critic(const CriticWeights& critic, const ErrorWindow& e, double u,
                                   double v_target, double rate,
                                   UpdateMode mode = UpdateMode::residual,
                                   StepNormalization norm = StepNormalization::regressor,
                                   double h_uu_floor = kDefaultHuuFloor) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("critic rate must lie in [0, 1)");
    if (!std::isfinite(v_target)) throw NumericError("critic target is not finite");
    const Eigen::Vector4d z = stacked(e, u);
    const double delta = value(critic, e, u) - v_target;
    const double coeff = (mode == UpdateMode::residual) ? delta : 0.5 * delta * delta;
    double eta = 1.0;
    if (norm == StepNormalization::regressor) {
        const double zz = std::max(1.0, z.squaredNorm());
        eta = zz * zz;
    }
    CriticWeights out;
    out.H = critic.H - (rate * coeff / eta) * (z * z.transpose());
    out.H = 0.5 * (out.H + out.H.transpose());
    if (out.H(3, 3) < h_uu_floor) out.H(3, 3) = h_uu_floor;
    if (!out.H.allFinite()) throw NumericError("critic update produced non-finite weights");
    return out;
}

/// One actor adaptation step toward the critic's greedy policy evaluated on
/// the same window.
inline ActorGains update_actor(const ActorGains& actor, double u_hat, const ErrorWindow& e,
                               const CriticWeights& critic, double rate,
                               UpdateMode mode = UpdateMode::residual,
                               StepNormalization norm = StepNormalization::regressor,
                               double h_uu_floor = kDefaultHuuFloor) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("actor rate must lie in [0, 1)");
    const double u_tilde = policy(greedy_gains(critic, h_uu_floor), e);
    const double r = u_hat - u_tilde;
    const double coeff = (mode == UpdateMode::residual) ? r : 0.5 * r * r;
    const double eta = (norm == StepNormalization::regressor)
                           ? std::max(1.0, e.vec().squaredNorm())
                           : 1.0;
    ActorGains out;
    out.K = actor.K - (rate * coeff / eta) * e.vec().transpose();
    if (!out.K.allFinite()) throw NumericError("actor update produced non-finite gains");
    return out;
}

/// Windowed convergence test on the critic history: true once the last
/// L + 1 successive Frobenius differences are all within tol. Needs at
/// least L + 2 entries.
inline bool check_convergence(const std::vector<CriticWeights>& history, long window, double tol) {
    if (window < 1) throw ConfigError("convergence window must be >= 1");
    if (!(tol > 0.0)) throw ConfigError("convergence tolerance must be positive");
    const long n = static_cast<long>(history.size());
    if (n < window + 2) return false;
    for (long l = 0; l <= window; ++l) {
        const auto& a = history[static_cast<size_t>(n - 1 - l)].H;
        const auto& b = history[static_cast<size_t>(n - 2 - l)].H;
        if ((a - b).norm() > tol) return false;
    }
    return true;
}

}  // namespace mrac
