#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "mrac/controller.hpp"
#include "mrac/errors.hpp"
#include "mrac/plant.hpp"
#include "mrac/reference.hpp"

namespace mrac {

/// Classical fixed-substep RK4 integration of x' = A_eff x + B_eff u over
/// one interval with u held constant. Reference integrator for the
/// ZOH-exact path.
inline PlantState rk4_propagate(const PlantModel& model, const Disturbance& d,
                                const PlantState& state, double u, double dt, double substep) {
    model.validate();
    if (!(substep > 0.0) || substep > dt / 10.0 + 1e-15)
        throw ConfigError("rk4 substep must be positive and <= dt/10");
    const long n = std::lround(dt / substep);
    if (std::abs(dt - static_cast<double>(n) * substep) > 1e-9 * dt)
        throw ConfigError("rk4 substep must divide dt");

    const Eigen::MatrixXd a_eff = model.A + model.B * d.xi;
    const Eigen::VectorXd bu = d.rho * model.B * u;
    auto f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a_eff * x + bu; };

    Eigen::VectorXd x = state.x;
    for (long i = 0; i < n; ++i) {
        const Eigen::VectorXd k1 = f(x);
        const Eigen::VectorXd k2 = f(x + 0.5 * substep * k1);
        const Eigen::VectorXd k3 = f(x + 0.5 * substep * k2);
        const Eigen::VectorXd k4 = f(x + substep * k3);
        x += (substep / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return PlantState{std::move(x), state.t + dt};
}

/// Central finite differences of a scalar loss over a flat weight vector.
template <class F>
std::vector<double> fd_gradient(F&& loss, std::vector<double> weights, double eps) {
    if (!(eps >= 1e-8 && eps <= 1e-4))
        throw ConfigError("fd_gradient eps must lie in [1e-8, 1e-4]");
    std::vector<double> grad(weights.size());
    for (size_t i = 0; i < weights.size(); ++i) {
        const double w0 = weights[i];
        weights[i] = w0 + eps;
        const double up = loss(weights);
        weights[i] = w0 - eps;
        const double down = loss(weights);
        weights[i] = w0;
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

struct RolloutOptions {
    double control_dt = 0.1;  ///< interval at which the 3-tap policy refreshes
    Disturbance disturbance{1.0, Eigen::RowVectorXd()};  ///< identity when xi is empty
    /// Fine-grid error history over [t0 - 2*control_dt, t0], 2m+1 samples at
    /// dt_fine resolution (m = control_dt/dt_fine). Zero-padded when empty,
    /// with the final sample replaced by the true e(t0).
    std::vector<double> prior_errors;
    double stop_utility = 1e-10;  ///< truncate once U stays below this for one interval
    double max_horizon = 60.0;    ///< hard truncation [s]
};

/// Brute-force closed-loop cost: integrate the plant at dt_fine (RK4), hold
/// the 3-tap policy at the coarse interval, accumulate U * dt_fine. The
/// reference is realized on the coarse grid and linearly interpolated in
/// between. Independent of the critic path entirely.
inline double rollout_cost(const PlantModel& model, const ActorGains& gains,
                           const ReferenceSpec& ref, const PlantState& x0, double horizon,
                           double dt_fine, const CostWeights& w, RolloutOptions opts = {}) {
    model.validate();
    w.validate();
    if (opts.disturbance.xi.size() == 0)
        opts.disturbance = Disturbance::identity(model.A.cols());
    else if (opts.disturbance.xi.cols() != model.A.cols())
        throw ConfigError("rollout disturbance xi must be 1 x n");
    const double cdt = opts.control_dt;
    if (!(dt_fine > 0.0) || dt_fine > cdt / 10.0 + 1e-15)
        throw ConfigError("rollout dt_fine must be positive and <= control_dt/10");
    const long m = std::lround(cdt / dt_fine);
    if (std::abs(cdt - static_cast<double>(m) * dt_fine) > 1e-9 * cdt)
        throw ConfigError("rollout dt_fine must divide control_dt");

    // Coarse reference grid spanning the whole rollout, starting at t = 0 so
    // stateful kinds reproduce the harness trajectory exactly.
    const double t_end = x0.t + std::min(horizon, opts.max_horizon) + 2.0 * cdt;
    const long n_grid = static_cast<long>(std::ceil(t_end / cdt)) + 1;
    ReferenceSignal sig(ref, cdt);
    std::vector<double> grid(static_cast<size_t>(n_grid) + 1);
    for (long g = 0; g <= n_grid; ++g) grid[static_cast<size_t>(g)] = sig.sample(g * cdt);
    auto ref_at = [&](double t) {
        const double pos = t / cdt;
        long g = static_cast<long>(pos);
        if (g >= n_grid) g = n_grid - 1;
        const double frac = pos - static_cast<double>(g);
        return grid[static_cast<size_t>(g)] +
               frac * (grid[static_cast<size_t>(g) + 1] - grid[static_cast<size_t>(g)]);
    };

    std::vector<double> ring = opts.prior_errors;
    if (ring.empty()) ring.assign(static_cast<size_t>(2 * m) + 1, 0.0);
    if (ring.size() != static_cast<size_t>(2 * m) + 1)
        throw ConfigError("rollout prior_errors must hold 2m+1 samples");
    ring.back() = model.C * x0.x - ref_at(x0.t);

    const Eigen::MatrixXd a_eff = model.A + model.B * opts.disturbance.xi;
    const Eigen::VectorXd b_eff = opts.disturbance.rho * model.B;

    Eigen::VectorXd x = x0.x;
    double j = 0.0;
    double u = 0.0;
    long quiet = 0;
    const long n_max = std::lround(std::min(horizon, opts.max_horizon) / dt_fine);
    for (long i = 0; i < n_max; ++i) {
        const size_t end = ring.size();
        const ErrorWindow win{ring[end - 1], ring[end - 1 - static_cast<size_t>(m)],
                              ring[end - 1 - static_cast<size_t>(2 * m)]};
        if (i % m == 0) u = policy(gains, win);
        const double util = utility(win, u, w);
        j += util * dt_fine;
        quiet = (util < opts.stop_utility) ? quiet + 1 : 0;
        if (quiet >= m && i >= 2 * m) break;

        const Eigen::VectorXd bu = b_eff * u;
        auto f = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return a_eff * v + bu; };
        const Eigen::VectorXd k1 = f(x);
        const Eigen::VectorXd k2 = f(x + 0.5 * dt_fine * k1);
        const Eigen::VectorXd k3 = f(x + 0.5 * dt_fine * k2);
        const Eigen::VectorXd k4 = f(x + dt_fine * k3);
        x += (dt_fine / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e12)
            throw UnboundedCostError("rollout diverged; gains are not stabilizing");

        const double t_next = x0.t + static_cast<double>(i + 1) * dt_fine;
        ring.push_back(model.C * x - ref_at(t_next));
        if (ring.size() > static_cast<size_t>(4 * m)) {
            ring.erase(ring.begin(),
                       ring.end() - (static_cast<std::ptrdiff_t>(2 * m) + 1));
        }
    }
    return j;
}

}  // namespace mrac
