#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mrac/controller.hpp"
#include "mrac/oracle.hpp"

using namespace mrac;

namespace {

CriticWeights random_critic(std::mt19937& rng) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m(r, c) = coef(rng);
    CriticWeights out;
    out.H = 0.5 * (m + m.transpose());
    out.H(3, 3) = std::abs(out.H(3, 3)) + 0.5;
    return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("push_error shifts the window") {
    ErrorWindow w;
    w = push_error(w, 1.0);
    CHECK(w.e0 == 1.0);
    CHECK(w.e1 == 0.0);
    CHECK(w.e2 == 0.0);
    w = push_error(w, 2.0);
    CHECK(w.e0 == 2.0);
    CHECK(w.e1 == 1.0);
    CHECK(w.e2 == 0.0);
    w = push_error(w, 3.0);
    CHECK(w.e0 == 3.0);
    CHECK(w.e1 == 2.0);
    CHECK(w.e2 == 1.0);
    CHECK_THROWS_AS(push_error(w, std::numeric_limits<double>::infinity()), NumericError);
}

TEST_CASE("utility examples and positivity") {
    CostWeights w;
    CHECK(utility(ErrorWindow{}, 0.0, w) == 0.0);
    CHECK(utility(ErrorWindow{1, 0, 0}, 0.0, w) == Catch::Approx(0.5));
    CHECK(utility(ErrorWindow{1, 1, 1}, 2.0, w) == Catch::Approx(3.5));

    std::mt19937 rng(3);
    std::uniform_real_distribution<double> coef(-5.0, 5.0);
    for (int i = 0; i < 50; ++i) {
        const ErrorWindow e{coef(rng), coef(rng), coef(rng)};
        const double u = coef(rng);
        const double v = utility(e, u, w);
        CHECK(v >= 0.0);
        if (e.vec().norm() + std::abs(u) > 1e-12) CHECK(v > 0.0);
    }
}

TEST_CASE("cost weights validation") {
    CostWeights w;
    w.R = 0.0;
    CHECK_THROWS_AS(w.validate(), ConfigError);
    w.R = 1.0;
    w.Q(0, 1) = 0.5;  // asymmetric
    CHECK_THROWS_AS(w.validate(), ConfigError);
    w.Q(0, 1) = 0.0;
    w.Q(2, 2) = -1.0;  // not positive definite
    CHECK_THROWS_AS(w.validate(), ConfigError);
}

TEST_CASE("value examples and nonnegativity for positive definite H") {
    CriticWeights c;
    CHECK(value(c, ErrorWindow{}, 0.0) == 0.0);
    CHECK(value(c, ErrorWindow{1, 0, 0}, 1.0) == Catch::Approx(1.0));
    CriticWeights c2;
    c2.H = 2.0 * Eigen::Matrix4d::Identity();
    CHECK(value(c2, ErrorWindow{1, 2, 0}, 0.0) == Catch::Approx(5.0));

    std::mt19937 rng(5);
    std::uniform_real_distribution<double> coef(-4.0, 4.0);
    for (int i = 0; i < 50; ++i) {
        const ErrorWindow e{coef(rng), coef(rng), coef(rng)};
        const double u = coef(rng);
        const double v = value(c, e, u);  // identity H is positive definite
        CHECK(v >= 0.0);
        if (stacked(e, u).norm() > 1e-12) CHECK(v > 0.0);
    }
}

TEST_CASE("policy examples and linearity") {
    ActorGains zero;
    CHECK(policy(zero, ErrorWindow{4, -7, 2}) == 0.0);

    ActorGains k;
    k.K << 1, 2, 3;
    CHECK(policy(k, ErrorWindow{1, 1, 1}) == Catch::Approx(6.0));
    ActorGains k2;
    k2.K << -1.5, 0, 0;
    CHECK(policy(k2, ErrorWindow{2, 5, 7}) == Catch::Approx(-3.0));

    std::mt19937 rng(9);
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    for (int i = 0; i < 30; ++i) {
        ActorGains g;
        g.K << coef(rng), coef(rng), coef(rng);
        const ErrorWindow e{coef(rng), coef(rng), coef(rng)};
        const double a = coef(rng);
        const ErrorWindow ae{a * e.e0, a * e.e1, a * e.e2};
        CHECK(policy(g, ae) == Catch::Approx(a * policy(g, e)).margin(1e-12));
    }
}

TEST_CASE("greedy gains") {
    CriticWeights ident;
    CHECK(greedy_gains(ident).K.cwiseAbs().maxCoeff() == 0.0);

    CriticWeights c;
    c.H.setIdentity();
    c.H(3, 3) = 2.0;
    c.H(3, 0) = c.H(0, 3) = 1.0;
    const ActorGains g = greedy_gains(c);
    CHECK(g.K(0) == Catch::Approx(-0.5));
    CHECK(g.K(1) == 0.0);
    CHECK(g.K(2) == 0.0);

    // invariant under positive scaling
    std::mt19937 rng(13);
    for (int i = 0; i < 20; ++i) {
        const CriticWeights r = random_critic(rng);
        CriticWeights scaled;
        scaled.H = 3.7 * r.H;
        const ActorGains a = greedy_gains(r), b = greedy_gains(scaled);
        CHECK((a.K - b.K).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, a.K.cwiseAbs().maxCoeff()));
    }

    CriticWeights sing;
    sing.H.setIdentity();
    sing.H(3, 3) = 1e-9;
    CHECK_THROWS_AS(greedy_gains(sing), SingularCriticError);
}

TEST_CASE("critic target") {
    CHECK(critic_target(0.0, 0.0) == 0.0);
    CHECK(critic_target(0.05, 1.0) == Catch::Approx(1.05));
}

TEST_CASE("critic update: no-ops and the hand-evaluated gradient step") {
    CriticWeights c;  // identity
    const ErrorWindow e{1, 0, 0};

    // prediction equals target -> unchanged
    const double v = value(c, e, 0.0);
    CriticWeights same = update_critic(c, e, 0.0, v, 0.5);
    CHECK((same.H - c.H).norm() == 0.0);

    // zero rate -> unchanged
    same = update_critic(c, e, 0.0, 0.0, 0.0);
    CHECK((same.H - c.H).norm() == 0.0);

    // spec example: delta = 0.5, z z^T has a single 1 at (0,0) -> H00 = 0.75
    const CriticWeights stepped = update_critic(c, e, 0.0, 0.0, 0.5);
    CHECK(stepped.H(0, 0) == Catch::Approx(0.75));
    CHECK((stepped.H - Eigen::Matrix4d::Identity()).cwiseAbs().sum() ==
          Catch::Approx(0.25));  // only that entry moved

    // identical under both normalizations at unit regressor norm
    const CriticWeights unnorm =
        update_critic(c, e, 0.0, 0.0, 0.5, UpdateMode::residual, StepNormalization::none);
    CHECK((stepped.H - unnorm.H).norm() == 0.0);

    CHECK_THROWS_AS(update_critic(c, e, 0.0, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(update_critic(c, e, 0.0, std::numeric_limits<double>::quiet_NaN(), 0.5),
                    NumericError);
}

TEST_CASE("as_printed mode is sign-blind by construction") {
    CriticWeights c;
    const ErrorWindow e{1, 0, 0};
    // zero residual still a no-op
    const double v = value(c, e, 0.0);
    CHECK((update_critic(c, e, 0.0, v, 0.5, UpdateMode::as_printed).H - c.H).norm() == 0.0);
    // positive and negative residuals of equal size move H the same way
    const CriticWeights up = update_critic(c, e, 0.0, v - 1.0, 0.3, UpdateMode::as_printed);
    const CriticWeights dn = update_critic(c, e, 0.0, v + 1.0, 0.3, UpdateMode::as_printed);
    CHECK((up.H - dn.H).norm() <= 1e-15);
    CHECK(up.H(0, 0) < c.H(0, 0));
}

TEST_CASE("updates preserve symmetry and the H_uu floor") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    CriticWeights c = random_critic(rng);
    for (int i = 0; i < 200; ++i) {
        const ErrorWindow e{coef(rng), coef(rng), coef(rng)};
        const double u = coef(rng);
        const double target = coef(rng) * 4.0;
        c = update_critic(c, e, u, target, 0.5);
        CHECK(c.is_symmetric(1e-12));
        CHECK(c.h_uu() >= kDefaultHuuFloor);
    }
}

TEST_CASE("actor update: no-ops and the hand-evaluated step") {
    CriticWeights critic;
    critic.H.setIdentity();
    critic.H(3, 0) = critic.H(0, 3) = -1.0;  // greedy gains [1, 0, 0]
    ActorGains actor;

    // u_hat equals the greedy target -> unchanged
    const ErrorWindow e{1, 0, 0};
    const double u_tilde = policy(greedy_gains(critic), e);
    REQUIRE(u_tilde == Catch::Approx(1.0));
    ActorGains same = update_actor(actor, u_tilde, e, critic, 0.5);
    CHECK((same.K - actor.K).norm() == 0.0);

    // zero window -> unchanged
    same = update_actor(actor, 0.3, ErrorWindow{}, critic, 0.5);
    CHECK((same.K - actor.K).norm() == 0.0);

    // spec example: K = 0, u_hat = 0, u_tilde = 1, E = [1,0,0] -> K+ = [0.5, 0, 0]
    const ActorGains stepped = update_actor(actor, 0.0, e, critic, 0.5);
    CHECK(stepped.K(0) == Catch::Approx(0.5));
    CHECK(stepped.K(1) == 0.0);
    CHECK(stepped.K(2) == 0.0);

    CriticWeights sing;
    sing.H.setIdentity();
    sing.H(3, 3) = 1e-12;
    CHECK_THROWS_AS(update_actor(actor, 0.0, e, sing, 0.5), SingularCriticError);
}

TEST_CASE("residual-mode steps descend their squared-error losses") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);

    for (int i = 0; i < 40; ++i) {
        CriticWeights c = random_critic(rng);
        const ErrorWindow e{coef(rng), coef(rng), coef(rng)};
        const double u = coef(rng);
        const double target = coef(rng) * 3.0;

        const double before = 0.5 * std::pow(value(c, e, u) - target, 2);
        const CriticWeights after = update_critic(c, e, u, target, 1e-4);
        const double after_loss = 0.5 * std::pow(value(after, e, u) - target, 2);
        CHECK(after_loss <= before + 1e-15);

        // analytic step direction vs central differences of the frozen-target loss
        auto loss = [&](const std::vector<double>& w) {
            CriticWeights cw;
            for (int r = 0; r < 4; ++r)
                for (int col = 0; col < 4; ++col) cw.H(r, col) = w[static_cast<size_t>(4 * r + col)];
            return 0.5 * std::pow(value(cw, e, u) - target, 2);
        };
        std::vector<double> w0(16);
        for (int r = 0; r < 4; ++r)
            for (int col = 0; col < 4; ++col) w0[static_cast<size_t>(4 * r + col)] = c.H(r, col);
        const std::vector<double> fd = fd_gradient(loss, w0, 1e-5);

        const double delta = value(c, e, u) - target;
        if (std::abs(delta) < 1e-3) continue;
        const Eigen::Vector4d z = stacked(e, u);
        const Eigen::Matrix4d dir = delta * (z * z.transpose());
        std::vector<double> analytic(16);
        for (int r = 0; r < 4; ++r)
            for (int col = 0; col < 4; ++col)
                analytic[static_cast<size_t>(4 * r + col)] = dir(r, col);
        CHECK(cosine(analytic, fd) >= 1.0 - 1e-6);
    }
}

TEST_CASE("actor residual step matches the finite-difference gradient") {
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    for (int i = 0; i < 40; ++i) {
        CriticWeights c = random_critic(rng);
        ActorGains a;
        a.K << coef(rng), coef(rng), coef(rng);
        const ErrorWindow e{coef(rng), coef(rng), coef(rng)};
        const double u_tilde = policy(greedy_gains(c), e);
        const double u_hat = policy(a, e);
        if (std::abs(u_hat - u_tilde) < 1e-3 || e.vec().norm() < 1e-3) continue;

        auto loss = [&](const std::vector<double>& w) {
            ActorGains g;
            g.K << w[0], w[1], w[2];
            return 0.5 * std::pow(policy(g, e) - u_tilde, 2);
        };
        const std::vector<double> fd = fd_gradient(loss, {a.K(0), a.K(1), a.K(2)}, 1e-5);
        const Eigen::Vector3d dir = (u_hat - u_tilde) * e.vec();
        CHECK(cosine({dir(0), dir(1), dir(2)}, fd) >= 1.0 - 1e-6);
    }
}

TEST_CASE("convergence window") {
    std::vector<CriticWeights> hist;
    const long L = 4;
    CriticWeights c;
    for (int i = 0; i < L + 2; ++i) hist.push_back(c);
    CHECK(check_convergence(hist, L, 1e-8));

    hist.pop_back();
    CHECK_FALSE(check_convergence(hist, L, 1e-8));  // shorter than L + 2

    // one jump of 2x tolerance inside the window
    std::vector<CriticWeights> jumpy;
    for (int i = 0; i < L + 2; ++i) {
        CriticWeights cc;
        if (i == 3) cc.H(0, 0) += 2e-8;
        jumpy.push_back(cc);
    }
    CHECK_FALSE(check_convergence(jumpy, L, 1e-8));

    CHECK_THROWS_AS(check_convergence(hist, 0, 1e-8), ConfigError);
    CHECK_THROWS_AS(check_convergence(hist, L, 0.0), ConfigError);
}

TEST_CASE("seeded critic start is symmetric and yields negative greedy gains") {
    const CriticWeights c = CriticWeights::seeded(0.1);
    CHECK(c.is_symmetric());
    const ActorGains g = greedy_gains(c);
    CHECK(g.K(0) == Catch::Approx(-0.1));
    CHECK(g.K(1) == Catch::Approx(-0.1));
    CHECK(g.K(2) == Catch::Approx(-0.1));
}
