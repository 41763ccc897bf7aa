#include <gtest/gtest.h>

#include <cmath>

#include "maglev/dynamics.hpp"
#include "maglev/integrator.hpp"
#include "oracles.hpp"

using namespace maglev;

namespace {

PlantParams params() { return PlantParams{}; }

PlantParams damped() {
    PlantParams p;
    p.c << 5, 5, 5, 0.1, 0.1, 0.1;
    return p;
}

}  // namespace

TEST(MassMatrix, ZeroAnglesIsDiagonalInertia) {
    const auto p = params();
    const Mat6 M = mass_matrix(Vec6::Zero(), p);
    Vec6 d;
    d << p.m, p.m, p.m, p.I_chi, p.I_psi, p.I_zeta;
    EXPECT_EQ(M, Mat6(d.asDiagonal()));
}

TEST(MassMatrix, SingularAtQuarterTurnPitch) {
    const auto p = params();
    for (double chi : {0.0, 0.3, -1.2}) {
        Vec6 q = Vec6::Zero();
        q(axis::chi) = chi;
        q(axis::psi) = M_PI / 2;
        EXPECT_NEAR(mass_matrix(q, p).determinant(), 0.0, 1e-18);
    }
}

TEST(MassMatrix, MatchesKinematicOracleAtSmallAngles) {
    const auto p = params();
    Vec6 q = Vec6::Zero();
    q(axis::chi) = 0.003;
    q(axis::psi) = -0.002;
    q(axis::zeta) = 0.4;
    EXPECT_LT((mass_matrix(q, p) - oracle::mass_matrix(q, p)).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(MassMatrix, SymmetricAndDeterminantOnRandomStates) {
    const auto p = params();
    oracle::StateSampler draw(11);
    for (int n = 0; n < 1000; ++n) {
        Vec6 q = draw(1.2).q;
        const Mat6 M = mass_matrix(q, p);
        ASSERT_EQ((M - M.transpose()).cwiseAbs().maxCoeff(), 0.0);
        const double cp = std::cos(q(axis::psi));
        const double det = p.m * p.m * p.m * p.I_chi * p.I_psi * p.I_zeta * cp * cp;
        ASSERT_NEAR(M.determinant() / det, 1.0, 1e-10);
        ASSERT_LT(oracle::rel_err(M, oracle::mass_matrix(q, p)), 1e-14);
    }
}

TEST(Christoffel, TranslationBlockVanishes) {
    oracle::StateSampler draw(3);
    for (int n = 0; n < 20; ++n) {
        const auto g = christoffel(draw(0.5).q, params());
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) EXPECT_EQ(g[i](j, k), 0.0);
    }
}

TEST(Christoffel, SymmetricInLastTwoIndices) {
    oracle::StateSampler draw(4);
    for (int n = 0; n < 50; ++n) {
        const auto g = christoffel(draw(0.8).q, params());
        for (int i = 0; i < 6; ++i) ASSERT_EQ(g[i], g[i].transpose());
    }
}

TEST(Christoffel, MatchesFiniteDifferencesAtOrigin) {
    const auto g = christoffel(Vec6::Zero(), params());
    const auto fd = oracle::christoffel_fd(Vec6::Zero(), params());
    double worst = 0.0, scale = 0.0;
    for (int i = 0; i < 6; ++i) {
        worst = std::max(worst, (g[i] - fd[i]).cwiseAbs().maxCoeff());
        scale = std::max(scale, fd[i].cwiseAbs().maxCoeff());
    }
    EXPECT_GT(scale, 0.0);
    EXPECT_LT(worst / scale, 1e-6);
}

TEST(Christoffel, MatchesFiniteDifferencesOnRandomStates) {
    oracle::StateSampler draw(5);
    for (int n = 0; n < 200; ++n) {
        const Vec6 q = draw().q;
        const auto g = christoffel(q, params());
        const auto fd = oracle::christoffel_fd(q, params());
        double worst = 0.0, scale = 0.0;
        for (int i = 0; i < 6; ++i) {
            worst = std::max(worst, (g[i] - fd[i]).cwiseAbs().maxCoeff());
            scale = std::max(scale, fd[i].cwiseAbs().maxCoeff());
        }
        ASSERT_LT(worst / scale, 1e-6);
    }
}

TEST(Coriolis, ZeroAtRest) {
    oracle::StateSampler draw(6);
    EXPECT_TRUE(coriolis_matrix(draw().q, Vec6::Zero(), params()).isZero(0.0));
    EXPECT_TRUE(mass_matrix_rate(draw().q, Vec6::Zero(), params()).isZero(0.0));
}

TEST(Coriolis, MdotMinusTwoCIsSkew) {
    oracle::StateSampler draw(7);
    for (int n = 0; n < 1000; ++n) {
        const auto s = draw(0.5, 2.0);
        const Mat6 N = mass_matrix_rate(s.q, s.qdot, params()) - 2.0 * coriolis_matrix(s.q, s.qdot, params());
        ASSERT_LT((N + N.transpose()).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + s.qdot.norm()));
    }
}

TEST(Coriolis, MatchesFiniteDifferenceChristoffels) {
    oracle::StateSampler draw(8);
    for (int n = 0; n < 100; ++n) {
        const auto s = draw(5e-3, 1.0);
        EXPECT_LT(oracle::rel_err(coriolis_matrix(s.q, s.qdot, params()), oracle::coriolis_fd(s.q, s.qdot, params())),
                  1e-6);
    }
}

TEST(MassMatrixRate, SymmetricAndMatchesDirectionalDifference) {
    oracle::StateSampler draw(9);
    const double h = 1e-6;
    for (int n = 0; n < 200; ++n) {
        const auto s = draw(0.5, 1.0);
        const Mat6 Md = mass_matrix_rate(s.q, s.qdot, params());
        ASSERT_EQ(Md, Md.transpose());
        const Mat6 fd = ((oracle::mass_matrix_ld(s.q + h * s.qdot, params()) -
                          oracle::mass_matrix_ld(s.q - h * s.qdot, params())) /
                         (2.0L * h))
                            .cast<double>();
        ASSERT_LT(oracle::rel_err(Md, fd), 1e-6);
    }
}

TEST(ForwardDynamics, Equilibrium) {
    oracle::StateSampler draw(10);
    GeneralizedState s{draw().q, Vec6::Zero()};
    EXPECT_TRUE(forward_dynamics(s, Wrench::Zero(), params()).isZero(0.0));
}

TEST(ForwardDynamics, PureForceAtZeroAngles) {
    const auto p = params();
    Wrench w = Wrench::Zero();
    w(0) = p.m * 2.5;
    const Vec6 a = forward_dynamics({Vec6::Zero(), Vec6::Zero()}, w, p);
    Vec6 expect = Vec6::Zero();
    expect(0) = 2.5;
    EXPECT_LT((a - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ForwardDynamics, MatchesDenseInverse) {
    const auto p = damped();
    oracle::StateSampler draw(12);
    for (int n = 0; n < 500; ++n) {
        const auto s = draw(0.3, 0.5);
        const Wrench w = draw.vec(5.0);
        const oracle::LMat6 M = oracle::mass_matrix_ld(s.q, p);
        const Vec6 rhs = w - (oracle::coriolis_fd(s.q, s.qdot, p) + p.damping()) * s.qdot;
        const Vec6 expect = (M.inverse() * rhs.cast<long double>()).cast<double>();
        ASSERT_LT(oracle::rel_err(forward_dynamics(s, w, p), expect), 1e-10);
    }
}

TEST(ForwardDynamics, RejectsSingularPitch) {
    GeneralizedState s;
    s.q(axis::psi) = M_PI / 2;
    EXPECT_THROW(forward_dynamics(s, Wrench::Zero(), params()), SingularMass);
}

TEST(MassPd, MinorsAtZeroAngles) {
    const auto p = params();
    const auto r = is_mass_pd(Vec6::Zero(), p);
    EXPECT_TRUE(r.positive_definite);
    const double m = p.m;
    const std::array<double, 6> expect = {m, m * m, m * m * m, p.I_chi * m * m * m, p.I_psi * p.I_chi * m * m * m,
                                          m * m * m * p.I_chi * p.I_psi * p.I_zeta};
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(r.minors[k] / expect[k], 1.0, 1e-15);
}

TEST(MassPd, FalseAtQuarterTurnPitch) {
    Vec6 q = Vec6::Zero();
    q(axis::psi) = M_PI / 2;
    EXPECT_FALSE(is_mass_pd(q, params()).positive_definite);
}

TEST(MassPd, MinorsMatchNumericDeterminants) {
    const auto p = params();
    Vec6 q = Vec6::Zero();
    q(axis::chi) = 0.5;
    q(axis::psi) = 1.0;
    const auto r = is_mass_pd(q, p);
    EXPECT_TRUE(r.positive_definite);
    const oracle::LMat6 M = oracle::mass_matrix_ld(q, p);
    for (int k = 1; k <= 6; ++k) {
        const long double det = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>(M.topLeftCorner(k, k))
                                    .determinant();
        EXPECT_NEAR(r.minors[static_cast<std::size_t>(k - 1)] / static_cast<double>(det), 1.0, 1e-10) << "minor " << k;
    }
}

TEST(PlantParams, RejectsNonPhysicalValues) {
    PlantParams p;
    p.m = 0.0;
    EXPECT_THROW(p.validate(), PreconditionViolation);
    p = PlantParams{};
    p.c(3) = -1.0;
    EXPECT_THROW(p.validate(), PreconditionViolation);
}

// d/dt (1/2 q'^T M q') = -q'^T D q' with W = 0, checked step by step.
TEST(Energy, RateIdentityAlongUnforcedMotion) {
    const auto p = damped();
    oracle::StateSampler draw(13);
    const double h = 1e-4;
    for (int n = 0; n < 10; ++n) {
        Vec12 x = draw(0.2, 1.0).stacked();
        auto f = [&](double, const Vec12& y) {
            const auto s = GeneralizedState::from_stacked(y);
            Vec12 dy;
            dy << s.qdot, forward_dynamics(s, Wrench::Zero(), p);
            return dy;
        };
        for (int k = 0; k < 200; ++k) {
            const auto s0 = GeneralizedState::from_stacked(x);
            const Vec12 x1 = rk4_step(f, 0.0, x, h);
            const auto s1 = GeneralizedState::from_stacked(x1);
            const double dE = kinetic_energy(s1, p) - kinetic_energy(s0, p);
            // Simpson on the dissipation, midpoint from a half step
            const auto sm = GeneralizedState::from_stacked(rk4_step(f, 0.0, x, 0.5 * h));
            auto diss = [&](const GeneralizedState& s) { return -s.qdot.dot(p.damping() * s.qdot); };
            const double quad = h / 6.0 * (diss(s0) + 4.0 * diss(sm) + diss(s1));
            ASSERT_LE(dE, 0.0);
            ASSERT_NEAR(dE, quad, 1e-9 * std::abs(quad) + 1e-18);
            x = x1;
        }
    }
}
