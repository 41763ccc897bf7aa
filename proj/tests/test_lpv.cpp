#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "maglev/integrator.hpp"
#include "maglev/lpv.hpp"
#include "maglev/lpv_io.hpp"
#include "oracles.hpp"

using namespace maglev;

namespace {

PlantParams damped() {
    PlantParams p;
    p.c << 5, 5, 5, 0.1, 0.1, 0.1;
    return p;
}

// A short unforced-plus-torque trajectory, sampled every h.
std::vector<GeneralizedState> trajectory(const PlantParams& p, double h, int steps) {
    GeneralizedState s;
    s.q << 1e-3, -2e-3, 5e-4, 2e-3, -1e-3, 3e-3;
    s.qdot << 0.01, 0.02, -0.01, 0.3, -0.2, 0.5;
    Wrench w;
    w << 0.1, 0, 0, 0.02, -0.01, 0.03;
    auto f = [&](double, const Vec12& x) {
        const auto st = GeneralizedState::from_stacked(x);
        Vec12 dx;
        dx << st.qdot, forward_dynamics(st, w, p);
        return dx;
    };
    std::vector<GeneralizedState> out{s};
    Vec12 x = s.stacked();
    for (int k = 0; k < steps; ++k) {
        x = rk4_step(f, 0.0, x, h);
        out.push_back(GeneralizedState::from_stacked(x));
    }
    return out;
}

}  // namespace

TEST(Scheduling, ZeroState) {
    const auto model = build_global_descriptor(PlantParams{});
    const auto pt = scheduling_map(model, GeneralizedState{});
    Eigen::VectorXd expect(7);
    expect << 0, 1, 0, 1, 0, 0, 0;
    EXPECT_EQ(pt.p.head(7), expect);
}

TEST(Scheduling, ExactTrigValues) {
    const auto model = build_global_descriptor(PlantParams{});
    GeneralizedState s;
    s.q(axis::chi) = M_PI / 6;
    const auto pt = scheduling_map(model, s);
    Eigen::VectorXd expect(7);
    expect << 0.5, std::sqrt(3.0) / 2, 0, 1, 0, 0, 0;
    EXPECT_LT((pt.p.head(7) - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Scheduling, DerivativeMatchesDifferenceAlongTrajectory) {
    const auto p = damped();
    const auto model = build_global_descriptor(p);
    const double h = 1e-5;
    const auto traj = trajectory(p, h, 40);
    Wrench w;
    w << 0.1, 0, 0, 0.02, -0.01, 0.03;
    for (int k = 1; k + 1 < static_cast<int>(traj.size()); k += 7) {
        const auto& s = traj[static_cast<std::size_t>(k)];
        const auto pt = scheduling_map(model, s, forward_dynamics(s, w, p));
        ASSERT_EQ(pt.available_order(), 1u);
        const Eigen::VectorXd fd =
            (scheduling_map(model, traj[static_cast<std::size_t>(k + 1)]).p -
             scheduling_map(model, traj[static_cast<std::size_t>(k - 1)]).p) / (2 * h);
        EXPECT_LT(oracle::rel_err(pt.derivs[0], fd), 1e-5);
    }
}

TEST(Scheduling, RateFreeStrategyHasSecondDerivative) {
    const auto local = build_local_model(PlantParams{});
    GeneralizedState s;
    s.q(axis::chi) = 1e-3;
    s.qdot(axis::psi) = 0.2;
    Vec6 qdd = Vec6::Zero();
    qdd(axis::chi) = 3.0;
    const auto pt = local.schedule(s, qdd);
    ASSERT_EQ(pt.available_order(), 2u);
    EXPECT_DOUBLE_EQ(pt.derivs[0](1), 0.2);
    EXPECT_DOUBLE_EQ(pt.derivs[1](0), 3.0);
}

TEST(GlobalDescriptor, ZeroStateDescriptorMatrix) {
    const PlantParams p;
    const auto model = build_global_descriptor(p);
    Mat12 expect = Mat12::Identity();
    expect.bottomRightCorner<6, 6>() = p.inertia_diagonal().asDiagonal();
    EXPECT_LT((model.E.evaluate(scheduling_map(model, GeneralizedState{}).p) - expect).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_TRUE(model.B.is_constant());
    EXPECT_TRUE(model.C.is_constant());
}

TEST(GlobalDescriptor, ResidualAgainstForwardDynamics) {
    const auto p = damped();
    const auto model = build_global_descriptor(p);
    oracle::StateSampler draw(21);
    for (int n = 0; n < 500; ++n) {
        const auto s = draw(0.4, 2.0);
        const Wrench w = draw.vec(3.0);
        ASSERT_LT(descriptor_residual(model, s, w).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(GlobalDescriptor, ResidualAlongSimulatedTrajectory) {
    const auto p = damped();
    const auto model = build_global_descriptor(p);
    const double h = 1e-5;
    const auto traj = trajectory(p, h, 60);
    Wrench w;
    w << 0.1, 0, 0, 0.02, -0.01, 0.03;
    for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
        const Vec12 xdot = (traj[k + 1].stacked() - traj[k - 1].stacked()) / (2 * h);
        const auto pt = scheduling_map(model, traj[k]);
        const Vec12 r = model.E.evaluate(pt.p) * xdot - model.A.evaluate(pt.p) * traj[k].stacked() -
                        model.B.evaluate(pt.p) * w;
        ASSERT_LT(r.cwiseAbs().maxCoeff(), 1e-8);
    }
}

// Raw angles cannot carry the trig entries of M exactly.
TEST(GlobalDescriptor, SmallAngleStrategyFailsAffinityProbe) {
    EXPECT_THROW(build_global_descriptor(PlantParams{}, ScheduleKind::small_angle), AffinityViolation);
}

TEST(Affinity, FamiliesAreAffineInTheSchedulingVector) {
    const auto global = build_global_descriptor(damped());
    const auto local = build_local_model(damped());
    oracle::StateSampler draw(22);
    for (int n = 0; n < 100; ++n) {
        const Eigen::VectorXd p1 = scheduling_map(global, draw(0.5, 2.0)).p;
        const Eigen::VectorXd p2 = scheduling_map(global, draw(0.5, 2.0)).p;
        const double a = draw.uniform(-0.5, 1.5);
        const Eigen::VectorXd pm = a * p1 + (1 - a) * p2;
        EXPECT_LT((global.E.evaluate(pm) - (a * global.E.evaluate(p1) + (1 - a) * global.E.evaluate(p2)))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-13);
        EXPECT_LT((global.A.evaluate(pm) - (a * global.A.evaluate(p1) + (1 - a) * global.A.evaluate(p2)))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-13);
        const Eigen::Vector2d l1 = Eigen::Vector2d::Random(), l2 = Eigen::Vector2d::Random();
        const Eigen::VectorXd lm = a * l1 + (1 - a) * l2;
        EXPECT_LT((local.B.evaluate(lm) - (a * local.B.evaluate(l1) + (1 - a) * local.B.evaluate(l2)))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-13);
    }
}

TEST(FrozenLti, EigenvaluesAtZeroState) {
    const auto p = damped();
    const auto model = build_global_descriptor(p);
    const auto lti = frozen_lti(model, scheduling_map(model, GeneralizedState{}));
    Eigen::EigenSolver<Mat12> es(lti.A, false);
    std::vector<double> got;
    for (int i = 0; i < 12; ++i) {
        EXPECT_NEAR(es.eigenvalues()(i).imag(), 0.0, 1e-12);
        got.push_back(es.eigenvalues()(i).real());
    }
    std::vector<double> expect(6, 0.0);
    for (int i = 0; i < 6; ++i) expect.push_back(-p.c(i) / p.inertia_diagonal()(i));
    std::sort(got.begin(), got.end());
    std::sort(expect.begin(), expect.end());
    for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(got[i], expect[i], 1e-12);
}

TEST(FrozenLti, IdentityDescriptorPassesThrough) {
    auto model = build_global_descriptor(damped());
    model.E = AffineMatrixFamily<12, 12>::constant(Mat12::Identity());
    const auto pt = scheduling_map(model, GeneralizedState{});
    const auto lti = frozen_lti(model, pt);
    EXPECT_EQ(lti.A, model.A.evaluate(pt.p));
    EXPECT_EQ(lti.B, model.B.evaluate(pt.p));
    EXPECT_EQ(lti.C, model.C.evaluate(pt.p));
}

TEST(FrozenLti, ConstantPointGivesTimeInvariantModel) {
    const auto model = build_global_descriptor(damped());
    oracle::StateSampler draw(23);
    const auto pt = scheduling_map(model, draw());
    const auto a = frozen_lti(model, pt);
    const auto b = frozen_lti(model, pt);
    EXPECT_EQ(a.A, b.A);
    EXPECT_EQ(a.B, b.B);
}

// Small step input from rest at a frozen pose: the frozen model and the
// nonlinear plant agree to first order over a short horizon.
TEST(FrozenLti, StepResponseAgreesWithNonlinearPlant) {
    const auto p = damped();
    const auto model = build_global_descriptor(p);
    GeneralizedState s0;
    s0.q << 0, 0, 0, 2e-3, -1e-3, 0;
    const auto lti = frozen_lti(model, scheduling_map(model, s0));
    Wrench u;
    u << 1e-3, 0, 0, 1e-5, 1e-5, 1e-5;
    auto fnl = [&](double, const Vec12& x) {
        const auto s = GeneralizedState::from_stacked(x);
        Vec12 d;
        d << s.qdot, forward_dynamics(s, u, p);
        return d;
    };
    auto flin = [&](double, const Vec12& x) { return Vec12(lti.A * x + lti.B * u); };
    Vec12 xn = s0.stacked(), xl = s0.stacked();
    for (int k = 0; k < 200; ++k) {
        xn = rk4_step(fnl, 0.0, xn, 5e-5);
        xl = rk4_step(flin, 0.0, xl, 5e-5);
    }
    const Vec12 dn = xn - s0.stacked();
    const Vec12 dl = xl - s0.stacked();
    EXPECT_LT((dn - dl).cwiseAbs().maxCoeff(), 1e-4 * dn.cwiseAbs().maxCoeff());
}

TEST(LocalModel, ExactAtLinearisationPoint) {
    const auto p = damped();
    const auto local = build_local_model(p);
    GeneralizedState s;
    s.qdot << 0.1, -0.2, 0.05, 0, 0, 0;
    const Wrench w = oracle::StateSampler(24).vec(1.0);
    const auto lti = frozen_lti(local, local.schedule(s));
    const Vec12 xdot = lti.A * s.stacked() + lti.B * w;
    EXPECT_LT((xdot.tail<6>() - forward_dynamics(s, w, p)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LocalModel, ErrorIsSecondOrderInAngle) {
    const PlantParams p;
    const auto local = build_local_model(p);
    Wrench w;
    w << 1, 1, 1, 0.01, 0.02, 0.03;
    double prev = 0.0;
    for (double a : {1e-3, 5e-4, 2.5e-4}) {
        GeneralizedState s;
        s.q(axis::chi) = a;
        s.q(axis::psi) = 0.7 * a;
        const auto lti = frozen_lti(local, local.schedule(s));
        const Vec6 approx = (lti.B * w).tail<6>();
        const double err = (approx - forward_dynamics(s, w, p)).cwiseAbs().maxCoeff();
        if (prev > 0.0) {
            EXPECT_NEAR(prev / err, 4.0, 0.2);
        }
        prev = err;
    }
}

TEST(LocalModel, TranslationRowsAreParameterFree) {
    const PlantParams p;
    const auto local = build_local_model(p);
    for (const auto& t : local.B.terms) EXPECT_TRUE(t.matrix.middleRows<3>(6).isZero(0.0));
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(local.B.base(6 + i, i), 1.0 / p.m);
}

TEST(LocalModel, InputMapMatchesGlobalAtLinearisationPoint) {
    const auto p = damped();
    const auto global = build_global_descriptor(p);
    const auto local = build_local_model(p);
    const GeneralizedState s0;
    const Mat12x6 gb = frozen_lti(global, scheduling_map(global, s0)).B;
    EXPECT_LT((local.B.evaluate(local.schedule(s0).p) - gb).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LpvJson, GlobalModelRoundTrip) {
    const auto model = build_global_descriptor(damped());
    const auto back = descriptor_from_json(nlohmann::ordered_json::parse(model_to_json(model).dump()));
    oracle::StateSampler draw(25);
    for (int n = 0; n < 10; ++n) {
        const auto s = draw(0.3, 1.0);
        const auto p1 = model.schedule(s).p;
        const auto p2 = back.schedule(s).p;
        ASSERT_EQ(p1, p2);
        EXPECT_EQ(model.E.evaluate(p1), back.E.evaluate(p2));
        EXPECT_EQ(model.A.evaluate(p1), back.A.evaluate(p2));
    }
}

TEST(LpvJson, LocalModelRoundTrip) {
    const auto model = build_local_model(damped());
    const auto back = local_from_json(nlohmann::ordered_json::parse(model_to_json(model).dump()));
    EXPECT_EQ(model.A, back.A);
    EXPECT_EQ(model.C, back.C);
    const Eigen::Vector2d p(1e-3, -2e-3);
    EXPECT_EQ(model.B.evaluate(p), back.B.evaluate(p));
    EXPECT_THROW(descriptor_from_json(model_to_json(model)), ConfigError);
}
