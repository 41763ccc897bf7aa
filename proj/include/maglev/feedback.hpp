#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "maglev/dynamics.hpp"

namespace maglev {

struct PidChannelGains {
    double kp = 0.0;
    double ki = 0.0;
    double kd = 0.0;
    double omega_f = 1.0;  // derivative filter cutoff [rad/s]
};

// Default crossover of the loop-shaped PID [Hz].
inline constexpr double kDefaultBandwidthHz = 1.0;

struct PidGains {
    std::array<PidChannelGains, 6> channel{};

    void validate() const {
        for (const auto& g : channel) {
            if (!(g.kp >= 0.0) || !(g.ki >= 0.0) || !(g.kd >= 0.0) || !(g.omega_f > 0.0)) {
                throw PreconditionViolation("PID gains must be >= 0 and the filter cutoff > 0");
            }
        }
    }

    // kp = J w^2, kd = 2 * 0.7 * J w, ki = kp w / 10, w_f = 10 w, with J the
    // channel's mass or principal inertia.
    static PidGains loop_shaped(const PlantParams& params, double omega_c) {
        if (!(omega_c > 0.0)) throw PreconditionViolation("PID bandwidth must be > 0");
        PidGains g;
        const Vec6 J = params.inertia_diagonal();
        for (int i = 0; i < 6; ++i) {
            auto& c = g.channel[static_cast<std::size_t>(i)];
            c.kp = J(i) * omega_c * omega_c;
            c.kd = 2.0 * 0.7 * J(i) * omega_c;
            c.ki = c.kp * omega_c / 10.0;
            c.omega_f = 10.0 * omega_c;
        }
        return g;
    }

    Mat6 kp_matrix() const {
        Mat6 k = Mat6::Zero();
        for (int i = 0; i < 6; ++i) k(i, i) = channel[static_cast<std::size_t>(i)].kp;
        return k;
    }
};

// Per-channel discrete PID. The integral is trapezoidal; the derivative is a
// backward-Euler discretisation of kd s / (1 + s / w_f). The first call has
// no previous sample, so it contributes neither integral nor derivative.
class PidController {
public:
    explicit PidController(PidGains gains) : gains_(gains) { gains_.validate(); }

    Wrench step(const Vec6& e, double dt) {
        if (!(dt > 0.0)) throw PreconditionViolation("pid_step: dt must be > 0");
        Wrench u;
        for (int i = 0; i < 6; ++i) {
            const auto& g = gains_.channel[static_cast<std::size_t>(i)];
            if (primed_) {
                integral_(i) += 0.5 * dt * (e(i) + prev_e_(i));
                deriv_(i) = (deriv_(i) + g.omega_f * (e(i) - prev_e_(i))) / (1.0 + g.omega_f * dt);
            }
            u(i) = g.kp * e(i) + g.ki * integral_(i) + g.kd * deriv_(i);
        }
        prev_e_ = e;
        primed_ = true;
        return u;
    }

    void reset() {
        integral_.setZero();
        deriv_.setZero();
        prev_e_.setZero();
        primed_ = false;
    }

    const PidGains& gains() const { return gains_; }

private:
    PidGains gains_;
    Vec6 integral_ = Vec6::Zero();
    Vec6 deriv_ = Vec6::Zero();
    Vec6 prev_e_ = Vec6::Zero();
    bool primed_ = false;
};

inline Wrench pid_step(PidController& controller, const Vec6& e, double dt) { return controller.step(e, dt); }

struct LyapunovConfig {
    Mat6 Kp = Mat6::Identity();
    double epsilon = 1e-3;

    void validate() const {
        if (max_abs(Kp - Kp.transpose()) > 1e-12 * std::max(1.0, max_abs(Kp))) {
            throw PreconditionViolation("Kp must be symmetric");
        }
        if (!is_positive_definite(Kp)) throw PreconditionViolation("Kp must be positive definite");
        if (!(epsilon > 0.0)) throw PreconditionViolation("epsilon must be > 0");
    }
};

// Proportional feedback with the optional derivative term: W = -Kp e - Kv e'.
struct ProportionalFeedback {
    Mat6 Kp = Mat6::Identity();
    Mat6 Kv = Mat6::Zero();

    Wrench operator()(const Vec6& e, const Vec6& edot) const { return -Kp * e - Kv * edot; }
};

// 2V = [e; e']^T [Kp, eps M; eps M, M] [e; e']
inline double lyapunov_value(const Vec6& e, const Vec6& edot, const Vec6& q, const LyapunovConfig& cfg,
                             const PlantParams& params) {
    require_mass_pd(q, params);
    const Mat6 M = mass_matrix(q, params);
    return 0.5 * e.dot(cfg.Kp * e) + cfg.epsilon * e.dot(M * edot) + 0.5 * edot.dot(M * edot);
}

// Symmetric 12x12 matrix Q with dV/dt = [e; e']^T Q [e; e'] along
//   M e'' + (C + D + Kv) e' + Kp e = 0,
// using M' = C + C^T:
//   Q = [-eps Kp, eps/2 (C^T - D_eff); eps/2 (C - D_eff), eps M - D_eff].
inline Mat12 lyapunov_rate_matrix(const GeneralizedState& state, const LyapunovConfig& cfg, const PlantParams& params,
                                  const Mat6& Kv = Mat6::Zero()) {
    require_mass_pd(state.q, params);
    const Mat6 M = mass_matrix(state.q, params);
    const Mat6 C = coriolis_matrix(state.q, state.qdot, params);
    const Mat6 D_eff = params.damping() + Kv;
    const double eps = cfg.epsilon;
    Mat12 Q;
    Q.topLeftCorner<6, 6>() = -eps * cfg.Kp;
    Q.topRightCorner<6, 6>() = 0.5 * eps * (C.transpose() - D_eff);
    Q.bottomLeftCorner<6, 6>() = 0.5 * eps * (C - D_eff);
    Q.bottomRightCorner<6, 6>() = eps * M - D_eff;
    return Q;
}

inline double lyapunov_rate(const Vec6& e, const Vec6& edot, const GeneralizedState& state, const LyapunovConfig& cfg,
                            const PlantParams& params, const Mat6& Kv = Mat6::Zero()) {
    Vec12 z;
    z << e, edot;
    return z.dot(lyapunov_rate_matrix(state, cfg, params, Kv) * z);
}

// N = [eps A, eps B; eps B^T, C - eps D] is PD iff eps A > 0 and
// C - eps (D + B^T A^-1 B) > 0.
inline bool schur_pd_check(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& C,
                           const Eigen::MatrixXd& D, double epsilon) {
    const auto n = A.rows();
    const auto m = C.rows();
    if (A.cols() != n || C.cols() != m || B.rows() != n || B.cols() != m || D.rows() != m || D.cols() != m) {
        throw ShapeMismatch("schur_pd_check: expected A n x n, B n x m, C and D m x m");
    }
    if (!(epsilon > 0.0)) return false;
    if (!is_positive_definite(Eigen::MatrixXd(epsilon * A))) return false;
    const Eigen::MatrixXd a_inv_b = A.llt().solve(B);
    const Eigen::MatrixXd S = C - epsilon * (D + B.transpose() * a_inv_b);
    return is_positive_definite(S);
}

struct StabilitySample {
    GeneralizedState state;  // plant state
    Vec6 e = Vec6::Zero();
    Vec6 edot = Vec6::Zero();
};

struct EpsilonSearch {
    double epsilon = 0.0;
    bool feasible = false;
};

// Both PD tests at one sample for a given eps, from M(q), C(q, q') and D + Kv.
inline bool lyapunov_conditions_hold(const Mat6& M, const Mat6& C, const Mat6& D_eff, const Mat6& Kp, double eps) {
    // V: [Kp, eps M; eps M, M]
    if (!schur_pd_check(Kp, M, M, Mat6::Zero(), eps * eps)) return false;
    // -dV/dt: [eps Kp, eps/2 (D_eff - C^T); eps/2 (D_eff - C), D_eff - eps M]
    return schur_pd_check(Kp, 0.5 * (D_eff - C.transpose()), D_eff, M, eps);
}

inline bool lyapunov_conditions_hold(const GeneralizedState& s, const Mat6& Kp, const PlantParams& params, double eps,
                                     const Mat6& Kv = Mat6::Zero()) {
    return lyapunov_conditions_hold(mass_matrix(s.q, params), coriolis_matrix(s.q, s.qdot, params),
                                    params.damping() + Kv, Kp, eps);
}

// Largest eps in (0, eps_max] passing both tests at every sample. Both tests
// are monotone in eps, so bisection applies.
inline EpsilonSearch find_epsilon_search(const std::vector<StabilitySample>& samples, const Mat6& Kp,
                                         const PlantParams& params, const Mat6& Kv = Mat6::Zero(),
                                         double eps_max = 1.0, int iterations = 60) {
    LyapunovConfig probe{Kp, 1.0};
    probe.validate();
    if (!(eps_max > 0.0)) throw PreconditionViolation("find_epsilon: eps_max must be > 0");
    const Mat6 D_eff = params.damping() + Kv;

    struct Frozen {
        Mat6 M, C;
    };
    std::vector<Frozen> frozen;
    frozen.reserve(samples.size());
    for (const auto& s : samples) {
        require_mass_pd(s.state.q, params);
        frozen.push_back({mass_matrix(s.state.q, params), coriolis_matrix(s.state.q, s.state.qdot, params)});
    }

    // The sample that failed last is tried first; failures cluster.
    std::size_t last_fail = 0;
    auto feasible = [&](double eps) {
        if (!frozen.empty() && !lyapunov_conditions_hold(frozen[last_fail].M, frozen[last_fail].C, D_eff, Kp, eps)) {
            return false;
        }
        for (std::size_t i = 0; i < frozen.size(); ++i) {
            if (!lyapunov_conditions_hold(frozen[i].M, frozen[i].C, D_eff, Kp, eps)) {
                last_fail = i;
                return false;
            }
        }
        return true;
    };

    if (feasible(eps_max)) return {eps_max, true};
    double lo = eps_max;
    bool found = false;
    for (int k = 0; k < 200; ++k) {
        lo *= 0.5;
        if (feasible(lo)) {
            found = true;
            break;
        }
    }
    if (!found) return {0.0, false};
    double hi = 2.0 * lo;
    for (int k = 0; k < iterations; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return {lo, true};
}

inline double find_epsilon(const std::vector<StabilitySample>& samples, const Mat6& Kp, const PlantParams& params,
                           const Mat6& Kv = Mat6::Zero(), double eps_max = 1.0) {
    const EpsilonSearch r = find_epsilon_search(samples, Kp, params, Kv, eps_max);
    if (!r.feasible) throw NoFeasibleEpsilon("no eps > 0 makes V and -dV/dt positive definite at every sample");
    return r.epsilon;
}

}  // namespace maglev
