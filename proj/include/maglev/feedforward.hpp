#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "maglev/dynamics.hpp"
#include "maglev/integrator.hpp"
#include "maglev/lpv.hpp"
#include "maglev/trajectory.hpp"

namespace maglev {

struct FeedforwardInput {
    ReferenceSample reference;
    std::optional<GeneralizedState> measured;
    std::optional<SchedulingPoint> scheduling;
};

inline Wrench ff_mass(const ReferenceSample& ref, const PlantParams& params) {
    return params.inertia_diagonal().cwiseProduct(ref.rddot);
}

enum class AnnihilationMode { global, local };

// Q2 = G0^dagger (right inverse). Throws when G0 is not full row rank or the
// right-inverse residual exceeds 1e-10.
inline Mat6 steady_state_decoupler(const Mat6& g0) {
    const Mat6 q2 = pseudo_inverse(g0);
    if (max_abs(g0 * q2 - Mat6::Identity()) > 1e-10) {
        throw RankDeficientInput("steady_state_decoupler: G0 Q2 != I");
    }
    return q2;
}

// Selection B~ = [0; I] of the annihilated input map.
inline Mat12x6 annihilated_input_map() {
    Mat12x6 b = Mat12x6::Zero();
    b.bottomRows<6>() = Mat6::Identity();
    return b;
}

// DC map used for decoupling: the acceleration outputs of the annihilated
// plant, i.e. the q'' rows of B~. The position DC gain of the damped double
// integrator is unbounded, so the acceleration map stands in for G(0).
inline Mat6 annihilated_acceleration_gain() {
    return annihilated_input_map().bottomRows<6>();
}

// Q1 for the local model: B(p)^dagger B~.
inline Mat6 local_annihilator(const LocalLpvModel& model, const SchedulingPoint& pt) {
    return pseudo_inverse(model.B.evaluate(pt.p)) * annihilated_input_map();
}

inline Wrench ff_annihilation(const FeedforwardInput& in, AnnihilationMode mode, const LocalLpvModel& local,
                              const Mat6& q2 = Mat6::Identity()) {
    const Vec6 shaped = q2 * in.reference.rddot;  // F = I
    if (mode == AnnihilationMode::global) {
        if (!in.measured) throw PreconditionViolation("global annihilation needs the measured state");
        require_mass_pd(in.measured->q, local.params);
        return mass_matrix(in.measured->q, local.params) * shaped;
    }
    if (!in.scheduling) throw PreconditionViolation("local annihilation needs a scheduling point");
    return local_annihilator(local, *in.scheduling) * shaped;
}

inline Wrench ff_annihilation(const FeedforwardInput& in, AnnihilationMode mode, const PlantParams& params) {
    return ff_annihilation(in, mode, build_local_model(params),
                           steady_state_decoupler(annihilated_acceleration_gain()));
}

// W = M(r) r'' + C(r, r') r' + D r'
inline Wrench ff_nonlinear(const ReferenceSample& ref, const PlantParams& params) {
    require_mass_pd(ref.r, params);
    return mass_matrix(ref.r, params) * ref.rddot +
           (coriolis_matrix(ref.r, ref.rdot, params) + params.damping()) * ref.rdot;
}

// W = M(q) r'' + C(q, q') r' + D r' with the measured (q, q').
inline Wrench ff_global_lpv_ic(const FeedforwardInput& in, const PlantParams& params) {
    if (!in.measured) throw PreconditionViolation("global LPV feedforward needs the measured state");
    const auto& s = *in.measured;
    require_mass_pd(s.q, params);
    return mass_matrix(s.q, params) * in.reference.rddot +
           (coriolis_matrix(s.q, s.qdot, params) + params.damping()) * in.reference.rdot;
}

// Inverse system
//
//   E_ff(p) x_ref' = A_ff(p) x_ref + B_ff(p) y_ref^[n]
//   u_ff           = C_ff(p) x_ref + D_ff(p) y_ref^[n]
//
// obtained from y^[n] = E~(n,p) x + F~(n,p) xi with xi = (u, u', ..., u^[n-1]).
class InverseSystemRealization {
public:
    struct Coefficients {
        Mat12 E_ff;
        Mat12 A_ff;
        Mat12x6 B_ff;
        Mat6x12 C_ff;
        Mat6 D_ff;
    };

    // Pointwise ingredients: y^[n] = stack_x * x + stack_u * xi.
    struct DerivativeStack {
        Mat6x12 stack_x;
        Eigen::Matrix<double, 6, Eigen::Dynamic> stack_u;
        Mat12 E;
        Mat12 A;
        Mat12x6 B;
    };

    static InverseSystemRealization local(LocalLpvModel model, int n) {
        InverseSystemRealization r;
        r.order_ = n;
        r.model_ = std::move(model);
        return r;
    }
    static InverseSystemRealization global(DescriptorLpvModel model, int n) {
        InverseSystemRealization r;
        r.order_ = n;
        r.model_ = std::move(model);
        return r;
    }

    int relative_degree() const { return order_; }
    bool is_descriptor() const { return std::holds_alternative<DescriptorLpvModel>(model_); }
    const PlantParams& params() const {
        return std::visit([](const auto& m) -> const PlantParams& { return m.params; }, model_);
    }

    SchedulingPoint schedule(const GeneralizedState& s, const std::optional<Vec6>& qddot) const {
        return std::visit([&](const auto& m) { return m.schedule(s, qddot); }, model_);
    }

    // Scheduling derivatives the construction consumes.
    std::size_t required_scheduling_order() const {
        if (const auto* g = std::get_if<DescriptorLpvModel>(&model_)) {
            return g->C.is_constant() ? 1 : 2;
        }
        return static_cast<std::size_t>(order_ - 1);
    }

    DerivativeStack derivative_stack(const SchedulingPoint& pt) const {
        if (pt.available_order() < required_scheduling_order()) {
            throw PreconditionViolation("inverse system: scheduling derivatives up to order " +
                                        std::to_string(required_scheduling_order()) + " are required");
        }
        if (const auto* g = std::get_if<DescriptorLpvModel>(&model_)) return descriptor_stack(*g, pt);
        return local_stack(std::get<LocalLpvModel>(model_), pt);
    }

    // Input-to-output coefficient of orders below n; must vanish.
    Eigen::MatrixXd early_input_coefficient(const SchedulingPoint& pt) const {
        if (const auto* g = std::get_if<DescriptorLpvModel>(&model_)) {
            const Mat12 E = g->E.evaluate(pt.p);
            return g->C.evaluate(pt.p) * E.llt().solve(g->B.evaluate(pt.p));
        }
        const auto& l = std::get<LocalLpvModel>(model_);
        return l.C * l.B.evaluate(pt.p);
    }

    // C_breve F_breve^dagger: maps (y^[n] - E~ x) to u_ff.
    static Mat6 selected_right_inverse(const DerivativeStack& st) {
        const Eigen::MatrixXd f_pinv = pseudo_inverse(Eigen::MatrixXd(st.stack_u));
        return f_pinv.topRows<6>();
    }

    Coefficients coefficients(const SchedulingPoint& pt) const {
        const DerivativeStack st = derivative_stack(pt);
        const Mat6 K = selected_right_inverse(st);
        Coefficients c;
        c.E_ff = st.E;
        c.A_ff = st.A - st.B * K * st.stack_x;
        c.B_ff = st.B * K;
        c.C_ff = -K * st.stack_x;
        c.D_ff = K;
        return c;
    }

    // Output and (optionally) state rate at a given inverse-system state.
    Wrench evaluate(const Vec12& x_ref, const Vec6& y_n, const SchedulingPoint& pt, Vec12* rate) const {
        const DerivativeStack st = derivative_stack(pt);
        const Mat6 K = selected_right_inverse(st);
        const Wrench u = K * (y_n - st.stack_x * x_ref);
        if (rate) {
            const Vec12 rhs = st.A * x_ref + st.B * u;
            if (is_descriptor()) {
                Eigen::LLT<Mat12> llt(st.E);
                if (llt.info() != Eigen::Success) throw SingularMass("inverse system: E(p) singular");
                *rate = llt.solve(rhs);
            } else {
                *rate = rhs;
            }
        }
        return u;
    }

    void initialize(const GeneralizedState& plant_state) { x_ref_ = plant_state.stacked(); }
    const Vec12& state() const { return x_ref_; }
    void set_state(const Vec12& x) { x_ref_ = x; }

private:
    static DerivativeStack local_stack(const LocalLpvModel& m, const SchedulingPoint& pt, int n) {
        DerivativeStack st;
        st.E = Mat12::Identity();
        st.A = m.A;
        st.B = m.B.evaluate(pt.p);
        Mat12 a_pow = Mat12::Identity();
        std::vector<Mat12> powers{a_pow};
        for (int i = 1; i <= n; ++i) {
            a_pow = a_pow * m.A;
            powers.push_back(a_pow);
        }
        st.stack_x = m.C * powers[static_cast<std::size_t>(n)];
        // d^k/dt^k B(p) for k = 0..n-1
        std::vector<Mat12x6> b_derivs{st.B};
        for (int k = 1; k < n; ++k) b_derivs.push_back(m.B.derivative(pt.derivs[static_cast<std::size_t>(k - 1)]));
        st.stack_u = Eigen::Matrix<double, 6, Eigen::Dynamic>::Zero(6, 6 * n);
        // Leibniz: d^i/dt^i [B(p) u] = sum_k binom(i,k) B^[k] u^[i-k]
        for (int i = 0; i < n; ++i) {
            const Mat6x12 ca = m.C * powers[static_cast<std::size_t>(n - 1 - i)];
            for (int k = 0; k <= i; ++k) {
                st.stack_u.middleCols<6>(6 * (i - k)) +=
                    binomial(i, k) * ca * b_derivs[static_cast<std::size_t>(k)];
            }
        }
        return st;
    }

    DerivativeStack local_stack(const LocalLpvModel& m, const SchedulingPoint& pt) const {
        return local_stack(m, pt, order_);
    }

    // n = 2 descriptor stack:
    //   x'  = Einv z,            z  = A x + B u
    //   x'' = Einv' z + Einv z', z' = A' x + A x' + B' u + B u'
    //   y'' = C'' x + 2 C' x' + C x''
    // with Einv' = -Einv E' Einv and E' = sum_i E_i p_i'.
    static DerivativeStack descriptor_stack(const DescriptorLpvModel& m, const SchedulingPoint& pt) {
        const Eigen::VectorXd& dp = pt.derivs[0];
        DerivativeStack st;
        st.E = m.E.evaluate(pt.p);
        st.A = m.A.evaluate(pt.p);
        st.B = m.B.evaluate(pt.p);
        const Mat6x12 C = m.C.evaluate(pt.p);
        const Mat12 E_dot = m.E.derivative(dp);
        const Mat12 A_dot = m.A.derivative(dp);
        const Mat12x6 B_dot = m.B.derivative(dp);
        const Mat6x12 C_dot = m.C.derivative(dp);
        const Mat6x12 C_ddot = m.C.is_constant() ? Mat6x12::Zero().eval() : m.C.derivative(pt.derivs[1]);

        Eigen::LLT<Mat12> llt(st.E);
        if (llt.info() != Eigen::Success) throw SingularMass("descriptor inverse: E(p) not positive definite");
        const Mat12 e_inv = llt.solve(Mat12::Identity());
        const Mat12 e_inv_dot = -e_inv * E_dot * e_inv;

        const Mat12 x1_x = e_inv * st.A;
        const Mat12x6 x1_u = e_inv * st.B;
        const Mat12 z1_x = A_dot + st.A * x1_x;
        const Mat12x6 z1_u = B_dot + st.A * x1_u;
        const Mat12x6& z1_du = st.B;
        const Mat12 x2_x = e_inv_dot * st.A + e_inv * z1_x;
        const Mat12x6 x2_u = e_inv_dot * st.B + e_inv * z1_u;
        const Mat12x6 x2_du = e_inv * z1_du;

        st.stack_x = C_ddot + 2.0 * C_dot * x1_x + C * x2_x;
        st.stack_u.resize(6, 12);
        st.stack_u.leftCols<6>() = 2.0 * C_dot * x1_u + C * x2_u;
        st.stack_u.rightCols<6>() = C * x2_du;
        return st;
    }

    static double binomial(int n, int k) {
        double r = 1.0;
        for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
        return r;
    }

    int order_ = 2;
    std::variant<LocalLpvModel, DescriptorLpvModel> model_;
    Vec12 x_ref_ = Vec12::Zero();
};

namespace detail {

inline constexpr double kRelativeDegreeTolerance = 1e-12;

// Probe states inside the operating box (|angle| <= 5 mrad).
inline std::vector<GeneralizedState> inversion_probe_states() {
    std::vector<GeneralizedState> out;
    for (int k = 0; k < 8; ++k) {
        GeneralizedState s;
        for (int i = 0; i < 6; ++i) {
            const double scale = i < 3 ? 1e-2 : 5e-3;
            s.q(i) = scale * std::sin(2.1 * k + 0.9 * i);
            s.qdot(i) = 0.05 * std::cos(1.7 * k + 0.4 * i);
        }
        out.push_back(s);
    }
    return out;
}

inline void validate_realization(const InverseSystemRealization& r) {
    for (const auto& s : inversion_probe_states()) {
        const Vec6 qddot = Vec6::Constant(0.01);
        const SchedulingPoint pt = r.schedule(s, qddot);
        const Eigen::MatrixXd early = r.early_input_coefficient(pt);
        if (max_abs(early) > kRelativeDegreeTolerance) {
            throw RelativeDegreeViolation("input acts on y before derivative order " +
                                          std::to_string(r.relative_degree()));
        }
        // Throws RankDeficientInput when F~ has no right inverse.
        (void)InverseSystemRealization::selected_right_inverse(r.derivative_stack(pt));
    }
}

}  // namespace detail

inline InverseSystemRealization build_local_lpv_inverse(const LocalLpvModel& model, int n = 2) {
    if (n != 2) throw PreconditionViolation("relative degree of the plate model is 2");
    auto r = InverseSystemRealization::local(model, n);
    detail::validate_realization(r);
    return r;
}

inline InverseSystemRealization build_global_lpv_inverse(const DescriptorLpvModel& model, int n = 2) {
    if (n != 2) throw PreconditionViolation("relative degree of the plate model is 2");
    auto r = InverseSystemRealization::global(model, n);
    detail::validate_realization(r);
    return r;
}

// One RK4 step of the inverse system with y^[n] and p held over dt. Returns
// u_ff at the start of the step.
inline Wrench ff_step(InverseSystemRealization& realization, const Vec6& y_n, const SchedulingPoint& pt,
                      double dt) {
    if (!(dt > 0.0)) throw PreconditionViolation("ff_step: dt must be > 0");
    const Wrench u = realization.evaluate(realization.state(), y_n, pt, nullptr);
    auto f = [&](double, const Vec12& x) {
        Vec12 rate;
        realization.evaluate(x, y_n, pt, &rate);
        return rate;
    };
    realization.set_state(rk4_step(f, 0.0, realization.state(), dt));
    return u;
}

// Method selection -----------------------------------------------------------

enum class Method {
    mass,
    annihilate_global,
    annihilate_local,
    nonlinear,
    lpv_local,
    lpv_global_inv,
    lpv_global_ic,
};

inline const std::vector<Method>& all_methods() {
    static const std::vector<Method> m = {Method::mass,         Method::annihilate_global, Method::annihilate_local,
                                          Method::nonlinear,    Method::lpv_local,         Method::lpv_global_inv,
                                          Method::lpv_global_ic};
    return m;
}

// The five compared strategies, numbered 1..5 in tables.
inline const std::vector<Method>& comparison_methods() {
    static const std::vector<Method> m = {Method::mass, Method::annihilate_global, Method::nonlinear,
                                          Method::lpv_local, Method::lpv_global_ic};
    return m;
}

inline std::string to_string(Method m) {
    switch (m) {
        case Method::mass: return "mass";
        case Method::annihilate_global: return "annihilate-global";
        case Method::annihilate_local: return "annihilate-local";
        case Method::nonlinear: return "nonlinear";
        case Method::lpv_local: return "lpv-local";
        case Method::lpv_global_inv: return "lpv-global-inv";
        case Method::lpv_global_ic: return "lpv-global-ic";
    }
    return {};
}

inline Method method_from_string(const std::string& s) {
    for (Method m : all_methods()) {
        if (to_string(m) == s) return m;
    }
    throw ConfigError("unknown feedforward method '" + s + "'");
}

// Table row number: 1 mass, 2 annihilation, 3 nonlinear, 4 local LPV, 5 global LPV.
inline int table_index(Method m) {
    switch (m) {
        case Method::mass: return 1;
        case Method::annihilate_global:
        case Method::annihilate_local: return 2;
        case Method::nonlinear: return 3;
        case Method::lpv_local: return 4;
        case Method::lpv_global_inv:
        case Method::lpv_global_ic: return 5;
    }
    return 0;
}

// Feedforward as seen by the simulator: a possibly dynamic law whose
// internal state is owned and integrated by the caller.
class FeedforwardLaw {
public:
    virtual ~FeedforwardLaw() = default;
    virtual Method method() const = 0;
    virtual int internal_dim() const { return 0; }
    // Internal state at the run start, taken from the reference there.
    virtual Eigen::VectorXd initial_internal(const ReferenceSample&) const { return {}; }
    // Returns u_ff; writes d/dt(internal) when rate is non-null and internal_dim() > 0.
    virtual Wrench evaluate(const ReferenceSample& ref, const GeneralizedState& measured,
                            const Eigen::VectorXd& internal, Eigen::VectorXd* rate) const = 0;
};

namespace detail {

class StaticLaw final : public FeedforwardLaw {
public:
    StaticLaw(Method m, PlantParams params) : method_(m), params_(std::move(params)) {
        if (m == Method::annihilate_global || m == Method::annihilate_local) {
            local_ = build_local_model(params_);
            q2_ = steady_state_decoupler(annihilated_acceleration_gain());
        }
    }
    Method method() const override { return method_; }
    Wrench evaluate(const ReferenceSample& ref, const GeneralizedState& measured, const Eigen::VectorXd&,
                    Eigen::VectorXd*) const override {
        switch (method_) {
            case Method::mass: return ff_mass(ref, params_);
            case Method::nonlinear: return ff_nonlinear(ref, params_);
            case Method::lpv_global_ic: return ff_global_lpv_ic({ref, measured, std::nullopt}, params_);
            case Method::annihilate_global:
                return ff_annihilation({ref, measured, std::nullopt}, AnnihilationMode::global, *local_, q2_);
            case Method::annihilate_local:
                return ff_annihilation({ref, measured, local_->schedule(measured)}, AnnihilationMode::local,
                                       *local_, q2_);
            default: break;
        }
        throw PreconditionViolation("static feedforward law cannot evaluate " + to_string(method_));
    }

private:
    Method method_;
    PlantParams params_;
    std::optional<LocalLpvModel> local_;
    Mat6 q2_ = Mat6::Identity();
};

// Realisation-based law, scheduled on the measured state. The trig
// scheduling derivatives need q''; the reference acceleration stands in for
// it (it only reaches E~ through C Einv A', whose q'' block is structurally zero).
class InverseLaw final : public FeedforwardLaw {
public:
    InverseLaw(Method m, InverseSystemRealization r) : method_(m), realization_(std::move(r)) {}
    Method method() const override { return method_; }
    int internal_dim() const override { return 12; }
    Eigen::VectorXd initial_internal(const ReferenceSample& r0) const override { return r0.state().stacked(); }
    Wrench evaluate(const ReferenceSample& ref, const GeneralizedState& measured, const Eigen::VectorXd& internal,
                    Eigen::VectorXd* rate) const override {
        const SchedulingPoint pt = realization_.schedule(measured, ref.rddot);
        const Vec12 x = internal;
        if (rate) {
            Vec12 r;
            const Wrench u = realization_.evaluate(x, ref.rddot, pt, &r);
            *rate = r;
            return u;
        }
        return realization_.evaluate(x, ref.rddot, pt, nullptr);
    }
    const InverseSystemRealization& realization() const { return realization_; }

private:
    Method method_;
    InverseSystemRealization realization_;
};

}  // namespace detail

inline std::unique_ptr<FeedforwardLaw> make_feedforward(Method m, const PlantParams& params,
                                                        ScheduleKind schedule = ScheduleKind::trig_products) {
    switch (m) {
        case Method::lpv_local:
            return std::make_unique<detail::InverseLaw>(m, build_local_lpv_inverse(build_local_model(params)));
        case Method::lpv_global_inv:
            return std::make_unique<detail::InverseLaw>(
                m, build_global_lpv_inverse(build_global_descriptor(params, schedule)));
        default: return std::make_unique<detail::StaticLaw>(m, params);
    }
}

}  // namespace maglev
