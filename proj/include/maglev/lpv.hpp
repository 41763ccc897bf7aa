#pragma once

// LPV representations of the plate dynamics.
//
// Global (descriptor, exact):  E(p) x' = A(p) x + B u,  y = C x
// Local (first-order Taylor):  x' = A x + B(p) u,      y = C x
//
// with x = (q, q'), u = W, y = q. All matrices are affine in the scheduling
// vector p. The global family is generated symbolically: each entry of M(q)
// is written as a sum of trigonometric monomials sin^a(chi) cos^b(chi)
// sin^c(psi) cos^d(psi); Christoffel symbols follow by differentiating the
// monomials, and every (monomial x rate) product that appears becomes a
// scheduling variable.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "maglev/dynamics.hpp"

namespace maglev {

struct TrigMonomial {
    int sin_chi = 0;
    int cos_chi = 0;
    int sin_psi = 0;
    int cos_psi = 0;

    bool is_constant() const { return sin_chi == 0 && cos_chi == 0 && sin_psi == 0 && cos_psi == 0; }

    double value(double chi, double psi) const {
        return std::pow(std::sin(chi), sin_chi) * std::pow(std::cos(chi), cos_chi) *
               std::pow(std::sin(psi), sin_psi) * std::pow(std::cos(psi), cos_psi);
    }

    std::string name() const {
        std::string out;
        auto add = [&out](const char* f, int e) {
            if (e == 0) return;
            if (!out.empty()) out += "*";
            out += f;
            if (e > 1) out += "^" + std::to_string(e);
        };
        add("sin(chi)", sin_chi);
        add("cos(chi)", cos_chi);
        add("sin(psi)", sin_psi);
        add("cos(psi)", cos_psi);
        return out.empty() ? "1" : out;
    }

    friend bool operator==(const TrigMonomial&, const TrigMonomial&) = default;
};

using TrigPoly = std::vector<std::pair<double, TrigMonomial>>;

// d/dchi of a monomial.
inline TrigPoly diff_chi(const TrigMonomial& g) {
    TrigPoly out;
    if (g.sin_chi > 0) {
        TrigMonomial t = g;
        t.sin_chi -= 1;
        t.cos_chi += 1;
        out.emplace_back(g.sin_chi, t);
    }
    if (g.cos_chi > 0) {
        TrigMonomial t = g;
        t.sin_chi += 1;
        t.cos_chi -= 1;
        out.emplace_back(-g.cos_chi, t);
    }
    return out;
}

// d/dpsi of a monomial.
inline TrigPoly diff_psi(const TrigMonomial& g) {
    TrigPoly out;
    if (g.sin_psi > 0) {
        TrigMonomial t = g;
        t.sin_psi -= 1;
        t.cos_psi += 1;
        out.emplace_back(g.sin_psi, t);
    }
    if (g.cos_psi > 0) {
        TrigMonomial t = g;
        t.sin_psi += 1;
        t.cos_psi -= 1;
        out.emplace_back(-g.cos_psi, t);
    }
    return out;
}

inline double poly_value(const TrigPoly& poly, double chi, double psi) {
    double v = 0.0;
    for (const auto& [coef, g] : poly) v += coef * g.value(chi, psi);
    return v;
}

// A scheduling variable: trig monomial times an optional coordinate rate,
// or a raw coordinate.
struct SchedulingFeature {
    enum class Kind { trig, trig_rate, coordinate };
    Kind kind = Kind::trig;
    TrigMonomial monomial{};
    int index = -1;  // rate index for trig_rate, coordinate index for coordinate

    std::string name() const {
        static const char* rates[] = {"xdot", "ydot", "zdot", "chidot", "psidot", "zetadot"};
        static const char* coords[] = {"x", "y", "z", "chi", "psi", "zeta"};
        switch (kind) {
            case Kind::trig: return monomial.name();
            case Kind::trig_rate:
                return monomial.is_constant() ? rates[index] : monomial.name() + "*" + rates[index];
            case Kind::coordinate: return coords[index];
        }
        return {};
    }

    bool depends_on_rates() const { return kind == Kind::trig_rate; }

    friend bool operator==(const SchedulingFeature&, const SchedulingFeature&) = default;
};

struct SchedulingPoint {
    Eigen::VectorXd p;
    // derivs[k - 1] holds the k-th time derivative of p.
    std::vector<Eigen::VectorXd> derivs;
    // State the point was extracted from, when known.
    std::optional<GeneralizedState> source;

    std::size_t available_order() const { return derivs.size(); }
};

enum class ScheduleKind {
    // sin/cos of chi and psi plus angular rates, extended by every product
    // needed to keep E and A exactly affine.
    trig_products,
    // Raw chi and psi only; first-order accurate, used by the local model.
    small_angle,
};

inline std::string to_string(ScheduleKind k) {
    return k == ScheduleKind::trig_products ? "trig-products" : "small-angle";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "trig-products") return ScheduleKind::trig_products;
    if (s == "small-angle") return ScheduleKind::small_angle;
    throw ConfigError("unknown scheduling strategy '" + s + "'");
}

class SchedulingStrategy {
public:
    SchedulingStrategy() = default;
    SchedulingStrategy(std::string name, std::vector<SchedulingFeature> features)
        : name_(std::move(name)), features_(std::move(features)) {}

    // Default vector (sin chi, cos chi, sin psi, cos psi, chidot, psidot, zetadot).
    static SchedulingStrategy trig_base() {
        using K = SchedulingFeature::Kind;
        return SchedulingStrategy(
            "trig-products",
            {{K::trig, {1, 0, 0, 0}, -1},
             {K::trig, {0, 1, 0, 0}, -1},
             {K::trig, {0, 0, 1, 0}, -1},
             {K::trig, {0, 0, 0, 1}, -1},
             {K::trig_rate, {}, axis::chi},
             {K::trig_rate, {}, axis::psi},
             {K::trig_rate, {}, axis::zeta}});
    }

    static SchedulingStrategy small_angle() {
        using K = SchedulingFeature::Kind;
        return SchedulingStrategy("small-angle",
                                  {{K::coordinate, {}, axis::chi}, {K::coordinate, {}, axis::psi}});
    }

    // Index of the feature, appending it when absent.
    int index_of(const SchedulingFeature& f) {
        auto it = std::find(features_.begin(), features_.end(), f);
        if (it != features_.end()) return static_cast<int>(it - features_.begin());
        features_.push_back(f);
        return static_cast<int>(features_.size()) - 1;
    }

    const std::string& name() const { return name_; }
    const std::vector<SchedulingFeature>& features() const { return features_; }
    std::size_t size() const { return features_.size(); }

    bool depends_on_rates() const {
        return std::any_of(features_.begin(), features_.end(),
                           [](const SchedulingFeature& f) { return f.depends_on_rates(); });
    }

    // p and its analytic time derivatives. The first derivative of
    // rate-dependent features needs q''; the second derivative is produced
    // only for rate-free strategies (it would otherwise need q''').
    SchedulingPoint evaluate(const GeneralizedState& s, const std::optional<Vec6>& qddot) const {
        const auto n = static_cast<Eigen::Index>(features_.size());
        const double chi = s.q(axis::chi);
        const double psi = s.q(axis::psi);
        const double dchi = s.qdot(axis::chi);
        const double dpsi = s.qdot(axis::psi);

        SchedulingPoint pt;
        pt.source = s;
        pt.p.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& f = features_[static_cast<std::size_t>(i)];
            switch (f.kind) {
                case SchedulingFeature::Kind::trig: pt.p(i) = f.monomial.value(chi, psi); break;
                case SchedulingFeature::Kind::trig_rate:
                    pt.p(i) = f.monomial.value(chi, psi) * s.qdot(f.index);
                    break;
                case SchedulingFeature::Kind::coordinate: pt.p(i) = s.q(f.index); break;
            }
        }

        const bool rates = depends_on_rates();
        if (rates && !qddot) return pt;

        Eigen::VectorXd d1(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& f = features_[static_cast<std::size_t>(i)];
            const double gdot = poly_value(diff_chi(f.monomial), chi, psi) * dchi +
                                poly_value(diff_psi(f.monomial), chi, psi) * dpsi;
            switch (f.kind) {
                case SchedulingFeature::Kind::trig: d1(i) = gdot; break;
                case SchedulingFeature::Kind::trig_rate:
                    d1(i) = gdot * s.qdot(f.index) + f.monomial.value(chi, psi) * (*qddot)(f.index);
                    break;
                case SchedulingFeature::Kind::coordinate: d1(i) = s.qdot(f.index); break;
            }
        }
        pt.derivs.push_back(std::move(d1));

        if (rates || !qddot) return pt;

        const double ddchi = (*qddot)(axis::chi);
        const double ddpsi = (*qddot)(axis::psi);
        Eigen::VectorXd d2(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& f = features_[static_cast<std::size_t>(i)];
            if (f.kind == SchedulingFeature::Kind::coordinate) {
                d2(i) = (*qddot)(f.index);
                continue;
            }
            double gcc = 0.0, gcp = 0.0, gpp = 0.0;
            for (const auto& [c, t] : diff_chi(f.monomial)) {
                gcc += c * poly_value(diff_chi(t), chi, psi);
                gcp += c * poly_value(diff_psi(t), chi, psi);
            }
            for (const auto& [c, t] : diff_psi(f.monomial)) {
                gpp += c * poly_value(diff_psi(t), chi, psi);
            }
            d2(i) = gcc * dchi * dchi + 2.0 * gcp * dchi * dpsi + gpp * dpsi * dpsi +
                    poly_value(diff_chi(f.monomial), chi, psi) * ddchi +
                    poly_value(diff_psi(f.monomial), chi, psi) * ddpsi;
        }
        pt.derivs.push_back(std::move(d2));
        return pt;
    }

private:
    std::string name_;
    std::vector<SchedulingFeature> features_;
};

// M(p) = M0 + sum_i p_i M_i.
template <int Rows, int Cols>
struct AffineMatrixFamily {
    using Matrix = Eigen::Matrix<double, Rows, Cols>;
    struct Term {
        int index;
        Matrix matrix;
    };

    Matrix base = Matrix::Zero();
    std::vector<Term> terms;

    static AffineMatrixFamily constant(const Matrix& m) {
        AffineMatrixFamily f;
        f.base = m;
        return f;
    }

    // Adds into an existing term with the same index.
    void add_term(int index, const Matrix& m) {
        for (auto& t : terms) {
            if (t.index == index) {
                t.matrix += m;
                return;
            }
        }
        terms.push_back({index, m});
    }

    bool is_constant() const { return terms.empty(); }

    Matrix evaluate(const Eigen::VectorXd& p) const {
        Matrix out = base;
        for (const auto& t : terms) out += p(t.index) * t.matrix;
        return out;
    }

    // k-th time derivative (k >= 1) given p^[k]: sum_i p_i^[k] M_i.
    Matrix derivative(const Eigen::VectorXd& pk) const {
        Matrix out = Matrix::Zero();
        for (const auto& t : terms) out += pk(t.index) * t.matrix;
        return out;
    }

    int max_index() const {
        int mx = -1;
        for (const auto& t : terms) mx = std::max(mx, t.index);
        return mx;
    }
};

using Family12 = AffineMatrixFamily<12, 12>;
using Family12x6 = AffineMatrixFamily<12, 6>;
using Family6x12 = AffineMatrixFamily<6, 12>;

struct DescriptorLpvModel {
    PlantParams params;
    SchedulingStrategy strategy;
    Family12 E;
    Family12 A;
    Family12x6 B;
    Family6x12 C;
    static constexpr int n_x = 12;
    static constexpr int n_u = 6;
    static constexpr int n_y = 6;

    SchedulingPoint schedule(const GeneralizedState& s, const std::optional<Vec6>& qddot = std::nullopt) const {
        return strategy.evaluate(s, qddot);
    }
};

struct LocalLpvModel {
    PlantParams params;
    SchedulingStrategy strategy;
    Mat12 A = Mat12::Zero();
    Family12x6 B;
    Mat6x12 C = Mat6x12::Zero();

    SchedulingPoint schedule(const GeneralizedState& s, const std::optional<Vec6>& qddot = std::nullopt) const {
        return strategy.evaluate(s, qddot);
    }
};

namespace detail {

struct MonomialMatrix {
    TrigMonomial g;
    Mat6 m;
};

// M(q) written as sum_g g(chi, psi) * M_g.
inline std::vector<MonomialMatrix> mass_matrix_monomials(const PlantParams& p) {
    const double d = p.I_psi - p.I_zeta;
    std::vector<MonomialMatrix> terms;
    Mat6 m0 = p.inertia_diagonal().asDiagonal();
    terms.push_back({{0, 0, 0, 0}, m0});

    Mat6 t = Mat6::Zero();
    t(3, 5) = t(5, 3) = -p.I_chi;
    terms.push_back({{0, 0, 1, 0}, t});

    t.setZero();
    t(4, 4) = -d;
    terms.push_back({{2, 0, 0, 0}, t});

    t.setZero();
    t(4, 5) = t(5, 4) = d;
    terms.push_back({{1, 1, 0, 1}, t});

    t.setZero();
    t(5, 5) = p.I_chi - p.I_zeta;
    terms.push_back({{0, 0, 2, 0}, t});

    t.setZero();
    t(5, 5) = d;
    terms.push_back({{2, 0, 0, 2}, t});
    return terms;
}

inline void accumulate(std::vector<MonomialMatrix>& into, const TrigMonomial& g, const Mat6& m) {
    for (auto& t : into) {
        if (t.g == g) {
            t.m += m;
            return;
        }
    }
    into.push_back({g, m});
}

// dM/dq_k expanded in monomials, for k = chi and psi.
inline std::array<std::vector<MonomialMatrix>, 6> mass_partial_monomials(const PlantParams& p) {
    std::array<std::vector<MonomialMatrix>, 6> out;
    for (const auto& term : mass_matrix_monomials(p)) {
        for (const auto& [c, g] : diff_chi(term.g)) accumulate(out[axis::chi], g, c * term.m);
        for (const auto& [c, g] : diff_psi(term.g)) accumulate(out[axis::psi], g, c * term.m);
    }
    return out;
}

inline Mat12 lower_block(const Mat6& m) {
    Mat12 out = Mat12::Zero();
    out.bottomRightCorner<6, 6>() = m;
    return out;
}

inline double family_residual(const DescriptorLpvModel& model, const GeneralizedState& s) {
    const auto pt = model.schedule(s);
    const Mat12 E = model.E.evaluate(pt.p);
    const Mat12 A = model.A.evaluate(pt.p);
    const Mat6 M = mass_matrix(s.q, model.params);
    const Mat6 CD = coriolis_matrix(s.q, s.qdot, model.params) + model.params.damping();
    const double scale = std::max(1.0, max_abs(M));
    double r = max_abs(E.bottomRightCorner<6, 6>() - M);
    r = std::max(r, max_abs(A.bottomRightCorner<6, 6>() + CD));
    r = std::max(r, max_abs(E.topLeftCorner<6, 6>() - Mat6::Identity()));
    r = std::max(r, max_abs(A.topRightCorner<6, 6>() - Mat6::Identity()));
    return r / scale;
}

}  // namespace detail

// Residual threshold of the affinity probe.
inline constexpr double kAffinityTolerance = 1e-12;

// Probe states for the affinity check: deterministic, spread over a
// +/-0.5 rad / +/-2 rad/s box so every feature is exercised.
inline std::vector<GeneralizedState> affinity_probe_states() {
    std::vector<GeneralizedState> out;
    for (int k = 0; k < 16; ++k) {
        GeneralizedState s;
        for (int i = 0; i < 6; ++i) {
            s.q(i) = 0.5 * std::sin(1.3 * k + 0.7 * i + 0.1);
            s.qdot(i) = 2.0 * std::cos(0.9 * k + 1.1 * i + 0.3);
        }
        out.push_back(s);
    }
    return out;
}

inline DescriptorLpvModel build_global_descriptor(const PlantParams& params,
                                                  ScheduleKind kind = ScheduleKind::trig_products) {
    params.validate();
    DescriptorLpvModel model;
    model.params = params;

    Mat12 e0 = Mat12::Identity();
    Mat12 a0 = Mat12::Zero();
    a0.topRightCorner<6, 6>() = Mat6::Identity();
    a0.bottomRightCorner<6, 6>() = -params.damping();
    Mat12x6 b = Mat12x6::Zero();
    b.bottomRows<6>() = Mat6::Identity();
    Mat6x12 c = Mat6x12::Zero();
    c.leftCols<6>() = Mat6::Identity();
    model.B = Family12x6::constant(b);
    model.C = Family6x12::constant(c);

    using K = SchedulingFeature::Kind;
    if (kind == ScheduleKind::trig_products) {
        model.strategy = SchedulingStrategy::trig_base();
        for (const auto& term : detail::mass_matrix_monomials(params)) {
            if (term.g.is_constant()) {
                e0.bottomRightCorner<6, 6>() = term.m;
                continue;
            }
            const int idx = model.strategy.index_of({K::trig, term.g, -1});
            model.E.add_term(idx, detail::lower_block(term.m));
        }
        // C_ij = sum_k Gamma_ijk qdot_k with Gamma built per monomial.
        const auto partials = detail::mass_partial_monomials(params);
        std::vector<TrigMonomial> monomials;
        for (const auto& list : partials) {
            for (const auto& t : list) {
                if (std::find(monomials.begin(), monomials.end(), t.g) == monomials.end()) {
                    monomials.push_back(t.g);
                }
            }
        }
        for (const auto& g : monomials) {
            std::array<Mat6, 6> dM;
            for (int k = 0; k < 6; ++k) {
                dM[k].setZero();
                for (const auto& t : partials[k]) {
                    if (t.g == g) dM[k] += t.m;
                }
            }
            const Tensor666 gamma = christoffel_from_partials(dM);
            for (int k = 0; k < 6; ++k) {
                Mat6 ck;
                for (int i = 0; i < 6; ++i) {
                    for (int j = 0; j < 6; ++j) ck(i, j) = gamma[i](j, k);
                }
                if (ck.isZero(0.0)) continue;
                const int idx = model.strategy.index_of({K::trig_rate, g, k});
                model.A.add_term(idx, detail::lower_block(-ck));
            }
        }
    } else {
        // First-order expansion of M around zero angles, Coriolis dropped.
        model.strategy = SchedulingStrategy::small_angle();
        e0.bottomRightCorner<6, 6>() = params.inertia_diagonal().asDiagonal();
        const auto dM0 = mass_matrix_partials(Vec6::Zero(), params);
        model.E.add_term(0, detail::lower_block(dM0[axis::chi]));
        model.E.add_term(1, detail::lower_block(dM0[axis::psi]));
    }
    model.E.base = e0;
    model.A.base = a0;

    double worst = 0.0;
    for (const auto& s : affinity_probe_states()) {
        worst = std::max(worst, detail::family_residual(model, s));
    }
    if (worst > kAffinityTolerance) {
        throw AffinityViolation("scheduling strategy '" + model.strategy.name() +
                                "' leaves an affine residual of " + std::to_string(worst));
    }
    return model;
}

inline LocalLpvModel build_local_model(const PlantParams& params) {
    params.validate();
    LocalLpvModel model;
    model.params = params;
    model.strategy = SchedulingStrategy::small_angle();

    const Vec6 inv_inertia = params.inertia_diagonal().cwiseInverse();
    const Mat6 m0_inv = inv_inertia.asDiagonal();
    model.A.topRightCorner<6, 6>() = Mat6::Identity();
    model.A.bottomRightCorner<6, 6>() = -m0_inv * params.damping();
    model.C.leftCols<6>() = Mat6::Identity();

    // M^-1(q) ~ M0^-1 - M0^-1 (chi dM/dchi + psi dM/dpsi)|_0 M0^-1
    Mat12x6 base = Mat12x6::Zero();
    base.bottomRows<6>() = m0_inv;
    model.B.base = base;
    const auto dM0 = mass_matrix_partials(Vec6::Zero(), params);
    const int angle_axes[2] = {axis::chi, axis::psi};
    for (int i = 0; i < 2; ++i) {
        Mat12x6 t = Mat12x6::Zero();
        t.bottomRows<6>() = -m0_inv * dM0[angle_axes[i]] * m0_inv;
        model.B.add_term(i, t);
    }
    return model;
}

// Default scheduling map of the global model.
inline SchedulingPoint scheduling_map(const DescriptorLpvModel& model, const GeneralizedState& s,
                                      const std::optional<Vec6>& qddot = std::nullopt) {
    return model.schedule(s, qddot);
}

struct LtiModel {
    Mat12 A;
    Mat12x6 B;
    Mat6x12 C;
};

inline LtiModel frozen_lti(const DescriptorLpvModel& model, const SchedulingPoint& pt) {
    if (pt.source) require_mass_pd(pt.source->q, model.params);
    const Mat12 E = model.E.evaluate(pt.p);
    Eigen::LLT<Mat12> llt(E);
    if (llt.info() != Eigen::Success) {
        throw SingularMass("frozen_lti: E(p) is not positive definite");
    }
    return {llt.solve(model.A.evaluate(pt.p)), llt.solve(model.B.evaluate(pt.p)), model.C.evaluate(pt.p)};
}

inline LtiModel frozen_lti(const LocalLpvModel& model, const SchedulingPoint& pt) {
    return {model.A, model.B.evaluate(pt.p), model.C};
}

// E(p) x' - A(p) x - B u along a plant trajectory point.
inline Vec12 descriptor_residual(const DescriptorLpvModel& model, const GeneralizedState& s, const Wrench& u) {
    const Vec6 qddot = forward_dynamics(s, u, model.params);
    const auto pt = model.schedule(s);
    Vec12 xdot;
    xdot << s.qdot, qddot;
    return model.E.evaluate(pt.p) * xdot - model.A.evaluate(pt.p) * s.stacked() - model.B.evaluate(pt.p) * u;
}

}  // namespace maglev
