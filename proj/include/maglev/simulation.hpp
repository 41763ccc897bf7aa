#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "maglev/dynamics.hpp"
#include "maglev/feedback.hpp"
#include "maglev/feedforward.hpp"
#include "maglev/integrator.hpp"
#include "maglev/trajectory.hpp"

namespace maglev {

struct SimConfig {
    double Ts = 65e-6;
    int substeps = 10;  // h = Ts / substeps
    double horizon = 1.0;
    Vec6 mismatch = Vec6::Zero();  // q(0) - r(0)
    bool disturbance = false;

    double h() const { return Ts / substeps; }
    std::size_t sample_count() const { return static_cast<std::size_t>(std::floor(horizon / Ts + 1e-9)) + 1; }

    void validate(const MotionProfile* profile = nullptr) const {
        if (!(Ts > 0.0) || substeps < 1) throw PreconditionViolation("sim: Ts must be > 0 and substeps >= 1");
        if (!(horizon > 0.0)) throw PreconditionViolation("sim: horizon must be > 0");
        if (!mismatch.allFinite()) throw PreconditionViolation("sim: mismatch must be finite");
        if (profile && horizon < profile->end_time()) {
            throw PreconditionViolation("sim: horizon ends before the motion profile");
        }
    }
};

struct SimulationRecord {
    std::string method;
    std::string scenario;
    std::vector<double> t;
    std::vector<Vec6> q, qdot, r, rdot, e, uff, ufb, d;

    std::size_t size() const { return t.size(); }

    void reserve(std::size_t n) {
        t.reserve(n);
        for (auto* v : {&q, &qdot, &r, &rdot, &e, &uff, &ufb, &d}) v->reserve(n);
    }
};

struct ErrorMetrics {
    Vec6 l2 = Vec6::Zero();
    Vec6 linf = Vec6::Zero();
};

inline ErrorMetrics error_metrics(const SimulationRecord& rec) {
    if (rec.e.empty()) throw EmptyRecord("error_metrics: record has no samples");
    ErrorMetrics m;
    for (const Vec6& e : rec.e) {
        m.l2 += e.cwiseAbs2();
        m.linf = m.linf.cwiseMax(e.cwiseAbs());
    }
    m.l2 = m.l2.cwiseSqrt();
    return m;
}

inline Vec12 plant_rate(const Vec12& x, const Wrench& w, const PlantParams& params) {
    const GeneralizedState s = GeneralizedState::from_stacked(x);
    Vec12 dx;
    dx << s.qdot, forward_dynamics(s, w, params);
    return dx;
}

inline GeneralizedState integrate_step(const GeneralizedState& s, const Wrench& w, const PlantParams& params, double h) {
    if (!(h > 0.0)) throw PreconditionViolation("integrate_step: h must be > 0");
    auto f = [&](double, const Vec12& x) { return plant_rate(x, w, params); };
    return GeneralizedState::from_stacked(rk4_step(f, 0.0, s.stacked(), h));
}

// Sampled PID on r - q with zero-order hold, or continuous proportional
// (+ Kv) feedback on e = q - r.
using FeedbackLaw = std::variant<PidGains, ProportionalFeedback>;

namespace detail {

// Plant and feedforward internal state integrated together so that dynamic
// feedforward laws see the true stage state.
class Simulator {
public:
    Simulator(const SimConfig& cfg, const PlantParams& params, const FeedforwardLaw& ff, const MotionProfile& traj,
              const DisturbanceProfile* dist, const FeedbackLaw* fb)
        : cfg_(cfg), params_(params), ff_(ff), traj_(traj), dist_(dist), fb_(fb) {
        cfg_.validate(&traj_);
        params_.validate();
        if (dist_) dist_->validate();
        if (fb_) {
            if (const auto* g = std::get_if<PidGains>(fb_)) pid_.emplace(*g);
        }
        n_int_ = ff_.internal_dim();
        breakpoints_ = traj_.breakpoints();
        if (dist_) {
            const auto db = dist_->breakpoints();
            breakpoints_.insert(breakpoints_.end(), db.begin(), db.end());
            std::sort(breakpoints_.begin(), breakpoints_.end());
        }
    }

    SimulationRecord run(const std::string& scenario) {
        const ReferenceSample r0 = sample_reference(traj_, 0.0);
        Eigen::VectorXd x(12 + n_int_);
        GeneralizedState s0{r0.r + cfg_.mismatch, r0.rdot};
        x.head<12>() = s0.stacked();
        if (n_int_ > 0) x.tail(n_int_) = ff_.initial_internal(r0);

        SimulationRecord rec;
        rec.method = to_string(ff_.method());
        rec.scenario = scenario;
        const std::size_t n = cfg_.sample_count();
        rec.reserve(n);
        const double h = cfg_.h();

        for (std::size_t k = 0; k < n; ++k) {
            const double tk = static_cast<double>(k) * cfg_.Ts;
            const ReferenceSample ref = sample_reference(traj_, tk);
            const GeneralizedState s = GeneralizedState::from_stacked(x.head<12>());
            held_fb_ = Wrench::Zero();
            if (pid_) held_fb_ = pid_->step(ref.r - s.q, cfg_.Ts);

            const Eigen::VectorXd internal = x.tail(n_int_);
            rec.t.push_back(tk);
            rec.q.push_back(s.q);
            rec.qdot.push_back(s.qdot);
            rec.r.push_back(ref.r);
            rec.rdot.push_back(ref.rdot);
            rec.e.push_back(s.q - ref.r);
            rec.uff.push_back(ff_.evaluate(ref, s, internal, nullptr));
            rec.ufb.push_back(feedback(ref, s));
            rec.d.push_back(disturbance(tk));

            if (k + 1 == n) break;
            for (int j = 0; j < cfg_.substeps; ++j) {
                const double t0 = tk + static_cast<double>(j) * h;
                const double t1 = tk + static_cast<double>(j + 1) * h;
                advance(x, t0, t1);
            }
        }
        return rec;
    }

private:
    // RK4 over [t0, t1], split at reference/disturbance breakpoints so every
    // stage sees a smooth input.
    void advance(Eigen::VectorXd& x, double t0, double t1) const {
        auto f = [this](double tt, const Eigen::VectorXd& xx) { return rate(tt, xx); };
        const double guard = 1e-9 * (t1 - t0);
        double t = t0;
        auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t0 + guard);
        for (; it != breakpoints_.end() && *it < t1 - guard; ++it) {
            x = rk4_step(f, t, x, *it - t);
            t = *it;
        }
        x = rk4_step(f, t, x, t1 - t);
    }

    Wrench disturbance(double t) const { return dist_ ? sample_disturbance(*dist_, t) : Wrench::Zero(); }

    Wrench feedback(const ReferenceSample& ref, const GeneralizedState& s) const {
        if (!fb_) return Wrench::Zero();
        if (const auto* p = std::get_if<ProportionalFeedback>(fb_)) return (*p)(s.q - ref.r, s.qdot - ref.rdot);
        return held_fb_;
    }

    Eigen::VectorXd rate(double t, const Eigen::VectorXd& x) const {
        const ReferenceSample ref = sample_reference(traj_, t);
        const GeneralizedState s = GeneralizedState::from_stacked(x.head<12>());
        Eigen::VectorXd dx(x.size());
        Wrench u;
        if (n_int_ > 0) {
            Eigen::VectorXd dint;
            u = ff_.evaluate(ref, s, x.tail(n_int_), &dint);
            dx.tail(n_int_) = dint;
        } else {
            u = ff_.evaluate(ref, s, Eigen::VectorXd(), nullptr);
        }
        u += feedback(ref, s) + disturbance(t);
        dx.head<12>() = plant_rate(x.head<12>(), u, params_);
        return dx;
    }

    SimConfig cfg_;
    PlantParams params_;
    const FeedforwardLaw& ff_;
    MotionProfile traj_;
    const DisturbanceProfile* dist_;
    const FeedbackLaw* fb_;
    std::optional<PidController> pid_;
    Wrench held_fb_ = Wrench::Zero();
    int n_int_ = 0;
    std::vector<double> breakpoints_;
};

}  // namespace detail

inline SimulationRecord run_open_loop(const SimConfig& cfg, const PlantParams& params, const FeedforwardLaw& ff,
                                      const MotionProfile& traj, const std::string& scenario = "open-loop") {
    return detail::Simulator(cfg, params, ff, traj, nullptr, nullptr).run(scenario);
}

// The disturbance is applied only when cfg.disturbance is set.
inline SimulationRecord run_closed_loop(const SimConfig& cfg, const PlantParams& params, const FeedforwardLaw& ff,
                                        const FeedbackLaw& fb, const MotionProfile& traj,
                                        const DisturbanceProfile& dist, const std::string& scenario = "closed-loop") {
    return detail::Simulator(cfg, params, ff, traj, cfg.disturbance ? &dist : nullptr, &fb).run(scenario);
}

// CSV ------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string record_csv_header() {
    std::string h = "t";
    for (const char* prefix : {"q", "r", "e", "uff", "ufb", "d"}) {
        for (int i = 1; i <= 6; ++i) h += "," + std::string(prefix) + std::to_string(i);
    }
    return h;
}

inline void write_record_csv(const SimulationRecord& rec, std::ostream& out) {
    out << record_csv_header() << '\n';
    for (std::size_t k = 0; k < rec.size(); ++k) {
        out << format_double(rec.t[k]);
        for (const auto* v : {&rec.q, &rec.r, &rec.e, &rec.uff, &rec.ufb, &rec.d}) {
            for (int i = 0; i < 6; ++i) out << ',' << format_double((*v)[k](i));
        }
        out << '\n';
    }
}

inline void write_record_csv(const SimulationRecord& rec, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_record_csv(rec, out);
}

}  // namespace maglev
