#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "maglev/dynamics.hpp"

namespace maglev {

struct ReferenceSample {
    Vec6 r = Vec6::Zero();
    Vec6 rdot = Vec6::Zero();
    Vec6 rddot = Vec6::Zero();

    GeneralizedState state() const { return {r, rdot}; }
};

// Rest-to-rest move along one coordinate, evaluated in closed form.
//
// The S-curve kind has a trapezoidal acceleration: seven phases with jerk
// (+J, 0, -J, 0, -J, 0, +J) and durations (tj, ta, tj, tv, tj, ta, tj).
// The polynomial kind is the quintic 10s^3 - 15s^4 + 6s^5.
class AxisProfile {
public:
    enum class Kind { hold, scurve, polynomial };

    AxisProfile() = default;

    static AxisProfile hold(double position) {
        AxisProfile a;
        a.initial_ = position;
        return a;
    }

    static AxisProfile scurve_timed(double initial, double stroke, double start_time, double t_jerk,
                                    double t_accel, double t_cruise) {
        if (!(t_jerk > 0.0) || t_accel < 0.0 || t_cruise < 0.0 || start_time < 0.0) {
            throw PreconditionViolation("scurve: t_jerk must be > 0, other phase times >= 0");
        }
        AxisProfile a;
        a.kind_ = Kind::scurve;
        a.initial_ = initial;
        a.stroke_ = stroke;
        a.start_ = start_time;
        a.tj_ = t_jerk;
        a.ta_ = t_accel;
        a.tv_ = t_cruise;
        a.jerk_ = stroke / (t_jerk * (t_jerk + t_accel) * (2.0 * t_jerk + t_accel + t_cruise));
        a.build_phases();
        return a;
    }

    // Time-optimal S-curve for the given velocity/acceleration/jerk limits.
    static AxisProfile scurve_limits(double initial, double stroke, double start_time, double v_max,
                                     double a_max, double j_max) {
        if (!(v_max > 0.0) || !(a_max > 0.0) || !(j_max > 0.0)) {
            throw PreconditionViolation("scurve: limits must be positive");
        }
        const double s = std::abs(stroke);
        if (s == 0.0) return hold(initial);
        double a_peak = std::min(a_max, std::sqrt(v_max * j_max));
        double v_peak = v_max;
        auto accel_time = [&](double v, double a) { return a * a / j_max >= v ? 2.0 * std::sqrt(v / j_max) : v / a + a / j_max; };
        double tv = 0.0;
        if (v_peak * accel_time(v_peak, a_peak) <= s) {
            tv = (s - v_peak * accel_time(v_peak, a_peak)) / v_peak;
        } else {
            // Cruise velocity not reached: solve v * T_acc(v) = s.
            const double a = a_max;
            const double v_a = a * a / j_max;  // lowest velocity at which a_max is reached
            if (v_a * 2.0 * std::sqrt(v_a / j_max) <= s) {
                v_peak = 0.5 * a * (-a / j_max + std::sqrt(a * a / (j_max * j_max) + 4.0 * s / a));
                a_peak = a;
            } else {
                v_peak = std::cbrt(s * s * j_max / 4.0);
                a_peak = std::sqrt(v_peak * j_max);
            }
        }
        const double tj = a_peak / j_max;
        const double ta = std::max(0.0, v_peak / a_peak - tj);
        return scurve_timed(initial, stroke, start_time, tj, ta, tv);
    }

    static AxisProfile polynomial(double initial, double stroke, double start_time, double duration) {
        if (!(duration > 0.0) || start_time < 0.0) {
            throw PreconditionViolation("polynomial profile: duration must be > 0");
        }
        AxisProfile a;
        a.kind_ = Kind::polynomial;
        a.initial_ = initial;
        a.stroke_ = stroke;
        a.start_ = start_time;
        a.duration_ = duration;
        return a;
    }

    Kind kind() const { return kind_; }
    double initial() const { return initial_; }
    double stroke() const { return kind_ == Kind::hold ? 0.0 : stroke_; }
    double start_time() const { return start_; }
    double t_jerk() const { return tj_; }
    double t_accel() const { return ta_; }
    double t_cruise() const { return tv_; }
    double duration() const {
        switch (kind_) {
            case Kind::hold: return 0.0;
            case Kind::scurve: return 4.0 * tj_ + 2.0 * ta_ + tv_;
            case Kind::polynomial: return duration_;
        }
        return 0.0;
    }
    double end_time() const { return start_ + duration(); }
    // Instants where the input to the plant loses smoothness.
    std::vector<double> breakpoints() const {
        std::vector<double> b;
        if (kind_ == Kind::hold) return b;
        if (kind_ == Kind::polynomial) return {start_, end_time()};
        for (const auto& ph : phases_) b.push_back(start_ + ph.t0);
        b.push_back(end_time());
        return b;
    }

    double peak_acceleration() const { return std::abs(jerk_) * tj_; }
    double peak_velocity() const { return std::abs(jerk_) * tj_ * (tj_ + ta_); }

    // (position, velocity, acceleration) at time t.
    std::array<double, 3> sample(double t) const {
        if (kind_ == Kind::hold || t <= start_) return {initial_, 0.0, 0.0};
        if (t >= end_time()) return {initial_ + stroke_, 0.0, 0.0};
        const double tau = t - start_;
        if (kind_ == Kind::polynomial) {
            const double T = duration_;
            const double s = tau / T;
            const double s2 = s * s;
            const double s3 = s2 * s;
            const double pos = 10.0 * s3 - 15.0 * s3 * s + 6.0 * s3 * s2;
            const double vel = (30.0 * s2 - 60.0 * s3 + 30.0 * s2 * s2) / T;
            const double acc = (60.0 * s - 180.0 * s2 + 120.0 * s3) / (T * T);
            return {initial_ + stroke_ * pos, stroke_ * vel, stroke_ * acc};
        }
        std::size_t k = 0;
        while (k + 1 < phases_.size() && tau >= phases_[k + 1].t0) ++k;
        const Phase& ph = phases_[k];
        const double dt = tau - ph.t0;
        const double acc = ph.a0 + ph.jerk * dt;
        const double vel = ph.v0 + ph.a0 * dt + 0.5 * ph.jerk * dt * dt;
        const double pos = ph.p0 + ph.v0 * dt + 0.5 * ph.a0 * dt * dt + ph.jerk * dt * dt * dt / 6.0;
        return {initial_ + pos, vel, acc};
    }

private:
    struct Phase {
        double t0, jerk, p0, v0, a0;
    };

    void build_phases() {
        const double durations[7] = {tj_, ta_, tj_, tv_, tj_, ta_, tj_};
        const double jerks[7] = {jerk_, 0.0, -jerk_, 0.0, -jerk_, 0.0, jerk_};
        double t = 0.0, p = 0.0, v = 0.0, a = 0.0;
        phases_.clear();
        for (int i = 0; i < 7; ++i) {
            phases_.push_back({t, jerks[i], p, v, a});
            const double d = durations[i];
            const double j = jerks[i];
            p += v * d + 0.5 * a * d * d + j * d * d * d / 6.0;
            v += a * d + 0.5 * j * d * d;
            a += j * d;
            t += d;
        }
    }

    Kind kind_ = Kind::hold;
    double initial_ = 0.0;
    double stroke_ = 0.0;
    double start_ = 0.0;
    double tj_ = 0.0, ta_ = 0.0, tv_ = 0.0;
    double jerk_ = 0.0;
    double duration_ = 0.0;
    std::vector<Phase> phases_;
};

struct MotionProfile {
    std::array<AxisProfile, 6> axes{};

    double end_time() const {
        double t = 0.0;
        for (const auto& a : axes) t = std::max(t, a.end_time());
        return t;
    }

    std::vector<double> breakpoints() const {
        std::vector<double> b;
        for (const auto& a : axes) {
            const auto ab = a.breakpoints();
            b.insert(b.end(), ab.begin(), ab.end());
        }
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        return b;
    }

    Vec6 strokes() const {
        Vec6 s;
        for (int i = 0; i < 6; ++i) s(i) = axes[static_cast<std::size_t>(i)].stroke();
        return s;
    }

    // Simultaneous moves of 10 mm in x and y, 1 mm in z and 1 mrad in each
    // angle, 0.5 s long (tj = 0.05 s, ta = 0.1 s, tv = 0.1 s).
    static MotionProfile default_experiment(double start_time = 0.1) {
        MotionProfile m;
        const double strokes[6] = {10e-3, 10e-3, 1e-3, 1e-3, 1e-3, 1e-3};
        for (int i = 0; i < 6; ++i) {
            m.axes[static_cast<std::size_t>(i)] =
                AxisProfile::scurve_timed(0.0, strokes[i], start_time, 0.05, 0.1, 0.1);
        }
        return m;
    }
};

inline ReferenceSample sample_reference(const MotionProfile& profile, double t) {
    if (t < 0.0) throw PreconditionViolation("sample_reference: t must be >= 0");
    ReferenceSample s;
    for (int i = 0; i < 6; ++i) {
        const auto v = profile.axes[static_cast<std::size_t>(i)].sample(t);
        s.r(i) = v[0];
        s.rdot(i) = v[1];
        s.rddot(i) = v[2];
    }
    return s;
}

struct DisturbanceProfile {
    enum class Shape { pulse, ramped };

    int channel = axis::psi;
    Shape shape = Shape::ramped;
    double amplitude = 0.0;  // [N] or [N m]
    double onset = 0.0;
    double duration = 0.0;
    double ramp = 0.0;

    void validate() const {
        if (channel < 0 || channel > 5) throw PreconditionViolation("disturbance: channel out of range");
        if (duration < 0.0 || ramp < 0.0 || onset < 0.0 || !std::isfinite(amplitude)) {
            throw PreconditionViolation("disturbance: times must be >= 0 and amplitude finite");
        }
        if (shape == Shape::ramped && ramp > duration) {
            throw PreconditionViolation("disturbance: ramp must not exceed duration");
        }
    }

    std::vector<double> breakpoints() const {
        if (amplitude == 0.0) return {};
        if (shape == Shape::pulse || ramp == 0.0) return {onset, onset + duration};
        return {onset, onset + ramp, onset + duration, window_end()};
    }

    double window_end() const { return onset + duration + (shape == Shape::ramped ? ramp : 0.0); }

    // Ramped pulse: rises over [onset, onset + ramp], holds until
    // onset + duration, falls to zero at onset + duration + ramp. Its
    // integral is amplitude * duration.
    double value(double t) const {
        if (t < onset || t >= window_end()) return 0.0;
        if (shape == Shape::pulse || ramp == 0.0) {
            return t < onset + duration ? amplitude : 0.0;
        }
        const double tau = t - onset;
        if (tau < ramp) return amplitude * tau / ramp;
        if (tau <= duration) return amplitude;
        return amplitude * (duration + ramp - tau) / ramp;
    }

    static DisturbanceProfile default_experiment();
};

inline Wrench sample_disturbance(const DisturbanceProfile& d, double t) {
    if (t < 0.0) throw PreconditionViolation("sample_disturbance: t must be >= 0");
    Wrench w = Wrench::Zero();
    w(d.channel) = d.value(t);
    return w;
}

// tau_psi pulse, 50 ms long with 5 ms ramps, starting mid-trajectory. The
// amplitude is of the order of the inertial coupling torques of the default move.
inline DisturbanceProfile DisturbanceProfile::default_experiment() {
    DisturbanceProfile d;
    d.channel = axis::psi;
    d.shape = Shape::ramped;
    d.amplitude = 2e-6;
    d.onset = 0.325;
    d.duration = 0.05;
    d.ramp = 0.005;
    return d;
}

}  // namespace maglev
