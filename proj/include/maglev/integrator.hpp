#pragma once

namespace maglev {

// Classical fourth-order Runge-Kutta step for x' = f(t, x).
template <typename F, typename State>
State rk4_step(F&& f, double t, const State& x, double h) {
    const State k1 = f(t, x);
    const State k2 = f(t + 0.5 * h, (x + 0.5 * h * k1).eval());
    const State k3 = f(t + 0.5 * h, (x + 0.5 * h * k2).eval());
    const State k4 = f(t + h, (x + h * k3).eval());
    return (x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).eval();
}

}  // namespace maglev
