#pragma once

// Adaptive Dormand-Prince 5(4) integrator shared by the moment and
// population propagators.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "dissent/errors.hpp"

namespace dissent::ode {

struct Options {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_min = 1e-12;    // relative to the interval span
    long max_steps = 2'000'000;
};

// Integrates y' = f(t, y) from t0 to t1 in place. `on_accept(t, y)` runs after
// every accepted step. `h` carries the step size between calls.
template <class Rhs, class OnAccept>
void integrate(Rhs&& f, double t0, double t1, Eigen::VectorXd& y, double& h,
               const Options& opt, OnAccept&& on_accept) {
    if (t1 <= t0) return;
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    const double span = t1 - t0;
    if (!(h > 0.0)) h = span * 1e-3;
    h = std::min(h, span);
    const double h_floor = opt.h_min * std::max(span, 1.0);

    Eigen::VectorXd k1 = f(t0, y), k2, k3, k4, k5, k6, k7, y5, tmp;
    double t = t0;
    long steps = 0;
    while (t < t1) {
        if (++steps > opt.max_steps) {
            throw StiffnessError("step budget exhausted at t=" + std::to_string(t));
        }
        bool last = false;
        if (t + h >= t1 - 1e-14 * std::max(1.0, std::abs(t1))) {
            h = t1 - t;
            last = true;
        }
        tmp = y + h * a21 * k1;
        k2 = f(t + c2 * h, tmp);
        tmp = y + h * (a31 * k1 + a32 * k2);
        k3 = f(t + c3 * h, tmp);
        tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        k4 = f(t + c4 * h, tmp);
        tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        k5 = f(t + c5 * h, tmp);
        tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        k6 = f(t + h, tmp);
        y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        k7 = f(t + h, y5);
        const Eigen::VectorXd err =
            h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double norm = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
            norm = std::max(norm, std::abs(err[i]) / sc);
        }
        if (!std::isfinite(norm)) norm = 1e10;
        if (norm <= 1.0) {
            t = last ? t1 : t + h;
            y = y5;
            k1 = k7;
            on_accept(t, y);
            const double fac = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
            if (!last) h *= fac;
            else h = std::max(h, h * fac);
        } else {
            h *= std::max(0.1, 0.9 * std::pow(norm, -0.2));
            if (h < h_floor) {
                throw StiffnessError("step size underflow at t=" + std::to_string(t));
            }
        }
    }
}

template <class Rhs>
void integrate(Rhs&& f, double t0, double t1, Eigen::VectorXd& y, double& h,
               const Options& opt = {}) {
    integrate(std::forward<Rhs>(f), t0, t1, y, h, opt, [](double, const Eigen::VectorXd&) {});
}

}  // namespace dissent::ode
