#pragma once

// Adaptive embedded Runge-Kutta pair (Dormand-Prince 5(4)) with a quartic
// continuous extension. The dense output is kept per accepted step so value
// integrals can reuse the integration mesh.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "ramseq/errors.hpp"
#include "ramseq/numerics.hpp"

namespace ramseq {

template <std::size_t N>
using State = std::array<double, N>;

struct OdeOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    double max_step = std::numeric_limits<double>::infinity();
    double initial_step = 0.0;  // 0 -> heuristic
    std::size_t max_steps = 2'000'000;
};

// One accepted step with the interpolation coefficients for
// y(t0 + q*h) = r1 + q*(r2 + (1-q)*(r3 + q*(r4 + (1-q)*r5))).
template <std::size_t N>
struct DenseStep {
    double t0 = 0.0;
    double h = 0.0;
    State<N> r1{}, r2{}, r3{}, r4{}, r5{};

    State<N> eval(double t) const {
        const double q = (t - t0) / h;
        State<N> out;
        for (std::size_t i = 0; i < N; ++i)
            out[i] = r1[i] + q * (r2[i] + (1.0 - q) * (r3[i] + q * (r4[i] + (1.0 - q) * r5[i])));
        return out;
    }
};

template <std::size_t N>
struct OdeSolution {
    std::vector<DenseStep<N>> steps;
    double t_begin = 0.0;
    double t_end = 0.0;
    State<N> y_end{};
    bool stopped_by_callback = false;

    bool forward() const { return t_end >= t_begin; }

    State<N> eval(double t) const {
        if (steps.empty()) throw Error("OdeSolution: empty");
        const bool fwd = forward();
        const double slack = 1e-9 * (1.0 + std::abs(t_end - t_begin));
        if ((fwd && (t < t_begin - slack || t > t_end + slack)) ||
            (!fwd && (t > t_begin + slack || t < t_end - slack)))
            throw DomainEdge("OdeSolution: time outside solution range");
        // binary search over step start times
        std::size_t lo = 0, hi = steps.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi + 1) / 2;
            const bool before = fwd ? (steps[mid].t0 <= t) : (steps[mid].t0 >= t);
            if (before) lo = mid; else hi = mid - 1;
        }
        return steps[lo].eval(t);
    }
};

// Integrates dy/dt = f(t, y) from t0 to t1 (t1 may be < t0). `stop` is checked
// after each accepted step; returning true ends the integration there.
template <std::size_t N>
OdeSolution<N> integrate_ode(const std::function<void(double, const State<N>&, State<N>&)>& f,
                             double t0, const State<N>& y0, double t1,
                             const OdeOptions& opt = {},
                             const std::function<bool(double, const State<N>&)>& stop = {}) {
    // Dormand-Prince coefficients
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                            a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    OdeSolution<N> sol;
    sol.t_begin = t0;
    if (t1 == t0) {
        sol.t_end = t0;
        sol.y_end = y0;
        return sol;
    }
    const double dir = (t1 > t0) ? 1.0 : -1.0;

    State<N> y = y0, k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
    double t = t0;
    f(t, y, k1);

    auto err_norm = [&](const State<N>& e, const State<N>& ya, const State<N>& yb) {
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(ya[i]), std::abs(yb[i]));
            const double r = e[i] / sc;
            s += r * r;
        }
        return std::sqrt(s / N);
    };

    double h = opt.initial_step;
    if (h == 0.0) {
        double ynrm = 0.0, fnrm = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            ynrm = std::max(ynrm, std::abs(y[i]));
            fnrm = std::max(fnrm, std::abs(k1[i]));
        }
        h = (fnrm > 0.0) ? 0.01 * (1.0 + ynrm) / fnrm : 1e-3 * std::abs(t1 - t0);
        h = std::min(h, std::abs(t1 - t0));
    }
    h = std::min(h, opt.max_step) * dir;

    for (std::size_t nstep = 0; nstep < opt.max_steps; ++nstep) {
        if (dir * (t1 - t) <= 0.0) break;
        if (dir * (t + h - t1) > 0.0) h = t1 - t;

        for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        f(t + c2 * h, ytmp, k2);
        for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        f(t + c3 * h, ytmp, k3);
        for (std::size_t i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        f(t + c4 * h, ytmp, k4);
        for (std::size_t i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        f(t + c5 * h, ytmp, k5);
        for (std::size_t i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        f(t + h, ytmp, k6);
        for (std::size_t i = 0; i < N; ++i)
            ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        f(t + h, ynew, k7);

        State<N> errv;
        for (std::size_t i = 0; i < N; ++i)
            errv[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double err = err_norm(errv, y, ynew);

        if (err <= 1.0) {
            DenseStep<N> ds;
            ds.t0 = t;
            ds.h = h;
            for (std::size_t i = 0; i < N; ++i) {
                const double ydiff = ynew[i] - y[i];
                const double bspl = h * k1[i] - ydiff;
                ds.r1[i] = y[i];
                ds.r2[i] = ydiff;
                ds.r3[i] = bspl;
                ds.r4[i] = ydiff - h * k7[i] - bspl;
                ds.r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                                d7 * k7[i]);
            }
            sol.steps.push_back(ds);
            t += h;
            y = ynew;
            k1 = k7;  // FSAL
            if (stop && stop(t, y)) {
                sol.stopped_by_callback = true;
                break;
            }
        }
        double fac = (err > 0.0) ? 0.9 * std::pow(err, -0.2) : 5.0;
        fac = std::clamp(fac, 0.2, 5.0);
        h *= fac;
        if (std::abs(h) > opt.max_step) h = opt.max_step * dir;
        const double hmin = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(t);
        if (std::abs(h) < hmin && dir * (t1 - t) > 0.0)
            throw Error("integrate_ode: step size underflow");
        if (nstep + 1 == opt.max_steps) throw Error("integrate_ode: max step count exceeded");
    }

    sol.t_end = t;
    sol.y_end = y;
    return sol;
}

}  // namespace ramseq
