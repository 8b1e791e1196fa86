#pragma once

// Small numerical utilities: bracketing root finder, Gauss-Legendre nodes,
// finite differences.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>

#include "ramseq/errors.hpp"

namespace ramseq {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    bool contains(double x, double slack = 0.0) const {
        return x >= lo - slack && x <= hi + slack;
    }
    double clamp(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
};

// Brent's method on [a, b]; f(a) and f(b) must have opposite signs.
inline double brent_root(const std::function<double(double)>& f, double a, double b,
                         double xtol = 1e-14, int max_iter = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (std::signbit(fa) == std::signbit(fb))
        throw RootNotFound("brent_root: no sign change in bracket");
    double c = a, fc = fa;
    double d = b - a, e = d;
    for (int it = 0; it < max_iter; ++it) {
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
        const double m = 0.5 * (c - b);
        if (std::abs(m) <= tol || fb == 0.0) return b;
        if (std::abs(e) < tol || std::abs(fa) <= std::abs(fb)) {
            d = e = m;  // bisection
        } else {
            double p, q;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc, r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
                e = d; d = p / q;  // accept interpolation
            } else {
                d = e = m;
            }
        }
        a = b; fa = fb;
        b += (std::abs(d) > tol) ? d : (m > 0.0 ? tol : -tol);
        fb = f(b);
        if (std::signbit(fb) != std::signbit(fc)) { /* bracket [b, c] kept */ }
        else { c = a; fc = fa; e = d = b - a; }
    }
    throw RootNotFound("brent_root: iteration limit");
}

// Expands a bracket upward from `lo` until f changes sign, then solves.
inline double bracketed_root_upward(const std::function<double(double)>& f, double lo,
                                    double hi_guess, double hi_limit) {
    double a = lo, fa = f(a);
    double b = hi_guess;
    for (int i = 0; i < 200; ++i) {
        if (b > hi_limit) throw RootNotFound("bracketed_root_upward: no sign change up to limit");
        const double fb = f(b);
        if (fb == 0.0) return b;
        if (std::signbit(fa) != std::signbit(fb)) return brent_root(f, a, b);
        a = b; fa = fb;
        b *= 2.0;
    }
    throw RootNotFound("bracketed_root_upward: bracket expansion failed");
}

// 7-point Gauss-Legendre rule on [-1, 1]; enough for the smooth integrands
// met here when applied per integrator step.
struct GaussLegendre7 {
    static constexpr int n = 7;
    static constexpr std::array<double, 7> x = {
        -0.9491079123427585245262, -0.7415311855993944398639, -0.4058451513773971669066,
        0.0,
        0.4058451513773971669066, 0.7415311855993944398639, 0.9491079123427585245262};
    static constexpr std::array<double, 7> w = {
        0.1294849661688696932706, 0.2797053914892766679015, 0.3818300505051189449504,
        0.4179591836734693877551,
        0.3818300505051189449504, 0.2797053914892766679015, 0.1294849661688696932706};

    // ∫_a^b f
    template <class F>
    static double integrate(F&& f, double a, double b) {
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += w[i] * f(c + h * x[i]);
        return s * h;
    }
};

// Composite Gauss rule over [a, b] with m panels.
template <class F>
double composite_gauss(F&& f, double a, double b, int panels) {
    double s = 0.0;
    const double h = (b - a) / panels;
    for (int i = 0; i < panels; ++i) s += GaussLegendre7::integrate(f, a + i * h, a + (i + 1) * h);
    return s;
}

template <class F>
double central_difference(F&& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

template <class F>
double second_difference(F&& f, double x, double h) {
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

}  // namespace ramseq
