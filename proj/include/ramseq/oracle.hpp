#pragma once

// Closed-form reference solutions for the linear-technology, log-utility
// case under the piecewise-exponential kernel, and constant-discount
// baselines. These are the ground truths the test suite checks the numerical
// machinery against.

#include <cmath>
#include <vector>

#include "ramseq/errors.hpp"
#include "ramseq/flow.hpp"
#include "ramseq/model.hpp"
#include "ramseq/policy.hpp"

namespace ramseq::oracle {

// f(k) = A k with the displayed two-rate kernel (d0 early, d1 late, switch
// at tau).
struct LinearCase {
    double A = 1.0;
    double d0 = 0.10;
    double d1 = 0.05;
    double tau = 1.0;

    DiscountKernel kernel() const { return DiscountKernel::piecewise_exponential(d0, d1, tau); }
    Technology tech() const { return Technology::linear(A); }

    // marginal propensity to consume of the commitment re-planner
    double naive_slope() const { return d0; }

    // equilibrium marginal propensity to consume,
    // d0 / (1 + ((d0-d1)/d1) e^{-d1 tau})
    double equilibrium_slope() const {
        return d0 / (1.0 + (d0 - d1) / d1 * std::exp(-d1 * tau));
    }

    // slope of the exact fixed point of the integrated equation under the
    // displayed (discontinuous) kernel: 1 / ∫_0^∞ h
    double integrated_fixed_point_slope() const { return 1.0 / kernel().horizon(); }
};

inline double linear_naive_policy(const LinearCase& c, double k) {
    if (!(k > 0.0)) throw InvalidParameter("linear_naive_policy: k > 0");
    return c.naive_slope() * k;
}

inline double linear_equilibrium_policy(const LinearCase& c, double k) {
    if (!(k > 0.0)) throw InvalidParameter("linear_equilibrium_policy: k > 0");
    return c.equilibrium_slope() * k;
}

inline Policy linear_policy(double slope) {
    return Policy::analytic([slope](double k) { return slope * k; },
                            [slope](double) { return slope; },
                            Interval{1e-12, 1e300}, std::nullopt);
}

// Value candidate consistent with the displayed piecewise equilibrium
// equation for a log-linear policy sigma = s k: v(k) = (1/s) ln k + E with E
// pinned by the equation at k = 1.
struct LinearValue {
    double slope = 0.0;     // 1/v'(k) = slope * k
    double constant = 0.0;  // E

    double value(double k) const { return std::log(k) / slope + constant; }
    double value_slope(double k) const { return 1.0 / (slope * k); }

    ValueCandidate candidate() const {
        const double s = slope, E = constant;
        return ValueCandidate{[s, E](double k) { return std::log(k) / s + E; },
                              [s](double k) { return 1.0 / (s * k); }};
    }
};

struct LinearDeSolve {
    double slope = 0.0;
    LinearValue value;
    int iterations = 0;
    double last_update = 0.0;
};

// Solves the piecewise-kernel equilibrium equation
//   d0 v(k) = sup_c[u(c) + v'(k)(f(k)-c)] + (d0-d1) g(k),
//   g(k) = ∫_tau^∞ e^{-d1 t} u(sigma(K(t,k))) dt,  sigma = 1/v',
// in the log-linear family by a fixed-point iteration on the slope. g is
// evaluated with the flow machinery (no closed forms on this path), its
// ln k coefficient extracted from two probe points.
inline LinearDeSolve solve_linear_de(const LinearCase& c, const FlowOptions& fopt_in = {},
                                     double tol = 1e-13, int max_iter = 40) {
    const DiscountKernel kernel = c.kernel();
    const Technology tech = c.tech();
    FlowOptions fopt = fopt_in;
    // the tail closure is exact for log-linear paths, so a short horizon
    // past the kernel switch suffices
    if (!fopt.horizon) fopt.horizon = c.tau + 50.0;

    const double ka = 1.0, kb = std::exp(1.0);  // ln k spacing of exactly 1
    double slope = c.naive_slope();
    LinearDeSolve out;
    for (int it = 0; it < max_iter; ++it) {
        const Policy pol = linear_policy(slope);
        const double ga = piecewise_nonlocal_term(pol, tech, kernel, ka, fopt);
        const double gb = piecewise_nonlocal_term(pol, tech, kernel, kb, fopt);
        const double g_slope = gb - ga;  // coefficient of ln k
        // matching the ln k coefficients of d0 v = sup + (d0-d1) g with
        // v = B ln k + E, sup contributing ln k once:
        const double B = (1.0 + (c.d0 - c.d1) * g_slope) / c.d0;
        const double next = 1.0 / B;
        out.last_update = std::abs(next - slope);
        slope = next;
        out.iterations = it + 1;
        if (out.last_update <= tol * slope) break;
    }
    // pin the constant from the equation at k = 1
    const Policy pol = linear_policy(slope);
    const double g1 = piecewise_nonlocal_term(pol, tech, kernel, 1.0, fopt);
    const double vp1 = 1.0 / slope;  // v'(1)
    const double sup1 = -std::log(vp1) - 1.0 + vp1 * c.A;
    out.slope = slope;
    out.value.slope = slope;
    out.value.constant = (sup1 + (c.d0 - c.d1) * g1) / c.d0;
    return out;
}

// Residuals of the constant-discount equation d0 v = u(sigma) + v'(f - sigma)
// for a policy/value pair on a capital grid. The right-hand side is evaluated
// at the policy's own consumption, so a policy inconsistent with i(v') shows
// up as a nonzero residual even if v solves the equation.
inline std::vector<double> hjb_constant_discount_check(const Policy& policy,
                                                       const ValueCandidate& value,
                                                       const Technology& tech, double d0,
                                                       const std::vector<double>& kgrid) {
    std::vector<double> out;
    out.reserve(kgrid.size());
    for (const double k : kgrid) {
        const double sig = policy(k);
        const double rhs = LogUtility::u(sig) + value.slope(k) * (tech.output(k) - sig);
        out.push_back(d0 * value.value(k) - rhs);
    }
    return out;
}

}  // namespace ramseq::oracle
