#pragma once

// Capital flow under a Markov policy and the functionals built on it: the
// value integral, the one-shot deviation payoff, the residuals of the two
// equivalent equilibrium equations, and the effective discount rate.
//
// Infinite-horizon integrals are computed as per-step Gauss quadrature over
// the integrator's dense output plus a closed-form kernel tail. The tail uses
// a first-order (affine-in-t) model of the integrand, which is exact both at
// a steady state and along linear-technology paths with log utility.

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "ramseq/errors.hpp"
#include "ramseq/model.hpp"
#include "ramseq/numerics.hpp"
#include "ramseq/ode.hpp"
#include "ramseq/policy.hpp"

namespace ramseq {

struct FlowOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    // |K(T) - kbar| below this (scaled by 1+|kbar|) closes the horizon.
    double steady_tol = 1e-8;
    double horizon_cap = 50'000.0;          // years; safety stop
    std::optional<double> horizon;          // fixed horizon (no convergence stop)
    double max_step = 5.0;                  // years; keeps quadrature panels short
};

// Joint solution of dK/dt = f(K) - sigma(K) and the variational factor
// dR/dt = (f'(K) - sigma'(K)) R, R(0) = 1, so R(t) = dK(t,k)/dk.
struct FlowResult {
    OdeSolution<2> sol;     // state: (K, R)
    double k0 = 0.0;
    double horizon = 0.0;   // T actually integrated
    bool converged = false; // reached the steady-state neighbourhood

    double capital(double t) const { return sol.eval(t)[0]; }
    double resolvent(double t) const { return sol.eval(t)[1]; }
};

inline FlowResult integrate_flow(const Policy& policy, const Technology& tech, double k,
                                 double horizon, const FlowOptions& opt = {}) {
    if (!policy.domain().contains(k, 1e-12 * (1.0 + std::abs(k))))
        throw DivergedPolicy("integrate_flow: initial capital outside policy domain");

    const auto kbar = policy.steady_state();
    const Interval dom = policy.domain();

    auto rhs = [&](double /*t*/, const State<2>& y, State<2>& dy) {
        const double K = dom.clamp(y[0]);
        dy[0] = tech.output(K) - policy(K);
        dy[1] = (tech.marginal(K) - policy.slope(K)) * y[1];
    };

    bool diverged = false;
    auto stop = [&](double /*t*/, const State<2>& y) {
        if (!dom.contains(y[0], 1e-10 * (1.0 + std::abs(y[0])))) {
            diverged = true;
            return true;
        }
        // magnitude cap for open-ended growth paths; the affine tail closure
        // of the value integrals is exact for those, so stopping here loses
        // nothing and keeps exp(K-growth) representable
        if (std::abs(y[0]) > 1e120 || std::abs(y[1]) > 1e120) return true;
        if (kbar && !opt.horizon) {
            if (std::abs(y[0] - *kbar) < opt.steady_tol * (1.0 + std::abs(*kbar))) return true;
        }
        return false;
    };

    OdeOptions oopt;
    oopt.abs_tol = opt.abs_tol;
    oopt.rel_tol = opt.rel_tol;
    oopt.max_step = opt.max_step;

    const double T = opt.horizon ? *opt.horizon : std::min(horizon, opt.horizon_cap);
    FlowResult out;
    out.k0 = k;
    out.sol = integrate_ode<2>(rhs, 0.0, State<2>{k, 1.0}, T, oopt, stop);
    out.horizon = out.sol.t_end;
    if (diverged)
        throw DivergedPolicy("integrate_flow: trajectory left the policy domain");
    if (kbar)
        out.converged =
            std::abs(out.sol.y_end[0] - *kbar) < 10.0 * opt.steady_tol * (1.0 + std::abs(*kbar));
    return out;
}

namespace detail {

enum class KernelWeight { H, HPrime };

// ∫₀^∞ w(t) m(t) dt with w = h or h', m evaluated along the flow, tail closed
// with the affine model m(T) + m'(T)(t-T).
template <class M, class MDot>
double weighted_flow_integral(const FlowResult& flow, const DiscountKernel& kernel,
                              KernelWeight weight, M&& m, MDot&& mdot) {
    auto wfun = [&](double t) {
        return weight == KernelWeight::H ? kernel.h(t) : kernel.hprime(t);
    };
    double acc = 0.0;
    for (const auto& step : flow.sol.steps) {
        const double a = step.t0, b = step.t0 + step.h;
        // split panels at the kernel's switch time so the jump never sits
        // inside a Gauss panel
        double split = -1.0;
        if (kernel.kind() == KernelKind::PiecewiseExponential) {
            const double tau = kernel.switch_time();
            if (tau > a && tau < b) split = tau;
        }
        auto integrand = [&](double t) {
            const auto y = step.eval(t);
            return wfun(t) * m(t, y);
        };
        if (split > 0.0) {
            acc += GaussLegendre7::integrate(integrand, a, split);
            acc += GaussLegendre7::integrate(integrand, split, b);
        } else {
            acc += GaussLegendre7::integrate(integrand, a, b);
        }
    }
    const double T = flow.sol.t_end;
    const auto yT = flow.sol.y_end;
    const double m_T = m(T, yT);
    const double mdot_T = mdot(T, yT);
    if (weight == KernelWeight::H)
        acc += m_T * kernel.tail(T) + mdot_T * kernel.tail_moment(T);
    else
        acc += m_T * kernel.dtail(T) + mdot_T * kernel.dtail_moment(T);
    return acc;
}

// Chooses an integration horizon for non-convergent (linear-technology)
// flows: far enough that the affine tail model is accurate and the kernel
// mass beyond it is negligible against the integrand scale.
inline double default_open_horizon(const DiscountKernel& kernel) {
    const double slow = std::min(kernel.late_rate(),
                                 kernel.kind() == KernelKind::OgMixture ? kernel.social_rate()
                                                                        : kernel.late_rate());
    return std::min(80.0 / slow, 5000.0);
}

}  // namespace detail

// v(k) = ∫₀^∞ h(t) u(sigma(K(t,k))) dt under log utility.
inline double value_functional(const Policy& policy, const Technology& tech,
                               const DiscountKernel& kernel, double k,
                               const FlowOptions& opt_in = {}) {
    FlowOptions opt = opt_in;
    if (!policy.steady_state() && !opt.horizon)
        opt.horizon = detail::default_open_horizon(kernel);
    const FlowResult flow = integrate_flow(policy, tech, k, opt.horizon_cap, opt);
    if (policy.steady_state() && !opt.horizon && !flow.converged)
        throw DivergedPolicy("value_functional: flow did not reach the steady state");
    auto m = [&](double, const State<2>& y) { return LogUtility::u(policy(y[0])); };
    auto mdot = [&](double, const State<2>& y) {
        const double K = y[0];
        return LogUtility::marginal(policy(K)) * policy.slope(K) * (tech.output(K) - policy(K));
    };
    return detail::weighted_flow_integral(flow, kernel, detail::KernelWeight::H, m, mdot);
}

// J(k) = ∫₀^∞ h u'(sigma(K)) sigma'(K) R dt. Along an equilibrium this equals
// v'(k); it is the linear coefficient of the one-shot deviation payoff.
inline double deviation_gradient(const Policy& policy, const Technology& tech,
                                 const DiscountKernel& kernel, double k,
                                 const FlowOptions& opt_in = {}) {
    FlowOptions opt = opt_in;
    if (!policy.steady_state() && !opt.horizon)
        opt.horizon = detail::default_open_horizon(kernel);
    const FlowResult flow = integrate_flow(policy, tech, k, opt.horizon_cap, opt);
    auto m = [&](double, const State<2>& y) {
        const double K = y[0];
        return LogUtility::marginal(policy(K)) * policy.slope(K) * y[1];
    };
    auto mdot = [&](double, const State<2>& y) {
        const double K = y[0], R = y[1];
        const double sig = policy(K), sigp = policy.slope(K);
        const double drift = tech.output(K) - sig;
        const double growth = tech.marginal(K) - sigp;
        // d/dt [u'(sigma) sigma' R]; the curvature term needs sigma'' which is
        // only known exactly for grid policies, so approximate it from the
        // slope field. For linear policies the whole bracket cancels exactly.
        double sigpp = 0.0;
        if (policy.grid() != nullptr) sigpp = policy.grid()->second_derivative(K);
        const double du = -1.0 / (sig * sig) * sigp * sigp + (1.0 / sig) * sigpp;
        return du * drift * R + (1.0 / sig) * sigp * R * growth;
    };
    return detail::weighted_flow_integral(flow, kernel, detail::KernelWeight::H, m, mdot);
}

// One-shot deviation payoff P1(k, sigma, c) = u(c) - u(sigma(k)) - J(k)(c - sigma(k)).
inline double perturbation_payoff(const Policy& policy, const Technology& tech,
                                  const DiscountKernel& kernel, double k, double c,
                                  const FlowOptions& opt = {}) {
    if (!(c > 0.0)) throw InvalidParameter("perturbation_payoff: consumption must be > 0");
    const double j = deviation_gradient(policy, tech, kernel, k, opt);
    const double sig = policy(k);
    return LogUtility::u(c) - LogUtility::u(sig) - j * (c - sig);
}

// sup_c [u(c) + v'(k)(f(k) - c)] in closed form for log utility.
inline double hamiltonian_sup(double vprime, double fk) {
    if (!(vprime > 0.0)) throw DegenerateValue("hamiltonian_sup: v' must be > 0");
    return -std::log(vprime) - 1.0 + vprime * fk;
}

// Residual of the integrated equilibrium equation: v(k) - ∫ h u(sigma(K)) dt.
inline std::vector<double> ie_residual(const Policy& policy, const ValueCandidate& value,
                                       const Technology& tech, const DiscountKernel& kernel,
                                       const std::vector<double>& kgrid,
                                       const FlowOptions& opt = {}) {
    std::vector<double> out;
    out.reserve(kgrid.size());
    for (const double k : kgrid)
        out.push_back(value.value(k) - value_functional(policy, tech, kernel, k, opt));
    return out;
}

// g(k) = ∫_tau^∞ e^{-d1 t} u(sigma(K(t,k))) dt — the non-local saving term of
// the piecewise-exponential equilibrium equation.
inline double piecewise_nonlocal_term(const Policy& policy, const Technology& tech,
                                      const DiscountKernel& kernel, double k,
                                      const FlowOptions& opt_in = {}) {
    if (kernel.kind() != KernelKind::PiecewiseExponential)
        throw InvalidParameter("piecewise_nonlocal_term: wrong kernel kind");
    const double tau = kernel.switch_time(), d1 = kernel.late_rate();
    FlowOptions opt = opt_in;
    if (!opt.horizon) {
        double T = policy.steady_state() ? opt.horizon_cap : detail::default_open_horizon(kernel);
        opt.horizon = std::max(T, tau + 10.0);
        if (policy.steady_state()) opt.horizon.reset();  // convergence stop preferred
    }
    FlowResult flow = integrate_flow(policy, tech, k, opt.horizon_cap, opt);
    if (flow.sol.t_end < tau)  // converged before tau: extend at fixed horizon
    {
        FlowOptions ext = opt;
        ext.horizon = tau + 10.0;
        flow = integrate_flow(policy, tech, k, ext.horizon_cap, ext);
    }
    double acc = 0.0;
    for (const auto& step : flow.sol.steps) {
        double a = step.t0, b = step.t0 + step.h;
        if (b <= tau) continue;
        a = std::max(a, tau);
        acc += GaussLegendre7::integrate(
            [&](double t) { return std::exp(-d1 * t) * LogUtility::u(policy(step.eval(t)[0])); }, a,
            b);
    }
    const double T = flow.sol.t_end;
    const double KT = flow.sol.y_end[0];
    const double m_T = LogUtility::u(policy(KT));
    const double mdot_T =
        LogUtility::marginal(policy(KT)) * policy.slope(KT) * (tech.output(KT) - policy(KT));
    acc += m_T * std::exp(-d1 * T) / d1 + mdot_T * std::exp(-d1 * T) / (d1 * d1);
    return acc;
}

// Residual of the differentiated equilibrium equation. For C^1 kernels this
// is -∫ h'(t) u(sigma(K)) dt - sup_c[...]; for the piecewise-exponential
// kernel it is evaluated in the equivalent rate-decomposed form
// d0 v(k) - (d0 - d1) g(k) - sup_c[...], which is the displayed equation that
// the closed-form linear equilibrium satisfies.
inline std::vector<double> de_residual(const Policy& policy, const ValueCandidate& value,
                                       const Technology& tech, const DiscountKernel& kernel,
                                       const std::vector<double>& kgrid,
                                       const FlowOptions& opt_in = {}) {
    std::vector<double> out;
    out.reserve(kgrid.size());
    for (const double k : kgrid) {
        const double sup = hamiltonian_sup(value.slope(k), tech.output(k));
        if (kernel.kind() == KernelKind::PiecewiseExponential) {
            const double d0 = kernel.early_rate(), d1 = kernel.late_rate();
            const double g = piecewise_nonlocal_term(policy, tech, kernel, k, opt_in);
            out.push_back(d0 * value.value(k) - (d0 - d1) * g - sup);
        } else {
            FlowOptions opt = opt_in;
            if (!policy.steady_state() && !opt.horizon)
                opt.horizon = detail::default_open_horizon(kernel);
            const FlowResult flow = integrate_flow(policy, tech, k, opt.horizon_cap, opt);
            auto m = [&](double, const State<2>& y) { return LogUtility::u(policy(y[0])); };
            auto mdot = [&](double, const State<2>& y) {
                const double K = y[0];
                return LogUtility::marginal(policy(K)) * policy.slope(K) *
                       (tech.output(K) - policy(K));
            };
            const double nl =
                detail::weighted_flow_integral(flow, kernel, detail::KernelWeight::HPrime, m, mdot);
            out.push_back(-nl - sup);
        }
    }
    return out;
}

// Effective discount rate rho(k) = -∫ h' u(sigma(K)) dt / ∫ h u(sigma(K)) dt.
// Both integrals share one flow and one quadrature mesh.
inline double effective_discount_rate(const Policy& policy, const Technology& tech,
                                      const DiscountKernel& kernel, double k,
                                      const FlowOptions& opt_in = {}) {
    FlowOptions opt = opt_in;
    if (!policy.steady_state() && !opt.horizon)
        opt.horizon = detail::default_open_horizon(kernel);
    const FlowResult flow = integrate_flow(policy, tech, k, opt.horizon_cap, opt);
    auto m = [&](double, const State<2>& y) { return LogUtility::u(policy(y[0])); };
    auto mdot = [&](double, const State<2>& y) {
        const double K = y[0];
        return LogUtility::marginal(policy(K)) * policy.slope(K) * (tech.output(K) - policy(K));
    };
    const double num =
        -detail::weighted_flow_integral(flow, kernel, detail::KernelWeight::HPrime, m, mdot);
    const double den =
        detail::weighted_flow_integral(flow, kernel, detail::KernelWeight::H, m, mdot);
    if (std::abs(den) < 1e-12)
        throw DegenerateValue("effective_discount_rate: value integral too close to zero");
    return num / den;
}

}  // namespace ramseq
