#pragma once

// The two-argument equilibrium value V(k0, kbar) across the steady-state
// family, the local renegotiation-proofness derivative, and the selection of
// the surviving steady state.

#include <cmath>
#include <optional>
#include <vector>

#include "ramseq/errors.hpp"
#include "ramseq/flow.hpp"
#include "ramseq/model.hpp"
#include "ramseq/og_solver.hpp"

namespace ramseq {

// Marginal product pinned by iterated local renegotiation:
// f'(kbar*) = rho (pi + delta)/(pi + rho); closed-form capital level for
// Cobb-Douglas.
inline double lrp_select(const OgEconomy& econ) {
    const Technology& tech = econ.tech();
    if (tech.kind() == TechKind::CobbDouglas)
        return tech.capital_at_marginal(lrp_marginal_product(econ));
    return bracketed_root_upward(
        [&](double k) { return tech.marginal(k) - lrp_marginal_product(econ); }, 1e-12, 1.0, 1e12);
}

// Closed form of dV/dkbar on the diagonal:
//   (1/f(kbar)) ((pi+rho)/(rho(pi+delta)) f'(kbar) - 1);
// positive on the interior of the admissible interval, zero at its top.
inline double renegotiation_derivative(const OgEconomy& econ, double kbar) {
    const double f = econ.tech().output(kbar), fp = econ.tech().marginal(kbar);
    const double r = econ.rho(), p = econ.pi(), d = econ.delta();
    return (1.0 / f) * ((p + r) / (r * (p + d)) * fp - 1.0);
}

struct ValueSurface {
    std::vector<double> kbar_grid;
    std::vector<double> k0_grid;
    // row-major [i_kbar * k0_grid.size() + i_k0]; NaN where the policy does
    // not cover k0 or the solve failed
    std::vector<double> V;
    std::vector<bool> solved;  // per kbar row

    double at(std::size_t i_kbar, std::size_t i_k0) const {
        return V[i_kbar * k0_grid.size() + i_k0];
    }
};

struct SurfaceOptions {
    SolveOptions solve;
    FlowOptions flow;
};

// V(k0, kbar) = value of the kbar-equilibrium policy started from k0,
// evaluated with the flow machinery policy by policy. Failures leave NaN.
inline ValueSurface value_surface(const OgEconomy& econ, const std::vector<double>& kbar_grid,
                                  const std::vector<double>& k0_grid,
                                  const SurfaceOptions& opt = {}) {
    ValueSurface s;
    s.kbar_grid = kbar_grid;
    s.k0_grid = k0_grid;
    s.V.assign(kbar_grid.size() * k0_grid.size(), std::nan(""));
    s.solved.assign(kbar_grid.size(), false);
    for (std::size_t i = 0; i < kbar_grid.size(); ++i) {
        try {
            const auto sol = solve_value_pair(econ, kbar_grid[i], opt.solve);
            s.solved[i] = true;
            for (std::size_t j = 0; j < k0_grid.size(); ++j) {
                const double k0 = k0_grid[j];
                if (!sol.policy.domain().contains(k0)) continue;
                s.V[i * k0_grid.size() + j] =
                    value_functional(sol.policy, econ.tech(), econ.kernel(), k0, opt.flow);
            }
        } catch (const Error&) {
            // row stays NaN; caller sees solved[i] == false
        }
    }
    return s;
}

// Centered-difference check of the closed-form diagonal derivative: solves
// the neighbouring policies kbar +- step and differentiates V(kbar, .) at
// fixed k0 = kbar.
inline double renegotiation_derivative_fd(const OgEconomy& econ, double kbar, double step,
                                          const SurfaceOptions& opt = {}) {
    const auto lo = solve_value_pair(econ, kbar - step, opt.solve);
    const auto hi = solve_value_pair(econ, kbar + step, opt.solve);
    const double v_lo = value_functional(lo.policy, econ.tech(), econ.kernel(), kbar, opt.flow);
    const double v_hi = value_functional(hi.policy, econ.tech(), econ.kernel(), kbar, opt.flow);
    return (v_hi - v_lo) / (2.0 * step);
}

}  // namespace ramseq
