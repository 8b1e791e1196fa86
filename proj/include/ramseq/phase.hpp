#pragma once

// Time-domain simulation: the capital flow under a solved policy, the
// equivalent autonomous (K, C, W) system, and the consumption-drift wedge
// psi(t) entering the fiscal layer.
//
// The policy-driven form K' = f(K) - sigma(K), C = sigma(K), W = w(K) is the
// non-singular representation and is used for production runs; the autonomous
// form, whose C and W equations carry C/(f-C) factors, serves as a residual
// check and diagnostic.

#include <cmath>
#include <string>
#include <vector>

#include "ramseq/errors.hpp"
#include "ramseq/flow.hpp"
#include "ramseq/model.hpp"
#include "ramseq/ode.hpp"
#include "ramseq/og_solver.hpp"
#include "ramseq/policy.hpp"

namespace ramseq {

enum class TrajectorySource { PolicyDriven, Autonomous };

struct Trajectory {
    std::vector<double> t, K, C, W;
    TrajectorySource source = TrajectorySource::PolicyDriven;
    bool reached_steady = false;  // terminal state within tolerance of (kbar, f(kbar))
    bool stopped_singular = false;  // autonomous drift f(K) - C vanished mid-run
    double kbar = 0.0;

    std::size_t size() const { return t.size(); }
};

struct SimulateOptions {
    std::size_t samples = 2001;
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    double steady_tol = 1e-9;
};

// K' = f(K) - sigma(K) from K0, sampled on a uniform grid over [0, T].
inline Trajectory simulate_policy(const OgEconomy& econ, const ValuePair& pair,
                                  const Policy& policy, double K0, double T,
                                  const SimulateOptions& opt = {}) {
    if (!policy.domain().contains(K0))
        throw DivergedPolicy("simulate_policy: initial capital outside the policy domain");
    if (!(T > 0.0) || opt.samples < 2)
        throw InvalidParameter("simulate_policy: need T > 0 and at least two samples");

    FlowOptions fopt;
    fopt.abs_tol = opt.abs_tol;
    fopt.rel_tol = opt.rel_tol;
    fopt.horizon = T;  // fixed horizon; no early stop
    const FlowResult flow = integrate_flow(policy, econ.tech(), K0, T, fopt);

    Trajectory traj;
    traj.source = TrajectorySource::PolicyDriven;
    traj.kbar = policy.steady_state().value_or(0.0);
    traj.t.reserve(opt.samples);
    for (std::size_t i = 0; i < opt.samples; ++i) {
        const double t = T * static_cast<double>(i) / static_cast<double>(opt.samples - 1);
        const double K = flow.capital(std::min(t, flow.sol.t_end));
        traj.t.push_back(t);
        traj.K.push_back(K);
        traj.C.push_back(policy(K));
        traj.W.push_back(pair.w.eval(K));
    }
    if (policy.steady_state()) {
        const double kb = *policy.steady_state();
        traj.reached_steady =
            std::abs(traj.K.back() - kb) < 1e-6 * (1.0 + std::abs(kb));
    }
    return traj;
}

// The autonomous (K, C, W) system. Stops with a flag if the drift f(K) - C
// approaches zero away from the steady state (the C and W equations are
// singular there).
inline Trajectory simulate_autonomous(const OgEconomy& econ, double K0, double C0, double W0,
                                      double T, const SimulateOptions& opt = {}) {
    if (!(K0 > 0.0) || !(C0 > 0.0))
        throw InvalidParameter("simulate_autonomous: need K0, C0 > 0");
    const Technology& tech = econ.tech();
    if (std::abs(tech.output(K0) - C0) < 1e-12 * C0)
        throw SingularDrift("simulate_autonomous: f(K0) = C0 exactly");
    const double d = econ.delta(), r = econ.rho(), p = econ.pi();

    bool singular = false;
    auto rhs = [&](double, const State<3>& y, State<3>& dy) {
        const double K = y[0], C = y[1], W = y[2];
        const double drift = tech.output(K) - C;
        dy[0] = drift;
        const double gap = p * std::log(C) - r * (p + d) * W;
        dy[1] = C * (tech.marginal(K) - d - (d - r) * p / d -
                     (d - r) / d * C / drift * gap);
        dy[2] = -(p * drift / C + p * std::log(C) - r * (p + d) * W) / d;
    };
    auto stop = [&](double, const State<3>& y) {
        if (std::abs(tech.output(y[0]) - y[1]) < 1e-9 * y[1]) {
            singular = true;
            return true;
        }
        return !(y[0] > 0.0 && y[1] > 0.0);
    };

    OdeOptions oopt;
    oopt.abs_tol = opt.abs_tol;
    oopt.rel_tol = opt.rel_tol;
    const auto sol = integrate_ode<3>(rhs, 0.0, State<3>{K0, C0, W0}, T, oopt, stop);

    Trajectory traj;
    traj.source = TrajectorySource::Autonomous;
    traj.stopped_singular = singular;
    const double T_eff = sol.t_end;
    traj.t.reserve(opt.samples);
    for (std::size_t i = 0; i < opt.samples; ++i) {
        const double t = T * static_cast<double>(i) / static_cast<double>(opt.samples - 1);
        const double tc = std::min(t, T_eff);
        const auto y = sol.eval(tc);
        traj.t.push_back(t);
        traj.K.push_back(y[0]);
        traj.C.push_back(y[1]);
        traj.W.push_back(y[2]);
    }
    return traj;
}

// psi(t) = -(d-r) p/d - (d-r)/d * C/(f-C) * (p ln C - r(p+d) W); switches to
// the analytic steady-state limit delta - f'(K) when the drift underflows.
inline double psi_at(const OgEconomy& econ, double K, double C, double W) {
    const double d = econ.delta(), r = econ.rho(), p = econ.pi();
    const double drift = econ.tech().output(K) - C;
    if (std::abs(drift) < 1e-7 * C) return d - econ.tech().marginal(K);
    return -(d - r) * p / d - (d - r) / d * (C / drift) * (p * std::log(C) - r * (p + d) * W);
}

inline std::vector<double> psi_path(const Trajectory& traj, const OgEconomy& econ) {
    std::vector<double> psi;
    psi.reserve(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i)
        psi.push_back(psi_at(econ, traj.K[i], traj.C[i], traj.W[i]));
    return psi;
}

// Residual of the autonomous C-equation along a policy-driven trajectory:
//   (1/C) dC/dt - (f'(K) - delta + psi).
// dC/dt comes from the policy slope; near the steady state both sides use
// their analytic limits.
inline std::vector<double> autonomous_residual(const Trajectory& traj, const OgEconomy& econ,
                                               const Policy& policy) {
    std::vector<double> res;
    res.reserve(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double K = traj.K[i], C = traj.C[i], W = traj.W[i];
        const double drift = econ.tech().output(K) - C;
        const double growth = policy.slope(K) * drift / C;
        res.push_back(growth - (econ.tech().marginal(K) - econ.delta() + psi_at(econ, K, C, W)));
    }
    return res;
}

}  // namespace ramseq
