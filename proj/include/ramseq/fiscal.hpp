#pragma once

// Fiscal decentralization of a chosen equilibrium path: the intra-period
// allocation rule across living cohorts, the age/time capital-income tax
// surface that aligns private Euler equations with the planned path, its
// long-run limits (cutoff age, uniform subsidy), the laissez-faire steady
// state, and the lump-sum present values that match initial consumptions.

#include <cmath>
#include <vector>

#include "ramseq/errors.hpp"
#include "ramseq/model.hpp"
#include "ramseq/numerics.hpp"
#include "ramseq/og_solver.hpp"
#include "ramseq/phase.hpp"

namespace ramseq {

enum class AllocationVariant { Optimal, Egalitarian };

// Stationary linear sharing rule c(t-n, t) = phi(n) C(t) with
// ∫ e^{-pi n} phi(n) dn = 1.
//
//   Optimal:     phi(n) = (pi/delta) (delta+pi)/(rho+pi) ((delta-rho) e^{-delta n} + rho)
//   Egalitarian: phi(n) = pi
class AllocationRule {
  public:
    AllocationRule(const OgEconomy& econ, AllocationVariant variant)
        : variant_(variant), delta_(econ.delta()), rho_(econ.rho()), pi_(econ.pi()) {
        scale_ = (pi_ / delta_) * (delta_ + pi_) / (rho_ + pi_);
    }

    AllocationVariant variant() const { return variant_; }

    double phi(double age) const {
        check_age(age);
        if (variant_ == AllocationVariant::Egalitarian || delta_ == rho_) return pi_;
        return scale_ * ((delta_ - rho_) * std::exp(-delta_ * age) + rho_);
    }

    double phi_prime(double age) const {
        check_age(age);
        if (variant_ == AllocationVariant::Egalitarian || delta_ == rho_) return 0.0;
        return -scale_ * delta_ * (delta_ - rho_) * std::exp(-delta_ * age);
    }

    // phi'(n)/phi(n), the age component of the consumption drift
    double log_slope(double age) const {
        check_age(age);
        if (variant_ == AllocationVariant::Egalitarian || delta_ == rho_) return 0.0;
        const double e = std::exp(-delta_ * age);
        return -delta_ * (delta_ - rho_) * e / ((delta_ - rho_) * e + rho_);
    }

    // ∫_0^∞ e^{-pi n} phi(n) dn, closed form; equals 1 for both variants
    double normalization() const {
        if (variant_ == AllocationVariant::Egalitarian || delta_ == rho_) return 1.0;
        return scale_ * ((delta_ - rho_) / (pi_ + delta_) + rho_ / pi_);
    }

  private:
    static void check_age(double age) {
        if (!(age >= 0.0)) throw InvalidParameter("allocation rule: negative age");
    }

    AllocationVariant variant_;
    double delta_, rho_, pi_, scale_;
};

inline AllocationRule allocation_rule(const OgEconomy& econ, AllocationVariant variant) {
    return AllocationRule(econ, variant);
}

// Time-0 commitment allocation of C(s) across cohorts; both age branches.
// Not subgame perfect: re-planning at t > 0 moves to a different rule.
inline double commitment_allocation(const OgEconomy& econ, double age, double s, double C) {
    if (!(age >= 0.0) || !(s >= 0.0)) throw InvalidParameter("commitment_allocation: n, s >= 0");
    if (!(C > 0.0)) throw InvalidParameter("commitment_allocation: C > 0");
    const double d = econ.delta(), r = econ.rho(), p = econ.pi();
    const double denom = p + (d - r) * std::exp(-(p + d - r) * s);
    if (age <= s) return p * (d + p - r) * std::exp((r - d) * age) / denom * C;
    return p * (d + p - r) * std::exp((r - d) * s) / denom * C;
}

// Age cutoff where the long-run tax rate changes sign for the steady state
// with marginal product fpk = f'(kbar): e^{-delta n} = rho (delta - fpk) /
// ((delta - rho) fpk). At the renegotiation-proof steady state this reduces
// to -(1/delta) ln(pi/(delta+pi)).
inline double cutoff_age_at(const OgEconomy& econ, double fpk) {
    const double d = econ.delta(), r = econ.rho();
    if (econ.time_consistent()) throw DegenerateValue("cutoff_age_at: no cutoff when rho = delta");
    if (!(fpk > r && fpk < d))
        throw InvalidParameter("cutoff_age_at: marginal product outside (rho, delta)");
    const double e = r * (d - fpk) / ((d - r) * fpk);
    return -std::log(e) / d;
}

inline double cutoff_age(const OgEconomy& econ) {
    const double d = econ.delta(), p = econ.pi();
    return -std::log(p / (d + p)) / d;
}

// Long-run uniform capital-income subsidy rate under the egalitarian rule,
// (pi/rho)(delta-rho)/(pi+delta); equals (delta - f'(kbar*))/f'(kbar*) at the
// renegotiation-proof steady state.
inline double uniform_subsidy(const OgEconomy& econ) {
    const double d = econ.delta(), r = econ.rho(), p = econ.pi();
    return (p / r) * (d - r) / (p + d);
}

// Laissez-faire steady state: (f'(k) - delta) f(k) = pi (delta + pi) k.
inline double market_steady_state(const OgEconomy& econ) {
    const Technology& tech = econ.tech();
    if (!tech.strictly_concave())
        throw UnsupportedTechnology("market_steady_state: needs strictly concave technology");
    const double d = econ.delta(), p = econ.pi();
    auto g = [&](double k) { return (tech.marginal(k) - d) * tech.output(k) - p * (d + p) * k; };
    // g > 0 for small k (f' f -> +inf for Cobb-Douglas), g < 0 for large k
    double lo = 1e-8;
    while (!(g(lo) > 0.0)) {
        lo *= 0.5;
        if (lo < 1e-300) throw RootNotFound("market_steady_state: no positive bracket");
    }
    double hi = 1.0;
    while (g(hi) > 0.0) {
        hi *= 2.0;
        if (hi > 1e12) throw RootNotFound("market_steady_state: no sign change");
    }
    return brent_root(g, lo, hi, 1e-15);
}

// Tax-rate surface eta(n, t) = (1/r*_t)(-psi(t) - phi'(n)/phi(n)) on a
// rectangular age x time grid over a simulated trajectory, with the long-run
// slice and its closed-form limits attached.
struct FiscalSchedule {
    std::vector<double> ages;       // years
    std::vector<double> times;      // years (the trajectory sample times)
    std::vector<double> eta;        // row-major: eta[i_age * times.size() + i_time]
    std::vector<double> psi;        // psi(t) along the trajectory
    std::vector<double> eta_longrun;  // eta(n, infinity) per age
    double n_tilde = 0.0;           // sign-change age of the long-run slice
    double eta_bar = 0.0;           // uniform subsidy rate (egalitarian regime)
    double kbar = 0.0;
    AllocationVariant variant = AllocationVariant::Optimal;

    double at(std::size_t i_age, std::size_t i_time) const {
        return eta[i_age * times.size() + i_time];
    }
};

struct TaxGridOptions {
    double age_max = 100.0;
    double age_step = 0.5;
};

inline FiscalSchedule tax_surface(const Trajectory& traj, const AllocationRule& rule,
                                  const OgEconomy& econ, double kbar,
                                  const TaxGridOptions& opt = {}) {
    FiscalSchedule out;
    out.kbar = kbar;
    out.variant = rule.variant();
    out.times = traj.t;
    for (double n = 0.0; n <= opt.age_max + 1e-12; n += opt.age_step) out.ages.push_back(n);

    std::vector<double> rstar(traj.size());
    for (std::size_t j = 0; j < traj.size(); ++j) {
        rstar[j] = econ.tech().marginal(traj.K[j]);
        if (!(rstar[j] > 0.0)) throw InvalidPrice("tax_surface: nonpositive interest rate");
    }
    std::vector<double> psi;
    psi.reserve(traj.size());
    for (std::size_t j = 0; j < traj.size(); ++j)
        psi.push_back(psi_at(econ, traj.K[j], traj.C[j], traj.W[j]));
    out.psi = psi;

    out.eta.resize(out.ages.size() * traj.size());
    for (std::size_t i = 0; i < out.ages.size(); ++i) {
        const double ls = rule.log_slope(out.ages[i]);
        for (std::size_t j = 0; j < traj.size(); ++j)
            out.eta[i * traj.size() + j] = (-psi[j] - ls) / rstar[j];
    }

    const double fpk = econ.tech().marginal(kbar);
    out.eta_longrun.reserve(out.ages.size());
    for (const double n : out.ages)
        out.eta_longrun.push_back((fpk - econ.delta() - rule.log_slope(n)) / fpk);
    out.eta_bar = uniform_subsidy(econ);
    if (!econ.time_consistent() && rule.variant() == AllocationVariant::Optimal)
        out.n_tilde = cutoff_age_at(econ, fpk);
    return out;
}

// ---------------------------------------------------------------------------
// Lump-sum present values
// ---------------------------------------------------------------------------

struct LumpSumEntry {
    double vintage = 0.0;       // birth date tau; negative = alive at time 0
    double eval_time = 0.0;     // max(tau, 0)
    double consumption = 0.0;   // c*(tau, eval_time)
    double human_wealth = 0.0;  // h(tau, eval_time)
    double initial_assets = 0.0;
    double b = 0.0;             // present value of transfers
};

namespace detail {

inline double interp_column(const std::vector<double>& t, const std::vector<double>& y,
                            double tq) {
    if (tq <= t.front()) return y.front();
    if (tq >= t.back()) return y.back();
    std::size_t lo = 0, hi = t.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        (t[mid] <= tq ? lo : hi) = mid;
    }
    const double u = (tq - t[lo]) / (t[lo + 1] - t[lo]);
    return (1.0 - u) * y[lo] + u * y[lo + 1];
}

}  // namespace detail

// Human wealth h(tau, t0) = ∫_{t0}^∞ omega*_s exp(-∫_{t0}^s ((1-eta) r* + pi))
// ds along the trajectory, closed with the steady-state tail. The effective
// discount uses (1-eta(n,s)) r*_s = r*_s + psi(s) + phi'(n)/phi(n), the same
// wedge the tax surface is built from.
inline double human_wealth(const Trajectory& traj, const AllocationRule& rule,
                           const OgEconomy& econ, double vintage, double t0) {
    const Technology& tech = econ.tech();
    const double p = econ.pi(), d = econ.delta();
    const std::size_t n = traj.size();
    if (n < 3) throw InvalidParameter("human_wealth: trajectory too short");
    const double T = traj.t.back();
    if (t0 < 0.0 || t0 > T) throw InvalidParameter("human_wealth: eval time outside trajectory");

    // dense resampling of the integrand between t0 and T (trapezoid on a
    // fine uniform grid; the integrand is smooth and exponentially damped)
    const std::size_t m = 4 * n;
    const double dt = (T - t0) / static_cast<double>(m);
    double acc = 0.0;
    double disc = 0.0;  // cumulative ∫ ((1-eta) r* + pi)
    double val_prev = 0.0, rate_prev = 0.0;
    for (std::size_t i = 0; i <= m; ++i) {
        const double s = t0 + dt * static_cast<double>(i);
        const double K = detail::interp_column(traj.t, traj.K, s);
        const double C = detail::interp_column(traj.t, traj.C, s);
        const double W = detail::interp_column(traj.t, traj.W, s);
        const double r = tech.marginal(K);
        const double omega = (tech.output(K) - K * r) * p;
        const double age = s - vintage;
        const double rate = r + psi_at(econ, K, C, W) + rule.log_slope(age) + p;
        if (i > 0) disc += 0.5 * dt * (rate_prev + rate);
        const double val = omega * std::exp(-disc);
        if (i > 0) acc += 0.5 * dt * (val_prev + val);
        val_prev = val;
        rate_prev = rate;
    }

    // steady-state tail: rates freeze at their terminal values except for the
    // ageing phi ratio, which is integrated in closed form against e^{-(d+p)m}
    const double K_T = traj.K.back();
    const double r_T = tech.marginal(K_T);
    const double omega_T = (tech.output(K_T) - K_T * r_T) * p;
    const double age_T = T - vintage;
    const double disc_T = disc;
    // exponent from T to T+m: (d + p) m + ln(phi(age_T + m)/phi(age_T)),
    // using (1-eta) r = delta + phi'/phi at the steady state
    auto tail_integrand = [&](double mm) {
        return std::exp(-(d + p) * mm) * rule.phi(age_T) / rule.phi(age_T + mm);
    };
    const double M = 60.0 / (d + p);
    const double tail = omega_T * std::exp(-disc_T) * composite_gauss(tail_integrand, 0.0, M, 64);
    return acc + tail;
}

// Present values b for a set of vintages: newborn cohorts (tau >= 0) use
// b = c*(tau,tau)/(delta+pi) - h; cohorts alive at time 0 (tau < 0)
// additionally subtract their initial assets.
inline std::vector<LumpSumEntry> lump_sum_present_values(
    const Trajectory& traj, const AllocationRule& rule, const OgEconomy& econ,
    const std::vector<double>& vintages, const std::vector<double>& initial_assets) {
    if (!initial_assets.empty() && initial_assets.size() != vintages.size())
        throw InvalidParameter("lump_sum_present_values: assets vector size mismatch");
    std::vector<LumpSumEntry> out;
    out.reserve(vintages.size());
    const double dp = econ.delta() + econ.pi();
    for (std::size_t i = 0; i < vintages.size(); ++i) {
        const double tau = vintages[i];
        LumpSumEntry e;
        e.vintage = tau;
        e.eval_time = std::max(tau, 0.0);
        const double C = detail::interp_column(traj.t, traj.C, e.eval_time);
        e.consumption = rule.phi(e.eval_time - tau) * C;
        e.human_wealth = human_wealth(traj, rule, econ, tau, e.eval_time);
        e.initial_assets = (tau < 0.0 && !initial_assets.empty()) ? initial_assets[i] : 0.0;
        e.b = e.consumption / dp - e.human_wealth - e.initial_assets;
        out.push_back(e);
    }
    return out;
}

}  // namespace ramseq
