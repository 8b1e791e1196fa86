#pragma once

// Equilibrium construction for the overlapping-generations two-exponential
// discount mixture. The coupled value system
//
//   (f - 1/v') v' - ln v' = delta v - (delta - rho) w
//   (f - 1/v') w'         = -pi v + (rho + pi) w
//
// with boundary values at the steady state kbar is singular at kbar
// (f - 1/v' -> 0). The solver starts from a local Taylor expansion at
// kbar ± eps and integrates outward in k, recovering v' at every step from
// the scalar equation f v' - 1 - ln(f v') = mu(k) on the branch matching the
// side of kbar. An independent desingularized-orbit solver provides a
// cross-check of the constructed policy.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ramseq/errors.hpp"
#include "ramseq/flow.hpp"
#include "ramseq/interp.hpp"
#include "ramseq/model.hpp"
#include "ramseq/numerics.hpp"
#include "ramseq/ode.hpp"
#include "ramseq/policy.hpp"

namespace ramseq {

// Capital interval admissible as equilibrium steady states:
// rho (pi+delta)/(pi+rho) < f'(k) < delta  (k_lo < k_hi since f' decreases).
struct SteadyStateInterval {
    double k_lo = 0.0;
    double k_hi = 0.0;

    bool degenerate() const { return k_lo == k_hi; }
    bool strictly_inside(double k) const { return k > k_lo && k < k_hi; }
    double at_fraction(double q) const { return k_lo + q * (k_hi - k_lo); }
};

inline double lrp_marginal_product(const OgEconomy& econ) {
    return econ.rho() * (econ.pi() + econ.delta()) / (econ.pi() + econ.rho());
}

inline SteadyStateInterval steady_state_interval(const OgEconomy& econ) {
    const Technology& tech = econ.tech();
    if (!tech.strictly_concave())
        throw UnsupportedTechnology(
            "steady_state_interval: marginal product is constant, no interior interval");
    auto solve_marginal = [&](double x) {
        if (tech.kind() == TechKind::CobbDouglas) return tech.capital_at_marginal(x);
        // generic strictly concave fallback
        return bracketed_root_upward([&](double k) { return tech.marginal(k) - x; }, 1e-12, 1.0,
                                     1e12);
    };
    SteadyStateInterval I;
    I.k_lo = solve_marginal(econ.delta());
    I.k_hi = solve_marginal(lrp_marginal_product(econ));
    return I;
}

// Local expansion data at the steady state. stability is the linearization
// rate f'(kbar) + v''(kbar)/v'(kbar)^2 of the closed flow; negative means
// kbar attracts.
struct TaylorSeed {
    double kbar = 0.0;
    double v = 0.0;
    double w = 0.0;
    double vp = 0.0;
    double wp = 0.0;
    double vpp = 0.0;
    // Second derivative of w at kbar; the v''' terms cancel at the steady
    // state, leaving w'' = ((delta - 2f') v'' - v''^2 f^2 - f''/f)/(delta-rho).
    // Keeps mu = delta v - (delta-rho) w - ln f nonnegative at the offset
    // start points.
    double wpp = 0.0;
    double stability = 0.0;
    bool time_consistent = false;
};

inline TaylorSeed taylor_seed(const OgEconomy& econ, double kbar) {
    const double d = econ.delta(), r = econ.rho(), p = econ.pi();
    const Technology& tech = econ.tech();
    const double f = tech.output(kbar), fp = tech.marginal(kbar);
    const double lf = std::log(f);

    TaylorSeed s;
    s.kbar = kbar;
    s.v = (r + p) / (r * (d + p)) * lf;
    s.w = p / (r * (d + p)) * lf;
    s.vp = 1.0 / f;

    if (econ.time_consistent()) {
        // Constant-discount branch: kbar must be the modified golden rule and
        // the local curvature comes from the quadratic in y = v''/v'^2,
        // y^2 + delta y + f f'' = 0 (stable root).
        if (!tech.strictly_concave())
            throw UnsupportedTechnology("taylor_seed: constant-discount branch needs concave f");
        if (std::abs(fp - d) > 1e-8 * (1.0 + d))
            throw InadmissibleSteadyState(
                "taylor_seed: with rho = delta the steady state must satisfy f'(k) = delta");
        const double ffpp = f * tech.second(kbar);
        const double disc = d * d - 4.0 * ffpp;
        const double y = 0.5 * (-d - std::sqrt(disc));
        s.vpp = y * s.vp * s.vp;
        s.stability = d + y;
        s.wp = p / (f * (d + p - s.stability));
        s.time_consistent = true;
        return s;
    }

    const double denom = d - fp;
    const double numer = r * (d + p) - (r + p) * fp;
    if (std::abs(denom) < 1e-14 * (1.0 + d))
        throw InadmissibleSteadyState("taylor_seed: f'(kbar) = delta boundary is degenerate");
    s.stability = numer / denom;
    if (!(s.stability < 0.0))
        throw InadmissibleSteadyState(
            "taylor_seed: steady state outside the admissible interval (repelling linearization)");
    s.wp = (d - fp) / ((d - r) * f);
    s.vpp = s.vp * s.vp * (s.stability - fp);
    const double fpp = tech.second(kbar);
    s.wpp = ((d - 2.0 * fp) * s.vpp - s.vpp * s.vpp * f * f - fpp / f) / (d - r);
    return s;
}

// x - ln(1+x) = mu. lower branch X1 in (-1, 0], upper branch X2 in [0, inf).
enum class Branch { lower, upper };

inline double branch_solve_x(double mu, Branch branch) {
    if (mu < -1e-12) throw NoSolution("branch_solve_x: no solution for mu < 0");
    if (mu <= 0.0) return 0.0;
    const double sign = (branch == Branch::upper) ? 1.0 : -1.0;
    // quadratic-order seed x ~ sign*sqrt(2 mu) + 2 mu / 3
    double x = sign * std::sqrt(2.0 * mu) + 2.0 * mu / 3.0;
    if (branch == Branch::upper) {
        if (mu > 1.0) x = mu + std::log1p(mu);  // x ~ mu + ln(1+x) for large mu
    } else {
        x = std::max(x, std::expm1(-mu - 1.0));  // keep inside (-1, 0)
        if (mu > 1.0) x = std::expm1(-mu - 1.0);
    }
    // safeguarded Newton: F(x) = x - log1p(x) - mu, F'(x) = x/(1+x)
    double lo = (branch == Branch::upper) ? 0.0 : -1.0 + 1e-300;
    double hi = (branch == Branch::upper) ? mu + std::log1p(mu) + 2.0 : 0.0;
    for (int it = 0; it < 100; ++it) {
        const double F = x - std::log1p(x) - mu;
        if (std::abs(F) < 1e-15 * (1.0 + mu)) return x;
        if (F > 0.0) { if (branch == Branch::upper) hi = x; else lo = x; }
        else { if (branch == Branch::upper) lo = x; else hi = x; }
        const double dF = x / (1.0 + x);
        double xn = (dF != 0.0) ? x - F / dF : 0.5 * (lo + hi);
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        if (xn == x) return x;
        x = xn;
    }
    return x;
}

// Solved value pair with C^1 interpolants on the reached domain.
struct ValuePair {
    double kbar = 0.0;
    Interval domain{};
    TaylorSeed seed{};
    double epsilon = 0.0;  // singular offset actually used
    CubicHermite v, w, vp, wp;
    std::string lower_stop, upper_stop;  // which limit ended each side

    double value(double k) const { return v.eval(k); }
    double value_slope(double k) const { return vp.eval(k); }
    double welfare_unborn(double k) const { return w.eval(k); }

    ValueCandidate candidate() const {
        return ValueCandidate{[this](double k) { return v.eval(k); },
                              [this](double k) { return vp.eval(k); }};
    }
};

struct WelfareSplit {
    double surviving;
    double unborn;
};

inline WelfareSplit welfare_split(const ValuePair& pair, double k) {
    const double vk = pair.v.eval(k), wk = pair.w.eval(k);
    return {vk - wk, wk};
}

struct SolveOptions {
    double omega_lo_frac = 0.70;   // requested domain as fractions of kbar
    double omega_hi_frac = 1.30;
    double epsilon_scale = 1e-4;   // initial eps = scale * (1 + kbar)
    double epsilon_agree = 1e-7;   // accept eps when eps and eps/2 agree to this
    int max_halvings = 6;
    double max_step = 0.0;         // 0 -> span / base_steps
    double base_steps = 3000.0;    // RK4 steps per side at the base step size
    double shoot_tol = 1e-10;      // landing tolerance of the upper-side shot
    double upper_boot_frac = 0.012;  // bootstrap span of the upper shot (1 + kbar units)
};

namespace detail {

struct SideSolution {
    std::vector<double> k, v, w, vp, wp, x;
    std::string stop_reason = "requested bound";
};

// mu(k) = delta v - (delta - rho) w - ln f(k); nonnegative along solutions,
// zero only at kbar.
inline double mu_of(const OgEconomy& econ, double k, double v, double w) {
    return econ.delta() * v - (econ.delta() - econ.rho()) * w - std::log(econ.tech().output(k));
}

// Shared fixed-step RK4 marcher for the (x, w) system in k. The state is
// (x, w) with x = f v' - 1; v is recovered algebraically from
//   v = (x - ln(1+x) + ln f + (delta-rho) w) / delta.
// An adaptive embedded estimator is the wrong tool here: near the singular
// point the ratio terms sit on a rounding-noise floor scaling like 1/x^2
// while the dynamics are smooth and uniformly scaled in k, so a guarded
// fixed step is used instead. Steps halve locally when x moves too fast
// (near domain edges).
struct MarchCallbacks {
    std::function<const char*(double k, double x)> at_edge;   // nullptr = keep going
    std::function<bool(double k, const State<2>&)> done;      // extra stop (optional)
};

class ValueSystem {
  public:
    ValueSystem(const OgEconomy& econ, const TaylorSeed& seed)
        : econ_(econ), seed_(seed) {}

    double value_of(double k, double x, double w) const {
        return (x - std::log1p(x) + std::log(econ_.tech().output(k)) +
                (econ_.delta() - econ_.rho()) * w) /
               econ_.delta();
    }

    double wprime_of(double k, double x, double w) const {
        if (std::abs(x) < 1e-11) return seed_.wp;  // steady-state limit
        const double f = econ_.tech().output(k);
        const double v = value_of(k, x, w);
        return (-econ_.pi() * v + (econ_.rho() + econ_.pi()) * w) * (1.0 + x) / (f * x);
    }

    void rhs(double k, const State<2>& y, State<2>& dy) const {
        const double x = y[0], w = y[1];
        const double f = econ_.tech().output(k), fp = econ_.tech().marginal(k);
        const double wp = wprime_of(k, x, w);
        dy[1] = wp;
        if (std::abs(x) < 1e-13) {
            dy[0] = seed_.stability / f;  // limiting slope at the steady state
            return;
        }
        const double mup = econ_.delta() * (1.0 + x) / f - (econ_.delta() - econ_.rho()) * wp -
                           fp / f;
        dy[0] = mup * (1.0 + x) / x;
    }

    void append_node(SideSolution& side, double k, const State<2>& y) const {
        side.k.push_back(k);
        side.v.push_back(value_of(k, y[0], y[1]));
        side.w.push_back(y[1]);
        side.vp.push_back((1.0 + y[0]) / econ_.tech().output(k));
        side.wp.push_back(wprime_of(k, y[0], y[1]));
        side.x.push_back(y[0]);
    }

    // Transverse linearization rate around the equilibrium branch is
    // kappa / (k - kbar)^2 in the k-variable; explicit steps must respect it
    // near the steady state even though the mode is contracting there.
    double stiff_kappa() const {
        const double fb = econ_.tech().output(seed_.kbar);
        const double slope = seed_.stability / fb;
        return (econ_.delta() - econ_.tech().marginal(seed_.kbar)) / (fb * slope * slope);
    }

    // Marches from (k0, y0) to k_target; returns the final state. Nodes are
    // appended to `side` when it is non-null.
    State<2> march(double k0, State<2> y0, double k_target, double h_base,
                   const MarchCallbacks& cb, SideSolution* side) const {
        State<2> y = y0;
        double k = k0;
        if (side) append_node(*side, k, y);
        State<2> k1, k2, k3, k4, yt;
        const double dir = (k_target >= k0) ? 1.0 : -1.0;
        const double kappa = std::max(stiff_kappa(), 1e-12);
        const double h_floor = 1e-9 * (1.0 + std::abs(seed_.kbar));
        const std::size_t hard_cap =
            200UL * static_cast<std::size_t>(std::abs(k_target - k0) / h_base + 1.0) + 500000UL;
        for (std::size_t n = 0; n < hard_cap; ++n) {
            const double remaining = std::abs(k_target - k);
            if (remaining <= 1e-12 * (1.0 + std::abs(k_target))) break;
            const double ktil = std::abs(k - seed_.kbar);
            const double h_stiff = std::max(ktil * ktil / kappa, h_floor);
            double h = dir * std::min({h_base, remaining, h_stiff});
            State<2> ynew{};
            double knew = k;
            for (int halve = 0;; ++halve) {
                rhs(k, y, k1);
                yt = {y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]};
                rhs(k + 0.5 * h, yt, k2);
                yt = {y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]};
                rhs(k + 0.5 * h, yt, k3);
                yt = {y[0] + h * k3[0], y[1] + h * k3[1]};
                rhs(k + h, yt, k4);
                ynew = {y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])};
                knew = k + h;
                const bool tame = std::abs(ynew[0] - y[0]) <= 0.05 * (0.01 + std::abs(y[0])) &&
                                  std::isfinite(ynew[0]) && std::isfinite(ynew[1]) &&
                                  ynew[0] > -1.0;
                if (tame || halve >= 40) break;
                h *= 0.5;
            }
            k = knew;
            y = ynew;
            if (cb.at_edge) {
                if (const char* reason = cb.at_edge(k, y[0])) {
                    if (side) side->stop_reason = reason;
                    break;
                }
            }
            if (side) append_node(*side, k, y);
            if (cb.done && cb.done(k, y)) break;
        }
        return y;
    }

  private:
    const OgEconomy& econ_;
    const TaylorSeed& seed_;
};

// Lower side: march outward (k decreasing) from the Taylor seed at
// kbar - eps. This is the transversally stable direction, so the local seed
// fixes the whole branch.
inline SideSolution integrate_lower(const OgEconomy& econ, const TaylorSeed& seed, double eps,
                                    double k_target, const SolveOptions& opt) {
    const ValueSystem sys(econ, seed);
    const double k0 = seed.kbar - eps;
    const double dk = -eps;
    const double v0 = seed.v + seed.vp * dk + 0.5 * seed.vpp * dk * dk;
    const double w0 = seed.w + seed.wp * dk + 0.5 * seed.wpp * dk * dk;
    const double mu0 = std::max(0.0, mu_of(econ, k0, v0, w0));
    const double x0 = branch_solve_x(mu0, Branch::upper);

    SideSolution side;
    MarchCallbacks cb;
    cb.at_edge = [](double, double x) -> const char* {
        if (x < 1e-12) return "mu -> 0 (domain edge)";
        if (x > 50.0) return "x very large (consumption -> 0)";
        return nullptr;
    };
    const double span = std::abs(k_target - k0);
    const double h = (opt.max_step > 0.0) ? opt.max_step : std::max(span / opt.base_steps, 1e-7);
    sys.march(k0, State<2>{x0, w0}, k_target, h, cb, &side);
    return side;
}

// Upper side. Marching away from kbar is transversally unstable with a rate
// that integrates to exp(c/eps) e-folds near the steady state, so the branch
// cannot be continued outward from a local seed. Instead:
//   1. place a trial state a short bootstrap span above kbar (where the
//      quadratic Taylor value of w is still accurate) and shoot on its
//      x-coordinate so the inward march lands on kbar (landing is detected by
//      |x| becoming small and extrapolating x ~ slope (k - kbar));
//   2. the shot state lies on a genuine equilibrium orbit, which is then
//      continued outward to the requested bound -- away from kbar the
//      outward amplification is only exp(c/span), a small factor.
inline SideSolution integrate_upper(const OgEconomy& econ, const TaylorSeed& seed, double eps,
                                    double k_target, const SolveOptions& opt) {
    const ValueSystem sys(econ, seed);
    const double kbar = seed.kbar;
    const double fb = econ.tech().output(kbar);
    const double slope = seed.stability / fb;  // dx/dk at the steady state
    const double far_span = k_target - kbar;
    if (!(far_span > 4.0 * eps))
        throw InvalidParameter("integrate_upper: requested bound too close to kbar");

    const double stop_radius = std::max(2.0 * eps, 2e-4 * (1.0 + kbar));
    const double x_land = std::abs(slope) * stop_radius;
    const double h = (opt.max_step > 0.0)
                         ? opt.max_step
                         : std::max((k_target - kbar) / opt.base_steps, 1e-7);
    const double k_floor = std::max(0.25 * kbar, kbar - 2.0 * far_span);

    struct LandResult {
        double khat = 0.0;
        bool landed = false;
    };

    auto land = [&](double k_from, double xf, double wf, SideSolution* side) {
        MarchCallbacks cb;
        bool crossed = false;
        double kcross = 0.0;
        bool small_x = false;
        cb.at_edge = [&](double k, double x) -> const char* {
            if (x > -1e-13) {
                crossed = true;
                kcross = k;
                return "x crossed zero";
            }
            if (x < -0.97) return "x -> -1 (consumption blow-up)";
            return nullptr;
        };
        cb.done = [&](double, const State<2>& y) {
            if (std::abs(y[0]) <= x_land) {
                small_x = true;
                return true;
            }
            return false;
        };
        SideSolution local;
        SideSolution* rec = side ? side : &local;
        const auto yend = sys.march(k_from, State<2>{xf, wf}, k_floor, h, cb, rec);
        const double kend = rec->k.empty() ? k_from : rec->k.back();
        if (crossed) return LandResult{kcross, false};
        if (small_x) return LandResult{kend - yend[0] / slope, true};
        return LandResult{kend - yend[0] / slope, false};  // crashed low
    };

    // Bootstrap span: short enough that the quadratic Taylor value of w at
    // kbar + boot leaves the kbar label reachable by the x-shot; shrinks on
    // bracketing failure. Deliberately independent of eps so the selected
    // orbit is stable across refinement passes.
    const double tol = opt.shoot_tol * (1.0 + kbar);
    double x_shot = 0.0, w_boot = 0.0, boot_used = 0.0;
    bool shot_ok = false;
    for (double boot = std::min(opt.upper_boot_frac * (1.0 + kbar), 0.5 * far_span);
         boot > 8.0 * eps && !shot_ok; boot *= 0.5) {
        const double k_boot = kbar + boot;
        const double wf = seed.w + seed.wp * boot + 0.5 * seed.wpp * boot * boot;
        // bracket the landing label across kbar on a trial fan
        const double xc = slope * boot;
        double lo_x = 0.0, hi_x = 0.0, lo_g = 0.0, hi_g = 0.0;
        bool have_lo = false, have_hi = false;  // lo: lands below kbar, hi: above
        for (double fac : {1.0, 0.8, 1.2, 0.6, 1.5, 0.4, 2.0, 0.25, 3.0, 0.12, 4.0, 0.05, 6.0}) {
            const double xf = xc * fac;
            if (!(xf > -0.95)) continue;
            const auto res = land(k_boot, xf, wf, nullptr);
            const double g = res.khat - kbar;
            if (g < 0.0 && (!have_lo || g > lo_g)) {
                have_lo = true;
                lo_x = xf;
                lo_g = g;
            }
            if (g >= 0.0 && (!have_hi || g < hi_g)) {
                have_hi = true;
                hi_x = xf;
                hi_g = g;
            }
            if (have_lo && have_hi) break;
        }
        if (!(have_lo && have_hi)) continue;
        // regula falsi with bisection safeguard
        double a = lo_x, ga = lo_g, b = hi_x, gb = hi_g;
        for (int it = 0; it < 120; ++it) {
            double c = (gb != ga) ? b - gb * (b - a) / (gb - ga) : 0.5 * (a + b);
            const double clo = std::min(a, b), chi = std::max(a, b);
            if (!(c > clo && c < chi)) c = 0.5 * (a + b);
            const auto res = land(k_boot, c, wf, nullptr);
            const double gc = res.khat - kbar;
            if (std::abs(gc) <= tol && res.landed) {
                x_shot = c;
                shot_ok = true;
                break;
            }
            if (gc < 0.0) {
                a = c;
                ga = gc;
            } else {
                b = c;
                gb = gc;
            }
            if (std::abs(b - a) < 1e-17 * (1.0 + std::abs(a))) {
                x_shot = 0.5 * (a + b);
                shot_ok = std::abs(gc) <= 1e4 * tol;
                break;
            }
        }
        if (shot_ok) {
            boot_used = boot;
            w_boot = wf;
        }
    }
    if (!shot_ok)
        throw DomainEdge("integrate_upper: inward shooting failed to land on kbar");
    const double k_boot = kbar + boot_used;

    // record the landing run, then continue the same orbit outward
    SideSolution inward;
    land(k_boot, x_shot, w_boot, &inward);
    SideSolution side;
    for (std::size_t i = inward.k.size(); i-- > 0;) {
        side.k.push_back(inward.k[i]);
        side.v.push_back(inward.v[i]);
        side.w.push_back(inward.w[i]);
        side.vp.push_back(inward.vp[i]);
        side.wp.push_back(inward.wp[i]);
        side.x.push_back(inward.x[i]);
    }
    if (k_target > k_boot + 1e-12) {
        MarchCallbacks cb;
        cb.at_edge = [&](double, double x) -> const char* {
            // x returning to zero above kbar means the orbit is approaching
            // the adjacent steady state: the natural upper edge of Omega
            if (x > -x_land) return "adjacent steady state (domain edge)";
            if (x < -0.9) return "x -> -1 (consumption blow-up)";
            return nullptr;
        };
        SideSolution outward;
        sys.march(k_boot, State<2>{x_shot, w_boot}, k_target, h, cb, &outward);
        side.stop_reason = outward.stop_reason;
        for (std::size_t i = 1; i < outward.k.size(); ++i) {  // skip duplicate k_boot node
            side.k.push_back(outward.k[i]);
            side.v.push_back(outward.v[i]);
            side.w.push_back(outward.w[i]);
            side.vp.push_back(outward.vp[i]);
            side.wp.push_back(outward.wp[i]);
            side.x.push_back(outward.x[i]);
        }
    }
    return side;
}

inline Policy assemble_policy(const std::vector<double>& k, const std::vector<double>& vp,
                              const std::vector<double>& vpp, double kbar) {
    std::vector<double> sig(k.size()), dsig(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) {
        sig[i] = 1.0 / vp[i];
        dsig[i] = -vpp[i] / (vp[i] * vp[i]);
    }
    return Policy::from_grid(k, sig, dsig, kbar);
}

}  // namespace detail

struct SolveResult {
    ValuePair pair;
    Policy policy;
};

// Constructs the equilibrium policy converging to kbar. Integrates the value
// system outward from kbar +- eps with eps halved until two successive
// refinements agree, then assembles C^1 grids (v, w, v', w') and the policy
// sigma = 1/v'.
inline SolveResult solve_value_pair(const OgEconomy& econ, double kbar,
                                    const SolveOptions& opt = {}) {
    const TaylorSeed seed = taylor_seed(econ, kbar);
    const Technology& tech = econ.tech();
    const double d = econ.delta(), r = econ.rho();

    const double k_lo_req = std::max(opt.omega_lo_frac * kbar, 1e-8);
    const double k_hi_req = opt.omega_hi_frac * kbar;
    if (!(k_lo_req < kbar && kbar < k_hi_req))
        throw InvalidParameter("solve_value_pair: requested domain must straddle kbar");

    auto solve_once = [&](double eps) {
        auto lo = detail::integrate_lower(econ, seed, eps, k_lo_req, opt);
        auto hi = detail::integrate_upper(econ, seed, eps, k_hi_req, opt);
        return std::make_pair(std::move(lo), std::move(hi));
    };

    double eps = opt.epsilon_scale * (1.0 + kbar);
    auto sides = solve_once(eps);
    for (int halving = 0; halving < opt.max_halvings; ++halving) {
        const double eps2 = 0.5 * eps;
        auto refined = solve_once(eps2);
        // compare sigma = 1/v' of the two refinements at interior checkpoints
        double worst = 0.0;
        auto make_interp = [](const detail::SideSolution& s) {
            std::vector<double> kk = s.k, vv = s.vp;
            if (kk.front() > kk.back()) {
                std::reverse(kk.begin(), kk.end());
                std::reverse(vv.begin(), vv.end());
            }
            return CubicHermite::with_estimated_slopes(std::move(kk), std::move(vv));
        };
        for (int side_i = 0; side_i < 2; ++side_i) {
            const auto& a = side_i == 0 ? sides.first : sides.second;
            const auto& b = side_i == 0 ? refined.first : refined.second;
            if (a.k.size() < 3 || b.k.size() < 3) continue;
            auto ia = make_interp(a);
            auto ib = make_interp(b);
            const double qlo = std::max(ia.front(), ib.front());
            const double qhi = std::min(ia.back(), ib.back());
            if (!(qhi > qlo)) continue;
            for (int j = 1; j <= 7; ++j) {
                const double kq = qlo + j * (qhi - qlo) / 8.0;
                const double sa = 1.0 / ia.eval(kq), sb = 1.0 / ib.eval(kq);
                worst = std::max(worst, std::abs(sa - sb) / tech.output(kbar));
            }
        }
        sides = std::move(refined);
        eps = eps2;
        if (worst <= opt.epsilon_agree) break;
    }

    // assemble joint grids: lower side (reversed) + kbar + upper side
    auto& lo = sides.first;
    auto& hi = sides.second;
    if (lo.k.size() < 3 || hi.k.size() < 3)
        throw DomainEdge("solve_value_pair: solvable domain collapsed around kbar");

    std::vector<double> K, V, W, VP, WP, X;
    K.reserve(lo.k.size() + hi.k.size() + 1);
    for (std::size_t i = lo.k.size(); i-- > 0;) {
        K.push_back(lo.k[i]);
        V.push_back(lo.v[i]);
        W.push_back(lo.w[i]);
        VP.push_back(lo.vp[i]);
        WP.push_back(lo.wp[i]);
        X.push_back(lo.x[i]);
    }
    K.push_back(kbar);
    V.push_back(seed.v);
    W.push_back(seed.w);
    VP.push_back(seed.vp);
    WP.push_back(seed.wp);
    X.push_back(0.0);
    for (std::size_t i = 0; i < hi.k.size(); ++i) {
        K.push_back(hi.k[i]);
        V.push_back(hi.v[i]);
        W.push_back(hi.w[i]);
        VP.push_back(hi.vp[i]);
        WP.push_back(hi.wp[i]);
        X.push_back(hi.x[i]);
    }

    // v'' at the nodes from the recovered branch variable:
    //   v'' = ((1+x)/x mu' f - (1+x) f') / f^2,  mu' = delta v' - (delta-rho) w' - f'/f
    std::vector<double> VPP(K.size());
    for (std::size_t i = 0; i < K.size(); ++i) {
        const double k = K[i], x = X[i];
        const double f = tech.output(k), fp = tech.marginal(k);
        if (std::abs(x) < 1e-7 || std::abs(k - kbar) < 2.0 * eps) {
            VPP[i] = seed.vpp;
        } else {
            const double mup = d * VP[i] - (d - r) * WP[i] - fp / f;
            VPP[i] = ((1.0 + x) / x * mup * f - (1.0 + x) * fp) / (f * f);
        }
    }

    // enforce v' > 0 and monotone closed-loop drift sign: truncate at the
    // first violation on each side
    std::size_t i_bar = 0;
    for (std::size_t i = 0; i < K.size(); ++i)
        if (K[i] == kbar) { i_bar = i; break; }
    std::size_t lo_cut = 0, hi_cut = K.size() - 1;
    for (std::size_t i = i_bar; i-- > 0;) {
        const double drift = tech.output(K[i]) - 1.0 / VP[i];
        if (!(VP[i] > 0.0) || !(drift > 0.0)) { lo_cut = i + 1; break; }
    }
    for (std::size_t i = i_bar + 1; i < K.size(); ++i) {
        const double drift = tech.output(K[i]) - 1.0 / VP[i];
        if (!(VP[i] > 0.0) || !(drift < 0.0)) { hi_cut = i - 1; break; }
    }
    if (hi_cut <= lo_cut + 2) throw DomainEdge("solve_value_pair: domain too small after checks");
    const std::size_t n = hi_cut - lo_cut + 1;
    auto cut = [&](std::vector<double>& a) {
        a = std::vector<double>(a.begin() + lo_cut, a.begin() + lo_cut + n);
    };
    cut(K); cut(V); cut(W); cut(VP); cut(WP); cut(VPP);

    ValuePair pair;
    pair.kbar = kbar;
    pair.seed = seed;
    pair.epsilon = eps;
    pair.domain = {K.front(), K.back()};
    pair.lower_stop = lo.stop_reason;
    pair.upper_stop = hi.stop_reason;
    pair.v = CubicHermite(K, V, VP);
    {
        std::vector<double> WPP(K.size());
        // w'' by differencing w' (only used for interpolation smoothness)
        for (std::size_t i = 0; i < K.size(); ++i) {
            if (i == 0) WPP[i] = (WP[1] - WP[0]) / (K[1] - K[0]);
            else if (i + 1 == K.size()) WPP[i] = (WP[i] - WP[i - 1]) / (K[i] - K[i - 1]);
            else WPP[i] = (WP[i + 1] - WP[i - 1]) / (K[i + 1] - K[i - 1]);
        }
        pair.w = CubicHermite(K, W, WP);
        pair.vp = CubicHermite(K, VP, VPP);
        pair.wp = CubicHermite(K, WP, WPP);
    }

    SolveResult out;
    out.policy = detail::assemble_policy(K, VP, VPP, kbar);
    out.pair = std::move(pair);
    return out;
}

// Stability of the closed flow at kbar: f'(kbar) + v''(kbar)/v'(kbar)^2,
// computed from the closed form. When a solved pair is supplied the same
// quantity is recomputed from the grid (central difference of v' across kbar)
// and the two must agree to rel_tol.
inline double stability_test(const OgEconomy& econ, double kbar) {
    return taylor_seed(econ, kbar).stability;
}

inline double stability_test(const OgEconomy& econ, const ValuePair& pair, double kbar,
                             double rel_tol = 1e-3) {
    const double closed = pair.seed.stability;
    const double h = std::max(25.0 * pair.epsilon, 1e-3 * (1.0 + kbar));
    const double vpp_num = (pair.vp.eval(kbar + h) - pair.vp.eval(kbar - h)) / (2.0 * h);
    const double vp = pair.vp.eval(kbar);
    const double numeric = econ.tech().marginal(kbar) + vpp_num / (vp * vp);
    if (std::abs(numeric - closed) > rel_tol * std::abs(closed))
        throw DiagnosticsError("stability_test: closed-form and grid curvature disagree");
    return closed;
}

// ---------------------------------------------------------------------------
// Independent cross-check: the desingularized autonomous system
//
//   dx/ds = D(x, k, v),   dk/ds = f(k) x^2/(1+x),   dv/ds = x^2
//
// with D(x,k,v) = (1+x)[-rho(pi+delta) v + (delta+pi+rho) x]
//                 + (1+x)(pi+rho)[ln f(k) - ln(1+x)] - x f'(k).
//
// Fixed points form the curve {x = 0, v = (pi+rho) ln f(k) / (rho(pi+delta))};
// the branch x = f v' - 1 of an equilibrium is an orbit of this system, so a
// shooting construction on it reproduces sigma = f/(1+x) without touching the
// Taylor-seed route.
// ---------------------------------------------------------------------------

inline double desingularized_drift(const OgEconomy& econ, double x, double k, double v) {
    if (!(x > -1.0)) throw InvalidParameter("desingularized_drift: need x > -1");
    const double d = econ.delta(), r = econ.rho(), p = econ.pi();
    const double f = econ.tech().output(k), fp = econ.tech().marginal(k);
    return (1.0 + x) * (-r * (p + d) * v + (d + p + r) * x) +
           (1.0 + x) * (p + r) * (std::log(f) - std::log1p(x)) - x * fp;
}

struct DesingRates {
    double dx;
    double dk;
    double dv;
};

inline DesingRates desingularized_rhs(const OgEconomy& econ, double x, double k, double v) {
    if (!(k > 0.0)) throw InvalidParameter("desingularized_rhs: need k > 0");
    const double f = econ.tech().output(k);
    return {desingularized_drift(econ, x, k, v), f * x * x / (1.0 + x), x * x};
}

struct DesingOrbit {
    std::vector<double> k, sigma, v, x;
    double kbar_reached = 0.0;  // extrapolated fixed point the orbit approaches
};

struct DesingOptions {
    double seed_offset_frac = 0.01;  // first node offset (1 + kbar units)
    double fit_radius_frac = 0.004;  // seed-cloud radius for the manifold fit
    double x_stop = 2e-4;            // extrapolate the fixed point below this |x|
    double shoot_tol = 1e-9;         // |kbar_reached - kbar| target (scaled)
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int cloud_points = 24;
};

namespace detail {

struct ManifoldFit {
    double alpha = 0.0, beta = 0.0;          // linear center-subspace slopes
    double qkk = 0.0, qkv = 0.0, qvv = 0.0;  // quadratic correction
    double kbar = 0.0, vbar = 0.0;

    double x_of(double k, double v) const {
        const double dk = k - kbar, dv = v - vbar;
        return alpha * dk + beta * dv + 0.5 * (qkk * dk * dk + 2.0 * qkv * dk * dv + qvv * dv * dv);
    }
};

// Least-squares quadratic fit of the slow manifold x = m(k, v): relax a seed
// cloud onto the manifold by integrating backward (the transverse direction
// decays backward when f'(kbar) < delta) and regress the residual
// x - alpha dk - beta dv on the quadratic monomials.
inline ManifoldFit fit_slow_manifold(const OgEconomy& econ, double kbar, const DesingOptions& opt) {
    const double d = econ.delta(), r = econ.rho(), p = econ.pi();
    const Technology& tech = econ.tech();
    const double f = tech.output(kbar), fp = tech.marginal(kbar);
    const double lam = d - fp;
    if (!(lam > 0.0))
        throw InadmissibleSteadyState("fit_slow_manifold: needs f'(kbar) < delta");

    ManifoldFit m;
    m.kbar = kbar;
    m.vbar = (r + p) / (r * (d + p)) * std::log(f);
    m.alpha = -(p + r) * fp / (f * lam);
    m.beta = r * (p + d) / lam;

    auto rhs = [&](double, const State<3>& y, State<3>& dy) {
        const auto rates = desingularized_rhs(econ, y[0], y[1], y[2]);
        dy = {rates.dx, rates.dk, rates.dv};
    };
    OdeOptions oopt;
    oopt.abs_tol = opt.abs_tol;
    oopt.rel_tol = opt.rel_tol;

    const double rad_k = opt.fit_radius_frac * (1.0 + kbar);
    const double rad_v = rad_k / f;  // match the scale of dv along solutions
    const double relax = 3.0 / lam;

    // Relax each cloud point onto the manifold by backward integration (the
    // transverse rate decays backward), then regress the residual over the
    // relaxed sample on the quadratic monomials via normal equations.
    double ata[3][3] = {{0}}, atb[3] = {0};
    auto accumulate = [&](double xs, double ks, double vs) {
        const double ddk = ks - kbar, ddv = vs - m.vbar;
        const double resid = xs - (m.alpha * ddk + m.beta * ddv);
        const double phi[3] = {0.5 * ddk * ddk, ddk * ddv, 0.5 * ddv * ddv};
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) ata[a][b] += phi[a] * phi[b];
            atb[a] += phi[a] * resid;
        }
    };
    for (int i = 0; i < opt.cloud_points; ++i) {
        const double ang = 2.0 * 3.14159265358979323846 * (i + 0.5) / opt.cloud_points;
        const double dk = rad_k * std::cos(ang), dv = rad_v * std::sin(ang);
        const double x0 = m.alpha * dk + m.beta * dv;
        if (!(x0 > -0.5)) continue;
        const auto half = integrate_ode<3>(rhs, 0.0, State<3>{x0, kbar + dk, m.vbar + dv},
                                           -0.5 * relax, oopt);
        accumulate(half.y_end[0], half.y_end[1], half.y_end[2]);
        const auto full = integrate_ode<3>(rhs, -0.5 * relax, half.y_end, -relax, oopt);
        accumulate(full.y_end[0], full.y_end[1], full.y_end[2]);
    }
    // solve the 3x3 normal equations by Gaussian elimination with pivoting
    double M[3][4];
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) M[a][b] = ata[a][b];
        M[a][3] = atb[a];
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int rr = col + 1; rr < 3; ++rr)
            if (std::abs(M[rr][col]) > std::abs(M[piv][col])) piv = rr;
        for (int b = 0; b < 4; ++b) std::swap(M[col][b], M[piv][b]);
        if (std::abs(M[col][col]) < 1e-30) throw DiagnosticsError("fit_slow_manifold: singular fit");
        for (int rr = 0; rr < 3; ++rr) {
            if (rr == col) continue;
            const double fac = M[rr][col] / M[col][col];
            for (int b = col; b < 4; ++b) M[rr][b] -= fac * M[col][b];
        }
    }
    m.qkk = M[0][3] / M[0][0];
    m.qkv = M[1][3] / M[1][1];
    m.qvv = M[2][3] / M[2][2];
    return m;
}

}  // namespace detail

// Traces the equilibrium orbit for steady state kbar on one side, entirely
// within the desingularized system.
//
// The transverse direction at the fixed point has rate lambda = delta -
// f'(kbar) > 0, so motion toward the fixed point is numerically stable only
// in backward s-time. Both branches are therefore traced outward (backward
// below kbar, forward above, always leaving the fixed point) from a seed
// placed on the fitted slow manifold a small offset away from kbar. The
// seed's v-coordinate uses the second-order along-orbit expansion implied by
// the fit; on the upper branch, where homing is the stable backward
// direction, the seed is additionally refined by shooting so that the orbit's
// extrapolated terminal point is kbar itself, and the same refinement is
// reported for the lower branch via kbar_reached.
inline DesingOrbit desingularized_policy(const OgEconomy& econ, double kbar, bool below,
                                         double k_limit, const DesingOptions& opt = {}) {
    const Technology& tech = econ.tech();
    const double f = tech.output(kbar), fp = tech.marginal(kbar);
    const auto fit = detail::fit_slow_manifold(econ, kbar, opt);
    const double slope = fit.alpha + fit.beta / f;  // dx/dk along the solution at kbar
    if (!(f * slope < 0.0))
        throw InadmissibleSteadyState("desingularized_policy: non-attracting steady state");

    // second-order along-orbit expansion from the fitted manifold:
    //   v'(kbar) = 1/f, x'(kbar) = slope,
    //   v''      = (slope - f'/f)/f,
    //   x''      = qkk + 2 qkv v' + qvv v'^2 + beta v''
    const double vpp = (slope - fp / f) / f;
    const double xpp = fit.qkk + 2.0 * fit.qkv / f + fit.qvv / (f * f) + fit.beta * vpp;

    const double dk0 = (below ? -1.0 : 1.0) * opt.seed_offset_frac * (1.0 + kbar);
    const double k0 = kbar + dk0;

    auto rhs = [&](double, const State<3>& y, State<3>& dy) {
        const auto rates = desingularized_rhs(econ, y[0], y[1], y[2]);
        dy = {rates.dx, rates.dk, rates.dv};
    };
    OdeOptions oopt;
    oopt.abs_tol = opt.abs_tol;
    oopt.rel_tol = opt.rel_tol;
    oopt.max_steps = 5'000'000;

    auto seed_state = [&](double dv) {
        const double v0 = fit.vbar + dv;
        return State<3>{slope * dk0 + 0.5 * xpp * dk0 * dk0, k0, v0};
    };
    double dv = dk0 / f + 0.5 * vpp * dk0 * dk0;

    double miss = 0.0;
    if (!below) {
        // backward homing is stable here: shoot on dv so the orbit's
        // extrapolated limit point equals kbar
        auto terminal = [&](double dvq) {
            auto stop = [&](double, const State<3>& y) { return std::abs(y[0]) < opt.x_stop; };
            const auto sol = integrate_ode<3>(rhs, 0.0, seed_state(dvq), -1e12, oopt, stop);
            if (!sol.stopped_by_callback)
                throw DiagnosticsError("desingularized_policy: orbit failed to approach fixed curve");
            return sol.y_end[1] - sol.y_end[0] / slope;  // x ~ slope (k - kbar*)
        };
        const double scale = 1.0 + std::abs(kbar);
        double dv0 = dv, dv1 = dv * (1.0 + 1e-3) + 1e-10;
        double g0 = terminal(dv0) - kbar;
        double g1 = terminal(dv1) - kbar;
        int it = 0;
        while (std::abs(g1) > opt.shoot_tol * scale && it++ < 50 && g1 != g0) {
            const double dv2 = dv1 - g1 * (dv1 - dv0) / (g1 - g0);
            dv0 = dv1;
            g0 = g1;
            dv1 = dv2;
            g1 = terminal(dv1) - kbar;
        }
        if (std::abs(g1) > 1e3 * opt.shoot_tol * scale)
            throw DiagnosticsError("desingularized_policy: shooting failed to hit kbar");
        dv = dv1;
        miss = g1;
    }

    DesingOrbit orbit;
    orbit.kbar_reached = kbar + miss;
    auto record = [&](const State<3>& y) {
        orbit.x.push_back(y[0]);
        orbit.k.push_back(y[1]);
        orbit.v.push_back(y[2]);
        orbit.sigma.push_back(tech.output(y[1]) / (1.0 + y[0]));
    };
    const auto y0 = seed_state(dv);
    record(y0);
    auto stop_out = [&](double, const State<3>& y) {
        record(y);
        if (below) return y[1] <= k_limit || y[0] > 20.0;
        return y[1] >= k_limit || y[0] < -0.9;
    };
    // leave the fixed point: backward in s below kbar, forward above
    integrate_ode<3>(rhs, 0.0, y0, below ? -1e12 : 1e12, oopt, stop_out);
    if (below) {
        std::reverse(orbit.x.begin(), orbit.x.end());
        std::reverse(orbit.k.begin(), orbit.k.end());
        std::reverse(orbit.v.begin(), orbit.v.end());
        std::reverse(orbit.sigma.begin(), orbit.sigma.end());
    }
    return orbit;
}

}  // namespace ramseq
