#pragma once

// Economic primitives: discount kernels with closed-form tail integrals,
// log utility, production technologies, and the overlapping-generations
// parameter bundle. Everything here is immutable after construction and all
// closed forms are exact (no quadrature).
//
// Rates are per year; time is in years.

#include <cmath>
#include <optional>
#include <string>

#include "ramseq/errors.hpp"

namespace ramseq {

enum class KernelKind { Exponential, PiecewiseExponential, OgMixture };

// Discount function h(t) with h(0)=1 and finite ∫₀^∞ h.
//
// Variants:
//   Exponential:          h(t) = e^{-d0 t}
//   PiecewiseExponential: h(t) = e^{-d0 t} for t <= tau, e^{-d1 t} for t > tau
//                         (as displayed; discontinuous at tau when d0 != d1,
//                         only integrals of h enter downstream computations)
//   OgMixture:            h(t) = th e^{-(delta+pi) t} + (1-th) e^{-rho t},
//                         th = (delta-rho)/(pi+delta-rho)
//
// hprime() is the pointwise derivative away from kink/jump times.
class DiscountKernel {
  public:
    static DiscountKernel exponential(double rate) {
        if (!(rate > 0.0)) throw InvalidParameter("exponential kernel: rate must be > 0");
        DiscountKernel k;
        k.kind_ = KernelKind::Exponential;
        k.w1_ = 1.0;
        k.r1_ = rate;
        k.w2_ = 0.0;
        k.r2_ = rate;
        return k;
    }

    static DiscountKernel piecewise_exponential(double early_rate, double late_rate,
                                                double switch_time) {
        if (!(early_rate >= late_rate) || !(late_rate > 0.0))
            throw InvalidParameter("piecewise kernel: need d0 >= d1 > 0");
        if (!(switch_time > 0.0)) throw InvalidParameter("piecewise kernel: need tau > 0");
        DiscountKernel k;
        k.kind_ = KernelKind::PiecewiseExponential;
        k.r1_ = early_rate;
        k.r2_ = late_rate;
        k.tau_ = switch_time;
        return k;
    }

    static DiscountKernel og_mixture(double private_rate, double social_rate, double death_rate) {
        if (!(private_rate >= social_rate) || !(social_rate > 0.0))
            throw InvalidParameter("og kernel: need delta >= rho > 0");
        if (!(death_rate > 0.0)) throw InvalidParameter("og kernel: need pi > 0");
        DiscountKernel k;
        k.kind_ = KernelKind::OgMixture;
        k.delta_ = private_rate;
        k.rho_ = social_rate;
        k.pi_ = death_rate;
        const double th = (private_rate - social_rate) / (death_rate + private_rate - social_rate);
        k.w1_ = th;
        k.r1_ = private_rate + death_rate;
        k.w2_ = 1.0 - th;
        k.r2_ = social_rate;
        return k;
    }

    KernelKind kind() const { return kind_; }
    bool smooth() const { return kind_ != KernelKind::PiecewiseExponential; }

    double mixture_weight() const { return w1_; }  // theta for OgMixture
    double early_rate() const { return r1_; }
    double late_rate() const { return r2_; }
    double switch_time() const { return tau_; }
    double private_rate() const { return delta_; }
    double social_rate() const { return rho_; }
    double death_rate() const { return pi_; }

    double h(double t) const {
        check_time(t);
        if (kind_ == KernelKind::PiecewiseExponential)
            return (t <= tau_) ? std::exp(-r1_ * t) : std::exp(-r2_ * t);
        return w1_ * std::exp(-r1_ * t) + w2_ * std::exp(-r2_ * t);
    }
    double operator()(double t) const { return h(t); }

    double hprime(double t) const {
        check_time(t);
        if (kind_ == KernelKind::PiecewiseExponential)
            return (t <= tau_) ? -r1_ * std::exp(-r1_ * t) : -r2_ * std::exp(-r2_ * t);
        return -w1_ * r1_ * std::exp(-r1_ * t) - w2_ * r2_ * std::exp(-r2_ * t);
    }

    // ∫_T^∞ h(s) ds
    double tail(double T) const {
        check_time(T);
        if (kind_ == KernelKind::PiecewiseExponential) {
            if (T >= tau_) return std::exp(-r2_ * T) / r2_;
            return (std::exp(-r1_ * T) - std::exp(-r1_ * tau_)) / r1_ + std::exp(-r2_ * tau_) / r2_;
        }
        return w1_ * std::exp(-r1_ * T) / r1_ + w2_ * std::exp(-r2_ * T) / r2_;
    }

    // ∫_T^∞ (s - T) h(s) ds
    double tail_moment(double T) const {
        check_time(T);
        auto exp_mom = [](double r, double a, double T0) {
            // ∫_a^∞ (s - T0) e^{-r s} ds
            return std::exp(-r * a) * ((a - T0) / r + 1.0 / (r * r));
        };
        if (kind_ == KernelKind::PiecewiseExponential) {
            if (T >= tau_) return std::exp(-r2_ * T) / (r2_ * r2_);
            return exp_mom(r1_, T, T) - exp_mom(r1_, tau_, T) + exp_mom(r2_, tau_, T);
        }
        return w1_ * std::exp(-r1_ * T) / (r1_ * r1_) + w2_ * std::exp(-r2_ * T) / (r2_ * r2_);
    }

    // ∫_T^∞ h'(s) ds and ∫_T^∞ (s - T) h'(s) ds, with h' taken pointwise
    // (piecewise branch rates applied to the matching exponential).
    double dtail(double T) const {
        check_time(T);
        if (kind_ == KernelKind::PiecewiseExponential) {
            if (T >= tau_) return -std::exp(-r2_ * T);
            return std::exp(-r1_ * tau_) - std::exp(-r1_ * T) - std::exp(-r2_ * tau_);
        }
        return -w1_ * std::exp(-r1_ * T) - w2_ * std::exp(-r2_ * T);
    }

    double dtail_moment(double T) const {
        check_time(T);
        auto exp_mom = [](double r, double a, double T0) {
            return std::exp(-r * a) * ((a - T0) / r + 1.0 / (r * r));
        };
        if (kind_ == KernelKind::PiecewiseExponential) {
            if (T >= tau_) return -r2_ * std::exp(-r2_ * T) / (r2_ * r2_);
            return -r1_ * (exp_mom(r1_, T, T) - exp_mom(r1_, tau_, T)) - r2_ * exp_mom(r2_, tau_, T);
        }
        return -w1_ * std::exp(-r1_ * T) / r1_ - w2_ * std::exp(-r2_ * T) / r2_;
    }

    // ∫_T^∞ h(s) e^{g (s-T)} ds; requires g below both tail rates.
    double tail_shifted(double T, double g) const {
        check_time(T);
        if (kind_ == KernelKind::PiecewiseExponential) {
            if (!(g < r2_)) throw DegenerateValue("tail_shifted: growth exceeds kernel rate");
            if (T >= tau_) return std::exp(-r2_ * T) / (r2_ - g);
            return (std::exp(-r1_ * T) - std::exp(-r1_ * tau_ + g * (tau_ - T))) / (r1_ - g) +
                   std::exp(-r2_ * tau_ + g * (tau_ - T)) / (r2_ - g);
        }
        if (!(g < r1_) || !(g < r2_)) throw DegenerateValue("tail_shifted: growth exceeds kernel rate");
        return w1_ * std::exp(-r1_ * T) / (r1_ - g) + w2_ * std::exp(-r2_ * T) / (r2_ - g);
    }

    double horizon() const { return tail(0.0); }  // ∫₀^∞ h

  private:
    static void check_time(double t) {
        if (!(t >= 0.0)) throw InvalidParameter("discount kernel: negative time");
    }

    KernelKind kind_ = KernelKind::Exponential;
    double w1_ = 1.0, r1_ = 1.0, w2_ = 0.0, r2_ = 1.0;
    double tau_ = 0.0;
    double delta_ = 0.0, rho_ = 0.0, pi_ = 0.0;
};

inline double discount_eval(const DiscountKernel& k, double t) { return k.h(t); }
inline double discount_tail_integral(const DiscountKernel& k, double T) { return k.tail(T); }

// Log utility: u(c) = ln c, u'(c) = 1/c, inverse marginal i(y) = 1/y.
struct LogUtility {
    static double u(double c) {
        if (!(c > 0.0)) throw InvalidParameter("log utility: consumption must be > 0");
        return std::log(c);
    }
    static double marginal(double c) {
        if (!(c > 0.0)) throw InvalidParameter("log utility: consumption must be > 0");
        return 1.0 / c;
    }
    static double inverse_marginal(double y) {
        if (!(y > 0.0)) throw InvalidParameter("log utility: marginal must be > 0");
        return 1.0 / y;
    }
};

enum class TechKind { Linear, CobbDouglas };

// Production f(k): Linear A k or Cobb-Douglas A k^alpha (net of depreciation).
class Technology {
  public:
    static Technology linear(double productivity) {
        if (!(productivity > 0.0)) throw InvalidParameter("linear technology: A must be > 0");
        Technology t;
        t.kind_ = TechKind::Linear;
        t.A_ = productivity;
        return t;
    }

    static Technology cobb_douglas(double level, double exponent) {
        if (!(level > 0.0)) throw InvalidParameter("cobb-douglas: A must be > 0");
        if (!(exponent > 0.0 && exponent < 1.0))
            throw InvalidParameter("cobb-douglas: alpha must lie in (0,1)");
        Technology t;
        t.kind_ = TechKind::CobbDouglas;
        t.A_ = level;
        t.alpha_ = exponent;
        return t;
    }

    TechKind kind() const { return kind_; }
    double level() const { return A_; }
    double exponent() const { return alpha_; }
    bool strictly_concave() const { return kind_ == TechKind::CobbDouglas; }

    double output(double k) const {
        check_capital(k);
        return (kind_ == TechKind::Linear) ? A_ * k : A_ * std::pow(k, alpha_);
    }

    double marginal(double k) const {
        check_capital(k);
        return (kind_ == TechKind::Linear) ? A_ : A_ * alpha_ * std::pow(k, alpha_ - 1.0);
    }

    double second(double k) const {
        check_capital(k);
        return (kind_ == TechKind::Linear) ? 0.0
                                           : A_ * alpha_ * (alpha_ - 1.0) * std::pow(k, alpha_ - 2.0);
    }

    // Solves f'(k) = x in closed form for Cobb-Douglas.
    double capital_at_marginal(double x) const {
        if (!(x > 0.0)) throw InvalidParameter("capital_at_marginal: x must be > 0");
        if (kind_ != TechKind::CobbDouglas)
            throw UnsupportedTechnology("capital_at_marginal: marginal product is constant");
        return std::pow(A_ * alpha_ / x, 1.0 / (1.0 - alpha_));
    }

  private:
    static void check_capital(double k) {
        if (!(k > 0.0)) throw InvalidParameter("technology: capital must be > 0");
    }

    TechKind kind_ = TechKind::Linear;
    double A_ = 1.0;
    double alpha_ = 0.5;
};

struct TechnologyEval {
    double output;
    double marginal;
};

inline TechnologyEval technology_eval(const Technology& t, double k) {
    return {t.output(k), t.marginal(k)};
}

// Parameter bundle for the overlapping-generations economy: private discount
// rate delta, social discount rate rho (delta >= rho), death rate pi, and the
// production technology. The induced social discount kernel is the
// two-exponential mixture.
class OgEconomy {
  public:
    OgEconomy(double private_rate, double social_rate, double death_rate, Technology tech)
        : delta_(private_rate), rho_(social_rate), pi_(death_rate), tech_(tech) {
        if (!(private_rate >= social_rate) || !(social_rate > 0.0))
            throw InvalidParameter("og economy: need delta >= rho > 0");
        if (!(death_rate > 0.0)) throw InvalidParameter("og economy: need pi > 0");
    }

    double delta() const { return delta_; }
    double rho() const { return rho_; }
    double pi() const { return pi_; }
    const Technology& tech() const { return tech_; }

    bool time_consistent() const { return delta_ == rho_; }
    // Side condition used by one of the source stability arguments; recorded,
    // not required (interval nonemptiness needs only rho < delta).
    bool rho_below_pi() const { return rho_ < pi_; }

    double mixture_weight() const { return (delta_ - rho_) / (pi_ + delta_ - rho_); }

    DiscountKernel kernel() const { return DiscountKernel::og_mixture(delta_, rho_, pi_); }

  private:
    double delta_, rho_, pi_;
    Technology tech_;
};

}  // namespace ramseq
