#pragma once

// Markov consumption policies c = sigma(k). A policy is either analytic
// (closed form, e.g. the linear-technology oracles) or a C^1 grid interpolant
// produced by the solver.

#include <functional>
#include <memory>
#include <optional>
#include <utility>

#include "ramseq/errors.hpp"
#include "ramseq/interp.hpp"
#include "ramseq/numerics.hpp"

namespace ramseq {

class Policy {
  public:
    Policy() = default;

    static Policy analytic(std::function<double(double)> sigma,
                           std::function<double(double)> dsigma, Interval domain,
                           std::optional<double> steady_state = std::nullopt) {
        Policy p;
        p.sigma_ = std::move(sigma);
        p.dsigma_ = std::move(dsigma);
        p.domain_ = domain;
        p.steady_state_ = steady_state;
        return p;
    }

    // Grid policy with exact knot derivatives.
    static Policy from_grid(std::vector<double> k, std::vector<double> sigma,
                            std::vector<double> dsigma, std::optional<double> steady_state) {
        auto interp = std::make_shared<CubicHermite>(std::move(k), std::move(sigma),
                                                     std::move(dsigma));
        Policy p;
        p.domain_ = interp->domain();
        p.steady_state_ = steady_state;
        p.sigma_ = [interp](double x) { return interp->eval(x); };
        p.dsigma_ = [interp](double x) { return interp->derivative(x); };
        p.grid_ = interp;
        return p;
    }

    double operator()(double k) const { return sigma_(k); }
    double consumption(double k) const { return sigma_(k); }
    double slope(double k) const { return dsigma_(k); }
    const Interval& domain() const { return domain_; }
    std::optional<double> steady_state() const { return steady_state_; }
    const CubicHermite* grid() const { return grid_.get(); }
    bool valid() const { return static_cast<bool>(sigma_); }

  private:
    std::function<double(double)> sigma_, dsigma_;
    Interval domain_{};
    std::optional<double> steady_state_;
    std::shared_ptr<const CubicHermite> grid_;
};

// Candidate value function paired with a policy when evaluating the
// equilibrium functional equations. slope() must generate the policy through
// the instantaneous optimality condition (sigma = 1/v' under log utility).
struct ValueCandidate {
    std::function<double(double)> value;
    std::function<double(double)> slope;

    double operator()(double k) const { return value(k); }
};

}  // namespace ramseq
