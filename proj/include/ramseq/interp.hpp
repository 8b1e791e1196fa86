#pragma once

// C^1 cubic Hermite interpolation on a sorted knot grid. Knot derivatives are
// supplied by the caller (the solvers know them exactly), so the interpolant
// reproduces both values and slopes at the knots.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ramseq/errors.hpp"
#include "ramseq/numerics.hpp"

namespace ramseq {

class CubicHermite {
  public:
    CubicHermite() = default;

    CubicHermite(std::vector<double> x, std::vector<double> y, std::vector<double> dydx)
        : x_(std::move(x)), y_(std::move(y)), m_(std::move(dydx)) {
        if (x_.size() < 2 || x_.size() != y_.size() || x_.size() != m_.size())
            throw InvalidParameter("CubicHermite: need >=2 knots with matching arrays");
        for (std::size_t i = 1; i < x_.size(); ++i)
            if (!(x_[i] > x_[i - 1])) throw InvalidParameter("CubicHermite: knots not increasing");
    }

    // Builds knot slopes by three-point finite differences (one-sided at the
    // ends). Used when reloading grids from artifacts that only store values.
    static CubicHermite with_estimated_slopes(std::vector<double> x, std::vector<double> y) {
        const std::size_t n = x.size();
        if (n < 3) throw InvalidParameter("CubicHermite: need >=3 knots to estimate slopes");
        std::vector<double> m(n);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double hl = x[i] - x[i - 1], hr = x[i + 1] - x[i];
            // slope of the local parabola
            m[i] = (hr * hr * (y[i] - y[i - 1]) + hl * hl * (y[i + 1] - y[i])) /
                   (hl * hr * (hl + hr));
        }
        const double h0 = x[1] - x[0];
        m[0] = 2.0 * (y[1] - y[0]) / h0 - m[1];
        const double hn = x[n - 1] - x[n - 2];
        m[n - 1] = 2.0 * (y[n - 1] - y[n - 2]) / hn - m[n - 2];
        return CubicHermite(std::move(x), std::move(y), std::move(m));
    }

    bool empty() const { return x_.empty(); }
    double front() const { return x_.front(); }
    double back() const { return x_.back(); }
    Interval domain() const { return {x_.front(), x_.back()}; }
    const std::vector<double>& knots() const { return x_; }
    const std::vector<double>& values() const { return y_; }
    const std::vector<double>& slopes() const { return m_; }

    double operator()(double x) const { return eval(x); }

    double eval(double xq) const {
        const auto [i, t, h] = locate(xq);
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
        return h00 * y_[i] + h * h10 * m_[i] + h01 * y_[i + 1] + h * h11 * m_[i + 1];
    }

    double derivative(double xq) const {
        const auto [i, t, h] = locate(xq);
        const double t2 = t * t;
        const double d00 = (6 * t2 - 6 * t) / h, d10 = 3 * t2 - 4 * t + 1;
        const double d01 = (-6 * t2 + 6 * t) / h, d11 = 3 * t2 - 2 * t;
        return d00 * y_[i] + d10 * m_[i] + d01 * y_[i + 1] + d11 * m_[i + 1];
    }

    double second_derivative(double xq) const {
        const auto [i, t, h] = locate(xq);
        const double d00 = (12 * t - 6) / (h * h), d10 = (6 * t - 4) / h;
        const double d01 = (-12 * t + 6) / (h * h), d11 = (6 * t - 2) / h;
        return d00 * y_[i] + d10 * m_[i] + d01 * y_[i + 1] + d11 * m_[i + 1];
    }

    // Knot values strictly monotone in the given direction?
    bool values_strictly_monotone(bool increasing) const {
        for (std::size_t i = 1; i < y_.size(); ++i) {
            if (increasing && !(y_[i] > y_[i - 1])) return false;
            if (!increasing && !(y_[i] < y_[i - 1])) return false;
        }
        return true;
    }

  private:
    struct Loc {
        std::size_t i;
        double t;
        double h;
    };

    Loc locate(double xq) const {
        const double slack = 1e-9 * (1.0 + std::abs(x_.back() - x_.front()));
        if (xq < x_.front() - slack || xq > x_.back() + slack)
            throw DomainEdge("CubicHermite: query outside knot range");
        xq = std::clamp(xq, x_.front(), x_.back());
        auto it = std::upper_bound(x_.begin(), x_.end(), xq);
        std::size_t i = static_cast<std::size_t>(it - x_.begin());
        i = (i == 0) ? 0 : std::min(i - 1, x_.size() - 2);
        const double h = x_[i + 1] - x_[i];
        return {i, (xq - x_[i]) / h, h};
    }

    std::vector<double> x_, y_, m_;
};

}  // namespace ramseq
