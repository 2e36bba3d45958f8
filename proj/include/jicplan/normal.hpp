#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "plan.hpp"

namespace jicplan {

namespace normal_detail {

inline constexpr double inv_sqrt2 = 0.70710678118654752440;

// Upper tail Q(z) = P(Z > z), accurate far into either tail.
inline double upper_tail(double z) { return 0.5 * std::erfc(z * inv_sqrt2); }

// P(a <= Z < b) for a standard normal, computed on whichever side keeps
// the difference well conditioned.
inline double interval(double a, double b) {
    if (!(a < b)) return 0.0;
    if (a >= 0.0) return upper_tail(a) - upper_tail(b);
    if (b <= 0.0) return upper_tail(-b) - upper_tail(-a);
    return 1.0 - upper_tail(b) - upper_tail(-a);
}

}  // namespace normal_detail

/// Normal distribution N(mean, stddev) truncated to [0, inf). Durations and
/// energy consumptions are drawn from it; a zero stddev collapses it to a
/// point mass at the mean.
class TruncatedNormal {
public:
    explicit TruncatedNormal(const UncertainQuantity& q) : mean_(q.mean), stddev_(q.stddev) {
        if (stddev_ > 0.0) mass_ = normal_detail::upper_tail(-mean_ / stddev_);
    }

    double mean() const { return mean_; }
    double stddev() const { return stddev_; }
    bool degenerate() const { return stddev_ == 0.0; }

    /// P(lo <= X < hi). For the degenerate case this is 1 iff lo <= mean < hi.
    double probability(double lo, double hi) const {
        if (!(lo < hi)) return 0.0;
        if (degenerate()) return (lo <= mean_ && mean_ < hi) ? 1.0 : 0.0;
        lo = std::max(lo, 0.0);
        if (!(lo < hi)) return 0.0;
        const double za = (lo - mean_) / stddev_;
        const double zb = std::isinf(hi) ? std::numeric_limits<double>::infinity() : (hi - mean_) / stddev_;
        return normal_detail::interval(za, zb) / mass_;
    }

    /// P(X <= x).
    double cdf(double x) const {
        if (degenerate()) return mean_ <= x ? 1.0 : 0.0;
        if (x < 0.0) return 0.0;
        return normal_detail::interval(-mean_ / stddev_, (x - mean_) / stddev_) / mass_;
    }

    /// E[X], from the closed form of the normal truncated below at 0.
    double truncated_mean() const {
        if (degenerate()) return mean_;
        const double alpha = -mean_ / stddev_;
        const double pdf = std::exp(-0.5 * alpha * alpha) / std::sqrt(2.0 * std::numbers::pi);
        return mean_ + stddev_ * pdf / mass_;
    }

    /// Rejection sampling: negative draws are discarded and redrawn.
    template <class URBG>
    double operator()(URBG& rng) const {
        if (degenerate()) return mean_;
        std::normal_distribution<double> gauss(mean_, stddev_);
        for (;;) {
            const double x = gauss(rng);
            if (x >= 0.0) return x;
        }
    }

private:
    double mean_;
    double stddev_;
    double mass_ = 1.0;  // P(untruncated draw >= 0)
};

}  // namespace jicplan
