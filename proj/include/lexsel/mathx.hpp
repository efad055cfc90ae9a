#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "lexsel/common.hpp"

namespace lexsel {

inline double sigmoid(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow on either tail.
inline double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

inline double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

inline double softplus_inverse(double y) {
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

// P(lo < X <= hi) for logistic X: sigmoid(hi) - sigmoid(lo), computed as a
// product of positive factors so nearby large cutpoints do not cancel.
inline double logistic_interval(double lo, double hi) {
    if (lo >= hi) return 0.0;
    if (std::isinf(lo) && lo < 0) return sigmoid(hi);
    if (std::isinf(hi) && hi > 0) return sigmoid(-lo);
    return sigmoid(hi) * sigmoid(-lo) * (-std::expm1(lo - hi));
}

inline double log_logistic_interval(double lo, double hi) {
    if (std::isinf(lo) && lo < 0) return log_sigmoid(hi);
    if (std::isinf(hi) && hi > 0) return log_sigmoid(-lo);
    return log_sigmoid(hi) + log_sigmoid(-lo) + std::log(-std::expm1(lo - hi));
}

// Digamma via recurrence into the asymptotic series (|error| < 1e-12 for x>6).
inline double digamma(double x) {
    if (!(x > 0.0)) throw numeric_error("digamma: argument must be positive");
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    double inv = 1.0 / x;
    double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv
              - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
    return result;
}

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double mean(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? std::numeric_limits<double>::quiet_NaN() : s / double(xs.size());
}

inline double median_of(std::vector<double> xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(xs.begin(), xs.end());
    size_t n = xs.size();
    if (n % 2 == 1) return xs[n / 2];
    return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Linear-interpolation quantile of a sorted sample (R type 7).
inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (sorted.size() == 1) return sorted[0];
    double h = q * double(sorted.size() - 1);
    size_t lo = size_t(std::floor(h));
    size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = h - double(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

struct Correlation {
    bool defined = false;
    double value = std::numeric_limits<double>::quiet_NaN();
    std::string reason;  // set when undefined
};

inline Correlation pearson(std::span<const double> x, std::span<const double> y) {
    Correlation out;
    if (x.size() != y.size()) throw analysis_error("pearson: length mismatch");
    if (x.size() < 2) {
        out.reason = "fewer than two observations";
        return out;
    }
    double mx = mean(x), my = mean(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        out.reason = "zero variance";
        return out;
    }
    out.defined = true;
    out.value = sxy / std::sqrt(sxx * syy);
    return out;
}

}  // namespace lexsel
