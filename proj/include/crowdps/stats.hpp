#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "crowdps/error.hpp"

namespace crowdps {

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw NumericError("mean of empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Unbiased (n-1) sample variance.
inline double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) throw NumericError("sample variance needs >= 2 values");
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double sample_sd(const std::vector<double>& v) { return std::sqrt(sample_variance(v)); }

/// Linear-interpolation quantile (R type 7). p in [0, 1].
inline double quantile_type7(std::vector<double> v, double p) {
    if (v.empty()) throw NumericError("quantile of empty vector");
    std::sort(v.begin(), v.end());
    const double h = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

} // namespace crowdps
