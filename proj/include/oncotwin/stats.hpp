/**
 * @file stats.hpp
 * @brief Order statistics shared by ingestion, analytics and evaluation.
 */
#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "oncotwin/error.hpp"

namespace oncotwin {

/// Midpoint of the two central values for even counts. Throws DomainError
/// on an empty input.
inline double median(std::span<const double> xs) {
    if (xs.empty()) throw DomainError("median of empty sequence");
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw DomainError("mean of empty sequence");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

struct Range {
    double low = 0;
    double high = 0;
    bool operator==(const Range&) const = default;
};

inline Range range_of(std::span<const double> xs) {
    if (xs.empty()) throw DomainError("range of empty sequence");
    auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    return {*lo, *hi};
}

}  // namespace oncotwin
