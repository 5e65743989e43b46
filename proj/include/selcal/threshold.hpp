#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "selcal/error.hpp"

namespace selcal {

/// Largest tau such that at least a xi-fraction of `scores` is >= tau,
/// i.e. the ceil(xi * |S|)-th largest score.
inline double threshold_rule(double xi, std::span<const double> scores) {
    if (!(xi > 0.0 && xi <= 1.0)) detail::fail<ParameterError>("selector", "target coverage must lie in (0,1]");
    if (scores.empty()) detail::fail<ParameterError>("selector", "threshold needs at least one score");
    const std::size_t n = scores.size();
    auto k = static_cast<std::size_t>(std::ceil(xi * static_cast<double>(n) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n);
    std::vector<double> s(scores.begin(), scores.end());
    std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k - 1), s.end(), std::greater<>());
    return s[k - 1];
}

/// Fraction of scores >= tau.
inline double coverage_at(double tau, std::span<const double> scores) {
    if (scores.empty()) return 0.0;
    const auto kept = std::count_if(scores.begin(), scores.end(), [tau](double s) { return s >= tau; });
    return static_cast<double>(kept) / static_cast<double>(scores.size());
}

}  // namespace selcal
