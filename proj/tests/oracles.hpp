#pragma once

// Independent reference implementations used by the tests. None of these
// call into the library routine they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

/// Equal-mass binner written from the bin-boundary formula
/// start(k) = k * floor(n/m) + min(k, n mod m), over rows sorted by (r, index).
inline double binned_error(const std::vector<double>& r, const std::vector<double>& y, const std::vector<double>& g, double q,
                           std::size_t max_bins, std::size_t min_per_bin, std::size_t forced_bins = 0) {
    std::vector<std::pair<double, std::size_t>> sel;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (g.empty() || g[i] >= 0.5) sel.emplace_back(r[i], i);
    }
    std::sort(sel.begin(), sel.end());
    const std::size_t n = sel.size();
    const std::size_t m = forced_bins ? forced_bins : std::min(max_bins, n / min_per_bin);
    const std::size_t base = n / m, extra = n % m;
    auto start = [&](std::size_t k) { return k * base + std::min(k, extra); };
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        double sy = 0.0, sr = 0.0;
        for (std::size_t t = start(k); t < start(k + 1); ++t) {
            sy += y[sel[t].second];
            sr += r[sel[t].second];
        }
        const double c = static_cast<double>(start(k + 1) - start(k));
        const double diff = std::abs(sy / c - sr / c);
        acc = std::isinf(q) ? std::max(acc, diff) : acc + std::pow(diff, q);
    }
    return std::isinf(q) ? acc : std::pow(acc / static_cast<double>(m), 1.0 / q);
}

inline double laplace(double a, double b, double sigma) { return std::exp(-std::abs(a - b) / sigma); }

/// Regularized loss by explicit pairwise sum.
inline double loss(const std::vector<double>& r, const std::vector<double>& y, const std::vector<double>& g, double q,
                   double lambda1, double lambda2, double sigma) {
    const std::size_t n = r.size();
    double a = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double c = std::pow(std::abs(y[i] - r[i]), q) * std::pow(std::abs(y[j] - r[j]), q) * laplace(r[i], r[j], sigma);
            a += c * g[i] * g[j];
        }
    }
    a *= lambda1 / (static_cast<double>(n) * static_cast<double>(n));
    double logs = 0.0;
    for (double v : g) logs += std::log(v);
    return std::pow(a, 1.0 / q) - lambda2 / static_cast<double>(n) * logs;
}

/// Central difference of f at x along coordinate i.
inline double central_diff(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x, std::size_t i,
                           double h) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Exact toy S-BCE_q for the selection {X2 = 1} or no selection, by numerical
/// integration of |P(Y=1 | r) - r|^q over r ~ Unif(0,1).
inline double toy_bce(double mix, double delta, double q, bool only_calibrated_stratum, std::size_t grid = 200000) {
    double acc = 0.0;
    for (std::size_t k = 0; k < grid; ++k) {
        const double r = (static_cast<double>(k) + 0.5) / static_cast<double>(grid);
        const double cond = only_calibrated_stratum ? r : mix * r + (1.0 - mix) * std::min(r + delta, 1.0);
        acc += std::pow(std::abs(cond - r), q);
    }
    return std::pow(acc / static_cast<double>(grid), 1.0 / q);
}

}  // namespace oracle
