#pragma once

// Laplace-kernel calibration statistics: MMCE, the selective S-MMCE upper
// bound estimator, and the plug-in S-MMCE for analytic conditionals.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "selcal/error.hpp"

namespace selcal {

struct KernelSpec {
    double sigma = 0.2;

    void validate() const {
        if (!(sigma > 0.0)) detail::fail<ParameterError>("kernelstats", "kernel sigma must be positive");
    }
    double operator()(double a, double b) const { return std::exp(-std::abs(a - b) / sigma); }
};

/// Per-example top-label confidence r, target y and selector weight g.
/// An empty g means "select everything".
struct ScoredBatch {
    std::vector<double> r;
    std::vector<double> y;
    std::vector<double> g;

    std::size_t size() const { return r.size(); }
    double weight(std::size_t i) const { return g.empty() ? 1.0 : g[i]; }
    bool selected(std::size_t i) const { return g.empty() || g[i] >= 0.5; }

    void validate(const char* module) const {
        if (y.size() != r.size() || (!g.empty() && g.size() != r.size())) {
            detail::fail<ParameterError>(module, "batch vectors differ in length");
        }
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (!(r[i] >= 0.0 && r[i] <= 1.0) || !(y[i] >= 0.0 && y[i] <= 1.0) ||
                !(weight(i) >= 0.0 && weight(i) <= 1.0)) {
                detail::fail<ParameterError>(module, "batch entries must lie in [0,1]");
            }
        }
    }

    /// Copy restricted to the rows with selected(i), with g dropped.
    ScoredBatch selection() const {
        ScoredBatch out;
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (!selected(i)) continue;
            out.r.push_back(r[i]);
            out.y.push_back(y[i]);
        }
        return out;
    }
};

inline double kernel_eval(const KernelSpec& spec, double r1, double r2) { return spec(r1, r2); }

namespace detail {

/// sum_ij w_i w_j k(r_i, r_j), accumulated row-major over the upper triangle.
inline double weighted_pair_sum(const std::vector<double>& r, const std::vector<double>& w, const KernelSpec& k) {
    const std::size_t n = r.size();
    double diag = 0.0, off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double wi = w[i];
        if (wi == 0.0) continue;
        diag += wi * wi;
        double row = 0.0;
        const double inv = 1.0 / k.sigma;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (w[j] == 0.0) continue;
            row += w[j] * std::exp(-std::abs(r[i] - r[j]) * inv);
        }
        off += wi * row;
    }
    return diag + 2.0 * off;
}

inline double residual_power(double y, double r, double q) {
    const double d = std::abs(y - r);
    return q == 2.0 ? d * d : std::pow(d, q);
}

}  // namespace detail

/// (1/n^2) sum_ij (y_i - r_i)(y_j - r_j) k(r_i, r_j); g is ignored.
inline double empirical_mmce_sq(const ScoredBatch& batch, const KernelSpec& spec) {
    spec.validate();
    batch.validate("kernelstats");
    const std::size_t n = batch.size();
    if (n < 2) detail::fail<ParameterError>("kernelstats", "MMCE needs at least 2 examples");
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = batch.y[i] - batch.r[i];
    return detail::weighted_pair_sum(batch.r, w, spec) / (static_cast<double>(n) * static_cast<double>(n));
}

/// Kernel-trick estimate of the selective MMCE upper bound:
/// ( sum_ij e_i e_j g_i g_j k(r_i,r_j) / sum_ij g_i g_j )^(1/q), e_i = |y_i - r_i|^q.
inline double empirical_smmce_u(const ScoredBatch& batch, double q, const KernelSpec& spec) {
    spec.validate();
    batch.validate("kernelstats");
    if (!(q >= 1.0)) detail::fail<ParameterError>("kernelstats", "q must be >= 1");
    const std::size_t n = batch.size();
    std::vector<double> w(n);
    double gsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = batch.weight(i);
        gsum += g;
        w[i] = detail::residual_power(batch.y[i], batch.r[i], q) * g;
    }
    if (!(gsum > 0.0)) detail::fail<DegenerateSelectionError>("kernelstats", "selector weights are all zero");
    const double num = detail::weighted_pair_sum(batch.r, w, spec);
    return std::pow(std::max(num, 0.0) / (gsum * gsum), 1.0 / q);
}

/// Reference implementation of empirical_smmce_u: an explicit double loop
/// over all ordered pairs with no factorization.
inline double naive_smmce_u(const ScoredBatch& batch, double q, const KernelSpec& spec) {
    spec.validate();
    batch.validate("kernelstats");
    if (!(q >= 1.0)) detail::fail<ParameterError>("kernelstats", "q must be >= 1");
    const std::size_t n = batch.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double gi = batch.weight(i), gj = batch.weight(j);
            num += std::pow(std::abs(batch.y[i] - batch.r[i]), q) * std::pow(std::abs(batch.y[j] - batch.r[j]), q) * gi *
                   gj * std::exp(-std::abs(batch.r[i] - batch.r[j]) / spec.sigma);
            den += gi * gj;
        }
    }
    if (!(den > 0.0)) detail::fail<DegenerateSelectionError>("kernelstats", "selector weights are all zero");
    return std::pow(num / den, 1.0 / q);
}

/// Plug-in S-MMCE with a known conditional E[Y | V = r] over the hard selection.
inline double plug_in_smmce(const ScoredBatch& batch, const std::function<double(double)>& cond, double q,
                            const KernelSpec& spec) {
    spec.validate();
    batch.validate("kernelstats");
    if (!(q >= 1.0)) detail::fail<ParameterError>("kernelstats", "q must be >= 1");
    std::vector<double> r, w;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!batch.selected(i)) continue;
        r.push_back(batch.r[i]);
        w.push_back(detail::residual_power(cond(batch.r[i]), batch.r[i], q));
    }
    if (r.empty()) detail::fail<DegenerateSelectionError>("kernelstats", "no selected examples");
    const double count = static_cast<double>(r.size());
    return std::pow(std::max(detail::weighted_pair_sum(r, w, spec), 0.0) / (count * count), 1.0 / q);
}

}  // namespace selcal
