#pragma once

// Regularized selective-MMCE training loss over soft selector scores and its
// exact gradient with respect to those scores.

#include <algorithm>
#include <cmath>
#include <vector>

#include "selcal/error.hpp"
#include "selcal/kernelstats.hpp"

namespace selcal {

struct LossConfig {
    double q = 2.0;
    double lambda1 = 1024.0;
    double lambda2 = 1e-3;
    KernelSpec kernel{};

    void validate() const {
        if (!(q >= 1.0)) detail::fail<ParameterError>("smmce_loss", "q must be >= 1");
        if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) detail::fail<ParameterError>("smmce_loss", "lambdas must be >= 0");
        kernel.validate();
    }
};

struct LossEval {
    double value = 0.0;
    /// A = (lambda1 / n^2) sum_ij c_ij g_i g_j, before the 1/q power.
    double kernel_term = 0.0;
    std::vector<double> grad;
};

/// Floor applied to A inside A^(1/q - 1).
inline constexpr double kLossPowerFloor = 1e-12;

/// L = A^(1/q) - (lambda2 / n) sum_i log g_i with
/// c_ij = |y_i - r_i|^q |y_j - r_j|^q k(r_i, r_j).
inline LossEval loss_value_and_grad(const ScoredBatch& batch, const LossConfig& cfg, bool with_grad = true) {
    cfg.validate();
    const std::size_t n = batch.size();
    if (n < 2) detail::fail<ParameterError>("smmce_loss", "loss needs at least 2 examples");
    if (batch.y.size() != n || batch.g.size() != n) detail::fail<ParameterError>("smmce_loss", "batch vectors differ in length");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(batch.r[i]) || !std::isfinite(batch.y[i]) || !std::isfinite(batch.g[i])) {
            detail::fail<NumericError>("smmce_loss", "non-finite input at index " + std::to_string(i));
        }
        if (!(batch.g[i] > 0.0)) detail::fail<NumericError>("smmce_loss", "soft scores must be strictly positive");
    }
    std::vector<double> e(n), eg(n), t(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        e[i] = detail::residual_power(batch.y[i], batch.r[i], cfg.q);
        eg[i] = e[i] * batch.g[i];
    }
    // t_i = sum_j e_j g_j k(r_i, r_j), row-major over the upper triangle.
    const double inv_sigma = 1.0 / cfg.kernel.sigma;
    for (std::size_t i = 0; i < n; ++i) {
        t[i] += eg[i];
        double acc = 0.0;
        const double egi = eg[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            const double k = std::exp(-std::abs(batch.r[i] - batch.r[j]) * inv_sigma);
            acc += eg[j] * k;
            t[j] += egi * k;
        }
        t[i] += acc;
    }
    const double nn = static_cast<double>(n);
    const double c1 = cfg.lambda1 / (nn * nn);
    double pair = 0.0, logs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        pair += eg[i] * t[i];
        logs += std::log(batch.g[i]);
    }
    LossEval out;
    out.kernel_term = c1 * pair;
    out.value = std::pow(std::max(out.kernel_term, 0.0), 1.0 / cfg.q) - cfg.lambda2 / nn * logs;
    if (!std::isfinite(out.value)) detail::fail<NumericError>("smmce_loss", "loss is not finite");
    if (with_grad) {
        out.grad.resize(n);
        // At A = 0 every s_i is 0 too, so only the barrier term survives.
        const double outer = (1.0 / cfg.q) * std::pow(std::max(out.kernel_term, kLossPowerFloor), 1.0 / cfg.q - 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double d_a = c1 * 2.0 * e[i] * t[i];
            out.grad[i] = outer * d_a - cfg.lambda2 / (nn * batch.g[i]);
        }
    }
    return out;
}

inline double loss_value(const ScoredBatch& batch, const LossConfig& cfg) {
    return loss_value_and_grad(batch, cfg, false).value;
}

inline std::vector<double> loss_grad_scores(const ScoredBatch& batch, const LossConfig& cfg) {
    return loss_value_and_grad(batch, cfg, true).grad;
}

}  // namespace selcal
