#pragma once

// Equal-mass binned calibration error, Brier score, selective risk and
// coverage sweeps summarized by span-normalized AUC.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "selcal/error.hpp"
#include "selcal/kernelstats.hpp"
#include "selcal/matrix.hpp"
#include "selcal/textio.hpp"
#include "selcal/threshold.hpp"

namespace selcal {

inline constexpr double kInfNorm = std::numeric_limits<double>::infinity();

struct BinningPolicy {
    std::size_t max_bins = 15;
    std::size_t min_per_bin = 25;

    /// min(max_bins, floor(n / min_per_bin)); zero means "too few rows".
    std::size_t bins_for(std::size_t n) const { return std::min(max_bins, n / std::max<std::size_t>(min_per_bin, 1)); }
};

/// How a K-way probability vector and label reduce to (r, y).
enum class Reduction {
    binary,     // r = P(Y = 1), y = label
    top_label,  // r = max_k p_k, y = 1{label == argmax}
};

inline std::size_t argmax(std::span<const double> p) {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

inline ScoredBatch make_batch(const Matrix& probs, const std::vector<int>& labels, Reduction red) {
    ScoredBatch b;
    b.r.resize(probs.rows);
    b.y.resize(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const auto p = probs.row(i);
        if (red == Reduction::binary) {
            if (probs.cols != 2) detail::fail<ParameterError>("calmetrics", "binary reduction needs K = 2");
            b.r[i] = std::clamp(p[1], 0.0, 1.0);
            b.y[i] = labels[i] == 1 ? 1.0 : 0.0;
        } else {
            const auto k = argmax(p);
            b.r[i] = std::clamp(p[k], 0.0, 1.0);
            b.y[i] = static_cast<std::size_t>(labels[i]) == k ? 1.0 : 0.0;
        }
    }
    return b;
}

/// Sizes of m equal-mass bins over n sorted rows; the first n % m bins get one extra.
inline std::vector<std::size_t> equal_mass_bin_sizes(std::size_t n, std::size_t m) {
    std::vector<std::size_t> sizes(m, n / m);
    for (std::size_t k = 0; k < n % m; ++k) ++sizes[k];
    return sizes;
}

/// Equal-mass binned calibration error over the hard-selected rows of `batch`.
/// q = kInfNorm gives the max bin gap.
inline double binned_calibration_error(const ScoredBatch& batch, double q, const BinningPolicy& policy) {
    batch.validate("calmetrics");
    if (!(q >= 1.0)) detail::fail<ParameterError>("calmetrics", "q must be >= 1");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch.selected(i)) idx.push_back(i);
    }
    const std::size_t n = idx.size();
    const std::size_t m = policy.bins_for(n);
    if (n < policy.min_per_bin || m < 1) {
        detail::fail<InsufficientDataError>("calmetrics", "only " + std::to_string(n) + " selected examples, need " +
                                                              std::to_string(policy.min_per_bin));
    }
    // Ties in r keep their original order.
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return batch.r[a] < batch.r[b]; });
    const auto sizes = equal_mass_bin_sizes(n, m);
    double acc = 0.0;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < m; ++k) {
        double sy = 0.0, sr = 0.0;
        for (std::size_t t = 0; t < sizes[k]; ++t, ++pos) {
            sy += batch.y[idx[pos]];
            sr += batch.r[idx[pos]];
        }
        const double cnt = static_cast<double>(sizes[k]);
        const double diff = std::abs(sy / cnt - sr / cnt);
        if (std::isinf(q)) {
            acc = std::max(acc, diff);
        } else {
            acc += std::pow(diff, q);
        }
    }
    return std::isinf(q) ? acc : std::pow(acc / static_cast<double>(m), 1.0 / q);
}

inline double brier(const ScoredBatch& batch, bool selective) {
    batch.validate("calmetrics");
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (selective && !batch.selected(i)) continue;
        const double d = batch.r[i] - batch.y[i];
        s += d * d;
        ++n;
    }
    if (n == 0) detail::fail<DegenerateSelectionError>("calmetrics", "Brier score over an empty selection");
    return s / static_cast<double>(n);
}

struct RiskCoverage {
    double risk = 0.0;
    double coverage = 0.0;
    /// False when nothing is selected; risk is then 0 and meaningless.
    bool risk_defined = false;
};

inline bool top_label_error(double r, double y, Reduction red) {
    if (red == Reduction::binary) return (r >= 0.5 ? 1.0 : 0.0) != y;
    return y < 0.5;
}

/// Coverage = mean(g); risk = mean 0/1 top-label error over the selection.
inline RiskCoverage selective_risk_and_coverage(const ScoredBatch& batch, Reduction red = Reduction::top_label) {
    batch.validate("calmetrics");
    RiskCoverage rc;
    std::size_t kept = 0, wrong = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!batch.selected(i)) continue;
        ++kept;
        if (top_label_error(batch.r[i], batch.y[i], red)) ++wrong;
    }
    rc.coverage = batch.size() ? static_cast<double>(kept) / static_cast<double>(batch.size()) : 0.0;
    rc.risk_defined = kept > 0;
    rc.risk = kept ? static_cast<double>(wrong) / static_cast<double>(kept) : 0.0;
    return rc;
}

struct CurveRow {
    double coverage = 0.0;  // target xi
    double realized = 0.0;  // achieved fraction selected
    double s_bce2 = 0.0;
    double s_bce_inf = 0.0;
    double s_brier = 0.0;
    double s_risk = 0.0;
};

inline const std::vector<std::string>& curve_metrics() {
    static const std::vector<std::string> names{"s_bce2", "s_bce_inf", "s_brier", "s_risk"};
    return names;
}

inline double metric_of(const CurveRow& row, const std::string& metric) {
    if (metric == "s_bce2") return row.s_bce2;
    if (metric == "s_bce_inf") return row.s_bce_inf;
    if (metric == "s_brier") return row.s_brier;
    if (metric == "s_risk") return row.s_risk;
    detail::fail<ParameterError>("calmetrics", "unknown metric '" + metric + "'");
}

struct CoverageCurve {
    std::string method;
    std::vector<CurveRow> rows;
    std::map<std::string, double> aucs;
};

/// {0.05, 0.10, ..., 1.00}
inline std::vector<double> default_grid() {
    std::vector<double> g;
    for (int k = 1; k <= 20; ++k) g.push_back(k * 0.05);
    return g;
}

inline void validate_grid(std::span<const double> grid) {
    if (grid.empty()) detail::fail<ParameterError>("calmetrics", "coverage grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.05 - 1e-12 && grid[i] <= 1.0 + 1e-12)) {
            detail::fail<ParameterError>("calmetrics", "coverage grid must lie in [0.05, 1]");
        }
        if (i && !(grid[i] > grid[i - 1])) detail::fail<ParameterError>("calmetrics", "coverage grid must increase");
    }
}

/// Trapezoid area over the grid divided by its span; a single point returns its value.
inline double normalized_auc(std::span<const double> grid, std::span<const double> values) {
    if (grid.size() != values.size() || grid.empty()) detail::fail<ParameterError>("calmetrics", "AUC shape mismatch");
    if (grid.size() == 1) return values[0];
    double area = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) area += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    return area / (grid.back() - grid.front());
}

inline void fill_aucs(CoverageCurve& c) {
    std::vector<double> xs;
    for (const auto& r : c.rows) xs.push_back(r.coverage);
    for (const auto& m : curve_metrics()) {
        std::vector<double> vs;
        for (const auto& r : c.rows) vs.push_back(metric_of(r, m));
        c.aucs[m] = normalized_auc(xs, vs);
    }
}

/// Thresholds `scores` (higher = keep) at every grid coverage and records all
/// selective metrics. `batch.g` is ignored.
inline CoverageCurve sweep_curve(const std::string& method, std::span<const double> scores, const ScoredBatch& batch,
                                 std::span<const double> grid, const BinningPolicy& policy,
                                 Reduction red = Reduction::top_label) {
    validate_grid(grid);
    if (scores.size() != batch.size()) detail::fail<ParameterError>("calmetrics", "scores and batch differ in length");
    CoverageCurve curve;
    curve.method = method;
    ScoredBatch sel{batch.r, batch.y, std::vector<double>(batch.size(), 0.0)};
    for (double xi : grid) {
        const double tau = threshold_rule(std::min(xi, 1.0), scores);
        for (std::size_t i = 0; i < scores.size(); ++i) sel.g[i] = scores[i] >= tau ? 1.0 : 0.0;
        CurveRow row;
        row.coverage = xi;
        try {
            row.s_bce2 = binned_calibration_error(sel, 2.0, policy);
            row.s_bce_inf = binned_calibration_error(sel, kInfNorm, policy);
        } catch (const InsufficientDataError&) {
            detail::fail<InsufficientDataError>("calmetrics", "method '" + method + "' has too few selected examples at coverage " +
                                                                  textio::format_double(xi));
        }
        row.s_brier = brier(sel, true);
        const auto rc = selective_risk_and_coverage(sel, red);
        row.s_risk = rc.risk;
        row.realized = rc.coverage;
        curve.rows.push_back(row);
    }
    fill_aucs(curve);
    return curve;
}

inline std::string curves_csv_header() { return "method,coverage,s_bce2,s_bce_inf,s_brier,s_risk\n"; }

inline std::string curves_to_csv(const std::vector<CoverageCurve>& curves) {
    std::string s = curves_csv_header();
    for (const auto& c : curves) {
        for (const auto& r : c.rows) {
            s += c.method + "," + textio::format_double(r.coverage) + "," + textio::format_double(r.s_bce2) + "," +
                 textio::format_double(r.s_bce_inf) + "," + textio::format_double(r.s_brier) + "," +
                 textio::format_double(r.s_risk) + "\n";
        }
    }
    return s;
}

inline std::string aucs_to_csv(const std::vector<CoverageCurve>& curves) {
    std::string s = "method,metric,auc\n";
    for (const auto& c : curves) {
        for (const auto& m : curve_metrics()) s += c.method + "," + m + "," + textio::format_double(c.aucs.at(m)) + "\n";
    }
    return s;
}

}  // namespace selcal
