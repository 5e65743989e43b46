#pragma once

// Robust selector training: sample perturbations of the training split,
// rank the perturbed datasets by binned selective calibration error, and
// take SGD steps on the regularized S-MMCE loss over the kappa worst.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "selcal/basemodel.hpp"
#include "selcal/calmetrics.hpp"
#include "selcal/error.hpp"
#include "selcal/kernelstats.hpp"
#include "selcal/metafeatures.hpp"
#include "selcal/random.hpp"
#include "selcal/selector.hpp"
#include "selcal/smmce_loss.hpp"
#include "selcal/synthdata.hpp"
#include "selcal/threshold.hpp"

namespace selcal {

enum class RankingMode {
    single_xi,  // binned S-BCE_2 at the target coverage
    auc,        // binned S-BCE_2 AUC over `ranking_grid`
};

struct TrainConfig {
    double xi = 0.5;
    std::size_t m = 32;
    std::size_t kappa = 4;
    std::size_t sample_size = 1024;
    std::size_t epochs = 5;
    std::size_t steps_per_epoch = 20;
    /// Overrides epochs * steps_per_epoch when set.
    std::optional<std::size_t> max_steps;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
    bool use_kappa_worst = true;
    RankingMode ranking = RankingMode::single_xi;
    std::vector<double> ranking_grid = default_grid();
    LossConfig loss{};
    BinningPolicy policy{};
    Reduction reduction = Reduction::binary;
    std::size_t hidden = 64;
    /// Worker threads for preparing perturbed datasets; results do not depend on it.
    std::size_t threads = 1;

    std::size_t total_steps() const { return max_steps ? *max_steps : epochs * steps_per_epoch; }

    void validate() const {
        if (!(xi > 0.0 && xi <= 1.0)) detail::fail<ParameterError>("robust_trainer", "xi must lie in (0,1]");
        if (m < 1 || kappa < 1 || kappa > m) detail::fail<ParameterError>("robust_trainer", "need 1 <= kappa <= m");
        if (sample_size < 2) detail::fail<ParameterError>("robust_trainer", "sample_size must be >= 2");
        if (!(learning_rate > 0.0)) detail::fail<ParameterError>("robust_trainer", "learning_rate must be positive");
        loss.validate();
    }
};

struct StepRecord {
    std::size_t step = 0;
    double mean_error = 0.0;
    double topk_error = 0.0;
    double loss = 0.0;
    std::size_t flagged = 0;
};

struct TrainReport {
    std::vector<StepRecord> steps;

    std::string to_csv() const {
        std::string s = "step,mean_error,topk_error,loss\n";
        for (const auto& r : steps) {
            s += std::to_string(r.step) + "," + textio::format_double(r.mean_error) + "," +
                 textio::format_double(r.topk_error) + "," + textio::format_double(r.loss) + "\n";
        }
        return s;
    }
};

/// A perturbed dataset after scoring with f: meta features plus (r, y).
struct PerturbedSample {
    Matrix meta;
    ScoredBatch batch;
};

struct RankedDataset {
    std::size_t index = 0;
    double error = 0.0;
    /// Too few selected rows to bin; error holds the sentinel.
    bool flagged = false;
};

/// Maximum possible binned error (|mean y - mean r| <= 1).
inline constexpr double kRankingSentinel = 1.0;

namespace detail {

inline double ranking_error(const ScoredBatch& batch, std::span<const double> scores, double xi, const BinningPolicy& policy,
                            RankingMode mode, std::span<const double> grid, bool& flagged) {
    flagged = false;
    try {
        if (mode == RankingMode::auc) {
            return sweep_curve("rank", scores, batch, grid, policy).aucs.at("s_bce2");
        }
        ScoredBatch sel{batch.r, batch.y, std::vector<double>(batch.size())};
        const double tau = threshold_rule(xi, scores);
        for (std::size_t i = 0; i < scores.size(); ++i) sel.g[i] = scores[i] >= tau ? 1.0 : 0.0;
        return binned_calibration_error(sel, 2.0, policy);
    } catch (const InsufficientDataError&) {
        flagged = true;
        return kRankingSentinel;
    }
}

template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += threads) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Per-dataset errors from precomputed selector scores, sorted by error
/// descending with ties broken by ascending index.
inline std::vector<RankedDataset> rank_by_scores(const std::vector<ScoredBatch>& batches,
                                                 const std::vector<std::vector<double>>& scores, double xi,
                                                 const BinningPolicy& policy, RankingMode mode = RankingMode::single_xi,
                                                 std::span<const double> grid = {}) {
    if (batches.size() != scores.size()) detail::fail<ParameterError>("robust_trainer", "batch/score count mismatch");
    std::vector<RankedDataset> out(batches.size());
    for (std::size_t i = 0; i < batches.size(); ++i) {
        out[i].index = i;
        out[i].error = detail::ranking_error(batches[i], scores[i], xi, policy, mode, grid, out[i].flagged);
    }
    std::stable_sort(out.begin(), out.end(), [](const RankedDataset& a, const RankedDataset& b) { return a.error > b.error; });
    return out;
}

inline std::vector<RankedDataset> rank_perturbed(const std::vector<PerturbedSample>& set, const SoftSelector& soft, double xi,
                                                 const BinningPolicy& policy, RankingMode mode = RankingMode::single_xi,
                                                 std::span<const double> grid = {}) {
    std::vector<ScoredBatch> batches;
    std::vector<std::vector<double>> scores;
    for (const auto& s : set) {
        batches.push_back(s.batch);
        scores.push_back(selector_scores(soft, s.meta));
    }
    return rank_by_scores(batches, scores, xi, policy, mode, grid);
}

inline PerturbedSample score_dataset(const BaseModel& f, const FeatureExtractor& ex, const LabeledDataset& data,
                                     Reduction red) {
    const RawFeatures raw = compute_raw(ex, f, data.features);
    return PerturbedSample{assemble_meta(ex, raw), make_batch(raw.probs, data.labels, red)};
}

/// Initial selector for a training run: seeded weights plus meta-feature
/// standardization fitted on the clean training split.
inline SoftSelector initial_selector(const BaseModel& f, const FeatureExtractor& ex, const LabeledDataset& train_data,
                                     const TrainConfig& cfg) {
    SoftSelector soft = SoftSelector::init(ex.output_dim(), derive_seed(cfg.seed, 1), cfg.hidden);
    soft.standardizer = Standardizer::fit(extract_batch(ex, f, train_data.features));
    return soft;
}

struct TrainResult {
    HardSelector selector;
    TrainReport report;
};

inline TrainResult train(const BaseModel& f, const FeatureExtractor& ex, const LabeledDataset& train_data,
                         const LabeledDataset& tune_data, const PerturbationFamily& family, const TrainConfig& cfg) {
    cfg.validate();
    family.validate();
    train_data.validate();
    if (tune_data.size() == 0) detail::fail<ParameterError>("robust_trainer", "tune data is empty");
    SoftSelector soft = initial_selector(f, ex, train_data, cfg);
    TrainReport report;
    const std::size_t n = train_data.size();
    const std::size_t draw = std::min(cfg.sample_size, n);
    for (std::size_t step = 0; step < cfg.total_steps(); ++step) {
        const std::uint64_t step_seed = derive_seed(cfg.seed, 1000 + step);
        const auto specs = sample_perturbation_batch(family, cfg.m, derive_seed(step_seed, 0));
        std::vector<PerturbedSample> set(cfg.m);
        std::vector<std::vector<double>> scores(cfg.m);
        detail::parallel_for(cfg.m, cfg.threads, [&](std::size_t i) {
            // Fresh sub-draw of the training split for every perturbed dataset.
            Rng rng(derive_seed(step_seed, 1 + i));
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), 0);
            for (std::size_t k = 0; k < draw; ++k) std::swap(idx[k], idx[k + uniform_index(rng, n - k)]);
            idx.resize(draw);
            const LabeledDataset q = apply_perturbation(train_data.subset(idx), specs[i]);
            set[i] = score_dataset(f, ex, q, cfg.reduction);
            scores[i] = selector_scores(soft, set[i].meta);
        });
        std::vector<ScoredBatch> batches;
        batches.reserve(cfg.m);
        for (const auto& s : set) batches.push_back(s.batch);
        const auto ranked = rank_by_scores(batches, scores, cfg.xi, cfg.policy, cfg.ranking, cfg.ranking_grid);

        const std::size_t take = cfg.use_kappa_worst ? cfg.kappa : cfg.m;
        std::vector<std::size_t> chosen;
        for (std::size_t k = 0; k < take; ++k) chosen.push_back(ranked[k].index);
        // Index order keeps the accumulation independent of the ranking order.
        std::sort(chosen.begin(), chosen.end());

        StepRecord rec;
        rec.step = step;
        for (const auto& r : ranked) {
            rec.mean_error += r.error;
            rec.flagged += r.flagged ? 1 : 0;
        }
        rec.mean_error /= static_cast<double>(ranked.size());
        for (std::size_t k = 0; k < take; ++k) rec.topk_error += ranked[k].error;
        rec.topk_error /= static_cast<double>(take);

        MlpGrads total = soft.net.zero_grads();
        const double w = 1.0 / static_cast<double>(take);
        for (std::size_t idx : chosen) {
            const SelectorCache cache = forward(soft, set[idx].meta);
            ScoredBatch lb = set[idx].batch;
            lb.g = cache.scores;
            LossEval ev;
            try {
                ev = loss_value_and_grad(lb, cfg.loss);
            } catch (const NumericError& e) {
                detail::fail<TrainingError>("robust_trainer", "step " + std::to_string(step) + ": " + e.what());
            }
            rec.loss += w * ev.value;
            total.add_scaled(backward(soft, cache, ev.grad), w);
        }
        if (!std::isfinite(rec.loss)) {
            detail::fail<TrainingError>("robust_trainer", "loss diverged at step " + std::to_string(step));
        }
        soft.net.apply_update(total, cfg.learning_rate);
        report.steps.push_back(rec);
    }
    const auto tune_scores = selector_scores(soft, extract_batch(ex, f, tune_data.features));
    return TrainResult{binarize(soft, tune_scores, cfg.xi), std::move(report)};
}

/// Constructive selector from known conditionals: h(x) = |E[Y | x] - r(x)|,
/// keep rows with h <= the xi-quantile of h over `data`. Returns 0/1 per row.
inline std::vector<double> oracle_selector(const std::function<double(std::span<const double>)>& cond, const BaseModel& f,
                                           double xi, const LabeledDataset& data) {
    if (!(xi > 0.0 && xi <= 1.0)) detail::fail<ParameterError>("robust_trainer", "xi must lie in (0,1]");
    const std::size_t n = data.size();
    std::vector<double> h(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = predict(f, data.features.row(i));
        h[i] = std::abs(cond(data.features.row(i)) - p[1]);
    }
    std::vector<double> sorted = h;
    std::sort(sorted.begin(), sorted.end());
    auto k = static_cast<std::size_t>(std::ceil(xi * static_cast<double>(n) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n);
    const double lambda = sorted[k - 1];
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = h[i] <= lambda ? 1.0 : 0.0;
    return g;
}

}  // namespace selcal
