#pragma once

// Evaluation protocol: retrain the selector several times, bootstrap the test
// split, apply held-out perturbations, and sweep every method over the
// coverage grid. Curves and AUCs are aggregated across trials.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selcal/basemodel.hpp"
#include "selcal/calmetrics.hpp"
#include "selcal/error.hpp"
#include "selcal/metafeatures.hpp"
#include "selcal/random.hpp"
#include "selcal/robust_trainer.hpp"
#include "selcal/selector.hpp"
#include "selcal/synthdata.hpp"

namespace selcal {

enum class TaskKind { toy, mixture };

/// Everything needed to produce data, f, the extractor and a trained selector.
struct TaskConfig {
    TaskKind task = TaskKind::toy;
    ToySpec toy{};
    MixtureSpec mixture = MixtureSpec::symmetric(2, 2, 2.0, 1.0);
    std::size_t n_base_train = 4000;
    std::size_t n_base_val = 2000;
    std::size_t n_train = 8000;
    std::size_t n_tune = 4000;
    std::size_t n_test = 10000;
    BaseArchConfig arch{};
    FeatureConfig features{};
    PerturbationFamily train_family{};
    TrainConfig train{};

    int num_classes() const { return task == TaskKind::toy ? 2 : mixture.num_classes; }
    /// Binary reduction for the toy, top-label for the mixture.
    Reduction reduction() const { return task == TaskKind::toy ? Reduction::binary : Reduction::top_label; }
    int group_column() const { return task == TaskKind::toy ? 1 : -1; }
};

struct TaskData {
    std::optional<LabeledDataset> base_train;
    std::optional<LabeledDataset> base_val;
    LabeledDataset train;
    LabeledDataset tune;
    LabeledDataset test;
};

inline TaskData generate_data(const TaskConfig& cfg, std::uint64_t seed) {
    auto draw = [&](std::size_t n, std::uint64_t stream) {
        return cfg.task == TaskKind::toy ? sample_toy(cfg.toy, n, derive_seed(seed, stream))
                                         : sample_mixture(cfg.mixture, n, derive_seed(seed, stream));
    };
    TaskData d;
    if (cfg.task == TaskKind::mixture) {
        d.base_train = draw(cfg.n_base_train, 11);
        d.base_val = draw(cfg.n_base_val, 12);
    }
    d.train = draw(cfg.n_train, 13);
    d.tune = draw(cfg.n_tune, 14);
    d.test = draw(cfg.n_test, 15);
    return d;
}

/// Analytic f for the toy; otherwise a trained net temperature-scaled on base_val.
inline BaseModel build_base(const TaskConfig& cfg, const TaskData& data, std::uint64_t seed, bool* degenerate = nullptr) {
    if (cfg.task == TaskKind::toy) return BaseModel::analytic_toy();
    if (!data.base_train || !data.base_val) detail::fail<ParameterError>("eval_harness", "mixture task needs base splits");
    const BaseModel net = train_base(*data.base_train, cfg.arch, derive_seed(seed, 21));
    const TemperatureFit fit = fit_temperature(net, *data.base_val);
    if (degenerate) *degenerate = fit.degenerate;
    return fit.model;
}

inline FeatureExtractor build_extractor(const TaskConfig& cfg, const BaseModel& f, const LabeledDataset& train_data,
                                        std::uint64_t seed) {
    return fit_extractor(hidden_batch(f, train_data.features), cfg.num_classes(), cfg.features, derive_seed(seed, 22));
}

struct TrialPlan {
    std::size_t num_retrains = 5;
    std::size_t num_test_resamples = 5;
    std::vector<PerturbationSpec> test_perturbations;
    /// Also evaluate on the unperturbed bootstrap sample.
    bool include_clean = true;
    std::vector<double> grid = default_grid();
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    void validate() const {
        if (num_retrains < 1 || num_test_resamples < 1) detail::fail<ParameterError>("eval_harness", "trial counts must be >= 1");
        if (test_perturbations.empty() && !include_clean) detail::fail<ParameterError>("eval_harness", "no test conditions");
        for (const auto& p : test_perturbations) p.validate();
        validate_grid(grid);
    }
};

inline std::string perturbation_label(const PerturbationSpec& p) {
    return std::string(to_string(p.kind)) + "@" + textio::format_double(p.intensity);
}

struct TrialRow {
    std::size_t trial = 0;
    std::string method;
    std::string perturbation;
    std::string metric;
    double coverage = 0.0;
    double value = 0.0;
};

/// AUCs of one (trial, method, perturbation) cell; `flagged` cells had too
/// few selected examples somewhere on the grid and carry no values.
struct CellResult {
    std::size_t trial = 0;
    std::size_t retrain = 0;
    std::string method;
    std::string perturbation;
    bool flagged = false;
    std::string reason;
    std::map<std::string, double> aucs;
};

struct AggregateRow {
    std::string method;
    std::string perturbation;
    std::string metric;
    double mean_auc = 0.0;
    double std_auc = 0.0;
    std::size_t trials = 0;
    std::size_t flagged = 0;
};

struct ResultTable {
    std::vector<TrialRow> rows;
    std::vector<CellResult> cells;
    /// Per method: curve averaged over all unflagged trials and perturbations.
    std::vector<CoverageCurve> mean_curves;
    std::vector<AggregateRow> aggregate;
    std::vector<TrainReport> reports;
};

/// Method names evaluated by run_trials, in output order.
inline std::vector<std::string> evaluated_methods(const FeatureExtractor& ex, const std::vector<std::string>& extra) {
    std::vector<std::string> m{"smmce"};
    for (const auto& e : extra) m.push_back(e);
    m.push_back("full");
    m.push_back("confidence");
    if (ex.config.kde) m.push_back("neg_kde");
    if (ex.config.iforest) m.push_back("neg_iforest");
    if (ex.config.knn) m.push_back("neg_knn");
    return m;
}

inline LabeledDataset bootstrap(const LabeledDataset& data, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::size_t> idx(data.size());
    for (auto& i : idx) i = uniform_index(rng, data.size());
    return data.subset(idx);
}

namespace detail {

inline double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

struct RetrainOutput {
    TrainReport report;
    std::vector<CellResult> cells;
    std::vector<CoverageCurve> curves;  // parallel to cells (empty rows when flagged)
};

}  // namespace detail

/// Runs the full protocol. `extra` are additional fixed selectors (for
/// example one loaded from disk) evaluated alongside the freshly trained one.
inline ResultTable run_trials(const TrialPlan& plan, const TaskConfig& cfg, const BaseModel& f, const FeatureExtractor& ex,
                              const TaskData& data, const std::map<std::string, SoftSelector>& extra = {}) {
    plan.validate();
    std::vector<std::string> extra_names;
    for (const auto& [name, _] : extra) extra_names.push_back(name);
    const auto methods = evaluated_methods(ex, extra_names);
    const Reduction red = cfg.reduction();

    std::vector<std::pair<std::string, std::optional<PerturbationSpec>>> conditions;
    if (plan.include_clean) conditions.emplace_back("clean", std::nullopt);
    for (const auto& p : plan.test_perturbations) conditions.emplace_back(perturbation_label(p), p);

    std::vector<detail::RetrainOutput> outs(plan.num_retrains);
    detail::parallel_for(plan.num_retrains, plan.threads, [&](std::size_t r) {
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(plan.seed, 100 + r);
        tc.reduction = red;
        tc.threads = 1;
        TrainResult tr = train(f, ex, data.train, data.tune, cfg.train_family, tc);
        auto& out = outs[r];
        out.report = std::move(tr.report);
        for (std::size_t s = 0; s < plan.num_test_resamples; ++s) {
            const std::size_t trial = r * plan.num_test_resamples + s;
            const LabeledDataset boot = bootstrap(data.test, derive_seed(plan.seed, 10000 + trial));
            for (const auto& [label, spec] : conditions) {
                const LabeledDataset q = spec ? apply_perturbation(boot, *spec) : boot;
                const RawFeatures raw = compute_raw(ex, f, q.features);
                const Matrix meta = assemble_meta(ex, raw);
                const ScoredBatch batch = make_batch(raw.probs, q.labels, red);
                const auto base = baseline_scores(ex, raw);
                for (const auto& method : methods) {
                    std::vector<double> scores;
                    if (method == "smmce") {
                        scores = selector_scores(tr.selector.soft, meta);
                    } else if (extra.count(method)) {
                        scores = selector_scores(extra.at(method), meta);
                    } else if (method == "full") {
                        scores.assign(batch.size(), 1.0);
                    } else {
                        scores = base.at(method);
                    }
                    CellResult cell{trial, r, method, label, false, "", {}};
                    CoverageCurve curve;
                    try {
                        curve = sweep_curve(method, scores, batch, plan.grid, cfg.train.policy, red);
                        cell.aucs = curve.aucs;
                    } catch (const InsufficientDataError& e) {
                        cell.flagged = true;
                        cell.reason = e.what();
                        curve = CoverageCurve{method, {}, {}};
                    }
                    out.cells.push_back(std::move(cell));
                    out.curves.push_back(std::move(curve));
                }
            }
        }
    });

    ResultTable table;
    std::map<std::string, std::vector<const CoverageCurve*>> by_method;
    for (auto& o : outs) {
        table.reports.push_back(o.report);
        for (std::size_t i = 0; i < o.cells.size(); ++i) {
            const CellResult& c = o.cells[i];
            table.cells.push_back(c);
            if (c.flagged) continue;
            by_method[c.method].push_back(&o.curves[i]);
            for (const auto& row : o.curves[i].rows) {
                for (const auto& metric : curve_metrics()) {
                    table.rows.push_back({c.trial, c.method, c.perturbation, metric, row.coverage, metric_of(row, metric)});
                }
            }
        }
    }
    for (const auto& method : methods) {
        const auto it = by_method.find(method);
        if (it == by_method.end()) continue;
        CoverageCurve mean{method, {}, {}};
        for (std::size_t g = 0; g < plan.grid.size(); ++g) {
            CurveRow acc;
            acc.coverage = plan.grid[g];
            for (const CoverageCurve* c : it->second) {
                const CurveRow& r = c->rows[g];
                acc.realized += r.realized;
                acc.s_bce2 += r.s_bce2;
                acc.s_bce_inf += r.s_bce_inf;
                acc.s_brier += r.s_brier;
                acc.s_risk += r.s_risk;
            }
            const double k = static_cast<double>(it->second.size());
            acc.realized /= k;
            acc.s_bce2 /= k;
            acc.s_bce_inf /= k;
            acc.s_brier /= k;
            acc.s_risk /= k;
            mean.rows.push_back(acc);
        }
        fill_aucs(mean);
        table.mean_curves.push_back(std::move(mean));
    }
    for (const auto& method : methods) {
        for (const auto& [label, _] : conditions) {
            std::map<std::string, std::vector<double>> vals;
            std::size_t flagged = 0;
            for (const auto& c : table.cells) {
                if (c.method != method || c.perturbation != label) continue;
                if (c.flagged) {
                    ++flagged;
                    continue;
                }
                for (const auto& [metric, v] : c.aucs) vals[metric].push_back(v);
            }
            for (const auto& metric : curve_metrics()) {
                AggregateRow a{method, label, metric, 0.0, 0.0, 0, flagged};
                const auto& v = vals[metric];
                a.trials = v.size();
                if (!v.empty()) {
                    for (double x : v) a.mean_auc += x;
                    a.mean_auc /= static_cast<double>(v.size());
                    a.std_auc = detail::sample_std(v);
                }
                table.aggregate.push_back(a);
            }
        }
    }
    return table;
}

inline std::string trials_to_csv(const ResultTable& t) {
    std::string s = "trial,method,perturbation,metric,coverage,value\n";
    for (const auto& r : t.rows) {
        s += std::to_string(r.trial) + "," + r.method + "," + r.perturbation + "," + r.metric + "," +
             textio::format_double(r.coverage) + "," + textio::format_double(r.value) + "\n";
    }
    return s;
}

inline std::string aggregate_to_csv(const ResultTable& t) {
    std::string s = "method,perturbation,metric,mean_auc,std_auc,trials,flagged\n";
    for (const auto& a : t.aggregate) {
        s += a.method + "," + a.perturbation + "," + a.metric + "," + textio::format_double(a.mean_auc) + "," +
             textio::format_double(a.std_auc) + "," + std::to_string(a.trials) + "," + std::to_string(a.flagged) + "\n";
    }
    return s;
}

struct LabelComposition {
    int label = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
};

/// Accepted / rejected counts per true label for 0/1 selection bits.
inline std::vector<LabelComposition> rejection_composition(std::span<const double> selected, const LabeledDataset& data) {
    if (selected.size() != data.size()) detail::fail<ParameterError>("eval_harness", "selection and data differ in length");
    std::vector<LabelComposition> out(static_cast<std::size_t>(data.num_classes));
    for (std::size_t k = 0; k < out.size(); ++k) out[k].label = static_cast<int>(k);
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto& c = out[static_cast<std::size_t>(data.labels[i])];
        if (selected[i] >= 0.5) {
            ++c.accepted;
        } else {
            ++c.rejected;
        }
    }
    return out;
}

inline std::vector<LabelComposition> rejection_composition(const HardSelector& g, const FeatureExtractor& ex,
                                                           const BaseModel& f, const LabeledDataset& data) {
    return rejection_composition(g.select(extract_batch(ex, f, data.features)), data);
}

}  // namespace selcal
