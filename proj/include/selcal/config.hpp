#pragma once

// Flat `key = value` run configuration. `#` starts a comment; unknown keys
// are rejected by name. Relative paths resolve against the config file's
// directory when parsed from a file.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selcal/error.hpp"
#include "selcal/eval_harness.hpp"
#include "selcal/random.hpp"
#include "selcal/textio.hpp"

namespace selcal {

struct RunConfig {
    TaskConfig task;
    TrialPlan plan;
    std::uint64_t seed = 0;
    std::string out = "out";
    /// Directory holding train/tune/test CSVs; regenerated from the seed when empty.
    std::string data_dir;
    std::string base_model_path;
    bool load_base = false;
    /// Extra trained selector evaluated by `eval` as method `loaded`.
    std::string selector_path;
    std::size_t threads = 1;

    RunConfig() {
        // Training family: label-preserving noise and group reweighting.
        task.train_family = PerturbationFamily::parse("feature_noise:0:0.3,group_resample:0:1", 2);
    }
};

/// Held-out evaluation kinds, disjoint from the default training family.
inline constexpr std::string_view kDefaultTestPerturbations = "rotation:0.4,mean_shift:0.2,feature_scale:1.3";

namespace detail {

inline bool parse_bool(std::string_view v, const std::string& key) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    fail<ParameterError>("config", "key '" + key + "' expects a boolean, got '" + std::string(v) + "'");
}

inline std::vector<double> parse_list(std::string_view v, const std::string& key) {
    std::vector<double> out;
    for (auto cell : textio::split(v, ',')) {
        cell = textio::trim(cell);
        if (cell.empty()) continue;
        try {
            out.push_back(textio::parse_double(cell, "config"));
        } catch (const ParameterError&) {
            fail<ParameterError>("config", "key '" + key + "' has a malformed number '" + std::string(cell) + "'");
        }
    }
    return out;
}

/// `kind:intensity[:w0/w1/...]` items separated by commas; seeds derive from `seed`.
inline std::vector<PerturbationSpec> parse_test_perturbations(std::string_view v, std::uint64_t seed) {
    std::vector<PerturbationSpec> out;
    for (auto item : textio::split(v, ',')) {
        item = textio::trim(item);
        if (item.empty()) continue;
        auto parts = textio::split(item, ':');
        if (parts.size() < 2 || parts.size() > 3) {
            fail<ParameterError>("config", "test perturbation '" + std::string(item) + "' must be kind:intensity[:weights]");
        }
        PerturbationSpec p;
        p.kind = parse_perturbation_kind(textio::trim(parts[0]));
        p.intensity = textio::parse_double(textio::trim(parts[1]), "config");
        p.seed = derive_seed(seed, 500 + out.size());
        if (parts.size() == 3) {
            for (auto w : textio::split(parts[2], '/')) p.group_weights.push_back(textio::parse_double(textio::trim(w), "config"));
        }
        p.validate();
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace detail

/// Parses config text. `base_dir` anchors relative paths.
inline RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {}) {
    RunConfig c;
    std::map<std::string, std::string> kv;
    std::size_t line_no = 0;
    for (auto raw : textio::split(text, '\n')) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        const auto line = textio::trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            detail::fail<ParameterError>("config", "line " + std::to_string(line_no) + " is not key = value");
        }
        const std::string key(textio::trim(line.substr(0, eq)));
        if (key.empty()) detail::fail<ParameterError>("config", "line " + std::to_string(line_no) + " has an empty key");
        kv[key] = std::string(textio::trim(line.substr(eq + 1)));
    }

    auto path = [&](const std::string& v) -> std::string {
        if (v.empty()) return v;
        std::filesystem::path p(v);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        return p.lexically_normal().string();
    };

    auto& t = c.task;
    auto& tr = t.train;
    std::optional<std::string> family_text, perturb_text;
    std::optional<std::vector<double>> priors;
    int mix_classes = 2, mix_dim = 2;
    double mix_sep = 2.0, mix_cov = 1.0;
    bool mixture_touched = false;

    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto num = [](auto& field) -> Setter {
        return [&field](const std::string& key, const std::string& v) {
            using T = std::remove_reference_t<decltype(field)>;
            try {
                if constexpr (std::is_floating_point_v<T>) {
                    field = textio::parse_double(v, "config");
                } else {
                    field = textio::parse_int<T>(v, "config");
                }
            } catch (const ParameterError&) {
                detail::fail<ParameterError>("config", "key '" + key + "' has a malformed value '" + v + "'");
            }
        };
    };
    auto flag = [](bool& field) -> Setter {
        return [&field](const std::string& key, const std::string& v) { field = detail::parse_bool(v, key); };
    };
    auto mixture_num = [&](auto& field) -> Setter {
        auto inner = num(field);
        return [inner, &mixture_touched](const std::string& k, const std::string& v) {
            mixture_touched = true;
            inner(k, v);
        };
    };
    std::size_t max_steps = 0;
    bool has_max_steps = false;

    const std::map<std::string, Setter> setters{
        {"task",
         [&](const std::string& k, const std::string& v) {
             if (v == "toy") {
                 t.task = TaskKind::toy;
             } else if (v == "mixture") {
                 t.task = TaskKind::mixture;
             } else {
                 detail::fail<ParameterError>("config", "key '" + k + "' must be toy or mixture");
             }
         }},
        {"seed", num(c.seed)},
        {"threads", num(c.threads)},
        {"out", [&](const std::string&, const std::string& v) { c.out = path(v); }},
        {"data_dir", [&](const std::string&, const std::string& v) { c.data_dir = path(v); }},
        {"selector_path", [&](const std::string&, const std::string& v) { c.selector_path = path(v); }},
        {"base.model_path", [&](const std::string&, const std::string& v) { c.base_model_path = path(v); }},
        {"base.load", flag(c.load_base)},
        {"toy.mix", num(t.toy.mix)},
        {"toy.delta", num(t.toy.delta)},
        {"mixture.classes", mixture_num(mix_classes)},
        {"mixture.dim", mixture_num(mix_dim)},
        {"mixture.separation", mixture_num(mix_sep)},
        {"mixture.cov_scale", mixture_num(mix_cov)},
        {"mixture.priors",
         [&](const std::string& k, const std::string& v) {
             mixture_touched = true;
             priors = detail::parse_list(v, k);
         }},
        {"n.base_train", num(t.n_base_train)},
        {"n.base_val", num(t.n_base_val)},
        {"n.train", num(t.n_train)},
        {"n.tune", num(t.n_tune)},
        {"n.test", num(t.n_test)},
        {"base.hidden_layers", num(t.arch.hidden_layers)},
        {"base.width", num(t.arch.width)},
        {"base.epochs", num(t.arch.epochs)},
        {"base.batch_size", num(t.arch.batch_size)},
        {"base.lr", num(t.arch.learning_rate)},
        {"features.confidence", flag(t.features.confidence)},
        {"features.onehot", flag(t.features.onehot)},
        {"features.distribution", flag(t.features.distribution)},
        {"features.kde", flag(t.features.kde)},
        {"features.iforest", flag(t.features.iforest)},
        {"features.knn", flag(t.features.knn)},
        {"features.representation", flag(t.features.representation)},
        {"features.knn_k", num(t.features.knn_k)},
        {"features.iforest_trees", num(t.features.iforest_trees)},
        {"features.iforest_subsample", num(t.features.iforest_subsample)},
        {"features.max_reference", num(t.features.max_reference)},
        {"features.projection_dim", num(t.features.projection_dim)},
        {"features.kde_bandwidth_scale", num(t.features.kde_bandwidth_scale)},
        {"kernel.sigma", num(tr.loss.kernel.sigma)},
        {"loss.q", num(tr.loss.q)},
        {"loss.lambda1", num(tr.loss.lambda1)},
        {"loss.lambda2", num(tr.loss.lambda2)},
        {"train.xi", num(tr.xi)},
        {"train.m", num(tr.m)},
        {"train.kappa", num(tr.kappa)},
        {"train.sample_size", num(tr.sample_size)},
        {"train.epochs", num(tr.epochs)},
        {"train.steps_per_epoch", num(tr.steps_per_epoch)},
        {"train.max_steps",
         [&](const std::string& k, const std::string& v) {
             num(max_steps)(k, v);
             has_max_steps = true;
         }},
        {"train.lr", num(tr.learning_rate)},
        {"train.use_kappa_worst", flag(tr.use_kappa_worst)},
        {"train.hidden", num(tr.hidden)},
        {"train.ranking",
         [&](const std::string& k, const std::string& v) {
             if (v == "single") {
                 tr.ranking = RankingMode::single_xi;
             } else if (v == "auc") {
                 tr.ranking = RankingMode::auc;
             } else {
                 detail::fail<ParameterError>("config", "key '" + k + "' must be single or auc");
             }
         }},
        {"train.family", [&](const std::string&, const std::string& v) { family_text = v; }},
        {"binning.max_bins", num(tr.policy.max_bins)},
        {"binning.min_per_bin", num(tr.policy.min_per_bin)},
        {"eval.retrains", num(c.plan.num_retrains)},
        {"eval.resamples", num(c.plan.num_test_resamples)},
        {"eval.include_clean", flag(c.plan.include_clean)},
        {"eval.perturbations", [&](const std::string&, const std::string& v) { perturb_text = v; }},
        {"eval.grid",
         [&](const std::string& k, const std::string& v) {
             c.plan.grid = v == "default" ? default_grid() : detail::parse_list(v, k);
         }},
    };

    for (const auto& [key, value] : kv) {
        const auto it = setters.find(key);
        if (it == setters.end()) detail::fail<ParameterError>("config", "unknown key '" + key + "'");
        it->second(key, value);
    }

    if (has_max_steps) tr.max_steps = max_steps;
    if (mixture_touched) {
        if (mix_classes < 2 || mix_dim < 1) detail::fail<ParameterError>("config", "mixture needs classes >= 2 and dim >= 1");
        t.mixture = MixtureSpec::symmetric(mix_classes, mix_dim, mix_sep, mix_cov);
        if (priors) t.mixture.class_priors = *priors;
    }
    const std::size_t groups = t.task == TaskKind::toy ? 2 : static_cast<std::size_t>(t.mixture.num_classes);
    t.train_family = PerturbationFamily::parse(family_text ? *family_text : t.train_family.to_string(), groups);
    c.plan.test_perturbations = detail::parse_test_perturbations(perturb_text.value_or(std::string(kDefaultTestPerturbations)), c.seed);
    c.plan.seed = c.seed;
    c.plan.threads = c.threads;
    tr.seed = c.seed;
    tr.threads = c.threads;
    tr.reduction = t.reduction();
    if (c.out.empty()) c.out = path("out");

    t.toy.validate();
    if (t.task == TaskKind::mixture) t.mixture.validate();
    tr.validate();
    t.train_family.validate();
    c.plan.validate();
    if (c.load_base && c.base_model_path.empty()) {
        detail::fail<ParameterError>("config", "base.load requires base.model_path");
    }
    return c;
}

inline RunConfig load_run_config(const std::string& file) {
    const std::string text = textio::read_file(file, "config");
    return parse_run_config(text, std::filesystem::absolute(file).parent_path());
}

/// Applies a seed override everywhere the config's seed propagates.
inline void override_seed(RunConfig& c, std::uint64_t seed) {
    c.seed = seed;
    c.plan.seed = seed;
    c.task.train.seed = seed;
    for (std::size_t i = 0; i < c.plan.test_perturbations.size(); ++i) {
        c.plan.test_perturbations[i].seed = derive_seed(seed, 500 + i);
    }
}

inline void override_threads(RunConfig& c, std::size_t threads) {
    c.threads = threads;
    c.plan.threads = threads;
    c.task.train.threads = threads;
}

}  // namespace selcal
