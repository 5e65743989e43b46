#pragma once

// gen / train / eval entry points behind the command-line tool. Data goes to
// files under the output directory; short progress lines go to `log`.

#include <filesystem>
#include <map>
#include <ostream>
#include <string>

#include "selcal/basemodel.hpp"
#include "selcal/calmetrics.hpp"
#include "selcal/config.hpp"
#include "selcal/error.hpp"
#include "selcal/eval_harness.hpp"
#include "selcal/metafeatures.hpp"
#include "selcal/robust_trainer.hpp"
#include "selcal/selector.hpp"
#include "selcal/synthdata.hpp"
#include "selcal/textio.hpp"

namespace selcal {

namespace detail {

inline std::filesystem::path ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        fail<IoError>("cli", "cannot create output directory '" + dir + "'");
    }
    return std::filesystem::path(dir);
}

inline const char* const kSplits[] = {"base_train", "base_val", "train", "tune", "test"};

}  // namespace detail

/// Reads the split CSVs from `data_dir`, or regenerates them from the seed.
inline TaskData load_or_generate(const RunConfig& cfg) {
    if (cfg.data_dir.empty()) return generate_data(cfg.task, cfg.seed);
    const int group = cfg.task.group_column();
    auto read = [&](const std::string& name) {
        const auto p = (std::filesystem::path(cfg.data_dir) / (name + ".csv")).string();
        LabeledDataset d = dataset_from_csv(textio::read_file(p, "cli"), group);
        d.num_classes = std::max(d.num_classes, cfg.task.num_classes());
        return d;
    };
    TaskData d;
    if (cfg.task.task == TaskKind::mixture) {
        d.base_train = read("base_train");
        d.base_val = read("base_val");
    }
    d.train = read("train");
    d.tune = read("tune");
    d.test = read("test");
    return d;
}

inline BaseModel obtain_base(const RunConfig& cfg, const TaskData& data, std::ostream& log) {
    if (cfg.load_base) {
        if (!std::filesystem::exists(cfg.base_model_path)) {
            detail::fail<IoError>("cli", "base model file '" + cfg.base_model_path + "' does not exist");
        }
        return base_model_from_text(textio::read_file(cfg.base_model_path, "cli"));
    }
    bool degenerate = false;
    BaseModel f = build_base(cfg.task, data, cfg.seed, &degenerate);
    if (degenerate) log << "warning: validation split has one class; temperature left at 1\n";
    return f;
}

inline void cmd_gen(const RunConfig& cfg, std::ostream& log) {
    const auto dir = detail::ensure_dir(cfg.out);
    const TaskData d = generate_data(cfg.task, cfg.seed);
    auto put = [&](const char* name, const LabeledDataset& ds) {
        textio::write_file((dir / (std::string(name) + ".csv")).string(), dataset_to_csv(ds), "cli");
        log << name << ": " << ds.size() << " rows\n";
    };
    if (d.base_train) put("base_train", *d.base_train);
    if (d.base_val) put("base_val", *d.base_val);
    put("train", d.train);
    put("tune", d.tune);
    put("test", d.test);
}

inline TrainResult cmd_train(const RunConfig& cfg, std::ostream& log) {
    const auto dir = detail::ensure_dir(cfg.out);
    const TaskData data = load_or_generate(cfg);
    const BaseModel f = obtain_base(cfg, data, log);
    const FeatureExtractor ex = build_extractor(cfg.task, f, data.train, cfg.seed);
    TrainResult res = train(f, ex, data.train, data.tune, cfg.task.train_family, cfg.task.train);
    textio::write_file((dir / "base_model.txt").string(), base_model_to_text(f), "cli");
    textio::write_file((dir / "extractor.txt").string(), extractor_to_text(ex), "cli");
    textio::write_file((dir / "selector.txt").string(), selector_to_text(res.selector), "cli");
    textio::write_file((dir / "train_report.csv").string(), res.report.to_csv(), "cli");
    log << "steps: " << res.report.steps.size() << "\n";
    if (!res.report.steps.empty()) log << "final loss: " << textio::format_double(res.report.steps.back().loss) << "\n";
    log << "tau: " << textio::format_double(res.selector.tau) << "\n";
    return res;
}

inline ResultTable cmd_eval(const RunConfig& cfg, std::ostream& log) {
    const auto dir = detail::ensure_dir(cfg.out);
    const TaskData data = load_or_generate(cfg);
    const BaseModel f = obtain_base(cfg, data, log);
    const FeatureExtractor ex = build_extractor(cfg.task, f, data.train, cfg.seed);
    std::map<std::string, SoftSelector> extra;
    if (!cfg.selector_path.empty()) {
        const LoadedSelector loaded = selector_from_text(textio::read_file(cfg.selector_path, "cli"));
        if (loaded.soft.input_dim() != ex.output_dim()) {
            detail::fail<ParameterError>("cli", "selector in '" + cfg.selector_path + "' expects " +
                                                    std::to_string(loaded.soft.input_dim()) + " meta features, extractor gives " +
                                                    std::to_string(ex.output_dim()));
        }
        extra.emplace("loaded", loaded.soft);
    }
    const ResultTable table = run_trials(cfg.plan, cfg.task, f, ex, data, extra);
    textio::write_file((dir / "curves.csv").string(), curves_to_csv(table.mean_curves), "cli");
    textio::write_file((dir / "auc.csv").string(), aucs_to_csv(table.mean_curves), "cli");
    textio::write_file((dir / "trials.csv").string(), trials_to_csv(table), "cli");
    textio::write_file((dir / "auc_summary.csv").string(), aggregate_to_csv(table), "cli");
    std::size_t flagged = 0;
    for (const auto& c : table.cells) flagged += c.flagged ? 1 : 0;
    log << "cells: " << table.cells.size() << " (flagged " << flagged << ")\n";
    for (const auto& c : table.mean_curves) {
        log << c.method << " s_bce2 auc " << textio::format_double(c.aucs.at("s_bce2")) << "\n";
    }
    return table;
}

}  // namespace selcal
