// selcal: generate data, train a selective-calibration selector, evaluate it.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "selcal/commands.hpp"
#include "selcal/config.hpp"

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "Run configuration (key = value)")->required();
    sub->add_option("--seed", c.seed, "Override the config seed");
    sub->add_option("--out", c.out, "Override the output directory");
    sub->add_option("--threads", c.threads, "Cap on worker threads")->check(CLI::PositiveNumber);
}

selcal::RunConfig resolve(const Common& c) {
    selcal::RunConfig cfg = selcal::load_run_config(c.config);
    if (c.seed) selcal::override_seed(cfg, *c.seed);
    if (c.out) cfg.out = *c.out;
    if (c.threads) selcal::override_threads(cfg, *c.threads);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selective calibration toolkit"};
    app.require_subcommand(1);

    Common gen_opts, train_opts, eval_opts;
    std::optional<std::size_t> steps;
    auto* gen = app.add_subcommand("gen", "Write train/tune/test CSVs");
    add_common(gen, gen_opts);
    auto* tr = app.add_subcommand("train", "Train a selector and write its artifacts");
    add_common(tr, train_opts);
    tr->add_option("--steps", steps, "Override the number of optimizer steps");
    auto* ev = app.add_subcommand("eval", "Run the retrain/resample protocol and write curves");
    add_common(ev, eval_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, std::cout, std::cerr);
    }

    try {
        if (gen->parsed()) {
            selcal::cmd_gen(resolve(gen_opts), std::cout);
        } else if (tr->parsed()) {
            auto cfg = resolve(train_opts);
            if (steps) cfg.task.train.max_steps = *steps;
            selcal::cmd_train(cfg, std::cout);
        } else if (ev->parsed()) {
            selcal::cmd_eval(resolve(eval_opts), std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
