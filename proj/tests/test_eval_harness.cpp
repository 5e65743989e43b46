#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <set>

#include "selcal/eval_harness.hpp"

using namespace selcal;
using Catch::Approx;

namespace {

TaskConfig small_toy() {
    TaskConfig c;
    c.toy = {0.5, 0.3};
    c.n_train = 2000;
    c.n_tune = 2000;
    c.n_test = 5000;
    c.features.representation = true;
    c.features.max_reference = 256;
    c.features.iforest_trees = 20;
    c.train_family = PerturbationFamily::parse("feature_noise:0:0.3,group_resample:0:1", 2);
    c.train.m = 4;
    c.train.kappa = 2;
    c.train.sample_size = 300;
    c.train.max_steps = 2;
    return c;
}

struct Setup {
    TaskConfig cfg = small_toy();
    TaskData data = generate_data(cfg, 5);
    BaseModel f = build_base(cfg, data, 5);
    FeatureExtractor ex = build_extractor(cfg, f, data.train, 5);
};

const Setup& setup() {
    static const Setup s;
    return s;
}

TrialPlan one_by_one() {
    TrialPlan p;
    p.num_retrains = 1;
    p.num_test_resamples = 1;
    // Group reweighting leaves X1 untouched; shifts that push X1 outside [0,1]
    // clamp r and create confidence ties that move realized coverage.
    p.test_perturbations = {PerturbationSpec{PerturbationKind::group_resample, 1.0, 7, {0.7, 0.3}}};
    p.seed = 3;
    return p;
}

const ResultTable& one_table() {
    static const ResultTable t = run_trials(one_by_one(), setup().cfg, setup().f, setup().ex, setup().data);
    return t;
}

const CoverageCurve& mean_curve(const ResultTable& t, const std::string& method) {
    for (const auto& c : t.mean_curves) {
        if (c.method == method) return c;
    }
    FAIL("no curve for " << method);
    throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("data generation is seeded and sized") {
    const auto& s = setup();
    CHECK(s.data.train.size() == 2000);
    CHECK(s.data.tune.size() == 2000);
    CHECK(s.data.test.size() == 5000);
    CHECK_FALSE(s.data.base_train.has_value());
    const auto again = generate_data(s.cfg, 5);
    CHECK(again.test.features == s.data.test.features);
    CHECK_FALSE(generate_data(s.cfg, 6).test.features == s.data.test.features);
    CHECK(s.f == BaseModel::analytic_toy());
}

TEST_CASE("evaluated methods") {
    const auto m = evaluated_methods(setup().ex, {"loaded"});
    CHECK(m == std::vector<std::string>{"smmce", "loaded", "full", "confidence", "neg_kde", "neg_iforest", "neg_knn"});
}

TEST_CASE("full method is constant across coverage") {
    const auto& t = one_table();
    for (const auto& c : t.mean_curves) {
        if (c.method != "full") continue;
        for (const auto& row : c.rows) {
            CHECK(row.s_bce2 == c.rows.back().s_bce2);
            CHECK(row.s_brier == c.rows.back().s_brier);
            CHECK(row.realized == 1.0);
        }
        CHECK(c.aucs.at("s_bce2") == Approx(c.rows.back().s_bce2).epsilon(1e-12));
    }
    for (const auto& cell : t.cells) {
        if (cell.method != "full") continue;
        REQUIRE_FALSE(cell.flagged);
    }
}

TEST_CASE("every method agrees with full at coverage 1") {
    const auto& t = one_table();
    std::map<std::pair<std::string, std::string>, double> full;
    for (const auto& r : t.rows) {
        if (r.method == "full" && r.coverage == 1.0) full[{r.perturbation, r.metric}] = r.value;
    }
    REQUIRE_FALSE(full.empty());
    std::size_t checked = 0;
    for (const auto& r : t.rows) {
        if (r.coverage != 1.0) continue;
        CHECK(r.value == full.at({r.perturbation, r.metric}));
        ++checked;
    }
    CHECK(checked == 6 * 2 * 4);
}

TEST_CASE("aggregate std is zero with a single trial") {
    const auto& t = one_table();
    REQUIRE(t.aggregate.size() == 6 * 2 * 4);
    for (const auto& a : t.aggregate) {
        CHECK(a.std_auc == 0.0);
        CHECK(a.trials + a.flagged == 1);
    }
    CHECK(t.reports.size() == 1);
    CHECK(t.reports[0].steps.size() == 2);
}

TEST_CASE("realized coverage tracks the grid") {
    const auto& t = one_table();
    for (const auto& c : t.mean_curves) {
        if (c.method == "full") continue;
        for (const auto& row : c.rows) {
            INFO(c.method << " at " << row.coverage);
            CHECK(std::abs(row.realized - row.coverage) <= 0.02);
        }
    }
}

TEST_CASE("confidence baseline keeps both extremes of r on the toy") {
    const auto& s = setup();
    const auto raw = compute_raw(s.ex, s.f, s.data.test.features);
    const auto conf = baseline_scores(s.ex, raw).at("confidence");
    const double tau = threshold_rule(0.5, conf);
    std::size_t low = 0, mid = 0, high = 0;
    for (std::size_t i = 0; i < conf.size(); ++i) {
        if (conf[i] < tau) continue;
        const double r = raw.probs(i, 1);
        (r < 0.3 ? low : (r > 0.7 ? high : mid)) += 1;
    }
    CHECK(mid == 0);
    CHECK(low > conf.size() / 10);
    CHECK(high > conf.size() / 10);
}

TEST_CASE("multiple trials produce num_retrains x resamples cells") {
    const auto& s = setup();
    TrialPlan p = one_by_one();
    p.num_retrains = 2;
    p.num_test_resamples = 2;
    p.include_clean = false;
    p.threads = 2;
    const auto t = run_trials(p, s.cfg, s.f, s.ex, s.data);
    for (const auto& a : t.aggregate) CHECK(a.trials + a.flagged == 4);
    std::set<std::size_t> trials;
    for (const auto& c : t.cells) trials.insert(c.trial);
    CHECK(trials == std::set<std::size_t>{0, 1, 2, 3});
    // sample standard deviation of the four cell AUCs
    std::vector<double> v;
    for (const auto& c : t.cells) {
        if (c.method == "smmce" && !c.flagged) v.push_back(c.aucs.at("s_bce2"));
    }
    for (const auto& a : t.aggregate) {
        if (a.method != "smmce" || a.metric != "s_bce2") continue;
        double m = 0.0;
        for (double x : v) m += x / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        CHECK(a.mean_auc == Approx(m).epsilon(1e-12));
        CHECK(a.std_auc == Approx(std::sqrt(ss / static_cast<double>(v.size() - 1))).epsilon(1e-12));
    }
    const auto again = run_trials(p, s.cfg, s.f, s.ex, s.data);
    CHECK(trials_to_csv(again) == trials_to_csv(t));
    CHECK(aggregate_to_csv(again) == aggregate_to_csv(t));
}

TEST_CASE("tiny test sets flag cells instead of failing") {
    const auto& s = setup();
    TaskData small = s.data;
    std::vector<std::size_t> idx(300);
    std::iota(idx.begin(), idx.end(), 0);
    small.test = s.data.test.subset(idx);
    const auto t = run_trials(one_by_one(), s.cfg, s.f, s.ex, small);
    for (const auto& c : t.cells) {
        // full keeps every row at every coverage, so it always has enough data
        if (c.method == "full") {
            CHECK_FALSE(c.flagged);
            continue;
        }
        CHECK(c.flagged);
        CHECK(c.reason.find("0.05") != std::string::npos);
    }
    for (const auto& a : t.aggregate) CHECK(a.trials == (a.method == "full" ? 1u : 0u));
    for (const auto& r : t.rows) CHECK(r.method == "full");
    REQUIRE(t.mean_curves.size() == 1);
    CHECK(mean_curve(t, "full").rows.size() == 20);
}

TEST_CASE("result CSV schemas") {
    const auto& t = one_table();
    CHECK(trials_to_csv(t).rfind("trial,method,perturbation,metric,coverage,value\n", 0) == 0);
    CHECK(aggregate_to_csv(t).rfind("method,perturbation,metric,mean_auc,std_auc,trials,flagged\n", 0) == 0);
    CHECK(trials_to_csv(t).find(",full,group_resample@1,s_bce2,") != std::string::npos);
    CHECK(perturbation_label({PerturbationKind::mean_shift, 0.2, 1, {}}) == "mean_shift@0.2");
}

TEST_CASE("plan validation") {
    TrialPlan p;
    p.include_clean = false;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    p = one_by_one();
    p.num_retrains = 0;
    CHECK_THROWS_AS(p.validate(), ParameterError);
}

TEST_CASE("rejection composition") {
    LabeledDataset d;
    d.num_classes = 2;
    d.features = Matrix(4, 1);
    d.labels = {0, 1, 1, 0};
    auto c = rejection_composition(std::vector<double>{1, 1, 1, 1}, d);
    CHECK(c[0].rejected == 0);
    CHECK(c[1].rejected == 0);
    CHECK(c[0].accepted == 2);
    c = rejection_composition(std::vector<double>{1, 0, 1, 0}, d);
    CHECK(c[0].accepted == 1);
    CHECK(c[0].rejected == 1);
    CHECK(c[1].accepted == 1);
    CHECK(c[1].rejected == 1);
    CHECK_THROWS_AS(rejection_composition(std::vector<double>{1}, d), ParameterError);
}

TEST_CASE("oracle toy selection rejects the shifted stratum") {
    const ToySpec spec{0.5, 0.3};
    const auto d = sample_toy(spec, 10000, 8);
    const auto f = BaseModel::analytic_toy();
    const auto bits = oracle_selector([&](std::span<const double> x) { return spec.conditional(x[0], x[1]); }, f, 0.5, d);
    const auto comp = rejection_composition(bits, d);
    std::size_t total = 0, rejected_x2_1 = 0, rejected = 0, x2_0 = 0;
    for (const auto& c : comp) total += c.accepted + c.rejected;
    CHECK(total == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        x2_0 += d.features(i, 1) == 0.0;
        if (bits[i] < 0.5) {
            ++rejected;
            rejected_x2_1 += d.features(i, 1) == 1.0;
        }
    }
    CHECK(rejected_x2_1 == 0);
    CHECK(static_cast<double>(rejected) >= 0.95 * std::min<double>(x2_0, 5000));
    CHECK(comp[0].rejected > 0);
    CHECK(comp[1].rejected > 0);
}

TEST_CASE("mixture task trains a base model") {
    TaskConfig c = small_toy();
    c.task = TaskKind::mixture;
    c.mixture = MixtureSpec::symmetric(3, 2, 3.0, 1.0);
    c.n_base_train = 600;
    c.n_base_val = 300;
    c.arch.epochs = 3;
    c.train_family = PerturbationFamily::parse("feature_noise:0:0.5", 0);
    const auto data = generate_data(c, 2);
    REQUIRE(data.base_train.has_value());
    CHECK(data.base_train->size() == 600);
    bool degenerate = true;
    const auto f = build_base(c, data, 2, &degenerate);
    CHECK_FALSE(degenerate);
    CHECK(f.num_classes == 3);
    CHECK(c.reduction() == Reduction::top_label);
    const auto ex = build_extractor(c, f, data.train, 2);
    CHECK(ex.output_dim() == 1 + 3 + 3 + 3 + 32);
}
