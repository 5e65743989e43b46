#include <catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "selcal/kernelstats.hpp"
#include "selcal/random.hpp"
#include "selcal/synthdata.hpp"

using namespace selcal;
using Catch::Approx;

namespace {

ScoredBatch random_batch(Rng& rng, std::size_t n, bool soft_g) {
    ScoredBatch b;
    for (std::size_t i = 0; i < n; ++i) {
        b.r.push_back(uniform01(rng));
        b.y.push_back(uniform01(rng) < 0.5 ? 1.0 : 0.0);
        b.g.push_back(soft_g ? uniform01(rng) : (uniform01(rng) < 0.6 ? 1.0 : 0.0));
    }
    b.g[0] = 1.0;  // never all zero
    return b;
}

double oracle_smmce_u(const ScoredBatch& b, double q, double sigma) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            num += std::pow(std::abs(b.y[i] - b.r[i]), q) * std::pow(std::abs(b.y[j] - b.r[j]), q) * b.g[i] * b.g[j] *
                   oracle::laplace(b.r[i], b.r[j], sigma);
            den += b.g[i] * b.g[j];
        }
    }
    return std::pow(num / den, 1.0 / q);
}

}  // namespace

TEST_CASE("Laplace kernel values") {
    const KernelSpec k{0.2};
    CHECK(kernel_eval(k, 0.3, 0.3) == 1.0);
    CHECK(kernel_eval(k, 0.2, 0.4) == Approx(std::exp(-1.0)).margin(1e-15));
    CHECK(kernel_eval(k, 0.2, 0.4) == Approx(0.367879).margin(1e-6));
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const double a = uniform01(rng), b = uniform01(rng);
        CHECK(kernel_eval(k, a, b) == kernel_eval(k, b, a));
    }
    CHECK_THROWS_AS(KernelSpec{0.0}.validate(), ParameterError);
}

TEST_CASE("empirical MMCE hand cases") {
    const KernelSpec k{0.2};
    CHECK(empirical_mmce_sq({{0.5, 0.5}, {0.0, 1.0}, {}}, k) == Approx(0.0).margin(1e-15));
    CHECK(empirical_mmce_sq({{0.3, 0.6, 0.9}, {0.3, 0.6, 0.9}, {}}, k) == 0.0);
    CHECK(empirical_mmce_sq({{0.8, 0.8}, {0.0, 0.0}, {}}, k) == Approx(0.64).margin(1e-15));
    CHECK_THROWS_AS(empirical_mmce_sq({{0.8}, {0.0}, {}}, k), ParameterError);
}

TEST_CASE("S-MMCE_u hand case") {
    const ScoredBatch b{{0.8, 0.8}, {1.0, 0.0}, {1.0, 1.0}};
    CHECK(empirical_smmce_u(b, 2.0, {0.2}) == Approx(0.34).margin(1e-12));
    CHECK(naive_smmce_u(b, 2.0, {0.2}) == Approx(0.34).margin(1e-12));
}

TEST_CASE("S-MMCE_u is zero when y equals r") {
    Rng rng(4);
    auto b = random_batch(rng, 40, true);
    b.y = b.r;
    CHECK(empirical_smmce_u(b, 2.0, {0.2}) == 0.0);
    CHECK(naive_smmce_u(b, 2.0, {0.2}) == 0.0);
}

TEST_CASE("S-MMCE_u with all-zero weights is degenerate") {
    const ScoredBatch b{{0.2, 0.7}, {1.0, 0.0}, {0.0, 0.0}};
    CHECK_THROWS_AS(empirical_smmce_u(b, 2.0, {0.2}), DegenerateSelectionError);
    CHECK_THROWS_AS(naive_smmce_u(b, 2.0, {0.2}), DegenerateSelectionError);
}

TEST_CASE("kernel-trick estimator matches explicit double loops") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const auto n = 2 + uniform_index(rng, 199);
        const double q = t % 3 == 0 ? 1.0 : (t % 3 == 1 ? 2.0 : 3.5);
        const auto b = random_batch(rng, n, t % 2 == 0);
        const double fast = empirical_smmce_u(b, q, {0.2});
        CHECK(oracle::rel_err(fast, naive_smmce_u(b, q, {0.2}), 1e-300) <= 1e-10);
        CHECK(oracle::rel_err(fast, oracle_smmce_u(b, q, 0.2), 1e-300) <= 1e-10);
    }
}

TEST_CASE("indicator weights equal the sub-batch estimate") {
    Rng rng(6);
    for (int t = 0; t < 20; ++t) {
        const auto b = random_batch(rng, 80, false);
        const ScoredBatch sub = b.selection();
        const ScoredBatch ones{sub.r, sub.y, std::vector<double>(sub.size(), 1.0)};
        CHECK(empirical_smmce_u(b, 2.0, {0.2}) == Approx(empirical_smmce_u(ones, 2.0, {0.2})).epsilon(1e-12));
    }
}

TEST_CASE("S-MMCE_u is invariant to duplicating the batch") {
    Rng rng(7);
    for (int t = 0; t < 10; ++t) {
        const auto b = random_batch(rng, 60, true);
        ScoredBatch d = b;
        d.r.insert(d.r.end(), b.r.begin(), b.r.end());
        d.y.insert(d.y.end(), b.y.begin(), b.y.end());
        d.g.insert(d.g.end(), b.g.begin(), b.g.end());
        CHECK(empirical_smmce_u(d, 2.0, {0.2}) == Approx(empirical_smmce_u(b, 2.0, {0.2})).epsilon(1e-12));
    }
}

namespace {

struct ToyBatch {
    ScoredBatch batch;
    std::vector<double> x2;
};

ToyBatch toy_batch(const ToySpec& spec, std::size_t n, std::uint64_t seed) {
    const auto d = sample_toy(spec, n, seed);
    ToyBatch t;
    for (std::size_t i = 0; i < n; ++i) {
        t.batch.r.push_back(d.features(i, 0));
        t.batch.y.push_back(d.labels[i]);
        t.x2.push_back(d.features(i, 1));
    }
    return t;
}

}  // namespace

TEST_CASE("plug-in S-MMCE vanishes on calibrated selections") {
    const ToySpec calibrated{0.5, 0.0};
    auto t = toy_batch(calibrated, 2000, 1);
    CHECK(plug_in_smmce(t.batch, [](double r) { return r; }, 2.0, {0.2}) == 0.0);

    const ToySpec spec{0.5, 0.3};
    t = toy_batch(spec, 2000, 2);
    t.batch.g = t.x2;  // keep the X2 = 1 stratum, where E[Y | r] = r
    CHECK(plug_in_smmce(t.batch, [](double r) { return r; }, 2.0, {0.2}) <= 1e-12);

    t.batch.g.assign(t.batch.size(), 0.0);
    CHECK_THROWS_AS(plug_in_smmce(t.batch, [](double r) { return r; }, 2.0, {0.2}), DegenerateSelectionError);
}

TEST_CASE("plug-in S-MMCE lies below the S-MMCE_u estimate") {
    const ToySpec spec{0.5, 0.3};
    std::vector<double> emp, plug;
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto t = toy_batch(spec, 4000, 100 + s);
        emp.push_back(empirical_smmce_u(t.batch, 2.0, {0.2}));
        plug.push_back(plug_in_smmce(t.batch, [&](double r) { return spec.marginal_conditional(r); }, 2.0, {0.2}));
    }
    double mean = 0.0, sq = 0.0;
    for (double v : emp) mean += v / emp.size();
    for (double v : emp) sq += (v - mean) * (v - mean);
    const double se = std::sqrt(sq / (emp.size() - 1));
    for (std::size_t i = 0; i < emp.size(); ++i) CHECK(plug[i] <= emp[i] + 3.0 * se);
}

TEST_CASE("plug-in S-MMCE is bounded by the exact selective calibration error") {
    const ToySpec spec{0.5, 0.3};
    auto cond = [&](double r) { return spec.marginal_conditional(r); };
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto t = toy_batch(spec, 1500, 200 + s);
        for (bool half : {false, true}) {
            if (half) {
                for (std::size_t i = 0; i < t.batch.size(); ++i) t.batch.g.push_back(t.batch.r[i] < 0.6 ? 1.0 : 0.0);
            } else {
                t.batch.g.clear();
            }
            double acc = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < t.batch.size(); ++i) {
                if (!t.batch.selected(i)) continue;
                acc += std::pow(std::abs(cond(t.batch.r[i]) - t.batch.r[i]), 2.0);
                ++n;
            }
            const double exact = std::sqrt(acc / n);
            CHECK(plug_in_smmce(t.batch, cond, 2.0, {0.2}) <= exact * (1.0 + 1e-6));
        }
    }
}

TEST_CASE("batch validation") {
    CHECK_THROWS_AS(empirical_smmce_u({{0.2, 1.2}, {0.0, 1.0}, {}}, 2.0, {0.2}), ParameterError);
    CHECK_THROWS_AS(empirical_smmce_u({{0.2, 0.3}, {0.0}, {}}, 2.0, {0.2}), ParameterError);
    CHECK_THROWS_AS(empirical_smmce_u({{0.2, 0.3}, {0.0, 1.0}, {}}, 0.5, {0.2}), ParameterError);
}
