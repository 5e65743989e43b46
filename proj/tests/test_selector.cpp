#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "selcal/selector.hpp"

using namespace selcal;
using Catch::Approx;

namespace {

Matrix random_meta(Rng& rng, std::size_t n, std::size_t d) {
    Matrix m(n, d);
    for (auto& v : m.data) v = standard_normal(rng);
    return m;
}

double weighted_sum(const SoftSelector& s, const Matrix& x, const std::vector<double>& w) {
    const auto sc = selector_scores(s, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < sc.size(); ++i) acc += w[i] * sc[i];
    return acc;
}

}  // namespace

TEST_CASE("zero network scores 0.5") {
    auto s = SoftSelector::init(5, 1);
    for (auto& l : s.net.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    Rng rng(2);
    for (double v : selector_scores(s, random_meta(rng, 10, 5))) CHECK(v == 0.5);
}

TEST_CASE("initial scores sit near sigmoid(2)") {
    const auto s = SoftSelector::init(3, 4);
    CHECK(s.net.layers.size() == 3);
    CHECK(s.net.layers[0].out == 64);
    CHECK(s.net.layers[1].out == 64);
    CHECK(s.net.layers.back().bias[0] == 2.0);
    Rng rng(1);
    for (double v : selector_scores(s, random_meta(rng, 50, 3))) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("scaling the final layer pushes scores outward without reordering") {
    Rng rng(3);
    const auto s = SoftSelector::init(4, 5);
    const auto x = random_meta(rng, 200, 4);
    const auto base = selector_scores(s, x);
    auto big = s;
    for (auto& w : big.net.layers.back().weights) w *= 3.0;
    big.net.layers.back().bias[0] *= 3.0;
    const auto scaled = selector_scores(big, x);
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(std::abs(scaled[i] - 0.5) >= std::abs(base[i] - 0.5));
        CHECK((scaled[i] >= 0.5) == (base[i] >= 0.5));
        for (std::size_t j = 0; j < base.size(); ++j) {
            if (base[i] < base[j]) CHECK(scaled[i] <= scaled[j]);
        }
    }
}

TEST_CASE("identical inputs give identical scores") {
    Rng rng(4);
    const auto s = SoftSelector::init(6, 7);
    const auto x = random_meta(rng, 1, 6);
    Matrix two(2, 6);
    std::copy(x.data.begin(), x.data.end(), two.row(0).begin());
    std::copy(x.data.begin(), x.data.end(), two.row(1).begin());
    const auto sc = selector_scores(s, two);
    CHECK(sc[0] == sc[1]);
    CHECK(selector_score(s, x.row(0)) == sc[0]);
}

TEST_CASE("dimension mismatch and missing cache") {
    const auto s = SoftSelector::init(3, 1);
    CHECK_THROWS_AS(forward(s, Matrix(2, 4)), ParameterError);
    CHECK_THROWS_AS(backward(s, SelectorCache{}, std::vector<double>{}), StateError);
    Rng rng(1);
    const auto c = forward(s, random_meta(rng, 3, 3));
    CHECK_THROWS_AS(backward(s, c, std::vector<double>{1.0}), StateError);
    CHECK_THROWS_AS(SoftSelector::init(0, 1), ParameterError);
}

TEST_CASE("zero upstream gives zero gradients") {
    Rng rng(5);
    const auto s = SoftSelector::init(4, 2);
    const auto x = random_meta(rng, 8, 4);
    const auto g = backward(s, forward(s, x), std::vector<double>(8, 0.0));
    for (const auto& w : g.weights) {
        for (double v : w) CHECK(v == 0.0);
    }
    for (const auto& b : g.bias) {
        for (double v : b) CHECK(v == 0.0);
    }
}

TEST_CASE("backward matches central differences on every layer") {
    Rng rng(6);
    for (int trial = 0; trial < 5; ++trial) {
        auto s = SoftSelector::init(5, 100 + static_cast<std::uint64_t>(trial), 16);
        s.standardizer = Standardizer::fit(random_meta(rng, 50, 5));
        const auto x = random_meta(rng, 12, 5);
        std::vector<double> w(12);
        for (auto& v : w) v = standard_normal(rng);
        const auto g = backward(s, forward(s, x), w);
        for (std::size_t l = 0; l < 3; ++l) {
            for (int k = 0; k < 20; ++k) {
                const bool use_bias = k % 4 == 3;
                auto& params = use_bias ? s.net.layers[l].bias : s.net.layers[l].weights;
                const std::size_t idx = uniform_index(rng, params.size());
                const double analytic = use_bias ? g.bias[l][idx] : g.weights[l][idx];
                const double h = 1e-5, orig = params[idx];
                params[idx] = orig + h;
                const double up = weighted_sum(s, x, w);
                params[idx] = orig - h;
                const double down = weighted_sum(s, x, w);
                params[idx] = orig;
                const double numeric = (up - down) / (2.0 * h);
                INFO("layer " << l << " idx " << idx << " bias " << use_bias);
                CHECK(oracle::rel_err(analytic, numeric, 1e-6) <= 1e-4);
            }
        }
    }
}

TEST_CASE("batch gradient is the sum of per-example gradients") {
    Rng rng(7);
    const auto s = SoftSelector::init(3, 9);
    const auto x = random_meta(rng, 2, 3);
    const auto both = backward(s, forward(s, x), std::vector<double>{1.0, 1.0});
    Matrix a(1, 3), b(1, 3);
    std::copy_n(x.row(0).begin(), 3, a.row(0).begin());
    std::copy_n(x.row(1).begin(), 3, b.row(0).begin());
    auto sum = backward(s, forward(s, a), std::vector<double>{1.0});
    sum.add_scaled(backward(s, forward(s, b), std::vector<double>{1.0}), 1.0);
    for (std::size_t l = 0; l < 3; ++l) {
        for (std::size_t k = 0; k < sum.weights[l].size(); ++k) CHECK(both.weights[l][k] == Approx(sum.weights[l][k]).margin(1e-14));
        for (std::size_t k = 0; k < sum.bias[l].size(); ++k) CHECK(both.bias[l][k] == Approx(sum.bias[l][k]).margin(1e-14));
    }
}

TEST_CASE("standardization centers, scales and clips") {
    Matrix x(4, 2);
    x.data = {0.0, 5.0, 2.0, 5.0, 4.0, 5.0, 6.0, 5.0};
    const auto st = Standardizer::fit(x);
    CHECK(st.mean[0] == 3.0);
    CHECK(st.scale[0] == Approx(std::sqrt(5.0)));
    CHECK(st.scale[1] == 1.0);
    Matrix far(1, 2);
    far.data = {1e6, -1e6};
    const auto z = st.apply(far);
    CHECK(z(0, 0) == kStandardizedClip);
    CHECK(z(0, 1) == -kStandardizedClip);
}

TEST_CASE("threshold rule examples") {
    const std::vector<double> s{0.9, 0.5, 0.1};
    CHECK(threshold_rule(0.5, s) == 0.5);
    CHECK(threshold_rule(1.0, s) == 0.1);
    CHECK(threshold_rule(0.2, s) == 0.9);
    const std::vector<double> unbounded{-1e300, 3.0, -7.5};
    CHECK(threshold_rule(1.0, unbounded) == -1e300);
    CHECK_THROWS_AS(threshold_rule(0.0, s), ParameterError);
    CHECK_THROWS_AS(threshold_rule(1.01, s), ParameterError);
    CHECK_THROWS_AS(threshold_rule(0.5, std::vector<double>{}), ParameterError);
}

TEST_CASE("threshold is the largest tau reaching the target coverage") {
    Rng rng(8);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 1 + uniform_index(rng, 60);
        std::vector<double> s(n);
        for (auto& v : s) v = uniform01(rng);
        const double xi = 0.01 + 0.99 * uniform01(rng);
        const double tau = threshold_rule(xi, s);
        const double cov = coverage_at(tau, s);
        CHECK(cov >= xi - 1e-12);
        CHECK(cov <= xi + 1.0 / static_cast<double>(n) + 1e-12);
        // every larger candidate falls short
        for (double c : s) {
            if (c > tau) CHECK(coverage_at(c, s) < xi);
        }
    }
}

TEST_CASE("threshold and coverage monotonicity") {
    Rng rng(9);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> s(40);
        for (auto& v : s) v = std::round(uniform01(rng) * 10.0) / 10.0;  // ties allowed
        double prev_tau = INFINITY;
        for (int k = 1; k <= 20; ++k) {
            const double tau = threshold_rule(k * 0.05, s);
            CHECK(tau <= prev_tau);
            CHECK(coverage_at(tau, s) >= k * 0.05 - 1e-12);
            prev_tau = tau;
        }
        auto sorted = s;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 1; i < sorted.size(); ++i) CHECK(coverage_at(sorted[i], s) <= coverage_at(sorted[i - 1], s));
    }
}

TEST_CASE("binarize is idempotent and selects by tau") {
    Rng rng(10);
    const auto s = SoftSelector::init(3, 3);
    const auto tune = selector_scores(s, random_meta(rng, 500, 3));
    const auto h1 = binarize(s, tune, 0.7);
    const auto h2 = binarize(h1.soft, tune, 0.7);
    CHECK(h1.tau == h2.tau);
    CHECK(h1.tau == threshold_rule(0.7, tune));
    const auto x = random_meta(rng, 100, 3);
    const auto scores = selector_scores(s, x);
    const auto bits = h1.select(x);
    for (std::size_t i = 0; i < bits.size(); ++i) CHECK(bits[i] == (scores[i] >= h1.tau ? 1.0 : 0.0));
}

TEST_CASE("coverage concentration over fresh draws") {
    struct Case {
        std::size_t eta;
        double xi, eps;
    };
    for (const auto c : {Case{1000, 0.8, 0.05}, Case{500, 0.5, 0.05}, Case{2000, 0.9, 0.03}}) {
        Rng rng(11 + c.eta);
        const int reps = 1000;
        int violations = 0;
        for (int r = 0; r < reps; ++r) {
            std::vector<double> tune(c.eta);
            for (auto& v : tune) v = uniform01(rng);
            // Scores are Unif(0,1) so the population coverage of tau is 1 - tau.
            const double cov = 1.0 - threshold_rule(c.xi, tune);
            violations += cov <= c.xi - c.eps;
        }
        const double bound = std::exp(-2.0 * static_cast<double>(c.eta) * c.eps * c.eps);
        INFO("eta " << c.eta << " xi " << c.xi << " eps " << c.eps);
        CHECK(static_cast<double>(violations) / reps <= 3.0 * bound);
    }
    CHECK(std::exp(-2.0 * 1000 * 0.0025) == Approx(0.0067).margin(1e-4));
}

TEST_CASE("selector text round trip") {
    Rng rng(12);
    auto s = SoftSelector::init(4, 13);
    s.standardizer = Standardizer::fit(random_meta(rng, 30, 4));
    const auto plain = selector_to_text(s);
    CHECK(plain.rfind("selector ", 0) == 0);
    auto back = selector_from_text(plain);
    CHECK(back.soft == s);
    CHECK_FALSE(back.tau.has_value());

    const HardSelector h{s, 0.625};
    const auto text = selector_to_text(h);
    CHECK(text.find("\ntau 0.625\n") != std::string::npos);
    back = selector_from_text(text);
    CHECK(back.soft == s);
    REQUIRE(back.tau.has_value());
    CHECK(*back.tau == 0.625);
    CHECK_THROWS_AS(selector_from_text("trained_net 2 1\n"), ParameterError);
    CHECK_THROWS_AS(selector_from_text(text + "extra 1\n"), ParameterError);
}
