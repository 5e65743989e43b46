#pragma once

// Soft selector g~ = sigmoid(FFNN(standardized meta features)) and its
// binarization by a coverage-targeting threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selcal/dense.hpp"
#include "selcal/error.hpp"
#include "selcal/matrix.hpp"
#include "selcal/random.hpp"
#include "selcal/textio.hpp"
#include "selcal/threshold.hpp"

namespace selcal {

/// Standardized inputs are clipped to +-this many scales; shifted data can
/// otherwise put outlier scores hundreds of scales out.
inline constexpr double kStandardizedClip = 6.0;

/// Per-column affine standardization (x - mean) / scale, clipped.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer identity(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }

    static Standardizer fit(const Matrix& x) {
        Standardizer s = identity(x.cols);
        if (x.rows == 0) return s;
        const double n = static_cast<double>(x.rows);
        for (std::size_t j = 0; j < x.cols; ++j) {
            double m = 0.0, sq = 0.0;
            for (std::size_t i = 0; i < x.rows; ++i) m += x(i, j);
            m /= n;
            for (std::size_t i = 0; i < x.rows; ++i) sq += (x(i, j) - m) * (x(i, j) - m);
            const double sd = std::sqrt(sq / n);
            s.mean[j] = m;
            s.scale[j] = sd > 1e-8 ? sd : 1.0;  // constant columns pass through centered
        }
        return s;
    }

    Matrix apply(const Matrix& x) const {
        Matrix out = x;
        for (std::size_t i = 0; i < x.rows; ++i) {
            for (std::size_t j = 0; j < x.cols; ++j) {
                out(i, j) = std::clamp((x(i, j) - mean[j]) / scale[j], -kStandardizedClip, kStandardizedClip);
            }
        }
        return out;
    }

    bool operator==(const Standardizer&) const = default;
};

inline double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

struct SoftSelector {
    Mlp net;
    Standardizer standardizer;

    std::size_t input_dim() const { return net.input_dim(); }

    /// Three affine maps (in -> hidden -> hidden -> 1), uniform init in
    /// +-sqrt(6 / (fan_in + fan_out)), final bias +2 so initial scores sit near 0.88.
    static SoftSelector init(std::size_t input_dim, std::uint64_t seed, std::size_t hidden = 64) {
        if (input_dim < 1) detail::fail<ParameterError>("selector", "selector input dimension must be >= 1");
        Rng rng(seed);
        SoftSelector s;
        s.net = Mlp::glorot({input_dim, hidden, hidden, 1}, rng);
        s.net.layers.back().bias[0] = 2.0;
        s.standardizer = Standardizer::identity(input_dim);
        return s;
    }

    bool operator==(const SoftSelector&) const = default;
};

/// Activations retained by a forward pass, consumed by backward.
struct SelectorCache {
    Mlp::Trace trace;
    std::vector<double> scores;
    bool valid = false;
};

inline SelectorCache forward(const SoftSelector& s, const Matrix& meta) {
    if (meta.cols != s.input_dim()) {
        detail::fail<ParameterError>("selector", "meta vector has dimension " + std::to_string(meta.cols) +
                                                     ", selector expects " + std::to_string(s.input_dim()));
    }
    SelectorCache c;
    c.trace = s.net.forward_batch(s.standardizer.apply(meta));
    const Matrix& z = c.trace.acts.back();
    c.scores.resize(z.rows);
    for (std::size_t i = 0; i < z.rows; ++i) c.scores[i] = sigmoid(z(i, 0));
    c.valid = true;
    return c;
}

inline std::vector<double> selector_scores(const SoftSelector& s, const Matrix& meta) { return forward(s, meta).scores; }

inline double selector_score(const SoftSelector& s, std::span<const double> meta) {
    Matrix one(1, meta.size());
    std::copy(meta.begin(), meta.end(), one.row(0).begin());
    return forward(s, one).scores[0];
}

/// Gradient of sum_i upstream[i] * score_i with respect to every parameter.
inline MlpGrads backward(const SoftSelector& s, const SelectorCache& cache, std::span<const double> upstream) {
    if (!cache.valid || cache.trace.acts.empty()) detail::fail<StateError>("selector", "backward called without a forward cache");
    if (upstream.size() != cache.scores.size()) detail::fail<StateError>("selector", "upstream gradient does not match cached batch");
    Matrix d_out(upstream.size(), 1);
    for (std::size_t i = 0; i < upstream.size(); ++i) {
        const double p = cache.scores[i];
        d_out(i, 0) = upstream[i] * p * (1.0 - p);
    }
    return s.net.backward_batch(cache.trace, d_out);
}

struct HardSelector {
    SoftSelector soft;
    double tau = 0.0;

    /// g(x) = 1{g~(x) >= tau}, one 0/1 entry per row.
    std::vector<double> select(const Matrix& meta) const {
        auto s = selector_scores(soft, meta);
        for (auto& v : s) v = v >= tau ? 1.0 : 0.0;
        return s;
    }
};

inline HardSelector binarize(const SoftSelector& s, std::span<const double> tune_scores, double xi) {
    return HardSelector{s, threshold_rule(xi, tune_scores)};
}

/// Model-file layout with kind tag `selector`, then standardization
/// statistics, then `tau <value>` when binarized.
inline std::string selector_to_text(const SoftSelector& s, std::optional<double> tau = std::nullopt) {
    std::string out = "selector 1 1\n";
    detail::write_layers(out, s.net.layers);
    auto row = [&](const char* tag, const std::vector<double>& v) {
        out += tag;
        for (double x : v) out += " " + textio::format_double(x);
        out += "\n";
    };
    row("mean", s.standardizer.mean);
    row("scale", s.standardizer.scale);
    if (tau) out += "tau " + textio::format_double(*tau) + "\n";
    return out;
}

inline std::string selector_to_text(const HardSelector& h) { return selector_to_text(h.soft, h.tau); }

struct LoadedSelector {
    SoftSelector soft;
    std::optional<double> tau;
};

inline LoadedSelector selector_from_text(std::string_view text) {
    constexpr const char* mod = "selector";
    const auto lines = detail::nonempty_lines(text);
    if (lines.empty() || textio::split_ws(lines[0]).front() != "selector") {
        detail::fail<ParameterError>(mod, "not a selector file");
    }
    std::size_t pos = 1;
    LoadedSelector out;
    out.soft.net.layers = detail::read_layers(lines, pos, mod);
    if (out.soft.net.layers.size() != 3 || out.soft.net.output_dim() != 1) {
        detail::fail<ParameterError>(mod, "selector must have three layers and a scalar output");
    }
    const std::size_t d = out.soft.input_dim();
    auto read_row = [&](std::string_view tag) {
        if (pos >= lines.size()) detail::fail<ParameterError>(mod, "missing '" + std::string(tag) + "' row");
        auto cells = textio::split_ws(lines[pos++]);
        if (cells.empty() || cells[0] != tag || cells.size() != d + 1) {
            detail::fail<ParameterError>(mod, "malformed '" + std::string(tag) + "' row");
        }
        std::vector<double> v;
        for (std::size_t i = 1; i < cells.size(); ++i) v.push_back(textio::parse_double(cells[i], mod));
        return v;
    };
    out.soft.standardizer.mean = read_row("mean");
    out.soft.standardizer.scale = read_row("scale");
    if (pos < lines.size()) {
        const auto cells = textio::split_ws(lines[pos++]);
        if (cells.size() != 2 || cells[0] != "tau") detail::fail<ParameterError>(mod, "malformed tau row");
        out.tau = textio::parse_double(cells[1], mod);
    }
    if (pos != lines.size()) detail::fail<ParameterError>(mod, "trailing content in selector file");
    return out;
}

}  // namespace selcal
