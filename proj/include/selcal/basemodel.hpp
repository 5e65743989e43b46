#pragma once

// The fixed confidence model f: either the analytic toy predictor
// f(X) = X1 or a small trained classifier, optionally temperature scaled.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "selcal/dense.hpp"
#include "selcal/error.hpp"
#include "selcal/matrix.hpp"
#include "selcal/random.hpp"
#include "selcal/synthdata.hpp"
#include "selcal/textio.hpp"

namespace selcal {

enum class BaseKind { analytic_toy, trained_net };

struct BaseModel {
    BaseKind kind = BaseKind::analytic_toy;
    Mlp net;  // trained_net only
    double temperature = 1.0;
    int num_classes = 2;

    static BaseModel analytic_toy() { return BaseModel{}; }

    std::size_t input_dim() const { return kind == BaseKind::analytic_toy ? 2 : net.input_dim(); }
    std::size_t hidden_dim() const {
        if (kind == BaseKind::analytic_toy) return 2;
        return net.layers.size() > 1 ? net.layers.back().in : net.input_dim();
    }

    bool operator==(const BaseModel&) const = default;
};

struct BaseArchConfig {
    std::size_t hidden_layers = 2;
    std::size_t width = 32;
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    double learning_rate = 0.05;
};

namespace detail {

inline void check_input(const BaseModel& m, std::span<const double> x) {
    if (x.size() != m.input_dim()) {
        fail<ParameterError>("basemodel", "input has dimension " + std::to_string(x.size()) + ", model expects " +
                                              std::to_string(m.input_dim()));
    }
}

inline void softmax_inplace(std::span<double> z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (auto& v : z) {
        v = std::exp(v - mx);
        s += v;
    }
    for (auto& v : z) v /= s;
}

}  // namespace detail

/// Raw (untempered) logits of a trained_net.
inline std::vector<double> logits(const BaseModel& m, std::span<const double> x) {
    detail::check_input(m, x);
    if (m.kind != BaseKind::trained_net) detail::fail<ParameterError>("basemodel", "analytic model has no logits");
    return m.net.forward(x);
}

inline std::vector<double> predict(const BaseModel& m, std::span<const double> x) {
    detail::check_input(m, x);
    if (m.kind == BaseKind::analytic_toy) {
        const double r = std::clamp(x[0], 0.0, 1.0);
        return {1.0 - r, r};
    }
    auto z = m.net.forward(x);
    for (auto& v : z) v /= m.temperature;
    detail::softmax_inplace(z);
    return z;
}

inline std::vector<double> hidden(const BaseModel& m, std::span<const double> x) {
    detail::check_input(m, x);
    if (m.kind == BaseKind::analytic_toy) return {x.begin(), x.end()};
    return m.net.penultimate(x);
}

/// n x K probabilities.
inline Matrix predict_batch(const BaseModel& m, const Matrix& x) {
    Matrix out(x.rows, static_cast<std::size_t>(m.num_classes));
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto p = predict(m, x.row(i));
        std::copy(p.begin(), p.end(), out.row(i).begin());
    }
    return out;
}

inline Matrix hidden_batch(const BaseModel& m, const Matrix& x) {
    Matrix out(x.rows, m.hidden_dim());
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto h = hidden(m, x.row(i));
        std::copy(h.begin(), h.end(), out.row(i).begin());
    }
    return out;
}

inline BaseModel init_base(const BaseArchConfig& arch, std::size_t input_dim, int num_classes, std::uint64_t seed) {
    if (input_dim < 1 || num_classes < 2) detail::fail<ParameterError>("basemodel", "bad network shape");
    std::vector<std::size_t> sizes{input_dim};
    for (std::size_t l = 0; l < arch.hidden_layers; ++l) sizes.push_back(arch.width);
    sizes.push_back(static_cast<std::size_t>(num_classes));
    Rng rng(seed);
    BaseModel m;
    m.kind = BaseKind::trained_net;
    m.num_classes = num_classes;
    m.net = Mlp::glorot(sizes, rng);
    return m;
}

/// Mean cross-entropy of the tempered model on `data`.
inline double mean_nll(const BaseModel& m, const LabeledDataset& data) {
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto p = predict(m, data.features.row(i));
        s -= std::log(std::max(p[static_cast<std::size_t>(data.labels[i])], 1e-300));
    }
    return s / static_cast<double>(data.size());
}

/// Mini-batch SGD on cross-entropy. When `epoch_losses` is given it receives
/// the full-data mean loss after every epoch.
inline BaseModel train_base(const LabeledDataset& data, const BaseArchConfig& arch, std::uint64_t seed,
                            std::vector<double>* epoch_losses = nullptr) {
    data.validate();
    std::vector<bool> seen(static_cast<std::size_t>(data.num_classes), false);
    for (int y : data.labels) seen[static_cast<std::size_t>(y)] = true;
    if (std::count(seen.begin(), seen.end(), true) < 2) {
        detail::fail<TrainingError>("basemodel", "training data contains a single class");
    }
    if (arch.batch_size < 1) detail::fail<ParameterError>("basemodel", "batch_size must be >= 1");
    BaseModel m = init_base(arch, data.dim(), data.num_classes, seed);
    Rng rng(derive_seed(seed, 1));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    const auto K = static_cast<std::size_t>(data.num_classes);
    for (std::size_t epoch = 0; epoch < arch.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += arch.batch_size) {
            const std::size_t end = std::min(order.size(), start + arch.batch_size);
            Matrix xb(end - start, data.dim());
            for (std::size_t i = start; i < end; ++i) {
                std::copy_n(data.features.row(order[i]).begin(), data.dim(), xb.row(i - start).begin());
            }
            const auto trace = m.net.forward_batch(xb);
            Matrix d_out(xb.rows, K);
            const double scale = 1.0 / static_cast<double>(xb.rows);
            for (std::size_t i = 0; i < xb.rows; ++i) {
                std::vector<double> p(trace.acts.back().row(i).begin(), trace.acts.back().row(i).end());
                detail::softmax_inplace(p);
                p[static_cast<std::size_t>(data.labels[order[start + i]])] -= 1.0;
                for (std::size_t k = 0; k < K; ++k) d_out(i, k) = p[k] * scale;
            }
            m.net.apply_update(m.net.backward_batch(trace, d_out), arch.learning_rate);
        }
        if (epoch_losses) epoch_losses->push_back(mean_nll(m, data));
    }
    return m;
}

struct TemperatureFit {
    BaseModel model;
    /// Set when validation holds a single class; the temperature is then left unchanged.
    bool degenerate = false;
};

/// Minimizes validation NLL over T in [0.05, 20]: a 50-point log grid, then
/// three rounds of local refinement around the incumbent.
inline TemperatureFit fit_temperature(const BaseModel& model, const LabeledDataset& validation) {
    if (model.kind != BaseKind::trained_net) detail::fail<ParameterError>("basemodel", "only trained nets are tempered");
    if (validation.size() == 0) detail::fail<ParameterError>("basemodel", "validation set is empty");
    TemperatureFit fit{model, false};
    const bool one_class = std::all_of(validation.labels.begin(), validation.labels.end(),
                                       [&](int y) { return y == validation.labels.front(); });
    if (one_class) {
        fit.degenerate = true;
        return fit;
    }
    std::vector<std::vector<double>> z(validation.size());
    for (std::size_t i = 0; i < validation.size(); ++i) z[i] = logits(model, validation.features.row(i));
    auto nll = [&](double t) {
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            double mx = -INFINITY;
            for (double v : z[i]) mx = std::max(mx, v / t);
            double lse = 0.0;
            for (double v : z[i]) lse += std::exp(v / t - mx);
            s += mx + std::log(lse) - z[i][static_cast<std::size_t>(validation.labels[i])] / t;
        }
        return s / static_cast<double>(z.size());
    };
    constexpr double lo = 0.05, hi = 20.0;
    constexpr int grid = 50;
    std::vector<double> ts(grid);
    for (int i = 0; i < grid; ++i) ts[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, i / double(grid - 1));
    std::size_t best = 0;
    double best_val = INFINITY;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double v = nll(ts[i]);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    double a = ts[best == 0 ? 0 : best - 1];
    double b = ts[std::min(best + 1, ts.size() - 1)];
    double best_t = ts[best];
    for (int round = 0; round < 3; ++round) {
        constexpr int pts = 21;
        const double step = (b - a) / (pts - 1);
        for (int i = 0; i < pts; ++i) {
            const double t = a + step * i;
            const double v = nll(t);
            if (v < best_val) {
                best_val = v;
                best_t = t;
            }
        }
        a = std::max(lo, best_t - step);
        b = std::min(hi, best_t + step);
    }
    fit.model.temperature = best_t;
    return fit;
}

inline std::string base_model_to_text(const BaseModel& m) {
    std::string s = std::string(m.kind == BaseKind::analytic_toy ? "analytic_toy" : "trained_net") + " " +
                    std::to_string(m.num_classes) + " " + textio::format_double(m.temperature) + "\n";
    if (m.kind == BaseKind::trained_net) detail::write_layers(s, m.net.layers);
    return s;
}

inline BaseModel base_model_from_text(std::string_view text) {
    const auto lines = detail::nonempty_lines(text);
    if (lines.empty()) detail::fail<ParameterError>("basemodel", "empty model file");
    const auto hdr = textio::split_ws(lines[0]);
    if (hdr.size() != 3) detail::fail<ParameterError>("basemodel", "model header must be 'kind K temperature'");
    BaseModel m;
    if (hdr[0] == "analytic_toy") {
        m.kind = BaseKind::analytic_toy;
    } else if (hdr[0] == "trained_net") {
        m.kind = BaseKind::trained_net;
    } else {
        detail::fail<ParameterError>("basemodel", "unknown model kind '" + std::string(hdr[0]) + "'");
    }
    m.num_classes = textio::parse_int<int>(hdr[1], "basemodel");
    m.temperature = textio::parse_double(hdr[2], "basemodel");
    if (!(m.temperature > 0.0)) detail::fail<ParameterError>("basemodel", "temperature must be positive");
    std::size_t pos = 1;
    if (m.kind == BaseKind::trained_net) {
        m.net.layers = detail::read_layers(lines, pos, "basemodel");
        if (m.net.layers.empty() || m.net.output_dim() != static_cast<std::size_t>(m.num_classes)) {
            detail::fail<ParameterError>("basemodel", "network output does not match K");
        }
    }
    if (pos != lines.size()) detail::fail<ParameterError>("basemodel", "trailing content in model file");
    return m;
}

}  // namespace selcal
