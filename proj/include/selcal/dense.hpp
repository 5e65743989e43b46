#pragma once

// Small fully connected ReLU networks: forward, reverse-mode gradients, and
// the line-oriented text block format shared by every persisted model.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selcal/error.hpp"
#include "selcal/matrix.hpp"
#include "selcal/random.hpp"
#include "selcal/textio.hpp"

namespace selcal {

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> bias;     // out

    DenseLayer() = default;
    DenseLayer(std::size_t in_dim, std::size_t out_dim)
        : in(in_dim), out(out_dim), weights(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

    void apply(std::span<const double> x, std::span<double> y) const {
        for (std::size_t o = 0; o < out; ++o) {
            const double* w = weights.data() + o * in;
            double acc = bias[o];
            for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
            y[o] = acc;
        }
    }

    bool operator==(const DenseLayer&) const = default;
};

/// Gradient (or update) with the same shape as an Mlp.
struct MlpGrads {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> bias;

    void add_scaled(const MlpGrads& o, double s) {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            for (std::size_t k = 0; k < weights[l].size(); ++k) weights[l][k] += s * o.weights[l][k];
            for (std::size_t k = 0; k < bias[l].size(); ++k) bias[l][k] += s * o.bias[l][k];
        }
    }
};

/// ReLU between layers, identity on the last layer.
struct Mlp {
    std::vector<DenseLayer> layers;

    /// Activations of one batch: acts[0] is the input, acts[l] the output of
    /// layer l-1 (post-ReLU for hidden layers, linear for the last).
    struct Trace {
        std::vector<Matrix> acts;
    };

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out; }

    /// Seeded uniform init in +-sqrt(6 / (fan_in + fan_out)); zero biases.
    static Mlp glorot(const std::vector<std::size_t>& sizes, Rng& rng) {
        Mlp net;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            DenseLayer layer(sizes[l], sizes[l + 1]);
            const double a = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
            for (auto& w : layer.weights) w = -a + 2.0 * a * uniform01(rng);
            net.layers.push_back(std::move(layer));
        }
        return net;
    }

    MlpGrads zero_grads() const {
        MlpGrads g;
        for (const auto& l : layers) {
            g.weights.emplace_back(l.weights.size(), 0.0);
            g.bias.emplace_back(l.bias.size(), 0.0);
        }
        return g;
    }

    void apply_update(const MlpGrads& g, double step) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            for (std::size_t k = 0; k < layers[l].weights.size(); ++k) layers[l].weights[k] -= step * g.weights[l][k];
            for (std::size_t k = 0; k < layers[l].bias.size(); ++k) layers[l].bias[k] -= step * g.bias[l][k];
        }
    }

    /// Output of the last hidden layer (the input itself for a single-layer net).
    std::vector<double> penultimate(std::span<const double> x) const {
        std::vector<double> cur(x.begin(), x.end()), next;
        for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
            next.assign(layers[l].out, 0.0);
            layers[l].apply(cur, next);
            for (auto& v : next) v = std::max(v, 0.0);
            cur.swap(next);
        }
        return cur;
    }

    std::vector<double> forward(std::span<const double> x) const {
        auto h = penultimate(x);
        std::vector<double> out(layers.back().out);
        layers.back().apply(h, out);
        return out;
    }

    Trace forward_batch(const Matrix& x) const {
        Trace t;
        t.acts.reserve(layers.size() + 1);
        t.acts.push_back(x);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const Matrix& in = t.acts.back();
            Matrix out(in.rows, layers[l].out);
            const bool relu = l + 1 < layers.size();
            for (std::size_t i = 0; i < in.rows; ++i) {
                auto row = out.row(i);
                layers[l].apply(in.row(i), row);
                if (relu) {
                    for (auto& v : row) v = std::max(v, 0.0);
                }
            }
            t.acts.push_back(std::move(out));
        }
        return t;
    }

    /// Parameter gradient of sum_i <d_out[i], output_i>.
    MlpGrads backward_batch(const Trace& t, const Matrix& d_out) const {
        MlpGrads g = zero_grads();
        const std::size_t n = d_out.rows;
        Matrix delta = d_out;
        for (std::size_t l = layers.size(); l-- > 0;) {
            const DenseLayer& layer = layers[l];
            const Matrix& in = t.acts[l];
            auto& gw = g.weights[l];
            auto& gb = g.bias[l];
            for (std::size_t i = 0; i < n; ++i) {
                const auto di = delta.row(i);
                const auto xi = in.row(i);
                for (std::size_t o = 0; o < layer.out; ++o) {
                    const double d = di[o];
                    if (d == 0.0) continue;
                    gb[o] += d;
                    double* w = gw.data() + o * layer.in;
                    for (std::size_t k = 0; k < layer.in; ++k) w[k] += d * xi[k];
                }
            }
            if (l == 0) break;
            Matrix prev(n, layer.in);
            for (std::size_t i = 0; i < n; ++i) {
                const auto di = delta.row(i);
                auto pi = prev.row(i);
                const auto ai = in.row(i);  // post-ReLU activations of layer l-1
                for (std::size_t o = 0; o < layer.out; ++o) {
                    const double d = di[o];
                    if (d == 0.0) continue;
                    const double* w = layer.weights.data() + o * layer.in;
                    for (std::size_t k = 0; k < layer.in; ++k) pi[k] += d * w[k];
                }
                for (std::size_t k = 0; k < layer.in; ++k) {
                    if (ai[k] <= 0.0) pi[k] = 0.0;
                }
            }
            delta = std::move(prev);
        }
        return g;
    }

    bool operator==(const Mlp&) const = default;
};

namespace detail {

inline void write_layers(std::string& s, const std::vector<DenseLayer>& layers) {
    for (const auto& l : layers) {
        s += std::to_string(l.out) + " " + std::to_string(l.in) + "\n";
        for (std::size_t o = 0; o < l.out; ++o) {
            for (std::size_t i = 0; i < l.in; ++i) {
                if (i) s += ' ';
                s += textio::format_double(l.weights[o * l.in + i]);
            }
            s += '\n';
        }
        for (std::size_t o = 0; o < l.out; ++o) {
            if (o) s += ' ';
            s += textio::format_double(l.bias[o]);
        }
        s += '\n';
    }
}

inline std::vector<double> parse_row(std::string_view line, std::size_t expect, const char* module) {
    const auto cells = textio::split_ws(line);
    if (cells.size() != expect) {
        fail<ParameterError>(module, "expected " + std::to_string(expect) + " values, found " + std::to_string(cells.size()));
    }
    std::vector<double> v;
    v.reserve(expect);
    for (auto c : cells) v.push_back(textio::parse_double(c, module));
    return v;
}

inline bool is_layer_header(std::string_view line) {
    const auto cells = textio::split_ws(line);
    return cells.size() == 2 && std::all_of(line.begin(), line.end(), [](char c) {
               return (c >= '0' && c <= '9') || c == ' ' || c == '\t' || c == '\r';
           });
}

/// Reads consecutive layer blocks starting at lines[pos]; advances pos.
inline std::vector<DenseLayer> read_layers(const std::vector<std::string_view>& lines, std::size_t& pos,
                                           const char* module) {
    std::vector<DenseLayer> layers;
    while (pos < lines.size() && is_layer_header(lines[pos])) {
        const auto hdr = textio::split_ws(lines[pos++]);
        const auto rows = textio::parse_int<std::size_t>(hdr[0], module);
        const auto cols = textio::parse_int<std::size_t>(hdr[1], module);
        DenseLayer l(cols, rows);
        if (pos + rows + 1 > lines.size()) fail<ParameterError>(module, "truncated layer block");
        for (std::size_t o = 0; o < rows; ++o) {
            const auto w = parse_row(lines[pos++], cols, module);
            std::copy(w.begin(), w.end(), l.weights.begin() + static_cast<std::ptrdiff_t>(o * cols));
        }
        l.bias = parse_row(lines[pos++], rows, module);
        if (!layers.empty() && layers.back().out != l.in) fail<ParameterError>(module, "layer shapes do not chain");
        layers.push_back(std::move(l));
    }
    return layers;
}

inline std::vector<std::string_view> nonempty_lines(std::string_view text) {
    std::vector<std::string_view> out;
    for (auto l : textio::split(text, '\n')) {
        if (!textio::trim(l).empty()) out.push_back(textio::trim(l));
    }
    return out;
}

}  // namespace detail

}  // namespace selcal
