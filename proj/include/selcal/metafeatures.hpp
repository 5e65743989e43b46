#pragma once

// Per-example meta features for the selector: confidence, predicted class,
// full distribution, and three outlier scores computed on the base model's
// hidden representation (KDE, isolation forest, kNN distance).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "selcal/basemodel.hpp"
#include "selcal/calmetrics.hpp"
#include "selcal/error.hpp"
#include "selcal/matrix.hpp"
#include "selcal/random.hpp"
#include "selcal/textio.hpp"

namespace selcal {

/// Product-Gaussian kernel density over stored points.
struct KernelDensity {
    Matrix points;
    std::vector<double> bandwidth;  // per dimension

    /// Scott-style rule: n^(-1/(d+4)) times each column's standard deviation.
    static KernelDensity fit(const Matrix& pts, double scale = 1.0) {
        KernelDensity k;
        k.points = pts;
        const double n = static_cast<double>(pts.rows);
        const double factor = std::pow(n, -1.0 / (static_cast<double>(pts.cols) + 4.0)) * scale;
        for (std::size_t j = 0; j < pts.cols; ++j) {
            double mean = 0.0, sq = 0.0;
            for (std::size_t i = 0; i < pts.rows; ++i) mean += pts(i, j);
            mean /= n;
            for (std::size_t i = 0; i < pts.rows; ++i) sq += (pts(i, j) - mean) * (pts(i, j) - mean);
            const double sd = std::sqrt(sq / std::max(n - 1.0, 1.0));
            k.bandwidth.push_back(factor * std::max(sd, 1e-3));
        }
        return k;
    }

    double log_density(std::span<const double> x) const {
        const std::size_t n = points.rows, d = points.cols;
        double log_norm = 0.0;
        std::vector<double> inv(d);
        for (std::size_t j = 0; j < d; ++j) {
            log_norm -= std::log(bandwidth[j]) + 0.5 * std::log(2.0 * std::numbers::pi);
            inv[j] = 1.0 / bandwidth[j];
        }
        std::vector<double> ex(n);
        double mx = -INFINITY;
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = points.row(i);
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double z = (x[j] - p[j]) * inv[j];
                s += z * z;
            }
            ex[i] = -0.5 * s;
            mx = std::max(mx, ex[i]);
        }
        double acc = 0.0;
        for (double e : ex) acc += std::exp(e - mx);
        return log_norm + mx + std::log(acc) - std::log(static_cast<double>(n));
    }

    double density(std::span<const double> x) const { return std::exp(log_density(x)); }
};

namespace detail {

inline double harmonic(std::size_t n) {
    double h = 0.0;
    for (std::size_t k = 1; k <= n; ++k) h += 1.0 / static_cast<double>(k);
    return h;
}

}  // namespace detail

/// Average unsuccessful-search path length in a BST of n nodes:
/// c(n) = 2 H(n-1) - 2 (n-1) / n, with c(n) = 0 for n <= 1.
inline double iforest_path_normalizer(std::size_t n) {
    if (n <= 1) return 0.0;
    const double nn = static_cast<double>(n);
    return 2.0 * detail::harmonic(n - 1) - 2.0 * (nn - 1.0) / nn;
}

struct IsolationForest {
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double split = 0.0;
        int left = -1;
        int right = -1;
        double leaf_adjust = 0.0;  // c(leaf size) at leaves
    };

    std::vector<std::vector<Node>> trees;
    std::size_t subsample = 256;

    static IsolationForest fit(const Matrix& pts, std::size_t num_trees, std::size_t subsample, std::uint64_t seed) {
        IsolationForest f;
        f.subsample = std::min(subsample, pts.rows);
        const auto max_depth =
            static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(f.subsample, 2)))));
        Rng rng(seed);
        std::vector<std::size_t> all(pts.rows);
        std::iota(all.begin(), all.end(), 0);
        for (std::size_t t = 0; t < num_trees; ++t) {
            // Partial Fisher-Yates draws the subsample without replacement.
            for (std::size_t i = 0; i < f.subsample; ++i) std::swap(all[i], all[i + uniform_index(rng, pts.rows - i)]);
            std::vector<std::size_t> idx(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(f.subsample));
            std::vector<Node> nodes;
            build(pts, idx, 0, idx.size(), 0, max_depth, rng, nodes);
            f.trees.push_back(std::move(nodes));
        }
        return f;
    }

    double path_length(std::span<const double> x, const std::vector<Node>& nodes) const {
        int cur = 0;
        double depth = 0.0;
        while (nodes[static_cast<std::size_t>(cur)].feature >= 0) {
            const auto& nd = nodes[static_cast<std::size_t>(cur)];
            cur = x[static_cast<std::size_t>(nd.feature)] < nd.split ? nd.left : nd.right;
            depth += 1.0;
        }
        return depth + nodes[static_cast<std::size_t>(cur)].leaf_adjust;
    }

    double mean_path_length(std::span<const double> x) const {
        double s = 0.0;
        for (const auto& t : trees) s += path_length(x, t);
        return s / static_cast<double>(trees.size());
    }

    /// 2^(-E[h(x)] / c(subsample)), in (0, 1); larger is more anomalous.
    double anomaly_score(std::span<const double> x) const {
        return std::pow(2.0, -mean_path_length(x) / iforest_path_normalizer(subsample));
    }

private:
    static int build(const Matrix& pts, std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, std::size_t depth,
                     std::size_t max_depth, Rng& rng, std::vector<Node>& nodes) {
        const int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        const std::size_t size = hi - lo;
        auto make_leaf = [&] { nodes[static_cast<std::size_t>(id)].leaf_adjust = iforest_path_normalizer(size); };
        if (depth >= max_depth || size <= 1) {
            make_leaf();
            return id;
        }
        std::vector<std::size_t> candidates;
        std::vector<double> lows, highs;
        for (std::size_t j = 0; j < pts.cols; ++j) {
            double mn = INFINITY, mx = -INFINITY;
            for (std::size_t k = lo; k < hi; ++k) {
                mn = std::min(mn, pts(idx[k], j));
                mx = std::max(mx, pts(idx[k], j));
            }
            if (mx > mn) {
                candidates.push_back(j);
                lows.push_back(mn);
                highs.push_back(mx);
            }
        }
        if (candidates.empty()) {
            make_leaf();
            return id;
        }
        const std::size_t c = uniform_index(rng, candidates.size());
        const std::size_t feat = candidates[c];
        double split = lows[c] + (highs[c] - lows[c]) * uniform01(rng);
        if (split <= lows[c]) split = std::nextafter(lows[c], highs[c]);
        const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(hi),
                                        [&](std::size_t r) { return pts(r, feat) < split; });
        const auto m = static_cast<std::size_t>(mid - idx.begin());
        nodes[static_cast<std::size_t>(id)].feature = static_cast<int>(feat);
        nodes[static_cast<std::size_t>(id)].split = split;
        const int l = build(pts, idx, lo, m, depth + 1, max_depth, rng, nodes);
        const int r = build(pts, idx, m, hi, depth + 1, max_depth, rng, nodes);
        nodes[static_cast<std::size_t>(id)].left = l;
        nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }
};

/// Mean Euclidean distance to the k nearest stored points.
struct NearestNeighbors {
    Matrix points;
    std::size_t k = 10;

    double mean_distance(std::span<const double> x) const {
        const std::size_t kk = std::min(k, points.rows);
        // best[0..kk) holds the smallest squared distances seen so far, ascending.
        std::vector<double> best(kk, INFINITY);
        for (std::size_t i = 0; i < points.rows; ++i) {
            const auto p = points.row(i);
            double s = 0.0;
            for (std::size_t j = 0; j < points.cols; ++j) s += (x[j] - p[j]) * (x[j] - p[j]);
            if (s >= best[kk - 1]) continue;
            std::size_t pos = kk - 1;
            while (pos > 0 && best[pos - 1] > s) {
                best[pos] = best[pos - 1];
                --pos;
            }
            best[pos] = s;
        }
        double acc = 0.0;
        for (double d : best) acc += std::sqrt(d);
        return acc / static_cast<double>(kk);
    }
};

struct FeatureConfig {
    bool confidence = true;
    bool onehot = true;
    bool distribution = true;
    bool kde = true;
    bool iforest = true;
    bool knn = true;
    /// Appends the raw hidden representation; off by default.
    bool representation = false;

    std::size_t knn_k = 10;
    std::size_t iforest_trees = 100;
    std::size_t iforest_subsample = 256;
    /// KDE and kNN keep at most this many (seeded) training points.
    std::size_t max_reference = 1024;
    std::size_t projection_dim = 128;
    double kde_bandwidth_scale = 1.0;

    bool uses_outlier_scores() const { return kde || iforest || knn; }
    bool operator==(const FeatureConfig&) const = default;
};

struct FeatureExtractor {
    FeatureConfig config;
    int num_classes = 2;
    std::size_t rep_dim = 0;
    /// rep_dim x projection_dim with orthonormal columns; empty when no projection is needed.
    Matrix projection;
    KernelDensity kde;
    IsolationForest forest;
    NearestNeighbors knn;
    bool fitted = false;

    std::size_t output_dim() const {
        const auto K = static_cast<std::size_t>(num_classes);
        return (config.confidence ? 1 : 0) + (config.onehot ? K : 0) + (config.distribution ? K : 0) +
               (config.kde ? 1 : 0) + (config.iforest ? 1 : 0) + (config.knn ? 1 : 0) +
               (config.representation ? rep_dim : 0);
    }

    std::vector<double> project(std::span<const double> h) const {
        if (projection.rows == 0) return {h.begin(), h.end()};
        std::vector<double> z(projection.cols, 0.0);
        for (std::size_t i = 0; i < projection.rows; ++i) {
            for (std::size_t j = 0; j < projection.cols; ++j) z[j] += h[i] * projection(i, j);
        }
        return z;
    }
};

/// Raw ingredients from which meta vectors and baseline scores are assembled.
struct RawFeatures {
    Matrix probs;
    Matrix reps;
    std::vector<double> log_density;
    std::vector<double> anomaly;
    std::vector<double> knn_distance;
};

namespace detail {

inline Matrix random_orthonormal(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix q(rows, cols);
    for (auto& v : q.data) v = standard_normal(rng);
    // Modified Gram-Schmidt on the columns.
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t p = 0; p < c; ++p) {
            double dot = 0.0;
            for (std::size_t r = 0; r < rows; ++r) dot += q(r, c) * q(r, p);
            for (std::size_t r = 0; r < rows; ++r) q(r, c) -= dot * q(r, p);
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < rows; ++r) norm += q(r, c) * q(r, c);
        norm = std::sqrt(norm);
        for (std::size_t r = 0; r < rows; ++r) q(r, c) /= norm;
    }
    return q;
}

inline Matrix project_rows(const FeatureExtractor& ex, const Matrix& reps) {
    if (ex.projection.rows == 0) return reps;
    Matrix out(reps.rows, ex.projection.cols);
    for (std::size_t i = 0; i < reps.rows; ++i) {
        const auto z = ex.project(reps.row(i));
        std::copy(z.begin(), z.end(), out.row(i).begin());
    }
    return out;
}

}  // namespace detail

inline FeatureExtractor fit_extractor(const Matrix& train_reps, int num_classes, const FeatureConfig& config,
                                      std::uint64_t seed) {
    if (train_reps.rows < 50) {
        detail::fail<TrainingError>("metafeatures", "need at least 50 training representations, got " +
                                                        std::to_string(train_reps.rows));
    }
    if (num_classes < 2) detail::fail<ParameterError>("metafeatures", "num_classes must be >= 2");
    if (config.knn_k < 1 || config.iforest_trees < 1 || config.iforest_subsample < 2 || config.max_reference < 1 ||
        config.projection_dim < 1 || !(config.kde_bandwidth_scale > 0.0)) {
        detail::fail<ParameterError>("metafeatures", "invalid feature configuration");
    }
    FeatureExtractor ex;
    ex.config = config;
    ex.num_classes = num_classes;
    ex.rep_dim = train_reps.cols;
    Rng rng(seed);
    if (config.uses_outlier_scores() && train_reps.cols > config.projection_dim) {
        ex.projection = detail::random_orthonormal(train_reps.cols, config.projection_dim, rng);
    }
    const Matrix z = detail::project_rows(ex, train_reps);
    Matrix ref = z;
    if (z.rows > config.max_reference) {
        std::vector<std::size_t> idx(z.rows);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < config.max_reference; ++i) std::swap(idx[i], idx[i + uniform_index(rng, z.rows - i)]);
        idx.resize(config.max_reference);
        std::sort(idx.begin(), idx.end());
        ref = Matrix(idx.size(), z.cols);
        for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(z.row(idx[i]).begin(), z.cols, ref.row(i).begin());
    }
    if (config.kde) ex.kde = KernelDensity::fit(ref, config.kde_bandwidth_scale);
    if (config.knn) ex.knn = NearestNeighbors{ref, config.knn_k};
    if (config.iforest) ex.forest = IsolationForest::fit(z, config.iforest_trees, config.iforest_subsample, derive_seed(seed, 7));
    ex.fitted = true;
    return ex;
}

inline RawFeatures compute_raw(const FeatureExtractor& ex, const BaseModel& model, const Matrix& x) {
    if (!ex.fitted) detail::fail<StateError>("metafeatures", "extractor used before fit");
    if (model.num_classes != ex.num_classes) detail::fail<ParameterError>("metafeatures", "model/extractor class mismatch");
    RawFeatures raw;
    raw.probs = predict_batch(model, x);
    raw.reps = hidden_batch(model, x);
    if (raw.reps.cols != ex.rep_dim) detail::fail<ParameterError>("metafeatures", "representation dimension mismatch");
    if (ex.config.uses_outlier_scores()) {
        const Matrix z = detail::project_rows(ex, raw.reps);
        for (std::size_t i = 0; i < z.rows; ++i) {
            if (ex.config.kde) raw.log_density.push_back(ex.kde.log_density(z.row(i)));
            if (ex.config.iforest) raw.anomaly.push_back(ex.forest.anomaly_score(z.row(i)));
            if (ex.config.knn) raw.knn_distance.push_back(ex.knn.mean_distance(z.row(i)));
        }
    }
    return raw;
}

/// One meta vector per row: [confidence | one-hot | distribution | kde | iforest | knn | representation],
/// inactive blocks omitted.
inline Matrix assemble_meta(const FeatureExtractor& ex, const RawFeatures& raw) {
    const auto K = static_cast<std::size_t>(ex.num_classes);
    Matrix out(raw.probs.rows, ex.output_dim());
    for (std::size_t i = 0; i < raw.probs.rows; ++i) {
        const auto p = raw.probs.row(i);
        const auto top = argmax(p);
        auto o = out.row(i);
        std::size_t c = 0;
        if (ex.config.confidence) o[c++] = p[top];
        if (ex.config.onehot) {
            for (std::size_t k = 0; k < K; ++k) o[c++] = k == top ? 1.0 : 0.0;
        }
        if (ex.config.distribution) {
            for (std::size_t k = 0; k < K; ++k) o[c++] = p[k];
        }
        if (ex.config.kde) o[c++] = raw.log_density[i];
        if (ex.config.iforest) o[c++] = raw.anomaly[i];
        if (ex.config.knn) o[c++] = raw.knn_distance[i];
        if (ex.config.representation) {
            for (std::size_t j = 0; j < raw.reps.cols; ++j) o[c++] = raw.reps(i, j);
        }
    }
    return out;
}

inline Matrix extract_batch(const FeatureExtractor& ex, const BaseModel& model, const Matrix& x) {
    return assemble_meta(ex, compute_raw(ex, model, x));
}

inline std::vector<double> extract(const FeatureExtractor& ex, const BaseModel& model, std::span<const double> x) {
    Matrix one(1, x.size());
    std::copy(x.begin(), x.end(), one.row(0).begin());
    const Matrix m = extract_batch(ex, model, one);
    return m.data;
}

/// Baseline selection scores, oriented so higher means "keep".
inline std::map<std::string, std::vector<double>> baseline_scores(const FeatureExtractor& ex, const RawFeatures& raw) {
    std::map<std::string, std::vector<double>> out;
    auto& conf = out["confidence"];
    for (std::size_t i = 0; i < raw.probs.rows; ++i) conf.push_back(raw.probs(i, argmax(raw.probs.row(i))));
    if (ex.config.kde) out["neg_kde"] = raw.log_density;
    if (ex.config.iforest) {
        auto& v = out["neg_iforest"];
        for (double a : raw.anomaly) v.push_back(-a);
    }
    if (ex.config.knn) {
        auto& v = out["neg_knn"];
        for (double d : raw.knn_distance) v.push_back(-d);
    }
    return out;
}

inline std::map<std::string, std::vector<double>> baseline_scores(const FeatureExtractor& ex, const BaseModel& model,
                                                                   const LabeledDataset& data) {
    return baseline_scores(ex, compute_raw(ex, model, data.features));
}

namespace detail {

inline void write_matrix(std::string& s, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) s += ' ';
            s += textio::format_double(m(i, j));
        }
        s += '\n';
    }
}

inline Matrix read_matrix(const std::vector<std::string_view>& lines, std::size_t& pos, std::size_t rows,
                          std::size_t cols, const char* module) {
    Matrix m(rows, cols);
    if (pos + rows > lines.size()) fail<ParameterError>(module, "truncated matrix block");
    for (std::size_t i = 0; i < rows; ++i) {
        const auto v = parse_row(lines[pos++], cols, module);
        std::copy(v.begin(), v.end(), m.row(i).begin());
    }
    return m;
}

inline std::vector<std::string_view> expect_tag(const std::vector<std::string_view>& lines, std::size_t& pos,
                                                std::string_view tag, std::size_t fields, const char* module) {
    if (pos >= lines.size()) fail<ParameterError>(module, "missing '" + std::string(tag) + "' section");
    auto cells = textio::split_ws(lines[pos++]);
    if (cells.empty() || cells[0] != tag || cells.size() != fields + 1) {
        fail<ParameterError>(module, "expected '" + std::string(tag) + "' section");
    }
    cells.erase(cells.begin());
    return cells;
}

}  // namespace detail

inline std::string extractor_to_text(const FeatureExtractor& ex) {
    if (!ex.fitted) detail::fail<StateError>("metafeatures", "cannot persist an unfitted extractor");
    const auto& c = ex.config;
    auto b = [](bool v) { return std::string(v ? "1" : "0"); };
    std::string s = "extractor " + std::to_string(ex.num_classes) + " 1\n";
    s += "flags " + b(c.confidence) + " " + b(c.onehot) + " " + b(c.distribution) + " " + b(c.kde) + " " + b(c.iforest) +
         " " + b(c.knn) + " " + b(c.representation) + "\n";
    s += "params " + std::to_string(c.knn_k) + " " + std::to_string(c.iforest_trees) + " " +
         std::to_string(c.iforest_subsample) + " " + std::to_string(c.max_reference) + " " +
         std::to_string(c.projection_dim) + " " + textio::format_double(c.kde_bandwidth_scale) + " " +
         std::to_string(ex.rep_dim) + "\n";
    s += "projection " + std::to_string(ex.projection.rows) + " " + std::to_string(ex.projection.cols) + "\n";
    detail::write_matrix(s, ex.projection);
    s += "kde " + std::to_string(ex.kde.points.rows) + " " + std::to_string(ex.kde.points.cols) + "\n";
    if (ex.kde.points.rows) {
        Matrix bw(1, ex.kde.bandwidth.size());
        bw.data = ex.kde.bandwidth;
        detail::write_matrix(s, bw);
        detail::write_matrix(s, ex.kde.points);
    }
    s += "knn " + std::to_string(ex.knn.points.rows) + " " + std::to_string(ex.knn.points.cols) + "\n";
    detail::write_matrix(s, ex.knn.points);
    s += "forest " + std::to_string(ex.forest.trees.size()) + " " + std::to_string(ex.forest.subsample) + "\n";
    for (const auto& t : ex.forest.trees) {
        s += "tree " + std::to_string(t.size()) + "\n";
        for (const auto& nd : t) {
            s += std::to_string(nd.feature) + " " + textio::format_double(nd.split) + " " + std::to_string(nd.left) + " " +
                 std::to_string(nd.right) + " " + textio::format_double(nd.leaf_adjust) + "\n";
        }
    }
    return s;
}

inline FeatureExtractor extractor_from_text(std::string_view text) {
    constexpr const char* mod = "metafeatures";
    const auto lines = detail::nonempty_lines(text);
    std::size_t pos = 0;
    const auto hdr = detail::expect_tag(lines, pos, "extractor", 2, mod);
    FeatureExtractor ex;
    ex.num_classes = textio::parse_int<int>(hdr[0], mod);
    const auto flags = detail::expect_tag(lines, pos, "flags", 7, mod);
    auto flag = [&](std::size_t i) { return textio::parse_int<int>(flags[i], mod) != 0; };
    auto& c = ex.config;
    c.confidence = flag(0);
    c.onehot = flag(1);
    c.distribution = flag(2);
    c.kde = flag(3);
    c.iforest = flag(4);
    c.knn = flag(5);
    c.representation = flag(6);
    const auto params = detail::expect_tag(lines, pos, "params", 7, mod);
    c.knn_k = textio::parse_int<std::size_t>(params[0], mod);
    c.iforest_trees = textio::parse_int<std::size_t>(params[1], mod);
    c.iforest_subsample = textio::parse_int<std::size_t>(params[2], mod);
    c.max_reference = textio::parse_int<std::size_t>(params[3], mod);
    c.projection_dim = textio::parse_int<std::size_t>(params[4], mod);
    c.kde_bandwidth_scale = textio::parse_double(params[5], mod);
    ex.rep_dim = textio::parse_int<std::size_t>(params[6], mod);
    auto dims = [&](std::string_view tag) {
        const auto d = detail::expect_tag(lines, pos, tag, 2, mod);
        return std::pair{textio::parse_int<std::size_t>(d[0], mod), textio::parse_int<std::size_t>(d[1], mod)};
    };
    auto [pr, pc] = dims("projection");
    ex.projection = detail::read_matrix(lines, pos, pr, pc, mod);
    auto [kr, kc] = dims("kde");
    if (kr) {
        ex.kde.bandwidth = detail::read_matrix(lines, pos, 1, kc, mod).data;
        ex.kde.points = detail::read_matrix(lines, pos, kr, kc, mod);
    }
    auto [nr, nc] = dims("knn");
    ex.knn.points = detail::read_matrix(lines, pos, nr, nc, mod);
    ex.knn.k = c.knn_k;
    auto [nt, sub] = dims("forest");
    ex.forest.subsample = sub;
    for (std::size_t t = 0; t < nt; ++t) {
        const auto tn = detail::expect_tag(lines, pos, "tree", 1, mod);
        const auto count = textio::parse_int<std::size_t>(tn[0], mod);
        std::vector<IsolationForest::Node> nodes(count);
        for (auto& nd : nodes) {
            if (pos >= lines.size()) detail::fail<ParameterError>(mod, "truncated tree");
            const auto cells = textio::split_ws(lines[pos++]);
            if (cells.size() != 5) detail::fail<ParameterError>(mod, "malformed tree node");
            nd.feature = textio::parse_int<int>(cells[0], mod);
            nd.split = textio::parse_double(cells[1], mod);
            nd.left = textio::parse_int<int>(cells[2], mod);
            nd.right = textio::parse_int<int>(cells[3], mod);
            nd.leaf_adjust = textio::parse_double(cells[4], mod);
        }
        ex.forest.trees.push_back(std::move(nodes));
    }
    if (pos != lines.size()) detail::fail<ParameterError>(mod, "trailing content in extractor file");
    ex.fitted = true;
    return ex;
}

}  // namespace selcal
