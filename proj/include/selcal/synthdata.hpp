#pragma once

// Synthetic labeled distributions and the dataset-level perturbation family
// used to simulate test-time shift.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selcal/error.hpp"
#include "selcal/matrix.hpp"
#include "selcal/random.hpp"
#include "selcal/textio.hpp"

namespace selcal {

/// Two-feature toy: X1 ~ Unif(0,1), X2 ~ Bern(mix), Y ~ Bern(X1) on the
/// X2 = 1 stratum and Bern(min(X1 + delta, 1)) on the X2 = 0 stratum.
struct ToySpec {
    double mix = 0.5;
    double delta = 0.3;

    void validate() const {
        if (!(mix > 0.0 && mix < 1.0)) detail::fail<ParameterError>("synthdata", "toy mix must lie in (0,1)");
        // delta = 0 is accepted as the perfectly calibrated limit.
        if (!(delta >= 0.0 && delta <= 1.0)) detail::fail<ParameterError>("synthdata", "toy delta must lie in [0,1]");
    }

    /// P(Y = 1 | X1 = x1, X2 = x2).
    double conditional(double x1, double x2) const {
        const double p = x2 >= 0.5 ? x1 : std::min(x1 + delta, 1.0);
        return std::clamp(p, 0.0, 1.0);
    }

    /// P(Y = 1 | f(X) = r) with f(X) = X1 and no selection.
    double marginal_conditional(double r) const {
        return mix * r + (1.0 - mix) * std::min(r + delta, 1.0);
    }
};

struct MixtureSpec {
    int num_classes = 2;
    int dim = 2;
    std::vector<std::vector<double>> class_means;
    /// Isotropic covariance is class_covariance_scale * I.
    double class_covariance_scale = 1.0;
    std::vector<double> class_priors;

    void validate() const {
        if (num_classes < 2) detail::fail<ParameterError>("synthdata", "mixture needs at least 2 classes");
        if (dim < 1) detail::fail<ParameterError>("synthdata", "mixture dim must be >= 1");
        if (class_means.size() != static_cast<std::size_t>(num_classes)) {
            detail::fail<ParameterError>("synthdata", "mixture needs one mean per class");
        }
        for (const auto& m : class_means) {
            if (m.size() != static_cast<std::size_t>(dim)) {
                detail::fail<ParameterError>("synthdata", "mixture mean dimension does not match dim");
            }
        }
        if (!(class_covariance_scale >= 0.0)) detail::fail<ParameterError>("synthdata", "covariance scale must be >= 0");
        if (class_priors.size() != static_cast<std::size_t>(num_classes)) {
            detail::fail<ParameterError>("synthdata", "mixture needs one prior per class");
        }
        double s = 0.0;
        for (double p : class_priors) {
            if (!(p >= 0.0)) detail::fail<ParameterError>("synthdata", "mixture priors must be non-negative");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-12) detail::fail<ParameterError>("synthdata", "mixture priors must sum to 1");
    }

    /// Class means spread evenly on a circle of radius `separation` (a line when dim == 1).
    static MixtureSpec symmetric(int num_classes, int dim, double separation, double covariance_scale) {
        MixtureSpec s;
        s.num_classes = num_classes;
        s.dim = dim;
        s.class_covariance_scale = covariance_scale;
        s.class_priors.assign(static_cast<std::size_t>(std::max(num_classes, 0)), 1.0 / std::max(num_classes, 1));
        for (int k = 0; k < num_classes; ++k) {
            std::vector<double> m(static_cast<std::size_t>(std::max(dim, 0)), 0.0);
            if (dim == 1) {
                m[0] = separation * (k - 0.5 * (num_classes - 1));
            } else if (dim >= 2) {
                const double a = 2.0 * std::numbers::pi * k / num_classes;
                m[0] = separation * std::cos(a);
                m[1] = separation * std::sin(a);
            }
            s.class_means.push_back(std::move(m));
        }
        return s;
    }
};

enum class PerturbationKind { feature_noise, feature_scale, rotation, mean_shift, group_resample };

inline std::string_view to_string(PerturbationKind k) {
    switch (k) {
        case PerturbationKind::feature_noise: return "feature_noise";
        case PerturbationKind::feature_scale: return "feature_scale";
        case PerturbationKind::rotation: return "rotation";
        case PerturbationKind::mean_shift: return "mean_shift";
        case PerturbationKind::group_resample: return "group_resample";
    }
    return "unknown";
}

inline PerturbationKind parse_perturbation_kind(std::string_view s) {
    s = textio::trim(s);
    for (auto k : {PerturbationKind::feature_noise, PerturbationKind::feature_scale, PerturbationKind::rotation,
                   PerturbationKind::mean_shift, PerturbationKind::group_resample}) {
        if (s == to_string(k)) return k;
    }
    detail::fail<ParameterError>("synthdata", "unknown perturbation kind '" + std::string(s) + "'");
}

/// Whether `intensity` is admissible for `kind` at all (family ranges are narrower).
inline bool intensity_legal(PerturbationKind kind, double intensity) {
    if (!std::isfinite(intensity)) return false;
    switch (kind) {
        case PerturbationKind::feature_scale: return intensity > 0.0;
        case PerturbationKind::rotation: return intensity >= 0.0 && intensity <= 2.0 * std::numbers::pi;
        case PerturbationKind::group_resample: return intensity >= 0.0 && intensity <= 1.0;
        default: return intensity >= 0.0;
    }
}

struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::feature_noise;
    double intensity = 0.0;
    std::uint64_t seed = 0;
    /// group_resample only.
    std::vector<double> group_weights;

    void validate() const {
        if (!intensity_legal(kind, intensity)) {
            detail::fail<ParameterError>("synthdata", "intensity " + textio::format_double(intensity) +
                                                          " is outside the legal range of " +
                                                          std::string(to_string(kind)));
        }
        if (!group_weights.empty()) {
            double s = 0.0;
            for (double w : group_weights) {
                if (!(w >= 0.0)) detail::fail<ParameterError>("synthdata", "group weights must be non-negative");
                s += w;
            }
            if (std::abs(s - 1.0) > 1e-9) detail::fail<ParameterError>("synthdata", "group weights must sum to 1");
        }
    }

    /// `kind=...;intensity=...;seed=...[;weights=a,b,...]`
    std::string to_line() const {
        std::string s = "kind=" + std::string(to_string(kind)) + ";intensity=" + textio::format_double(intensity) +
                        ";seed=" + std::to_string(seed);
        if (!group_weights.empty()) {
            s += ";weights=";
            for (std::size_t i = 0; i < group_weights.size(); ++i) {
                if (i) s += ",";
                s += textio::format_double(group_weights[i]);
            }
        }
        return s;
    }

    static PerturbationSpec from_line(std::string_view line) {
        PerturbationSpec p;
        bool have_kind = false;
        for (auto field : textio::split(textio::trim(line), ';')) {
            field = textio::trim(field);
            if (field.empty()) continue;
            const auto eq = field.find('=');
            if (eq == std::string_view::npos) {
                detail::fail<ParameterError>("synthdata", "malformed perturbation field '" + std::string(field) + "'");
            }
            const auto key = textio::trim(field.substr(0, eq));
            const auto val = textio::trim(field.substr(eq + 1));
            if (key == "kind") {
                p.kind = parse_perturbation_kind(val);
                have_kind = true;
            } else if (key == "intensity") {
                p.intensity = textio::parse_double(val, "synthdata");
            } else if (key == "seed") {
                p.seed = textio::parse_int<std::uint64_t>(val, "synthdata");
            } else if (key == "weights") {
                for (auto w : textio::split(val, ',')) p.group_weights.push_back(textio::parse_double(w, "synthdata"));
            } else {
                detail::fail<ParameterError>("synthdata", "unknown perturbation field '" + std::string(key) + "'");
            }
        }
        if (!have_kind) detail::fail<ParameterError>("synthdata", "perturbation line lacks kind");
        p.validate();
        return p;
    }

    bool operator==(const PerturbationSpec&) const = default;
};

struct LabeledDataset {
    Matrix features;
    std::vector<int> labels;
    int num_classes = 2;
    /// Column whose rounded value defines the resampling group; -1 groups by label.
    int group_column = -1;
    /// Empty for clean data.
    std::optional<PerturbationSpec> perturbation;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols; }

    void validate() const {
        if (labels.empty()) detail::fail<ParameterError>("synthdata", "dataset must hold at least one row");
        if (features.rows != labels.size()) detail::fail<ParameterError>("synthdata", "feature/label row mismatch");
        for (int y : labels) {
            if (y < 0 || y >= num_classes) detail::fail<ParameterError>("synthdata", "label out of range");
        }
        for (double v : features.data) {
            if (!std::isfinite(v)) detail::fail<ParameterError>("synthdata", "non-finite feature value");
        }
    }

    int group_of(std::size_t i, std::size_t num_groups) const {
        int g = group_column < 0 ? labels[i]
                                 : static_cast<int>(std::lround(features(i, static_cast<std::size_t>(group_column))));
        return std::clamp(g, 0, static_cast<int>(num_groups) - 1);
    }

    /// Rows at `idx`, in order; provenance is kept.
    LabeledDataset subset(const std::vector<std::size_t>& idx) const {
        LabeledDataset out;
        out.features = Matrix(idx.size(), dim());
        out.labels.resize(idx.size());
        out.num_classes = num_classes;
        out.group_column = group_column;
        out.perturbation = perturbation;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            std::copy_n(features.row(idx[i]).begin(), dim(), out.features.row(i).begin());
            out.labels[i] = labels[idx[i]];
        }
        return out;
    }
};

inline LabeledDataset sample_toy(const ToySpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) detail::fail<ParameterError>("synthdata", "sample size must be >= 1");
    Rng rng(seed);
    LabeledDataset d;
    d.features = Matrix(n, 2);
    d.labels.resize(n);
    d.num_classes = 2;
    d.group_column = 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = uniform01(rng);
        const double x2 = uniform01(rng) < spec.mix ? 1.0 : 0.0;
        const double p = spec.conditional(x1, x2);
        d.features(i, 0) = x1;
        d.features(i, 1) = x2;
        d.labels[i] = uniform01(rng) < p ? 1 : 0;
    }
    return d;
}

inline LabeledDataset sample_mixture(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) detail::fail<ParameterError>("synthdata", "sample size must be >= 1");
    Rng rng(seed);
    const auto dim = static_cast<std::size_t>(spec.dim);
    const double sd = std::sqrt(spec.class_covariance_scale);
    LabeledDataset d;
    d.features = Matrix(n, dim);
    d.labels.resize(n);
    d.num_classes = spec.num_classes;
    d.group_column = -1;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = uniform01(rng);
        int k = spec.num_classes - 1;
        double acc = 0.0;
        for (int c = 0; c < spec.num_classes; ++c) {
            acc += spec.class_priors[static_cast<std::size_t>(c)];
            if (u < acc) {
                k = c;
                break;
            }
        }
        d.labels[i] = k;
        const auto& mean = spec.class_means[static_cast<std::size_t>(k)];
        for (std::size_t j = 0; j < dim; ++j) d.features(i, j) = mean[j] + sd * standard_normal(rng);
    }
    return d;
}

/// Number of resampling groups a dataset exposes.
inline std::size_t group_count(const LabeledDataset& data) {
    return data.group_column < 0 ? static_cast<std::size_t>(data.num_classes) : 2;
}

/// Returns t applied to `data`; the input is never modified.
inline LabeledDataset apply_perturbation(const LabeledDataset& data, const PerturbationSpec& t) {
    t.validate();
    LabeledDataset out = data;
    out.perturbation = t;
    Rng rng(t.seed);
    const std::size_t n = data.size();
    const std::size_t d = data.dim();
    switch (t.kind) {
        case PerturbationKind::feature_noise:
            if (t.intensity > 0.0) {
                for (double& v : out.features.data) v += t.intensity * standard_normal(rng);
            }
            break;
        case PerturbationKind::feature_scale:
            for (double& v : out.features.data) v *= t.intensity;
            break;
        case PerturbationKind::rotation: {
            if (d < 2) detail::fail<ParameterError>("synthdata", "rotation needs at least 2 feature columns");
            std::size_t a = 0, b = 1;
            if (d > 2) {
                a = uniform_index(rng, d);
                b = uniform_index(rng, d - 1);
                if (b >= a) ++b;
            }
            // Rotate about the column means so the cloud stays in place.
            double ma = 0.0, mb = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                ma += data.features(i, a);
                mb += data.features(i, b);
            }
            ma /= static_cast<double>(n);
            mb /= static_cast<double>(n);
            const double c = std::cos(t.intensity), s = std::sin(t.intensity);
            for (std::size_t i = 0; i < n; ++i) {
                const double u = data.features(i, a) - ma, v = data.features(i, b) - mb;
                out.features(i, a) = ma + c * u - s * v;
                out.features(i, b) = mb + s * u + c * v;
            }
            break;
        }
        case PerturbationKind::mean_shift: {
            std::vector<double> dir(d);
            double norm = 0.0;
            while (norm < 1e-12) {
                norm = 0.0;
                for (auto& v : dir) {
                    v = standard_normal(rng);
                    norm += v * v;
                }
                norm = std::sqrt(norm);
            }
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < d; ++j) out.features(i, j) += t.intensity * dir[j] / norm;
            }
            break;
        }
        case PerturbationKind::group_resample: {
            if (t.group_weights.empty()) detail::fail<ParameterError>("synthdata", "group_resample requires group weights");
            const std::size_t ng = t.group_weights.size();
            std::vector<std::vector<std::size_t>> members(ng);
            for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(data.group_of(i, ng))].push_back(i);
            // Groups with no members cannot be drawn; renormalize over the rest.
            std::vector<double> w(ng, 0.0);
            double total = 0.0;
            for (std::size_t g = 0; g < ng; ++g) {
                if (!members[g].empty()) w[g] = t.group_weights[g];
                total += w[g];
            }
            if (total <= 0.0) detail::fail<ParameterError>("synthdata", "group weights put no mass on a populated group");
            std::vector<std::size_t> idx(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double u = uniform01(rng) * total;
                std::size_t g = ng - 1;
                double acc = 0.0;
                for (std::size_t k = 0; k < ng; ++k) {
                    acc += w[k];
                    if (u < acc && w[k] > 0.0) {
                        g = k;
                        break;
                    }
                }
                while (w[g] <= 0.0) --g;  // u rounding onto an empty tail group
                idx[i] = members[g][uniform_index(rng, members[g].size())];
            }
            out = data.subset(idx);
            out.perturbation = t;
            break;
        }
    }
    return out;
}

struct IntensityRange {
    PerturbationKind kind = PerturbationKind::feature_noise;
    double lo = 0.0;
    double hi = 0.0;
};

/// A perturbation family: kinds with uniform intensity ranges.
struct PerturbationFamily {
    std::vector<IntensityRange> kinds;
    /// Length of sampled group_weights vectors.
    std::size_t num_groups = 2;

    void validate() const {
        if (kinds.empty()) detail::fail<ParameterError>("synthdata", "perturbation family has no kinds");
        for (const auto& k : kinds) {
            if (!(k.lo <= k.hi) || !intensity_legal(k.kind, k.lo) || !intensity_legal(k.kind, k.hi)) {
                detail::fail<ParameterError>("synthdata", "illegal intensity range for " + std::string(selcal::to_string(k.kind)));
            }
        }
        if (num_groups < 1) detail::fail<ParameterError>("synthdata", "num_groups must be >= 1");
    }

    /// Parses `kind:lo:hi,kind:lo:hi,...`.
    static PerturbationFamily parse(std::string_view s, std::size_t num_groups) {
        PerturbationFamily f;
        f.num_groups = num_groups;
        for (auto item : textio::split(textio::trim(s), ',')) {
            item = textio::trim(item);
            if (item.empty()) continue;
            auto parts = textio::split(item, ':');
            if (parts.size() != 3) {
                detail::fail<ParameterError>("synthdata", "family entry '" + std::string(item) + "' must be kind:lo:hi");
            }
            f.kinds.push_back({parse_perturbation_kind(parts[0]), textio::parse_double(parts[1], "synthdata"),
                               textio::parse_double(parts[2], "synthdata")});
        }
        return f;
    }

    std::string to_string() const {
        std::string s;
        for (std::size_t i = 0; i < kinds.size(); ++i) {
            if (i) s += ",";
            s += std::string(selcal::to_string(kinds[i].kind)) + ":" + textio::format_double(kinds[i].lo) + ":" +
                 textio::format_double(kinds[i].hi);
        }
        return s;
    }
};

inline std::vector<PerturbationSpec> sample_perturbation_batch(const PerturbationFamily& family, std::size_t m,
                                                               std::uint64_t seed) {
    family.validate();
    if (m < 1) detail::fail<ParameterError>("synthdata", "perturbation batch size must be >= 1");
    Rng rng(seed);
    std::vector<PerturbationSpec> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& range = family.kinds[uniform_index(rng, family.kinds.size())];
        PerturbationSpec p;
        p.kind = range.kind;
        p.intensity = range.lo + (range.hi - range.lo) * uniform01(rng);
        p.seed = rng();
        if (p.kind == PerturbationKind::group_resample) {
            // Blend of uniform group weights and a flat Dirichlet draw; intensity sets the tilt.
            std::vector<double> dir(family.num_groups);
            double s = 0.0;
            for (auto& v : dir) {
                v = -std::log(1.0 - uniform01(rng));
                s += v;
            }
            p.group_weights.resize(family.num_groups);
            const double uni = 1.0 / static_cast<double>(family.num_groups);
            double total = 0.0;
            for (std::size_t g = 0; g < family.num_groups; ++g) {
                p.group_weights[g] = (1.0 - p.intensity) * uni + p.intensity * dir[g] / s;
                total += p.group_weights[g];
            }
            for (auto& v : p.group_weights) v /= total;
        }
        out.push_back(std::move(p));
    }
    return out;
}

/// CSV with header `x0,...,x{d-1},y`.
inline std::string dataset_to_csv(const LabeledDataset& data) {
    std::string s;
    for (std::size_t j = 0; j < data.dim(); ++j) s += "x" + std::to_string(j) + ",";
    s += "y\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < data.dim(); ++j) {
            s += textio::format_double(data.features(i, j));
            s += ',';
        }
        s += std::to_string(data.labels[i]);
        s += '\n';
    }
    return s;
}

inline LabeledDataset dataset_from_csv(std::string_view text, int group_column = -1) {
    auto lines = textio::split(text, '\n');
    while (!lines.empty() && textio::trim(lines.back()).empty()) lines.pop_back();
    if (lines.size() < 2) detail::fail<ParameterError>("synthdata", "CSV needs a header and at least one row");
    const auto header = textio::split(textio::trim(lines[0]), ',');
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j) {
        if (textio::trim(header[j]) != "x" + std::to_string(j)) detail::fail<ParameterError>("synthdata", "bad CSV header");
    }
    if (textio::trim(header.back()) != "y") detail::fail<ParameterError>("synthdata", "bad CSV header");
    LabeledDataset data;
    data.features = Matrix(lines.size() - 1, d);
    data.labels.resize(lines.size() - 1);
    data.group_column = group_column;
    int max_label = 1;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = textio::split(textio::trim(lines[i]), ',');
        if (cells.size() != d + 1) detail::fail<ParameterError>("synthdata", "CSV row " + std::to_string(i) + " has wrong width");
        for (std::size_t j = 0; j < d; ++j) data.features(i - 1, j) = textio::parse_double(cells[j], "synthdata");
        data.labels[i - 1] = textio::parse_int<int>(cells[d], "synthdata");
        max_label = std::max(max_label, data.labels[i - 1]);
    }
    data.num_classes = max_label + 1;
    data.validate();
    return data;
}

}  // namespace selcal
