#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "tforge/errors.hpp"
#include "tforge/models.hpp"
#include "tforge/rng.hpp"

namespace tforge {

namespace {

constexpr std::size_t kMaxBins = 32;

std::vector<double> bin_edges(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::vector<double> unique = values;
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    std::vector<double> edges;
    if (unique.size() <= kMaxBins) {
        edges.assign(unique.begin(), unique.end() - (unique.empty() ? 0 : 1));
        return edges;
    }
    const std::size_t n = values.size();
    for (std::size_t j = 1; j < kMaxBins; ++j) {
        const double q = values[j * n / kMaxBins];
        if (q < unique.back() && (edges.empty() || q > edges.back())) edges.push_back(q);
    }
    return edges;
}

// Per-row codes for one input: numeric values or category indices.
std::vector<std::vector<double>> code_rows(const ForestModel& model, const Dataset& rows) {
    std::vector<std::vector<double>> coded(model.inputs.size());
    for (std::size_t f = 0; f < model.inputs.size(); ++f) {
        const auto& in = model.inputs[f];
        const auto c = rows.find(in.name);
        if (!c) throw SchemaMismatch(fmt::format("input '{}' is missing", in.name));
        if (rows.schema[*c].is_numeric() != in.numeric) throw SchemaMismatch(fmt::format("input '{}' changed kind", in.name));
        const auto& column = rows.columns[*c];
        if (in.numeric) {
            coded[f] = column.numbers;
        } else {
            std::unordered_map<std::string, double> index;
            for (std::size_t i = 0; i < in.categories.size(); ++i) index[in.categories[i]] = static_cast<double>(i);
            coded[f].reserve(rows.rows());
            for (const auto& v : column.strings) {
                auto it = index.find(v);
                coded[f].push_back(it == index.end() ? static_cast<double>(in.categories.size()) : it->second);
            }
        }
    }
    return coded;
}

struct Sample {
    std::uint32_t row;
    std::uint32_t count; // in-bag multiplicity
};

class TreeBuilder {
public:
    TreeBuilder(const ForestModel& model, const std::vector<std::vector<std::uint16_t>>& bins,
                const std::vector<std::size_t>& n_bins, std::span<const int> y, const ForestHyper& hyper, Rng& rng)
        : model_(model), bins_(bins), n_bins_(n_bins), y_(y), hyper_(hyper), rng_(rng) {
        const auto d = model.inputs.size();
        if (hyper.feature_subsample > 0) {
            mtry_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(hyper.feature_subsample * static_cast<double>(d))));
        } else {
            mtry_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d)))));
        }
        mtry_ = std::min(mtry_, d);
    }

    int grow(DecisionTree& tree, std::vector<Sample> samples, int depth) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        double c0 = 0, c1 = 0;
        for (const auto& s : samples) (y_[s.row] == 1 ? c1 : c0) += s.count;
        const double total = c0 + c1;
        tree.nodes[static_cast<std::size_t>(id)].p1 = total > 0 ? c1 / total : 0.0;

        const double min_leaf = hyper_.min_leaf;
        if (depth >= hyper_.max_depth || c0 == 0 || c1 == 0 || total < 2 * min_leaf || model_.inputs.empty()) return id;

        const double parent = total - (c0 * c0 + c1 * c1) / total;
        struct Best {
            double gain = 1e-12;
            int feature = -1;
            std::size_t bin = 0;                // numeric
            std::vector<std::uint8_t> left_set; // categorical
        } best;

        std::vector<std::size_t> features(model_.inputs.size());
        std::iota(features.begin(), features.end(), 0);
        for (std::size_t i = 0; i < mtry_; ++i) {
            const auto j = i + static_cast<std::size_t>(rng_.below(features.size() - i));
            std::swap(features[i], features[j]);
        }

        std::vector<double> h0, h1;
        for (std::size_t pick = 0; pick < mtry_; ++pick) {
            const auto f = features[pick];
            const auto nb = n_bins_[f];
            h0.assign(nb, 0.0);
            h1.assign(nb, 0.0);
            for (const auto& s : samples) (y_[s.row] == 1 ? h1 : h0)[bins_[f][s.row]] += s.count;

            std::vector<std::size_t> order;
            if (model_.inputs[f].numeric) {
                order.resize(nb);
                std::iota(order.begin(), order.end(), 0);
            } else {
                for (std::size_t b = 0; b < nb; ++b) {
                    if (h0[b] + h1[b] > 0) order.push_back(b);
                }
                std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
                    return h1[a] / (h0[a] + h1[a]) < h1[b] / (h0[b] + h1[b]);
                });
            }
            double l0 = 0, l1 = 0;
            for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
                l0 += h0[order[pos]];
                l1 += h1[order[pos]];
                const double lw = l0 + l1, rw = total - lw;
                if (lw < min_leaf || rw < min_leaf) continue;
                const double r0 = c0 - l0, r1 = c1 - l1;
                const double gain = parent - (lw - (l0 * l0 + l1 * l1) / lw) - (rw - (r0 * r0 + r1 * r1) / rw);
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = static_cast<int>(f);
                    best.bin = order[pos];
                    if (!model_.inputs[f].numeric) {
                        best.left_set.assign(model_.inputs[f].categories.size(), 0);
                        for (std::size_t k = 0; k <= pos; ++k) {
                            if (order[k] < best.left_set.size()) best.left_set[order[k]] = 1;
                        }
                    }
                }
            }
        }
        if (best.feature < 0) return id;

        const auto f = static_cast<std::size_t>(best.feature);
        std::vector<Sample> left, right;
        for (const auto& s : samples) {
            const auto b = bins_[f][s.row];
            const bool go_left = model_.inputs[f].numeric ? b <= best.bin : (b < best.left_set.size() && best.left_set[b]);
            (go_left ? left : right).push_back(s);
        }
        samples.clear();
        samples.shrink_to_fit();
        {
            auto& node = tree.nodes[static_cast<std::size_t>(id)];
            node.feature = best.feature;
            if (model_.inputs[f].numeric) {
                node.threshold = model_.inputs[f].edges[best.bin];
            } else {
                node.left = std::move(best.left_set);
            }
        }
        const int l = grow(tree, std::move(left), depth + 1);
        const int r = grow(tree, std::move(right), depth + 1);
        tree.nodes[static_cast<std::size_t>(id)].left_child = l;
        tree.nodes[static_cast<std::size_t>(id)].right_child = r;
        return id;
    }

private:
    const ForestModel& model_;
    const std::vector<std::vector<std::uint16_t>>& bins_;
    const std::vector<std::size_t>& n_bins_;
    std::span<const int> y_;
    const ForestHyper& hyper_;
    Rng& rng_;
    std::size_t mtry_ = 1;
};

} // namespace

int DecisionTree::depth() const {
    if (nodes.empty()) return 0;
    int deepest = 0;
    std::vector<std::pair<int, int>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [id, d] = stack.back();
        stack.pop_back();
        const auto& n = nodes[static_cast<std::size_t>(id)];
        if (n.feature < 0) {
            deepest = std::max(deepest, d);
        } else {
            stack.emplace_back(n.left_child, d + 1);
            stack.emplace_back(n.right_child, d + 1);
        }
    }
    return deepest;
}

double ForestModel::tree_proba(std::size_t t, std::span<const double> coded_row) const {
    const auto& nodes = trees[t].nodes;
    std::size_t id = 0;
    while (nodes[id].feature >= 0) {
        const auto& n = nodes[id];
        const auto f = static_cast<std::size_t>(n.feature);
        bool go_left;
        if (inputs[f].numeric) {
            go_left = coded_row[f] <= n.threshold;
        } else {
            const auto code = static_cast<std::size_t>(coded_row[f]);
            go_left = code < n.left.size() && n.left[code];
        }
        id = static_cast<std::size_t>(go_left ? n.left_child : n.right_child);
    }
    return nodes[id].p1;
}

ForestModel train_forest(const Dataset& train, std::span<const double> weights, const ForestHyper& hyper) {
    const auto y = train.labels();
    const std::size_t n = y.size();
    if (weights.size() != n) throw LengthMismatch(fmt::format("{} weights for {} rows", weights.size(), n));
    const auto positives = std::count(y.begin(), y.end(), 1);
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(n)) {
        throw DegenerateData("the forest needs both classes in the training data");
    }
    if (hyper.n_trees < 1 || hyper.max_depth < 0 || hyper.min_leaf < 1) throw Error("invalid forest hyperparameters");
    for (double w : weights) {
        if (!(w >= 0) || !std::isfinite(w)) throw Error("sample weights must be finite and non-negative");
    }

    ForestModel model;
    model.hyper = hyper;
    std::vector<std::vector<std::uint16_t>> bins;
    std::vector<std::size_t> n_bins;
    for (auto c : model_inputs(train)) {
        const auto& def = train.schema[c];
        const auto& column = train.columns[c];
        ForestInput in;
        in.name = def.name;
        in.numeric = def.is_numeric();
        std::vector<std::uint16_t> coded(n);
        if (in.numeric) {
            in.edges = bin_edges(column.numbers);
            for (std::size_t r = 0; r < n; ++r) {
                coded[r] = static_cast<std::uint16_t>(std::lower_bound(in.edges.begin(), in.edges.end(), column.numbers[r]) - in.edges.begin());
            }
            n_bins.push_back(in.edges.size() + 1);
        } else {
            std::set<std::string> seen(column.strings.begin(), column.strings.end());
            in.categories.assign(seen.begin(), seen.end());
            if (in.categories.size() >= 65535) throw Error(fmt::format("too many categories in '{}'", in.name));
            std::unordered_map<std::string, std::uint16_t> index;
            for (std::size_t i = 0; i < in.categories.size(); ++i) index[in.categories[i]] = static_cast<std::uint16_t>(i);
            for (std::size_t r = 0; r < n; ++r) coded[r] = index[column.strings[r]];
            n_bins.push_back(in.categories.size());
        }
        model.inputs.push_back(std::move(in));
        bins.push_back(std::move(coded));
    }

    std::vector<double> cumulative(n);
    std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
    const double total_weight = n ? cumulative.back() : 0.0;
    if (!(total_weight > 0)) throw DegenerateData("all sample weights are zero");

    model.trees.resize(static_cast<std::size_t>(hyper.n_trees));
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        Rng rng(derive_seed(hyper.seed, t));
        std::vector<std::uint32_t> counts(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = rng.uniform() * total_weight;
            auto pos = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
            ++counts[std::min(pos, n - 1)];
        }
        std::vector<Sample> samples;
        for (std::size_t i = 0; i < n; ++i) {
            if (counts[i]) samples.push_back({static_cast<std::uint32_t>(i), counts[i]});
        }
        TreeBuilder builder(model, bins, n_bins, y, hyper, rng);
        builder.grow(model.trees[t], std::move(samples), 0);
    }
    return model;
}

std::vector<double> predict_proba(const ForestModel& model, const Dataset& rows) {
    if (model.trees.empty()) throw Error("forest has no trees");
    const auto coded = code_rows(model, rows);
    const std::size_t n = rows.rows();
    std::vector<double> out(n, 0.0);
    std::vector<double> row(model.inputs.size());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t f = 0; f < coded.size(); ++f) row[f] = coded[f][r];
        double sum = 0;
        for (std::size_t t = 0; t < model.trees.size(); ++t) sum += model.tree_proba(t, row);
        out[r] = sum / static_cast<double>(model.trees.size());
    }
    return out;
}

} // namespace tforge
