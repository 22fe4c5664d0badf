#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "tforge/errors.hpp"
#include "tforge/transforms.hpp"

namespace tforge {

namespace {

std::uint32_t fnv1a(std::string_view text, std::uint32_t h = 2166136261u) {
    for (unsigned char c : text) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

std::string numeric_label(const CellBound& b) {
    if (b.lo_closed && b.lo == b.hi) return format_number(b.lo);
    return fmt::format("{}{}, {}]", b.lo_closed ? "[" : "(", format_number(b.lo), format_number(b.hi));
}

std::string category_label(const QiExtent& qi, const CellBound& b) {
    if (b.first == b.last) return qi.categories[b.first];
    std::uint32_t h = 2166136261u;
    for (std::size_t i = b.first; i <= b.last; ++i) {
        h = fnv1a(qi.categories[i], h);
        h = fnv1a("\x1f", h);
    }
    return fmt::format("{{{}..{}}}#{:08x}", qi.categories[b.first], qi.categories[b.last], h);
}

// Per-QI view of the fitting data: numeric values or global category indices.
struct QiData {
    bool numeric = false;
    std::vector<double> values;
};

class Partitioner {
public:
    Partitioner(const std::vector<QiData>& data, GeneralizationMap& map, std::size_t k)
        : data_(data), map_(map), k_(k) {}

    std::vector<std::size_t> cell_of_row;

    int build(std::vector<std::size_t> rows, std::vector<CellBound> bounds) {
        const int node_id = static_cast<int>(map_.nodes.size());
        map_.nodes.emplace_back();

        struct Candidate {
            std::size_t qi;
            double width;
        };
        std::vector<Candidate> candidates;
        for (std::size_t q = 0; q < data_.size(); ++q) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (auto r : rows) {
                lo = std::min(lo, data_[q].values[r]);
                hi = std::max(hi, data_[q].values[r]);
            }
            const auto& ext = map_.qis[q];
            const double global = ext.numeric ? ext.hi - ext.lo : static_cast<double>(ext.categories.size()) - 1.0;
            if (global > 0 && hi > lo) candidates.push_back({q, (hi - lo) / global});
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const auto& a, const auto& b) { return a.width > b.width; });

        for (const auto& cand : candidates) {
            const auto& values = data_[cand.qi].values;
            std::vector<double> sorted;
            sorted.reserve(rows.size());
            for (auto r : rows) sorted.push_back(values[r]);
            std::sort(sorted.begin(), sorted.end());
            const double median = sorted[(sorted.size() - 1) / 2];

            // Try "<= median", then "< median" when ties push too many rows left.
            std::optional<double> cut;
            const auto n_le = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), median) - sorted.begin());
            if (n_le >= k_ && rows.size() - n_le >= k_) {
                cut = median;
            } else {
                const auto n_lt = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), median) - sorted.begin());
                if (n_lt >= k_ && rows.size() - n_lt >= k_) cut = sorted[n_lt - 1];
            }
            if (!cut) continue;

            std::vector<std::size_t> left, right;
            for (auto r : rows) (values[r] <= *cut ? left : right).push_back(r);

            auto left_bounds = bounds;
            auto right_bounds = bounds;
            auto& node_bound_l = left_bounds[cand.qi];
            auto& node_bound_r = right_bounds[cand.qi];
            auto& node = map_.nodes[static_cast<std::size_t>(node_id)];
            node.qi = static_cast<int>(cand.qi);
            if (map_.qis[cand.qi].numeric) {
                node.numeric_cut = *cut;
                node_bound_l.hi = *cut;
                node_bound_r.lo = *cut;
                node_bound_r.lo_closed = false;
            } else {
                const auto idx = static_cast<std::size_t>(*cut);
                node.category_cut = map_.qis[cand.qi].categories[idx];
                node_bound_l.last = idx;
                node_bound_r.first = idx + 1;
            }
            rows.clear();
            rows.shrink_to_fit();
            const int l = build(std::move(left), std::move(left_bounds));
            const int r = build(std::move(right), std::move(right_bounds));
            map_.nodes[static_cast<std::size_t>(node_id)].left = l;
            map_.nodes[static_cast<std::size_t>(node_id)].right = r;
            return node_id;
        }

        // Leaf.
        PartitionCell cell;
        cell.bounds = bounds;
        cell.size = rows.size();
        for (std::size_t q = 0; q < map_.qis.size(); ++q) {
            cell.labels.push_back(map_.qis[q].numeric ? numeric_label(bounds[q]) : category_label(map_.qis[q], bounds[q]));
        }
        const auto cell_id = map_.cells.size();
        map_.cells.push_back(std::move(cell));
        map_.nodes[static_cast<std::size_t>(node_id)].cell = static_cast<int>(cell_id);
        for (auto r : rows) cell_of_row[r] = cell_id;
        return node_id;
    }

private:
    const std::vector<QiData>& data_;
    GeneralizationMap& map_;
    std::size_t k_;
};

std::vector<std::size_t> resolve_qis(const Dataset& dataset, std::span<const std::string> qis) {
    std::vector<std::size_t> idx;
    for (const auto& name : qis) {
        auto i = dataset.find(name);
        if (!i) throw UnknownFeature(fmt::format("unknown quasi-identifier '{}'", name));
        idx.push_back(*i);
    }
    return idx;
}

Dataset rewrite(const Dataset& dataset, const GeneralizationMap& map, const std::vector<std::size_t>& cell_of_row) {
    Dataset out = dataset;
    for (std::size_t q = 0; q < map.qis.size(); ++q) {
        const auto col = *out.find(map.qis[q].name);
        auto& def = out.schema[col];
        def.kind = FeatureKind::categorical;
        std::set<std::string> domain;
        for (const auto& cell : map.cells) domain.insert(cell.labels[q]);
        def.domain.assign(domain.begin(), domain.end());
        Column column;
        column.strings.reserve(cell_of_row.size());
        for (auto c : cell_of_row) column.strings.push_back(map.cells[c].labels[q]);
        out.columns[col] = std::move(column);
    }
    out.provenance.push_back(fmt::format("anonymized k={}", map.k));
    return out;
}

} // namespace

std::size_t GeneralizationMap::route(const Dataset& dataset, std::size_t row) const {
    std::size_t node = 0;
    while (nodes[node].qi >= 0) {
        const auto& n = nodes[node];
        const auto& qi = qis[static_cast<std::size_t>(n.qi)];
        const auto col = dataset.find(qi.name);
        if (!col) throw SchemaMismatch(fmt::format("dataset lacks quasi-identifier '{}'", qi.name));
        bool go_left;
        if (qi.numeric) {
            go_left = dataset.columns[*col].numbers[row] <= n.numeric_cut;
        } else {
            go_left = dataset.columns[*col].strings[row] <= n.category_cut;
        }
        node = static_cast<std::size_t>(go_left ? n.left : n.right);
    }
    return static_cast<std::size_t>(nodes[node].cell);
}

nlohmann::json GeneralizationMap::to_json() const {
    nlohmann::json doc;
    doc["k"] = k;
    doc["quasi_identifiers"] = nlohmann::json::array();
    for (const auto& q : qis) {
        nlohmann::json j{{"name", q.name}, {"kind", q.numeric ? "numeric" : "categorical"}};
        if (q.numeric) {
            j["extent"] = {q.lo, q.hi};
        } else {
            j["categories"] = q.categories;
        }
        doc["quasi_identifiers"].push_back(std::move(j));
    }
    doc["cells"] = nlohmann::json::array();
    for (const auto& c : cells) doc["cells"].push_back({{"size", c.size}, {"labels", c.labels}});
    std::size_t smallest = cells.empty() ? 0 : cells.front().size;
    for (const auto& c : cells) smallest = std::min(smallest, c.size);
    doc["cell_count"] = cells.size();
    doc["smallest_cell"] = smallest;
    return doc;
}

Anonymized k_anonymize(const Dataset& dataset, std::span<const std::string> quasi_identifiers, int k) {
    if (k < 2) throw SpecError("k", "params.k must be ≥ 2");
    if (quasi_identifiers.empty()) throw SpecError("quasi_identifiers", "must not be empty");
    const auto cols = resolve_qis(dataset, quasi_identifiers);
    const std::size_t n = dataset.rows();
    if (n < static_cast<std::size_t>(k)) {
        throw InfeasibleK(fmt::format("{} rows cannot be {}-anonymous", n, k));
    }

    GeneralizationMap map;
    map.k = k;
    std::vector<QiData> data;
    std::vector<CellBound> root;
    for (std::size_t q = 0; q < cols.size(); ++q) {
        const auto& def = dataset.schema[cols[q]];
        const auto& column = dataset.columns[cols[q]];
        QiExtent ext;
        ext.name = def.name;
        ext.numeric = def.is_numeric();
        QiData qd;
        qd.numeric = ext.numeric;
        CellBound b;
        if (ext.numeric) {
            qd.values = column.numbers;
            ext.lo = *std::min_element(qd.values.begin(), qd.values.end());
            ext.hi = *std::max_element(qd.values.begin(), qd.values.end());
            b.lo = ext.lo;
            b.hi = ext.hi;
        } else {
            std::set<std::string> seen(column.strings.begin(), column.strings.end());
            ext.categories.assign(seen.begin(), seen.end());
            std::unordered_map<std::string, double> index;
            for (std::size_t i = 0; i < ext.categories.size(); ++i) index[ext.categories[i]] = static_cast<double>(i);
            qd.values.reserve(n);
            for (const auto& v : column.strings) qd.values.push_back(index[v]);
            b.first = 0;
            b.last = ext.categories.size() - 1;
        }
        map.qis.push_back(std::move(ext));
        data.push_back(std::move(qd));
        root.push_back(b);
    }

    Partitioner partitioner(data, map, static_cast<std::size_t>(k));
    partitioner.cell_of_row.assign(n, 0);
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    partitioner.build(std::move(rows), std::move(root));

    Anonymized out;
    out.data = rewrite(dataset, map, partitioner.cell_of_row);
    out.cell_of_row = std::move(partitioner.cell_of_row);
    out.map = std::move(map);
    return out;
}

Dataset apply_generalization(const Dataset& dataset, const GeneralizationMap& map) {
    const std::size_t n = dataset.rows();
    std::vector<std::size_t> cells(n);
    for (std::size_t r = 0; r < n; ++r) cells[r] = map.route(dataset, r);
    return rewrite(dataset, map, cells);
}

std::size_t verify_k_anonymity(const Dataset& dataset, std::span<const std::string> quasi_identifiers) {
    const auto cols = resolve_qis(dataset, quasi_identifiers);
    std::unordered_map<std::string, std::size_t> counts;
    const std::size_t n = dataset.rows();
    for (std::size_t r = 0; r < n; ++r) {
        std::string key;
        for (auto c : cols) {
            key += dataset.cell_text(c, r);
            key.push_back('\x1f');
        }
        ++counts[key];
    }
    if (counts.empty()) return 0;
    std::size_t smallest = n;
    for (const auto& [_, count] : counts) smallest = std::min(smallest, count);
    return smallest;
}

} // namespace tforge
