#include "tforge/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "tforge/errors.hpp"
#include "tforge/rng.hpp"

namespace tforge {

Dataset drop_features(const Dataset& dataset, std::span<const std::string> names) {
    Dataset out = dataset;
    for (const auto& name : names) {
        auto idx = out.find(name);
        if (!idx) {
            if (out.find_held(name)) continue; // already dropped
            throw UnknownFeature(fmt::format("unknown feature '{}'", name));
        }
        if (out.schema[*idx].role == FeatureRole::label) {
            throw Error(fmt::format("cannot drop the label column '{}'", name));
        }
        auto def = out.schema[*idx];
        def.role = FeatureRole::excluded;
        out.held_schema.push_back(std::move(def));
        out.held_columns.push_back(std::move(out.columns[*idx]));
        out.schema.erase(out.schema.begin() + static_cast<std::ptrdiff_t>(*idx));
        out.columns.erase(out.columns.begin() + static_cast<std::ptrdiff_t>(*idx));
    }
    if (!names.empty()) {
        std::string list;
        for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
        const auto tag = "dropped " + list;
        if (std::find(out.provenance.begin(), out.provenance.end(), tag) == out.provenance.end()) {
            out.provenance.push_back(tag);
        }
    }
    return out;
}

nlohmann::json MinimizationTrace::to_json() const {
    nlohmann::json slopes_json = nlohmann::json::array();
    for (double s : slopes) {
        if (std::isnan(s)) {
            slopes_json.push_back(nullptr);
        } else {
            slopes_json.push_back(s);
        }
    }
    nlohmann::json losses_json = nlohmann::json::array();
    for (double l : losses) {
        if (std::isnan(l)) {
            losses_json.push_back(nullptr);
        } else {
            losses_json.push_back(l);
        }
    }
    nlohmann::json doc{{"batch_sizes", batch_sizes},
                       {"accumulated", accumulated},
                       {"losses", losses_json},
                       {"slopes", slopes_json},
                       {"stop_step", stop_step},
                       {"exhausted", exhausted},
                       {"rows_available", rows_available},
                       {"fraction_used", fraction_used},
                       {"window", window},
                       {"batch_size", batch_size}};
    if (std::isinf(threshold)) {
        doc["threshold"] = "never";
    } else {
        doc["threshold"] = threshold;
    }
    return doc;
}

MinimizationTrace MinimizationTrace::from_json(const nlohmann::json& doc) {
    MinimizationTrace t;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    t.batch_sizes = doc.at("batch_sizes").get<std::vector<std::size_t>>();
    t.accumulated = doc.at("accumulated").get<std::vector<std::size_t>>();
    for (const auto& l : doc.at("losses")) t.losses.push_back(l.is_null() ? nan : l.get<double>());
    for (const auto& s : doc.at("slopes")) t.slopes.push_back(s.is_null() ? nan : s.get<double>());
    t.stop_step = doc.at("stop_step").get<std::size_t>();
    t.exhausted = doc.at("exhausted").get<bool>();
    t.rows_available = doc.at("rows_available").get<std::size_t>();
    t.fraction_used = doc.at("fraction_used").get<double>();
    t.window = doc.at("window").get<int>();
    t.batch_size = doc.at("batch_size").get<int>();
    const auto& th = doc.at("threshold");
    t.threshold = th.is_string() ? kNeverStop : th.get<double>();
    return t;
}

Minimized minimize_data(const Dataset& pool, const SubsetLoss& loss, const MinimizeOptions& options) {
    if (options.batch_size < 1) throw Error("batch_size must be ≥ 1");
    if (options.window < 1) throw Error("window must be ≥ 1");
    if (!(options.threshold < 0)) throw Error("the stopping threshold must be negative");
    const std::size_t n = pool.rows();
    if (!options.groups.empty() && options.groups.size() != n) throw LengthMismatch("one group id per pool row");

    // Batches as lists of pool rows.
    Rng rng(options.seed);
    const auto batch = static_cast<std::size_t>(options.batch_size);
    std::vector<std::vector<std::size_t>> batches;
    if (options.groups.empty()) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t i = 0; i < n; i += batch) {
            batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                                 order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch)));
        }
    } else {
        std::map<std::size_t, std::vector<std::size_t>> members;
        for (std::size_t i = 0; i < n; ++i) members[options.groups[i]].push_back(i);
        std::vector<std::size_t> ids;
        for (const auto& [id, _] : members) ids.push_back(id);
        rng.shuffle(std::span<std::size_t>(ids));
        std::vector<std::size_t> current;
        for (auto id : ids) {
            const auto& rows = members[id];
            current.insert(current.end(), rows.begin(), rows.end());
            if (current.size() >= batch) {
                batches.push_back(std::move(current));
                current.clear();
            }
        }
        if (!current.empty()) batches.push_back(std::move(current));
    }

    MinimizationTrace trace;
    trace.rows_available = n;
    trace.threshold = options.threshold;
    trace.window = options.window;
    trace.batch_size = options.batch_size;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto w = static_cast<std::size_t>(options.window);
    std::vector<std::size_t> taken;
    for (std::size_t t = 0; t < batches.size(); ++t) {
        taken.insert(taken.end(), batches[t].begin(), batches[t].end());
        std::vector<std::size_t> subset = taken;
        std::sort(subset.begin(), subset.end());

        double value = nan;
        try {
            value = loss(pool.select_rows(subset));
        } catch (const DegenerateData&) {
        }
        trace.batch_sizes.push_back(batches[t].size());
        trace.accumulated.push_back(taken.size());
        trace.losses.push_back(value);

        double slope = nan;
        if (t >= w) {
            const auto dn = static_cast<double>(taken.size() - trace.accumulated[t - w]);
            slope = (value - trace.losses[t - w]) / dn;
        }
        trace.slopes.push_back(slope);

        const bool last = t + 1 == batches.size();
        const bool rule_fires = options.threshold != kNeverStop && !std::isnan(slope) && slope >= options.threshold;
        if (rule_fires || last) {
            trace.stop_step = t + 1;
            trace.exhausted = !rule_fires;
            trace.fraction_used = n ? static_cast<double>(taken.size()) / static_cast<double>(n) : 1.0;
            Minimized out{pool.select_rows(subset), std::move(trace)};
            out.data.provenance.push_back(fmt::format("minimized {:.1f}%", 100.0 * out.trace.fraction_used));
            return out;
        }
    }
    // Empty pool.
    trace.exhausted = true;
    return Minimized{pool, std::move(trace)};
}

std::vector<double> class_weights(std::span<const int> labels, const ClassWeightParams& policy) {
    double w_pos = policy.positive_weight;
    if (policy.balanced) {
        const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
        if (n_pos == 0) throw NoPositives("balanced class weights need at least one positive row");
        w_pos = (static_cast<double>(labels.size()) - n_pos) / n_pos;
    }
    std::vector<double> weights(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) weights[i] = labels[i] == 1 ? w_pos : 1.0;
    return weights;
}

} // namespace tforge
