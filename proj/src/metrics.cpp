#include "tforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "tforge/errors.hpp"

namespace tforge {

ConfusionCounts confusion(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) {
        throw LengthMismatch(fmt::format("{} labels vs {} predictions", truth.size(), predicted.size()));
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = predicted[i];
        if ((t != 0 && t != 1) || (p != 0 && p != 1)) throw Error("confusion: labels must be 0 or 1");
        if (t == 1) {
            ++(p == 1 ? c.tp : c.fn);
        } else {
            ++(p == 1 ? c.fp : c.tn);
        }
    }
    return c;
}

PerfPanel perf_panel(const ConfusionCounts& c) {
    PerfPanel p;
    const auto n = static_cast<double>(c.total());
    p.accuracy = n > 0 ? static_cast<double>(c.tp + c.tn) / n : 0.0;
    if (c.tp + c.fp > 0) {
        p.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    } else {
        p.precision_undefined = true;
    }
    if (c.tp + c.fn > 0) {
        p.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    } else {
        p.recall_undefined = true;
    }
    if (p.precision + p.recall > 0) {
        p.f1 = 2 * p.precision * p.recall / (p.precision + p.recall);
    } else {
        p.f1_undefined = true;
    }
    return p;
}

nlohmann::json CddResult::to_json() const {
    nlohmann::json doc;
    doc["cdd"] = cdd;
    doc["strata"] = nlohmann::json::array();
    for (const auto& s : strata) {
        doc["strata"].push_back({{"key", s.key}, {"n", s.n}, {"dd", s.dd}, {"empty_side", s.empty_side}});
    }
    return doc;
}

CddResult cdd(std::span<const int> predicted, std::span<const std::uint8_t> in_group,
              std::span<const std::string> strata_keys) {
    const auto n = predicted.size();
    if (in_group.size() != n || strata_keys.size() != n) {
        throw LengthMismatch("cdd: predictions, group membership and strata must have equal length");
    }
    const bool any_in = std::any_of(in_group.begin(), in_group.end(), [](auto v) { return v != 0; });
    const bool any_out = std::any_of(in_group.begin(), in_group.end(), [](auto v) { return v == 0; });
    if (!any_in || !any_out) throw NoProtectedVariation("cdd: the protected attribute takes a single value");

    struct Tally {
        std::size_t adverse = 0, adverse_group = 0, favorable = 0, favorable_group = 0;
    };
    std::map<std::string, Tally> tallies;
    for (std::size_t i = 0; i < n; ++i) {
        auto& t = tallies[strata_keys[i]];
        if (predicted[i] == 1) {
            ++t.adverse;
            t.adverse_group += in_group[i] != 0;
        } else {
            ++t.favorable;
            t.favorable_group += in_group[i] != 0;
        }
    }

    CddResult result;
    for (const auto& [key, t] : tallies) {
        StratumDisparity s;
        s.key = key;
        s.n = t.adverse + t.favorable;
        if (t.adverse == 0 || t.favorable == 0) {
            s.empty_side = true;
        } else {
            s.dd = static_cast<double>(t.adverse_group) / static_cast<double>(t.adverse) -
                   static_cast<double>(t.favorable_group) / static_cast<double>(t.favorable);
        }
        result.cdd += static_cast<double>(s.n) / static_cast<double>(n) * s.dd;
        result.strata.push_back(std::move(s));
    }
    return result;
}

std::vector<std::string> stratum_keys(const Dataset& dataset, std::span<const std::string> features,
                                      nlohmann::json* edges_out) {
    const std::size_t n = dataset.rows();
    std::vector<std::string> keys(n);
    for (std::size_t f = 0; f < features.size(); ++f) {
        const auto& def = dataset.feature_any(features[f]);
        const auto& column = dataset.column_any(features[f]);
        std::vector<std::string> parts(n);
        if (def.is_numeric()) {
            auto sorted = column.numbers;
            std::sort(sorted.begin(), sorted.end());
            // Quintile edges: values at the 20/40/60/80th percentiles.
            std::vector<double> edges;
            for (int q = 1; q < 5; ++q) {
                if (sorted.empty()) break;
                const auto pos = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) / 5.0)) - 1;
                edges.push_back(sorted[std::min(pos, n - 1)]);
            }
            if (edges_out) (*edges_out)[features[f]] = edges;
            for (std::size_t r = 0; r < n; ++r) {
                const auto bin = std::lower_bound(edges.begin(), edges.end(), column.numbers[r]) - edges.begin();
                parts[r] = fmt::format("Q{}", bin + 1);
            }
        } else {
            parts = column.strings;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (f) keys[r] += " | ";
            keys[r] += parts[r];
        }
    }
    return keys;
}

DataUsage data_usage(double fraction_used) {
    DataUsage u;
    u.raw_pct = 100.0 * fraction_used;
    // Round half up; the nudge absorbs binary representation error (0.835 * 100).
    u.rounded_pct = static_cast<int>(std::floor(u.raw_pct + 0.5 + 1e-9));
    return u;
}

bool applies_k_anonymity(const OperationalizationSet& set, const RunSpec& spec) {
    for (const auto& op : set.choices) {
        const Operationalization* cur = &op;
        while (cur) {
            if (cur->kind == OpKind::k_anonymity) return true;
            cur = cur->extends ? spec.operationalization({cur->requirement, *cur->extends}) : nullptr;
        }
    }
    return false;
}

RiskAssessment risk_category(const OperationalizationSet& set, const RunSpec& spec) {
    if (auto it = spec.risk_overrides.find(set.set_id); it != spec.risk_overrides.end()) {
        return {it->second, true};
    }
    if (applies_k_anonymity(set, spec)) return {RiskCategory::very_low, false};
    return {spec.model_shared_externally ? RiskCategory::moderate : RiskCategory::low, false};
}

std::string_view to_string(Explainability e) {
    switch (e) {
    case Explainability::low: return "Low";
    case Explainability::moderate: return "Moderate";
    case Explainability::high: return "High";
    }
    return "unknown";
}

Explainability parse_explainability(std::string_view text) {
    for (auto e : {Explainability::low, Explainability::moderate, Explainability::high}) {
        if (to_string(e) == text) return e;
    }
    throw Error(fmt::format("unknown explainability category '{}'", text));
}

Explainability explainability_category(ModelFamily family) {
    switch (family) {
    case ModelFamily::logreg: return Explainability::moderate;
    case ModelFamily::forest: return Explainability::high;
    }
    throw Error("unknown model family");
}

} // namespace tforge
