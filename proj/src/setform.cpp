#include "tforge/setform.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "tforge/csv.hpp"
#include "tforge/errors.hpp"

namespace tforge {

namespace {

bool has(const OperationalizationSet& set, const OpRef& ref) {
    const auto* op = set.choice(ref.requirement);
    return op && op->index == ref.index;
}

} // namespace

std::vector<CompatibilityRule> check_set(const OperationalizationSet& set, std::span<const CompatibilityRule> rules) {
    std::vector<CompatibilityRule> violated;
    for (const auto& rule : rules) {
        if (!has(set, rule.antecedent)) continue;
        const bool consequent = has(set, rule.consequent);
        if ((rule.kind == RuleKind::implies && !consequent) || (rule.kind == RuleKind::excludes && consequent)) {
            violated.push_back(rule);
        }
    }
    return violated;
}

std::vector<OperationalizationSet> enumerate_sets(const RunSpec& spec) {
    std::vector<std::vector<const Operationalization*>> options;
    for (const auto& req : spec.requirements) options.push_back(spec.operationalizations_of(req.id));

    std::vector<OperationalizationSet> sets;
    std::vector<std::size_t> cursor(options.size(), 0);
    while (true) {
        OperationalizationSet candidate;
        for (std::size_t r = 0; r < options.size(); ++r) candidate.choices.push_back(*options[r][cursor[r]]);
        if (check_set(candidate, spec.rules).empty()) {
            candidate.set_id = static_cast<int>(sets.size()) + 1;
            sets.push_back(std::move(candidate));
        }
        // Odometer: the last requirement varies fastest.
        bool done = true;
        for (std::size_t r = options.size(); r-- > 0;) {
            if (++cursor[r] < options[r].size()) {
                done = false;
                break;
            }
            cursor[r] = 0;
        }
        if (done) break;
    }
    if (sets.empty()) throw EmptyResult("the compatibility rules eliminate every operationalization set");
    return sets;
}

std::vector<OperationalizationSet> prune_sets(std::vector<OperationalizationSet> sets, const PrunePolicy& policy) {
    if (!policy.scores.empty()) {
        auto score = [&](const OperationalizationSet& s) {
            auto it = policy.scores.find(s.set_id);
            return it == policy.scores.end() ? 0.0 : it->second;
        };
        std::stable_sort(sets.begin(), sets.end(),
                         [&](const auto& a, const auto& b) { return score(a) > score(b); });
    }
    if (policy.max_count > 0 && sets.size() > policy.max_count) sets.resize(policy.max_count);
    return sets;
}

std::string plan_markdown(const RunSpec& spec, std::span<const OperationalizationSet> sets) {
    std::string out = "| Legal Requirement |";
    std::string rule = "|---|";
    for (const auto& s : sets) {
        out += fmt::format(" Set {} |", s.set_id);
        rule += "---|";
    }
    out += "\n" + rule + "\n";
    for (const auto& req : spec.requirements) {
        out += fmt::format("| {} |", req.name);
        for (const auto& s : sets) out += fmt::format(" ({}) |", s.choice(req.id)->index);
        out += "\n";
    }
    return out;
}

std::string plan_csv(const RunSpec& spec, std::span<const OperationalizationSet> sets) {
    std::vector<std::string> fields{"requirement"};
    for (const auto& s : sets) fields.push_back(fmt::format("set_{}", s.set_id));
    std::string out = csv::record(fields);
    for (const auto& req : spec.requirements) {
        fields = {req.id};
        for (const auto& s : sets) fields.push_back(std::to_string(s.choice(req.id)->index));
        out += csv::record(fields);
    }
    return out;
}

nlohmann::json plan_json(const RunSpec& spec, std::span<const OperationalizationSet> sets) {
    nlohmann::json doc;
    doc["requirements"] = nlohmann::json::array();
    for (const auto& req : spec.requirements) doc["requirements"].push_back({{"id", req.id}, {"name", req.name}});
    doc["sets"] = nlohmann::json::array();
    for (const auto& s : sets) {
        nlohmann::json choices = nlohmann::json::object();
        for (const auto& op : s.choices) choices[op.requirement] = {{"index", op.index}, {"id", op.id}};
        doc["sets"].push_back({{"set_id", s.set_id}, {"choices", choices}});
    }
    return doc;
}

} // namespace tforge
