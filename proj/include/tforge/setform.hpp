#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tforge/spec.hpp"

namespace tforge {

/// Every combination of one operationalization per requirement that satisfies
/// the compatibility rules, ordered lexicographically by (requirement order,
/// index) and numbered 1..n. Throws EmptyResult when no combination survives.
std::vector<OperationalizationSet> enumerate_sets(const RunSpec& spec);

/// Rules the set violates; empty means the set is compatible.
std::vector<CompatibilityRule> check_set(const OperationalizationSet& set, std::span<const CompatibilityRule> rules);

/// Keeps at most `policy.max_count` sets. Sets are stably ordered by
/// descending score (missing scores count as 0); without scores this keeps the
/// first sets in enumeration order. max_count = 0 keeps all.
std::vector<OperationalizationSet> prune_sets(std::vector<OperationalizationSet> sets, const PrunePolicy& policy);

/// Requirement-by-set index matrix.
std::string plan_markdown(const RunSpec& spec, std::span<const OperationalizationSet> sets);
std::string plan_csv(const RunSpec& spec, std::span<const OperationalizationSet> sets);
nlohmann::json plan_json(const RunSpec& spec, std::span<const OperationalizationSet> sets);

} // namespace tforge
