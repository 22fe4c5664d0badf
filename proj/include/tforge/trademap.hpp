#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tforge/metrics.hpp"
#include "tforge/policy.hpp"
#include "tforge/spec.hpp"

namespace tforge {

enum class RecordStatus { ok, failed };

/// One row of the trade-off table.
struct TradeoffRecord {
    int set_id = 0;
    RecordStatus status = RecordStatus::ok;
    double accuracy = 0;
    double precision = 0;
    double f1 = 0;
    double recall = 0;
    double data_used_pct = 100.0;
    bool k_anon = false;
    std::size_t k_achieved = 0;
    double cdd = 0;
    RiskCategory risk = RiskCategory::low;
    Explainability explainability = Explainability::moderate;
    std::vector<std::string> notes;

    bool ok() const { return status == RecordStatus::ok; }
    bool operator==(const TradeoffRecord&) const = default;
};

nlohmann::json to_json(const TradeoffRecord& record);
TradeoffRecord record_from_json(const nlohmann::json& doc);

/// Value used for thresholds, ranking and dominance: |CDD| for cdd, percent
/// for data_used, 1/0 for k_anon, the ordinal rank for risk (0 = Very Low) and
/// explainability (0 = Low).
double dimension_value(const TradeoffRecord& record, Dimension d);

/// Records ordered by set_id.
struct TradeoffTable {
    std::vector<TradeoffRecord> records;

    std::string to_csv() const;
    /// Grouped layout: Predictive Performance, then the legal requirements.
    std::string to_markdown() const;
    nlohmann::json to_json() const;
    static TradeoffTable from_json(const nlohmann::json& doc);
};

TradeoffTable build_table(std::vector<TradeoffRecord> records);

/// Set ids of the ok records no other ok record dominates on the non-ignored
/// dimensions. Identical records do not dominate each other.
std::vector<int> pareto_front(std::span<const TradeoffRecord> records, const std::map<Dimension, Direction>& directions);

struct ThresholdCheck {
    std::string threshold;
    std::string observed;
    bool pass = false;
};

struct Selection {
    std::optional<int> chosen;
    std::vector<int> feasible;
    /// Per set id, one check per policy threshold (in policy order).
    std::map<int, std::vector<ThresholdCheck>> matrix;
    /// Thresholds no record passes.
    std::vector<std::string> binding;
    /// Short justification fragments keyed by dimension name.
    std::map<std::string, std::string> rationale;
};

bool passes(const TradeoffRecord& record, const Threshold& threshold);

/// Feasible = ok records passing every threshold; chosen = best feasible
/// under the ranking, ties to the lower set id.
Selection select(std::span<const TradeoffRecord> records, const SelectionPolicy& policy);

} // namespace tforge
