#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tforge/dataset.hpp"
#include "tforge/spec.hpp"

namespace tforge {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Positive = 1 = alert. Throws LengthMismatch, Error on non-binary labels.
ConfusionCounts confusion(std::span<const int> truth, std::span<const int> predicted);

struct PerfPanel {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    // Set when the metric's denominator was 0 and it was reported as 0.0.
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

PerfPanel perf_panel(const ConfusionCounts& counts);

struct StratumDisparity {
    std::string key;
    std::size_t n = 0;
    double dd = 0;
    /// No adverse or no favourable rows in the stratum; contributes dd = 0.
    bool empty_side = false;
};

struct CddResult {
    std::vector<StratumDisparity> strata; // sorted by key
    double cdd = 0;

    nlohmann::json to_json() const;
};

/// Conditional demographic disparity of predicted labels (1 = adverse).
/// Per stratum: share of the protected group among adverse rows minus its
/// share among favourable rows; combined as the size-weighted mean.
/// Throws LengthMismatch, and NoProtectedVariation when group membership is
/// constant.
CddResult cdd(std::span<const int> predicted, std::span<const std::uint8_t> in_protected_group,
              std::span<const std::string> strata_keys);

/// Stratum key per row from the given features. Numeric features are cut
/// into quintiles computed on this dataset; edges are appended to `edges_out`
/// when given.
std::vector<std::string> stratum_keys(const Dataset& dataset, std::span<const std::string> features,
                                      nlohmann::json* edges_out = nullptr);

struct DataUsage {
    double raw_pct = 100.0;
    int rounded_pct = 100; // round half up

    std::string label() const { return std::to_string(rounded_pct) + "%"; }
};

DataUsage data_usage(double fraction_used);

/// Whether the set applies k-anonymity through any of its operationalizations.
bool applies_k_anonymity(const OperationalizationSet& set, const RunSpec& spec);

struct RiskAssessment {
    RiskCategory category = RiskCategory::low;
    bool overridden = false;
};

/// Re-identification risk: Very Low with k-anonymity, otherwise Low when the
/// model stays internal and Moderate when shared externally. High and Very
/// High only come from an explicit override.
RiskAssessment risk_category(const OperationalizationSet& set, const RunSpec& spec);

enum class Explainability { low, moderate, high };
std::string_view to_string(Explainability e);
Explainability parse_explainability(std::string_view text);

/// logreg -> Moderate, forest -> High.
Explainability explainability_category(ModelFamily family);

} // namespace tforge
