#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tforge/dataset.hpp"
#include "tforge/spec.hpp"

namespace tforge {

// ---------------------------------------------------------------------------
// Feature dropping

/// Removes `names` from the model-visible schema. Dropped columns move to the
/// held-out area (role excluded) so evaluation can still read them.
/// Throws UnknownFeature for names not in the schema. Idempotent.
Dataset drop_features(const Dataset& dataset, std::span<const std::string> names);

// ---------------------------------------------------------------------------
// k-anonymity

/// Global extent of one quasi-identifier on the data the partition was fit on.
struct QiExtent {
    std::string name;
    bool numeric = false;
    double lo = 0; // numeric
    double hi = 0;
    std::vector<std::string> categories; // categorical, sorted
};

/// Per-QI bounds of one partition cell. Numeric cells cover (lo, hi], or
/// [lo, hi] when `lo_closed`; categorical cells cover categories[first..last].
struct CellBound {
    double lo = 0;
    double hi = 0;
    bool lo_closed = true;
    std::size_t first = 0;
    std::size_t last = 0;
    bool operator==(const CellBound&) const = default;
};

struct PartitionCell {
    std::vector<CellBound> bounds; // one per QI
    std::vector<std::string> labels;
    std::size_t size = 0; // rows of the fitting data in this cell
};

/// Split tree node. Internal nodes send a row left when its value is <= the
/// cut (numeric) or sorts <= `category_cut` (categorical).
struct PartitionNode {
    int qi = -1; // -1 for a leaf
    double numeric_cut = 0;
    std::string category_cut;
    int left = -1;
    int right = -1;
    int cell = -1; // leaf only
};

/// Mondrian partition learnt on the training data. The leaves tile the whole
/// QI space, so valid/test rows outside the observed extent still land in the
/// nearest cell.
struct GeneralizationMap {
    int k = 0;
    std::vector<QiExtent> qis;
    std::vector<PartitionNode> nodes;
    std::vector<PartitionCell> cells;

    /// Cell index for row `row` of `dataset`.
    std::size_t route(const Dataset& dataset, std::size_t row) const;
    nlohmann::json to_json() const;
};

struct Anonymized {
    Dataset data;
    GeneralizationMap map;
    std::vector<std::size_t> cell_of_row;
};

/// Greedy multidimensional partitioning: recursively split the cell on the QI
/// with the widest normalised range at its median, falling back to narrower
/// QIs when a side would hold fewer than k rows. Numeric QIs are rewritten to
/// interval labels, categorical QIs to group labels. Row count and all non-QI
/// columns are unchanged. Throws InfeasibleK when rows < k, SpecError when
/// k < 2 or the QI list is empty, UnknownFeature for unknown QIs.
Anonymized k_anonymize(const Dataset& dataset, std::span<const std::string> quasi_identifiers, int k);

/// Rewrites the QIs of `dataset` with the labels of the cells its rows route to.
Dataset apply_generalization(const Dataset& dataset, const GeneralizationMap& map);

/// Minimum multiplicity over the projection of rows onto the QIs (0 for an
/// empty dataset). Throws UnknownFeature for unknown QIs.
std::size_t verify_k_anonymity(const Dataset& dataset, std::span<const std::string> quasi_identifiers);

// ---------------------------------------------------------------------------
// Performance-based data minimisation

inline constexpr double kNeverStop = -std::numeric_limits<double>::infinity();

struct MinimizationTrace {
    std::vector<std::size_t> batch_sizes;
    std::vector<std::size_t> accumulated;
    std::vector<double> losses;
    /// Per-sample loss slope over the window; NaN until the window fills.
    std::vector<double> slopes;
    std::size_t stop_step = 0; // 1-based
    bool exhausted = false;
    std::size_t rows_available = 0;
    double fraction_used = 1.0;
    double threshold = -1e-7;
    int window = 3;
    int batch_size = 0;

    double slope_at_stop() const { return stop_step ? slopes[stop_step - 1] : std::numeric_limits<double>::quiet_NaN(); }
    nlohmann::json to_json() const;
    static MinimizationTrace from_json(const nlohmann::json& doc);
};

/// Trains on a subset and returns its validation loss.
using SubsetLoss = std::function<double(const Dataset&)>;

struct MinimizeOptions {
    double threshold = -1e-7;
    int batch_size = 250;
    int window = 3;
    std::uint64_t seed = 0;
    /// Optional group id per pool row. When given, batches are made of whole
    /// groups (e.g. k-anonymity cells) so every group is taken entirely or not
    /// at all.
    std::span<const std::size_t> groups;
};

struct Minimized {
    Dataset data;
    MinimizationTrace trace;
};

/// Accumulates shuffled batches, scoring each accumulated subset. Stops at the
/// first step t > window where (L_t - L_{t-w}) / (n_t - n_{t-w}) >= threshold,
/// or when the pool is exhausted. `kNeverStop` disables the rule. A subset the
/// loss rejects with DegenerateData scores NaN and cannot trigger a stop.
Minimized minimize_data(const Dataset& pool, const SubsetLoss& loss, const MinimizeOptions& options);

// ---------------------------------------------------------------------------
// Class weights

/// Positives get the positive weight (n_neg / n_pos when balanced), negatives
/// 1.0. Throws NoPositives when balancing without positives.
std::vector<double> class_weights(std::span<const int> labels, const ClassWeightParams& policy);

} // namespace tforge
