#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tforge/dataset.hpp"
#include "tforge/models.hpp"
#include "tforge/spec.hpp"
#include "tforge/synthgen.hpp"
#include "tforge/trademap.hpp"
#include "tforge/transforms.hpp"

namespace tforge {

/// Facts fixed once per run and shared by every set.
struct RunContext {
    /// Protected value with the higher alert rate on the training split.
    std::string unprivileged_value;
    std::vector<std::string> valid_strata;
    std::vector<std::string> test_strata;
    nlohmann::json strata_edges;
    /// Batch order for data minimisation. Shared across sets so that sets
    /// differing in other operationalizations see the same batches.
    std::uint64_t batch_seed = 0;
};

RunContext make_context(const Splits& data, const RunSpec& spec);

/// The set's operationalizations plus everything they extend, without repeats.
std::vector<const Operationalization*> effective_operationalizations(const OperationalizationSet& set,
                                                                     const RunSpec& spec);

struct SetResult {
    OperationalizationSet set;
    std::uint64_t seed = 0;
    TradeoffRecord record;
    std::optional<Model> model;
    nlohmann::json provenance;
    std::optional<MinimizationTrace> trace;
    std::optional<GeneralizationMap> genmap;
    nlohmann::json metrics;
    std::vector<double> test_probs;
    std::vector<int> test_predictions;
};

/// Drop, anonymise, minimise, weight, train, post-process, then evaluate on
/// the test split. Any error yields a failed record instead of propagating.
SetResult execute_set(const OperationalizationSet& set, const Splits& data, const RunSpec& spec,
                      const RunContext& context);
SetResult execute_set(const OperationalizationSet& set, const Splits& data, const RunSpec& spec);

struct RunOptions {
    /// Runs are written to <out_root>/<run id>/; nothing is written when empty.
    std::filesystem::path out_root = "runs";
    int parallel = 1;
};

struct RunArtifacts {
    std::string run_id;
    std::filesystem::path dir;
    std::vector<SetResult> sets;
    TradeoffTable table;
};

/// Hash of the normalised spec and the dataset contents.
std::string compute_run_id(const RunSpec& spec, const Dataset& dataset);

/// Splits once, enumerates and prunes sets, executes them on up to
/// `parallel` workers and persists the artifacts. Throws SpecError or
/// SchemaMismatch when the spec or dataset is invalid, IoError on write
/// failures.
RunArtifacts execute_run(const RunSpec& spec, const Dataset& dataset, const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Reports

/// Everything the report is rendered from, as read back from a run directory.
struct RunRecordings {
    RunSpec spec;
    nlohmann::json run;
    TradeoffTable table;
    std::map<int, nlohmann::json> set_metrics;
};

RunRecordings load_run(const std::filesystem::path& run_dir);

std::string render_report(const RunRecordings& recordings, const SelectionPolicy& policy, const Selection& selection);

/// Re-renders report.md (and selection.json) of a run directory from its
/// persisted artifacts, using `policy` or the spec's own policy.
Selection write_report(const std::filesystem::path& run_dir, const std::optional<SelectionPolicy>& policy = {});

} // namespace tforge
