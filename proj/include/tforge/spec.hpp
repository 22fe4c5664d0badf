#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tforge/dataset.hpp"
#include "tforge/policy.hpp"

namespace tforge {

/// How a legal requirement is evaluated.
enum class EvaluationKind { perf_panel, cdd, data_usage_k_anon, risk_category, explainability_category, recall };

enum class OpKind { feature_drop, reject_option, data_minimization, k_anonymity, no_op, model_family, class_weighting };

inline constexpr OpKind kAllOpKinds[] = {OpKind::feature_drop,  OpKind::reject_option, OpKind::data_minimization,
                                         OpKind::k_anonymity,   OpKind::no_op,         OpKind::model_family,
                                         OpKind::class_weighting};

enum class ModelFamily { logreg, forest };

std::string_view to_string(EvaluationKind kind);
std::string_view to_string(OpKind kind);
std::string_view to_string(ModelFamily family);
EvaluationKind parse_evaluation_kind(std::string_view text, const std::string& path = {});
OpKind parse_op_kind(std::string_view text, const std::string& path = {});
ModelFamily parse_model_family(std::string_view text, const std::string& path = {});

struct LegalRequirement {
    std::string id;
    std::string name;
    EvaluationKind evaluation = EvaluationKind::perf_panel;
    bool operator==(const LegalRequirement&) const = default;
};

// Parameters per operationalization kind.
struct NoOpParams {
    bool operator==(const NoOpParams&) const = default;
};
struct FeatureDropParams {
    std::vector<std::string> features;
    bool operator==(const FeatureDropParams&) const = default;
};
struct RejectOptionParams {
    /// Fixed theta in [0.5, 1]; tuned on the validation split when absent.
    std::optional<double> theta;
    /// Largest tolerated recall drop relative to theta = 0.5.
    double epsilon = 0.02;
    bool operator==(const RejectOptionParams&) const = default;
};
struct MinimizationParams {
    /// Negative; -infinity means "never stop".
    double stopping_threshold = -1.0e-7;
    int batch_size = 250;
    int window = 3;
    bool operator==(const MinimizationParams&) const = default;
};
struct KAnonymityParams {
    int k = 7;
    bool operator==(const KAnonymityParams&) const = default;
};
struct ModelFamilyParams {
    ModelFamily family = ModelFamily::logreg;
    bool operator==(const ModelFamilyParams&) const = default;
};
struct ClassWeightParams {
    bool balanced = false;
    double positive_weight = 1.0;
    bool operator==(const ClassWeightParams&) const = default;
};

using OpParams = std::variant<NoOpParams, FeatureDropParams, RejectOptionParams, MinimizationParams,
                              KAnonymityParams, ModelFamilyParams, ClassWeightParams>;

/// Whether `params` holds the parameter type that `kind` dispatches to.
bool params_match_kind(OpKind kind, const OpParams& params);

struct Operationalization {
    std::string id;
    std::string requirement;
    int index = 1; // 1-based within the requirement
    OpKind kind = OpKind::no_op;
    OpParams params;
    /// Index of another operationalization of the same requirement that this one
    /// builds on ("in addition to (1)").
    std::optional<int> extends;
    bool operator==(const Operationalization&) const = default;
};

struct OpRef {
    std::string requirement;
    int index = 1;
    bool operator==(const OpRef&) const = default;
};

enum class RuleKind { implies, excludes };

struct CompatibilityRule {
    RuleKind kind = RuleKind::implies;
    OpRef antecedent;
    OpRef consequent;
    std::string describe() const;
    bool operator==(const CompatibilityRule&) const = default;
};

/// One operationalization per requirement, in requirement order.
struct OperationalizationSet {
    int set_id = 0;
    std::vector<Operationalization> choices;

    const Operationalization* choice(std::string_view requirement) const;
    bool operator==(const OperationalizationSet&) const = default;
};

struct SplitFractions {
    double train = 0.6;
    double valid = 0.2;
    double test = 0.2;
    bool operator==(const SplitFractions&) const = default;
};

struct LogRegHyper {
    double learning_rate = 0.1;
    int epochs = 2000;
    double l2 = 1e-4;
    bool operator==(const LogRegHyper&) const = default;
};

struct ForestHyper {
    int n_trees = 200;
    int max_depth = 8;
    int min_leaf = 5;
    /// Fraction of input features tried per split; 0 selects sqrt(d).
    double feature_subsample = 0.0;
    std::uint64_t seed = 0;
    bool operator==(const ForestHyper&) const = default;
};

enum class TransformOrder { anonymize_first, minimize_first };

struct PrunePolicy {
    std::size_t max_count = 0; // 0 keeps everything
    std::map<int, double> scores;
    bool operator==(const PrunePolicy&) const = default;
};

enum class RiskCategory { very_low, low, moderate, high, very_high };
std::string_view to_string(RiskCategory risk);
RiskCategory parse_risk_category(std::string_view text, const std::string& path = {});

struct RunSpec {
    std::string name;
    std::vector<LegalRequirement> requirements;
    std::vector<Operationalization> operationalizations;
    std::vector<CompatibilityRule> rules;
    std::string protected_feature = "Gender";
    std::vector<std::string> strata_features;
    std::vector<std::string> quasi_identifiers;
    SplitFractions split;
    std::uint64_t seed = 42;
    SelectionPolicy selection;
    LogRegHyper logreg;
    ForestHyper forest;
    ModelFamily default_family = ModelFamily::logreg;
    TransformOrder transform_order = TransformOrder::anonymize_first;
    PrunePolicy prune;
    bool model_shared_externally = false;
    std::map<int, RiskCategory> risk_overrides;

    const LegalRequirement* requirement(std::string_view id) const;
    const Operationalization* operationalization(const OpRef& ref) const;
    std::vector<const Operationalization*> operationalizations_of(std::string_view requirement) const;

    bool operator==(const RunSpec&) const = default;
};

/// Validates a parsed spec document and returns the normalised RunSpec.
/// Operationalizations are ordered by (requirement order, index); missing
/// indices are assigned in declaration order. Throws SpecError.
RunSpec validate_spec(const nlohmann::json& raw);
RunSpec load_spec(const std::filesystem::path& path);
nlohmann::json to_json(const RunSpec& spec);

/// Dataset invariants plus the spec's feature references. Empty iff valid.
std::vector<std::string> validate_dataset(const Dataset& dataset, const RunSpec& spec);

} // namespace tforge
