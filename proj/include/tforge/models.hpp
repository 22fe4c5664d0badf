#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tforge/dataset.hpp"
#include "tforge/spec.hpp"

namespace tforge {

// ---------------------------------------------------------------------------
// Encoding

/// Compressed sparse rows.
struct DesignMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_start{0};
    std::vector<std::uint32_t> index;
    std::vector<double> value;

    void push_row(std::span<const std::pair<std::uint32_t, double>> entries);
    static DesignMatrix dense(const std::vector<std::vector<double>>& rows);
};

/// Model-visible inputs: every schema column that is neither the label nor
/// excluded, and not an account id.
std::vector<std::size_t> model_inputs(const Dataset& dataset);

struct EncodedInput {
    std::string name;
    bool numeric = false;
    double mean = 0;
    double stddev = 1;
    /// Categories seen in training; one extra column follows for "other".
    std::vector<std::string> categories;
    std::size_t offset = 0;

    std::size_t width() const { return numeric ? 1 : categories.size() + 1; }
};

/// One-hot for categorical inputs (with an "other" bucket for unseen values),
/// z-scores for numeric ones. Constant numeric columns are dropped.
class FeatureEncoder {
public:
    static FeatureEncoder fit(const Dataset& train);

    /// Throws SchemaMismatch when an input is missing or changed kind.
    DesignMatrix transform(const Dataset& rows) const;

    std::size_t width() const { return width_; }
    const std::vector<EncodedInput>& inputs() const { return inputs_; }
    std::vector<std::string> column_names() const;

    nlohmann::json to_json() const;
    static FeatureEncoder from_json(const nlohmann::json& doc);

private:
    std::vector<EncodedInput> inputs_;
    std::size_t width_ = 0;
};

// ---------------------------------------------------------------------------
// Logistic regression

/// (1/n) sum_i w_i * ce(y_i, sigmoid(x_i.beta + b)) + (l2/2) |beta|^2.
/// The intercept is not penalised.
double weighted_log_loss(const DesignMatrix& x, std::span<const int> y, std::span<const double> w,
                         std::span<const double> beta, double intercept, double l2);

/// Gradient of weighted_log_loss. Returns beta gradient; intercept gradient
/// goes to `grad_intercept`.
std::vector<double> weighted_log_loss_gradient(const DesignMatrix& x, std::span<const int> y,
                                               std::span<const double> w, std::span<const double> beta,
                                               double intercept, double l2, double& grad_intercept);

struct LogRegModel {
    FeatureEncoder encoder;
    std::vector<double> coefficients;
    double intercept = 0;
    LogRegHyper hyper;
    double initial_loss = 0;
    double final_loss = 0;
    int step_halvings = 0;
};

/// Full-batch gradient descent. The step is halved whenever it would raise
/// the loss, so the final loss never exceeds the initial one.
/// Throws DegenerateData for single-class data, LengthMismatch for weights.
LogRegModel train_logreg(const Dataset& train, std::span<const double> weights, const LogRegHyper& hyper);

// ---------------------------------------------------------------------------
// Random forest

struct TreeNode {
    int feature = -1; // -1 for a leaf
    double threshold = 0;             // numeric: go left when value <= threshold
    std::vector<std::uint8_t> left;   // categorical: membership by category code
    int left_child = -1;
    int right_child = -1;
    double p1 = 0;                    // leaf probability of label 1
};

struct DecisionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    int depth() const;
};

struct ForestInput {
    std::string name;
    bool numeric = false;
    std::vector<std::string> categories; // code = index; unseen values get categories.size()
    std::vector<double> edges;           // numeric bin edges used during training
};

struct ForestModel {
    std::vector<ForestInput> inputs;
    std::vector<DecisionTree> trees;
    ForestHyper hyper;

    /// Probability of label 1 from one tree, for rows already coded.
    double tree_proba(std::size_t tree, std::span<const double> coded_row) const;
};

/// Bagged CART trees: bootstrap draws proportional to weights, splits by
/// Gini decrease over histogram bins (numeric) or p1-ordered category
/// prefixes (categorical). Each tree uses the RNG stream derive_seed(seed, t).
/// Throws DegenerateData for single-class data.
ForestModel train_forest(const Dataset& train, std::span<const double> weights, const ForestHyper& hyper);

// ---------------------------------------------------------------------------
// Inference and persistence

using Model = std::variant<LogRegModel, ForestModel>;

ModelFamily family_of(const Model& model);

/// P(label = 1) per row. Throws SchemaMismatch.
std::vector<double> predict_proba(const Model& model, const Dataset& rows);
std::vector<double> predict_proba(const LogRegModel& model, const Dataset& rows);
std::vector<double> predict_proba(const ForestModel& model, const Dataset& rows);

nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Reject option

struct RejectOptionRule {
    double theta = 0.5;
    std::string unprivileged_value;
    int favorable = 0;
};

/// argmax labels (p >= 0.5 -> 1) outside the critical region max(p, 1-p) <=
/// theta; inside it the unprivileged group gets the favourable label and
/// everyone else the unfavourable one. Throws LengthMismatch.
std::vector<int> apply_reject_option(std::span<const double> probs, std::span<const std::string> protected_values,
                                     const RejectOptionRule& rule);

struct ThetaCandidate {
    double theta = 0;
    double recall = 0;
    double cdd = 0;
    bool feasible = false;
};

struct ThetaTuning {
    RejectOptionRule rule;
    double baseline_recall = 0;
    double baseline_cdd = 0;
    std::vector<ThetaCandidate> grid;
};

/// Grid search over theta in {0.55, ..., 1.00} for minimal |CDD| on the
/// validation split, subject to recall(theta) >= recall(0.5) - epsilon.
/// Ties go to the smaller theta; theta stays 0.5 when no grid point beats the
/// baseline. Throws NoFeasibleTheta when no grid point meets the recall bound.
ThetaTuning tune_theta(std::span<const double> probs, std::span<const std::string> protected_values,
                       std::span<const int> labels, std::span<const std::string> strata,
                       const std::string& unprivileged_value, double epsilon);

} // namespace tforge
