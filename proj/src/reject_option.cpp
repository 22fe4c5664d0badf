#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tforge/errors.hpp"
#include "tforge/metrics.hpp"
#include "tforge/models.hpp"

namespace tforge {

std::vector<int> apply_reject_option(std::span<const double> probs, std::span<const std::string> protected_values,
                                     const RejectOptionRule& rule) {
    if (probs.size() != protected_values.size()) {
        throw LengthMismatch(fmt::format("{} probabilities vs {} group values", probs.size(), protected_values.size()));
    }
    const int unfavorable = 1 - rule.favorable;
    std::vector<int> labels(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = probs[i];
        if (std::max(p, 1.0 - p) <= rule.theta) {
            labels[i] = protected_values[i] == rule.unprivileged_value ? rule.favorable : unfavorable;
        } else {
            labels[i] = p >= 0.5 ? 1 : 0;
        }
    }
    return labels;
}

ThetaTuning tune_theta(std::span<const double> probs, std::span<const std::string> protected_values,
                       std::span<const int> labels, std::span<const std::string> strata,
                       const std::string& unprivileged_value, double epsilon) {
    if (!(epsilon >= 0)) throw Error("epsilon must be non-negative");
    if (labels.size() != probs.size()) throw LengthMismatch("one label per probability");
    std::vector<std::uint8_t> in_group(protected_values.size());
    for (std::size_t i = 0; i < in_group.size(); ++i) in_group[i] = protected_values[i] == unprivileged_value;

    auto evaluate = [&](double theta) {
        const auto predicted = apply_reject_option(probs, protected_values, {theta, unprivileged_value, 0});
        ThetaCandidate c;
        c.theta = theta;
        c.recall = perf_panel(confusion(labels, predicted)).recall;
        c.cdd = cdd(predicted, in_group, strata).cdd;
        return c;
    };

    ThetaTuning out;
    out.rule = {0.5, unprivileged_value, 0};
    const auto baseline = evaluate(0.5);
    out.baseline_recall = baseline.recall;
    out.baseline_cdd = baseline.cdd;

    const ThetaCandidate* best = nullptr;
    for (int i = 1; i <= 10; ++i) {
        auto c = evaluate((50.0 + 5.0 * i) / 100.0);
        c.feasible = baseline.recall - c.recall <= epsilon;
        out.grid.push_back(c);
    }
    for (const auto& c : out.grid) {
        if (c.feasible && (!best || std::abs(c.cdd) < std::abs(best->cdd))) best = &c;
    }
    if (!best) throw NoFeasibleTheta(fmt::format("no theta keeps the recall drop within {}", epsilon));
    if (std::abs(best->cdd) < std::abs(baseline.cdd)) out.rule.theta = best->theta;
    return out;
}

} // namespace tforge
