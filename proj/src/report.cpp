#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tforge/errors.hpp"
#include "tforge/pipeline.hpp"
#include "tforge/setform.hpp"

namespace tforge {

namespace {

std::string evaluation_rationale(EvaluationKind kind) {
    switch (kind) {
    case EvaluationKind::perf_panel: return "accuracy, precision and F1 on the held-out test split";
    case EvaluationKind::cdd:
        return "conditional demographic disparity of the predicted alerts over the protected attribute, "
               "conditioned on the strata features (alert = adverse outcome)";
    case EvaluationKind::data_usage_k_anon:
        return "share of the available training rows kept by the minimisation stopping rule, and whether the "
               "training data is k-anonymous over the quasi-identifiers";
    case EvaluationKind::risk_category:
        return "qualitative re-identification category assigned by rule (k-anonymity gives Very Low, an internal "
               "model without it Low, an externally shared one Moderate); no attack is simulated";
    case EvaluationKind::explainability_category:
        return "category by model family: logistic regression Moderate, random forest High";
    case EvaluationKind::recall: return "recall of the alert class on the test split (missed laundering cases)";
    }
    return "";
}

std::string outcome_text(EvaluationKind kind, const TradeoffRecord& r) {
    if (!r.ok()) return "set failed";
    switch (kind) {
    case EvaluationKind::perf_panel:
        return fmt::format("accuracy {:.4f}, precision {:.4f}, F1 {:.4f}", r.accuracy, r.precision, r.f1);
    case EvaluationKind::cdd: return fmt::format("CDD {:.4f}", r.cdd);
    case EvaluationKind::data_usage_k_anon:
        return fmt::format("{:.1f}% of the data used; k-anonymity {} (smallest class {})", r.data_used_pct,
                           r.k_anon ? "Yes" : "No", r.k_achieved);
    case EvaluationKind::risk_category: return fmt::format("re-identification likelihood {}", to_string(r.risk));
    case EvaluationKind::explainability_category: return fmt::format("explainability {}", to_string(r.explainability));
    case EvaluationKind::recall: return fmt::format("recall {:.4f}", r.recall);
    }
    return "";
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += sep;
        out += p;
    }
    return out;
}

std::string set_list(const std::vector<int>& ids) {
    if (ids.empty()) return "none";
    std::vector<std::string> parts;
    for (int id : ids) parts.push_back(fmt::format("Set {}", id));
    return join(parts, ", ");
}

const TradeoffRecord* find_record(const TradeoffTable& table, int id) {
    for (const auto& r : table.records) {
        if (r.set_id == id) return &r;
    }
    return nullptr;
}

std::vector<std::string> run_choices(const nlohmann::json& run, int set_id) {
    for (const auto& s : run.value("sets", nlohmann::json::array())) {
        if (s.at("set_id").get<int>() == set_id) return s.at("choices").get<std::vector<std::string>>();
    }
    return {};
}

} // namespace

std::string render_report(const RunRecordings& rec, const SelectionPolicy& policy, const Selection& selection) {
    const auto& spec = rec.spec;
    const auto spec_doc = to_json(spec);
    std::map<std::string, nlohmann::json> op_docs;
    for (const auto& o : spec_doc.at("operationalizations")) {
        op_docs[fmt::format("{}({})", o.at("requirement").get<std::string>(), o.at("index").get<int>())] = o;
    }

    std::string out;
    out += fmt::format("# Trade-off report: {}\n\n", spec.name.empty() ? "unnamed run" : spec.name);
    out += fmt::format("- Run: `{}`\n", rec.run.value("run_id", std::string("?")));
    out += fmt::format("- Global seed: {}\n", spec.seed);
    if (rec.run.contains("dataset")) {
        const auto& d = rec.run.at("dataset");
        out += fmt::format("- Dataset: {} rows ({})\n", d.value("rows", 0),
                           join(d.value("provenance", std::vector<std::string>{}), "; "));
    }
    if (rec.run.contains("split")) {
        const auto& s = rec.run.at("split");
        out += fmt::format("- Split: train {}, valid {}, test {}\n", s.value("train", 0), s.value("valid", 0),
                           s.value("test", 0));
    }
    out += fmt::format("- Sets evaluated: {}\n\n", rec.table.records.size());

    // Selection.
    out += "## Selection\n\n";
    const TradeoffRecord* chosen = selection.chosen ? find_record(rec.table, *selection.chosen) : nullptr;
    if (policy.thresholds.empty()) {
        out += "Hard thresholds: none.\n\n";
    } else {
        std::vector<std::string> t;
        for (const auto& th : policy.thresholds) t.push_back(th.describe());
        out += fmt::format("Hard thresholds: {}.\n\n", join(t, "; "));
    }
    if (policy.ranking == RankingKind::lexicographic) {
        std::vector<std::string> dims;
        for (auto d : policy.order) dims.push_back(fmt::format("{} ({})", to_string(d), to_string(natural_direction(d))));
        out += fmt::format("Ranking: lexicographic over {}; ties go to the lower set number.\n\n", join(dims, ", "));
    } else {
        std::vector<std::string> terms;
        for (const auto& w : policy.weights) {
            terms.push_back(fmt::format("{} x {} ({})", format_number(w.weight), to_string(w.dimension), to_string(w.direction)));
        }
        out += fmt::format("Ranking: weighted score {}, each term min-max scaled over the feasible sets.\n\n",
                           join(terms, " + "));
    }
    out += fmt::format("Feasible sets: {}.\n\n", set_list(selection.feasible));
    if (chosen) {
        out += fmt::format("**Chosen: Set {}** ({}).\n\n", chosen->set_id, join(run_choices(rec.run, chosen->set_id), ", "));
        for (const auto& [dim, text] : selection.rationale) out += fmt::format("- {}: {}\n", dim, text);
        out += "\n";
        if (std::abs(chosen->cdd) > policy.cdd_soft_limit) {
            out += fmt::format("**Monitoring recommended:** |CDD| = {:.4f} exceeds the soft limit {}.\n\n",
                               std::abs(chosen->cdd), format_number(policy.cdd_soft_limit));
        } else {
            out += fmt::format("Monitoring flag: not raised (|CDD| = {:.4f} within the soft limit {}).\n\n",
                               std::abs(chosen->cdd), format_number(policy.cdd_soft_limit));
        }
    } else {
        out += "**No model meets all thresholds.** Nothing is selected.\n\n";
        if (!selection.binding.empty()) {
            out += "Binding constraints (no set passes them):\n\n";
            for (const auto& b : selection.binding) out += fmt::format("- {}\n", b);
            out += "\n";
        } else {
            out += "Every threshold is met by some set, but no set meets all of them; see the threshold checks.\n\n";
        }
    }

    // Requirements.
    out += "## Requirements\n\n";
    for (const auto& req : spec.requirements) {
        out += fmt::format("### {} ({})\n\n", req.name.empty() ? req.id : req.name, req.id);
        if (chosen) {
            for (const auto& label : run_choices(rec.run, chosen->set_id)) {
                if (label.rfind(req.id + "(", 0) != 0) continue;
                auto it = op_docs.find(label);
                if (it == op_docs.end()) {
                    out += fmt::format("- Operationalization: {}\n", label);
                    continue;
                }
                const auto& o = it->second;
                out += fmt::format("- Operationalization: {} `{}` with params `{}`", label, o.at("kind").get<std::string>(),
                                   o.value("params", nlohmann::json::object()).dump());
                if (o.contains("extends")) out += fmt::format(", extending {}({})", req.id, o.at("extends").get<int>());
                out += "\n";
            }
        }
        out += fmt::format("- Evaluation ({}): {}\n", to_string(req.evaluation), evaluation_rationale(req.evaluation));
        if (chosen) {
            out += fmt::format("- Outcome for Set {}: {}\n", chosen->set_id, outcome_text(req.evaluation, *chosen));
        } else {
            out += "- Outcome per set:\n";
            for (const auto& r : rec.table.records) {
                out += fmt::format("  - Set {}: {}\n", r.set_id, outcome_text(req.evaluation, r));
            }
        }
        out += "\n";
    }

    // Trade-off table.
    out += "## Trade-off table\n\n";
    out += rec.table.to_markdown();
    out += "\n";

    // Pareto.
    out += "## Pareto front\n\n";
    std::vector<std::string> dirs;
    for (const auto& [d, dir] : policy.pareto) dirs.push_back(fmt::format("{} {}", to_string(d), to_string(dir)));
    const auto front = pareto_front(rec.table.records, policy.pareto);
    out += fmt::format("Compared on {} (|CDD| for cdd).\n\n", join(dirs, ", "));
    out += "| Set | On front |\n|---|---|\n";
    for (const auto& r : rec.table.records) {
        const bool member = std::find(front.begin(), front.end(), r.set_id) != front.end();
        out += fmt::format("| Set {} | {} |\n", r.set_id, !r.ok() ? "failed" : member ? "yes" : "no");
    }
    out += "\n";

    // Threshold matrix.
    out += "## Threshold checks\n\n";
    if (policy.thresholds.empty()) {
        out += "No thresholds; every successful set is feasible.\n\n";
    } else {
        out += "| Set |";
        for (const auto& t : policy.thresholds) out += fmt::format(" {} |", t.describe());
        out += " Feasible |\n|---|";
        for (std::size_t i = 0; i < policy.thresholds.size(); ++i) out += "---|";
        out += "---|\n";
        for (const auto& [id, checks] : selection.matrix) {
            out += fmt::format("| Set {} |", id);
            for (const auto& c : checks) out += fmt::format(" {} ({}) |", c.pass ? "pass" : "FAIL", c.observed);
            const bool feasible = std::find(selection.feasible.begin(), selection.feasible.end(), id) != selection.feasible.end();
            out += fmt::format(" {} |\n", feasible ? "yes" : "no");
        }
        out += "\n";
    }

    // Implementation choices.
    out += "## Implementation choices\n\n";
    out += "- Favourable outcome is label 0 (no alert); an alert is the adverse outcome for CDD and the reject option.\n";
    out += fmt::format("- Unprivileged group: {} = {} (higher alert rate on the training split).\n",
                       spec.protected_feature, rec.run.value("unprivileged_value", std::string("?")));
    out += fmt::format("- Strata: {}; numeric strata features are cut into quintiles of each evaluation split.\n",
                       join(spec.strata_features, " x "));
    if (rec.run.contains("strata_edges") && rec.run.at("strata_edges").contains("test")) {
        for (const auto& [name, edges] : rec.run.at("strata_edges").at("test").items()) {
            std::vector<std::string> e;
            for (const auto& v : edges) e.push_back(format_number(v.get<double>()));
            out += fmt::format("  - test quintile edges for {}: {}\n", name, join(e, ", "));
        }
    }
    out += fmt::format("- Transform order: {}.\n", spec.transform_order == TransformOrder::anonymize_first
                                                       ? "drop, k-anonymise, minimise, weight, train, reject option"
                                                       : "drop, minimise, k-anonymise, weight, train, reject option");
    out += "- Minimisation stops at the first step t past the window w where (L_t - L_{t-w}) / (n_t - n_{t-w}) >= "
           "threshold, L being the weighted validation log-loss of a model trained on the rows taken so far.\n";
    for (const auto& [id, m] : rec.set_metrics) {
        if (m.value("status", "") != "ok") continue;
        std::vector<std::string> parts;
        if (m.contains("data_usage") && m.at("data_usage").contains("stop_step")) {
            const auto& d = m.at("data_usage");
            const auto slope = d.at("slope_at_stop");
            parts.push_back(fmt::format("minimisation stopped at step {} ({}; slope {})", d.at("stop_step").get<int>(),
                                        d.at("exhausted").get<bool>() ? "pool exhausted" : "rule fired",
                                        slope.is_null() ? "n/a" : fmt::format("{:.3e}", slope.get<double>())));
        }
        if (m.contains("reject_option") && m.at("reject_option").value("applied", false)) {
            const auto& ro = m.at("reject_option");
            parts.push_back(fmt::format("theta {} ({}, epsilon {})", format_number(ro.at("theta").get<double>()),
                                        ro.value("tuned", false) ? "tuned on validation" : "fixed",
                                        format_number(ro.at("epsilon").get<double>())));
        }
        if (m.contains("k_anonymity") && m.at("k_anonymity").value("applied", false)) {
            const auto& k = m.at("k_anonymity");
            parts.push_back(fmt::format("k = {} over {} quasi-identifiers, {} cells, smallest class {}",
                                        k.at("k").get<int>(), k.at("quasi_identifiers").size(),
                                        k.at("cells").get<std::size_t>(), k.at("achieved").get<std::size_t>()));
        }
        if (!parts.empty()) out += fmt::format("- Set {}: {}\n", id, join(parts, "; "));
    }
    out += "\n";

    // Not evaluated.
    out += "## Legal risks not evaluated\n\n";
    out += "- Re-identification is graded by rule; no membership-inference or model-inversion attack was run.\n";
    out += "- Right to erasure and storage limitation are outside the measured dimensions.\n";
    out += "- Disparity is measured for one protected attribute within the configured strata only, without "
           "significance testing or intersectional groups.\n";
    out += "- Laundering risk coverage is measured as recall against the available labels, which may miss "
           "undetected cases.\n";
    out += "- Explainability is a category per model family, not an assessment of the trained model.\n";
    out += "- These results support the legal assessment; they do not replace the organisation's own "
           "mitigation, documentation and review duties.\n";
    return out;
}

} // namespace tforge
