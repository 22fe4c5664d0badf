#include "tforge/spec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "tforge/errors.hpp"

namespace tforge {

using nlohmann::json;

std::string_view to_string(EvaluationKind kind) {
    switch (kind) {
    case EvaluationKind::perf_panel: return "perf-panel";
    case EvaluationKind::cdd: return "cdd";
    case EvaluationKind::data_usage_k_anon: return "data-usage+k-anon";
    case EvaluationKind::risk_category: return "risk-category";
    case EvaluationKind::explainability_category: return "explainability-category";
    case EvaluationKind::recall: return "recall";
    }
    return "unknown";
}

std::string_view to_string(OpKind kind) {
    switch (kind) {
    case OpKind::feature_drop: return "feature-drop";
    case OpKind::reject_option: return "reject-option";
    case OpKind::data_minimization: return "data-minimization";
    case OpKind::k_anonymity: return "k-anonymity";
    case OpKind::no_op: return "no-op";
    case OpKind::model_family: return "model-family";
    case OpKind::class_weighting: return "class-weighting";
    }
    return "unknown";
}

std::string_view to_string(ModelFamily family) {
    return family == ModelFamily::logreg ? "logreg" : "forest";
}

std::string_view to_string(RiskCategory risk) {
    switch (risk) {
    case RiskCategory::very_low: return "Very Low";
    case RiskCategory::low: return "Low";
    case RiskCategory::moderate: return "Moderate";
    case RiskCategory::high: return "High";
    case RiskCategory::very_high: return "Very High";
    }
    return "unknown";
}

EvaluationKind parse_evaluation_kind(std::string_view text, const std::string& path) {
    for (auto k : {EvaluationKind::perf_panel, EvaluationKind::cdd, EvaluationKind::data_usage_k_anon,
                   EvaluationKind::risk_category, EvaluationKind::explainability_category, EvaluationKind::recall}) {
        if (to_string(k) == text) return k;
    }
    throw SpecError(path, fmt::format("unknown evaluation '{}'", text));
}

OpKind parse_op_kind(std::string_view text, const std::string& path) {
    for (auto k : kAllOpKinds) {
        if (to_string(k) == text) return k;
    }
    throw SpecError(path, fmt::format("unknown operationalization kind '{}'", text));
}

ModelFamily parse_model_family(std::string_view text, const std::string& path) {
    if (text == "logreg") return ModelFamily::logreg;
    if (text == "forest") return ModelFamily::forest;
    throw SpecError(path, fmt::format("unknown model family '{}'", text));
}

RiskCategory parse_risk_category(std::string_view text, const std::string& path) {
    for (auto r : {RiskCategory::very_low, RiskCategory::low, RiskCategory::moderate, RiskCategory::high,
                   RiskCategory::very_high}) {
        if (to_string(r) == text) return r;
    }
    throw SpecError(path, fmt::format("unknown risk category '{}'", text));
}

std::string CompatibilityRule::describe() const {
    return fmt::format("{}({}) {} {}({})", antecedent.requirement, antecedent.index,
                       kind == RuleKind::implies ? "implies" : "excludes", consequent.requirement, consequent.index);
}

const Operationalization* OperationalizationSet::choice(std::string_view requirement) const {
    for (const auto& op : choices) {
        if (op.requirement == requirement) return &op;
    }
    return nullptr;
}

const LegalRequirement* RunSpec::requirement(std::string_view id) const {
    for (const auto& r : requirements) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

const Operationalization* RunSpec::operationalization(const OpRef& ref) const {
    for (const auto& op : operationalizations) {
        if (op.requirement == ref.requirement && op.index == ref.index) return &op;
    }
    return nullptr;
}

std::vector<const Operationalization*> RunSpec::operationalizations_of(std::string_view requirement) const {
    std::vector<const Operationalization*> out;
    for (const auto& op : operationalizations) {
        if (op.requirement == requirement) out.push_back(&op);
    }
    return out;
}

namespace {

const std::vector<std::string>& default_quasi_identifiers() {
    static const std::vector<std::string> qis{"Gender",         "Legal Domicile", "Tax Residency",
                                              "Source of Wealth Industry", "Total Estimated Assets",
                                              "Profession",     "PEP Status",     "Amount"};
    return qis;
}

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> known, const std::string& path) {
    for (const auto& [key, _] : obj.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw SpecError(path.empty() ? key : path + "." + key, "unknown field");
        }
    }
}

const json& require(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SpecError(path + "." + key, "missing field");
    return *it;
}

std::string string_at(const json& j, const std::string& path) {
    if (!j.is_string()) throw SpecError(path, "expected a string");
    auto s = j.get<std::string>();
    if (s.empty()) throw SpecError(path, "must not be empty");
    return s;
}

double number_at(const json& j, const std::string& path) {
    if (!j.is_number()) throw SpecError(path, "expected a number");
    return j.get<double>();
}

long long integer_at(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw SpecError(path, "expected an integer");
    return j.get<long long>();
}

std::vector<std::string> strings_at(const json& j, const std::string& path) {
    if (!j.is_array()) throw SpecError(path, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(string_at(j[i], fmt::format("{}[{}]", path, i)));
    return out;
}

OpParams parse_params(OpKind kind, const json& params, const std::string& path) {
    if (!params.is_object()) throw SpecError(path, "expected an object");
    switch (kind) {
    case OpKind::no_op:
        reject_unknown_keys(params, {}, path);
        return NoOpParams{};
    case OpKind::feature_drop: {
        reject_unknown_keys(params, {"features"}, path);
        FeatureDropParams p;
        if (params.contains("features")) p.features = strings_at(params["features"], path + ".features");
        return p;
    }
    case OpKind::reject_option: {
        reject_unknown_keys(params, {"theta", "epsilon"}, path);
        RejectOptionParams p;
        if (params.contains("theta")) {
            const double theta = number_at(params["theta"], path + ".theta");
            if (!(theta >= 0.5 && theta <= 1.0)) throw SpecError(path + ".theta", "must be in [0.5, 1]");
            p.theta = theta;
        }
        if (params.contains("epsilon")) {
            p.epsilon = number_at(params["epsilon"], path + ".epsilon");
            if (!(p.epsilon >= 0)) throw SpecError(path + ".epsilon", "must be ≥ 0");
        }
        return p;
    }
    case OpKind::data_minimization: {
        reject_unknown_keys(params, {"stopping_threshold", "batch_size", "window"}, path);
        MinimizationParams p;
        if (params.contains("stopping_threshold")) {
            const auto& t = params["stopping_threshold"];
            if (t.is_string() && t.get<std::string>() == "never") {
                p.stopping_threshold = -std::numeric_limits<double>::infinity();
            } else {
                p.stopping_threshold = number_at(t, path + ".stopping_threshold");
                if (!(p.stopping_threshold < 0)) throw SpecError(path + ".stopping_threshold", "must be < 0");
            }
        }
        if (params.contains("batch_size")) {
            const auto b = integer_at(params["batch_size"], path + ".batch_size");
            if (b < 1) throw SpecError(path + ".batch_size", "must be ≥ 1");
            p.batch_size = static_cast<int>(b);
        }
        if (params.contains("window")) {
            const auto w = integer_at(params["window"], path + ".window");
            if (w < 1) throw SpecError(path + ".window", "must be ≥ 1");
            p.window = static_cast<int>(w);
        }
        return p;
    }
    case OpKind::k_anonymity: {
        reject_unknown_keys(params, {"k"}, path);
        KAnonymityParams p;
        const auto k = integer_at(require(params, "k", path), path + ".k");
        if (k < 2) throw SpecError(path + ".k", "params.k must be ≥ 2");
        p.k = static_cast<int>(k);
        return p;
    }
    case OpKind::model_family: {
        reject_unknown_keys(params, {"family"}, path);
        ModelFamilyParams p;
        p.family = parse_model_family(string_at(require(params, "family", path), path + ".family"), path + ".family");
        return p;
    }
    case OpKind::class_weighting: {
        reject_unknown_keys(params, {"policy", "positive_weight"}, path);
        ClassWeightParams p;
        const auto policy = params.value("policy", std::string("fixed"));
        if (policy == "balanced") {
            p.balanced = true;
            if (params.contains("positive_weight")) {
                throw SpecError(path + ".positive_weight", "not allowed with the balanced policy");
            }
        } else if (policy == "fixed") {
            p.positive_weight = number_at(require(params, "positive_weight", path), path + ".positive_weight");
            if (!(p.positive_weight > 0) || !std::isfinite(p.positive_weight)) {
                throw SpecError(path + ".positive_weight", "must be a positive real");
            }
        } else {
            throw SpecError(path + ".policy", fmt::format("unknown weight policy '{}'", policy));
        }
        return p;
    }
    }
    throw SpecError(path, "unhandled operationalization kind");
}

OpRef parse_ref(const json& j, const std::string& path, const RunSpec& spec) {
    if (!j.is_object()) throw SpecError(path, "expected {requirement, index}");
    reject_unknown_keys(j, {"requirement", "index"}, path);
    OpRef ref;
    ref.requirement = string_at(require(j, "requirement", path), path + ".requirement");
    ref.index = static_cast<int>(integer_at(require(j, "index", path), path + ".index"));
    if (!spec.requirement(ref.requirement)) {
        throw SpecError(path + ".requirement", fmt::format("unknown requirement '{}'", ref.requirement));
    }
    if (!spec.operationalization(ref)) {
        throw SpecError(path + ".index",
                        fmt::format("unknown operationalization {}({})", ref.requirement, ref.index));
    }
    return ref;
}

json params_to_json(const OpParams& params) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            json j = json::object();
            if constexpr (std::is_same_v<T, FeatureDropParams>) {
                j["features"] = p.features;
            } else if constexpr (std::is_same_v<T, RejectOptionParams>) {
                if (p.theta) j["theta"] = *p.theta;
                j["epsilon"] = p.epsilon;
            } else if constexpr (std::is_same_v<T, MinimizationParams>) {
                if (std::isinf(p.stopping_threshold)) {
                    j["stopping_threshold"] = "never";
                } else {
                    j["stopping_threshold"] = p.stopping_threshold;
                }
                j["batch_size"] = p.batch_size;
                j["window"] = p.window;
            } else if constexpr (std::is_same_v<T, KAnonymityParams>) {
                j["k"] = p.k;
            } else if constexpr (std::is_same_v<T, ModelFamilyParams>) {
                j["family"] = to_string(p.family);
            } else if constexpr (std::is_same_v<T, ClassWeightParams>) {
                if (p.balanced) {
                    j["policy"] = "balanced";
                } else {
                    j["policy"] = "fixed";
                    j["positive_weight"] = p.positive_weight;
                }
            }
            return j;
        },
        params);
}

} // namespace

bool params_match_kind(OpKind kind, const OpParams& params) {
    switch (kind) {
    case OpKind::no_op: return std::holds_alternative<NoOpParams>(params);
    case OpKind::feature_drop: return std::holds_alternative<FeatureDropParams>(params);
    case OpKind::reject_option: return std::holds_alternative<RejectOptionParams>(params);
    case OpKind::data_minimization: return std::holds_alternative<MinimizationParams>(params);
    case OpKind::k_anonymity: return std::holds_alternative<KAnonymityParams>(params);
    case OpKind::model_family: return std::holds_alternative<ModelFamilyParams>(params);
    case OpKind::class_weighting: return std::holds_alternative<ClassWeightParams>(params);
    }
    return false;
}

RunSpec validate_spec(const json& raw) {
    if (!raw.is_object()) throw SpecError("", "spec must be a JSON object");
    reject_unknown_keys(raw,
                        {"name", "description", "requirements", "operationalizations", "rules", "protected_feature",
                         "strata_features", "quasi_identifiers", "split", "seed", "selection", "models",
                         "transform_order", "prune", "deployment", "risk_overrides"},
                        "");
    RunSpec spec;
    spec.name = raw.value("name", std::string("unnamed"));

    // requirements
    const auto& reqs = require(raw, "requirements", "");
    if (!reqs.is_array() || reqs.empty()) throw SpecError("requirements", "must be a non-empty array");
    std::set<std::string> req_ids;
    for (std::size_t i = 0; i < reqs.size(); ++i) {
        const auto path = fmt::format("requirements[{}]", i);
        const auto& r = reqs[i];
        if (!r.is_object()) throw SpecError(path, "expected an object");
        reject_unknown_keys(r, {"id", "name", "evaluation"}, path);
        LegalRequirement req;
        req.id = string_at(require(r, "id", path), path + ".id");
        req.name = r.contains("name") ? string_at(r["name"], path + ".name") : req.id;
        req.evaluation =
            parse_evaluation_kind(string_at(require(r, "evaluation", path), path + ".evaluation"), path + ".evaluation");
        if (!req_ids.insert(req.id).second) throw SpecError(path + ".id", fmt::format("duplicate id '{}'", req.id));
        spec.requirements.push_back(std::move(req));
    }

    // operationalizations
    const auto& ops = require(raw, "operationalizations", "");
    if (!ops.is_array()) throw SpecError("operationalizations", "expected an array");
    std::set<std::string> op_ids;
    std::map<std::string, int> next_index;
    std::set<std::pair<std::string, int>> seen_refs;
    std::vector<Operationalization> parsed;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const auto path = fmt::format("operationalizations[{}]", i);
        const auto& o = ops[i];
        if (!o.is_object()) throw SpecError(path, "expected an object");
        reject_unknown_keys(o, {"id", "requirement", "index", "kind", "params", "extends"}, path);
        Operationalization op;
        op.id = string_at(require(o, "id", path), path + ".id");
        if (!op_ids.insert(op.id).second) throw SpecError(path + ".id", fmt::format("duplicate id '{}'", op.id));
        op.requirement = string_at(require(o, "requirement", path), path + ".requirement");
        if (!req_ids.count(op.requirement)) {
            throw SpecError(path + ".requirement", fmt::format("unknown requirement '{}'", op.requirement));
        }
        if (o.contains("index")) {
            const auto idx = integer_at(o["index"], path + ".index");
            if (idx < 1) throw SpecError(path + ".index", "indices are 1-based");
            op.index = static_cast<int>(idx);
        } else {
            op.index = next_index[op.requirement] + 1;
        }
        next_index[op.requirement] = std::max(next_index[op.requirement], op.index);
        if (!seen_refs.insert({op.requirement, op.index}).second) {
            throw SpecError(path + ".index", fmt::format("duplicate operationalization {}({})", op.requirement, op.index));
        }
        op.kind = parse_op_kind(string_at(require(o, "kind", path), path + ".kind"), path + ".kind");
        op.params = parse_params(op.kind, o.value("params", json::object()), path + ".params");
        if (o.contains("extends")) op.extends = static_cast<int>(integer_at(o["extends"], path + ".extends"));
        parsed.push_back(std::move(op));
    }
    for (const auto& req : spec.requirements) {
        std::vector<Operationalization> mine;
        for (const auto& op : parsed) {
            if (op.requirement == req.id) mine.push_back(op);
        }
        if (mine.empty()) {
            throw SpecError("operationalizations",
                            fmt::format("requirement '{}' has no operationalization (use kind no-op)", req.id));
        }
        std::sort(mine.begin(), mine.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
        for (auto& op : mine) spec.operationalizations.push_back(std::move(op));
    }
    // `extends` must name another operationalization of the same requirement, without cycles.
    for (std::size_t i = 0; i < spec.operationalizations.size(); ++i) {
        const auto& op = spec.operationalizations[i];
        if (!op.extends) continue;
        const auto path = fmt::format("operationalizations.{}.extends", op.id);
        std::set<int> chain{op.index};
        std::optional<int> cur = op.extends;
        while (cur) {
            const auto* base = spec.operationalization({op.requirement, *cur});
            if (!base) throw SpecError(path, fmt::format("unknown operationalization {}({})", op.requirement, *cur));
            if (!chain.insert(*cur).second) throw SpecError(path, "cyclic extends chain");
            cur = base->extends;
        }
    }

    // rules
    if (raw.contains("rules")) {
        const auto& rules = raw["rules"];
        if (!rules.is_array()) throw SpecError("rules", "expected an array");
        for (std::size_t i = 0; i < rules.size(); ++i) {
            const auto path = fmt::format("rules[{}]", i);
            const auto& r = rules[i];
            if (!r.is_object()) throw SpecError(path, "expected an object");
            reject_unknown_keys(r, {"kind", "antecedent", "consequent"}, path);
            CompatibilityRule rule;
            const auto kind = string_at(require(r, "kind", path), path + ".kind");
            if (kind == "implies") {
                rule.kind = RuleKind::implies;
            } else if (kind == "excludes") {
                rule.kind = RuleKind::excludes;
            } else {
                throw SpecError(path + ".kind", fmt::format("unknown rule kind '{}'", kind));
            }
            rule.antecedent = parse_ref(require(r, "antecedent", path), path + ".antecedent", spec);
            rule.consequent = parse_ref(require(r, "consequent", path), path + ".consequent", spec);
            if (rule.antecedent.requirement == rule.consequent.requirement) {
                throw SpecError(path, "a rule must relate two different requirements");
            }
            spec.rules.push_back(std::move(rule));
        }
    }

    // features
    if (raw.contains("protected_feature")) {
        spec.protected_feature = string_at(raw["protected_feature"], "protected_feature");
    }
    if (raw.contains("strata_features")) spec.strata_features = strings_at(raw["strata_features"], "strata_features");
    const bool uses_cdd = std::any_of(spec.requirements.begin(), spec.requirements.end(),
                                      [](const auto& r) { return r.evaluation == EvaluationKind::cdd; });
    if (uses_cdd && spec.strata_features.empty()) {
        throw SpecError("strata_features", "must not be empty when a requirement is evaluated by cdd");
    }
    spec.quasi_identifiers = raw.contains("quasi_identifiers")
                                 ? strings_at(raw["quasi_identifiers"], "quasi_identifiers")
                                 : default_quasi_identifiers();
    if (spec.quasi_identifiers.empty()) throw SpecError("quasi_identifiers", "must not be empty");

    // split
    if (raw.contains("split")) {
        const auto& s = raw["split"];
        if (!s.is_object()) throw SpecError("split", "expected {train, valid, test}");
        reject_unknown_keys(s, {"train", "valid", "test"}, "split");
        spec.split.train = number_at(require(s, "train", "split"), "split.train");
        spec.split.valid = number_at(require(s, "valid", "split"), "split.valid");
        spec.split.test = number_at(require(s, "test", "split"), "split.test");
    }
    for (auto [name, v] : {std::pair{"train", spec.split.train}, {"valid", spec.split.valid}, {"test", spec.split.test}}) {
        if (!(v > 0)) throw SpecError(std::string("split.") + name, "fractions must be positive");
    }
    if (std::abs(spec.split.train + spec.split.valid + spec.split.test - 1.0) > 1e-9) {
        throw SpecError("split", "fractions must sum to 1.0");
    }

    if (raw.contains("seed")) {
        const auto& s = raw["seed"];
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
            throw SpecError("seed", "expected a nonnegative 64-bit integer");
        }
        spec.seed = s.get<std::uint64_t>();
    }

    if (raw.contains("selection")) spec.selection = policy_from_json(raw["selection"], "selection");

    if (raw.contains("models")) {
        const auto& m = raw["models"];
        reject_unknown_keys(m, {"logreg", "forest", "default_family"}, "models");
        if (m.contains("logreg")) {
            const auto& l = m["logreg"];
            reject_unknown_keys(l, {"learning_rate", "epochs", "l2"}, "models.logreg");
            if (l.contains("learning_rate")) spec.logreg.learning_rate = number_at(l["learning_rate"], "models.logreg.learning_rate");
            if (l.contains("epochs")) spec.logreg.epochs = static_cast<int>(integer_at(l["epochs"], "models.logreg.epochs"));
            if (l.contains("l2")) spec.logreg.l2 = number_at(l["l2"], "models.logreg.l2");
            if (!(spec.logreg.learning_rate > 0)) throw SpecError("models.logreg.learning_rate", "must be > 0");
            if (spec.logreg.epochs < 1) throw SpecError("models.logreg.epochs", "must be ≥ 1");
            if (!(spec.logreg.l2 >= 0)) throw SpecError("models.logreg.l2", "must be ≥ 0");
        }
        if (m.contains("forest")) {
            const auto& f = m["forest"];
            const std::string fp = "models.forest";
            reject_unknown_keys(f, {"n_trees", "max_depth", "min_leaf", "feature_subsample"}, fp);
            if (f.contains("n_trees")) spec.forest.n_trees = static_cast<int>(integer_at(f["n_trees"], fp + ".n_trees"));
            if (f.contains("max_depth")) spec.forest.max_depth = static_cast<int>(integer_at(f["max_depth"], fp + ".max_depth"));
            if (f.contains("min_leaf")) spec.forest.min_leaf = static_cast<int>(integer_at(f["min_leaf"], fp + ".min_leaf"));
            if (f.contains("feature_subsample")) {
                spec.forest.feature_subsample = number_at(f["feature_subsample"], fp + ".feature_subsample");
            }
            if (spec.forest.n_trees < 1) throw SpecError(fp + ".n_trees", "must be ≥ 1");
            if (spec.forest.max_depth < 0) throw SpecError(fp + ".max_depth", "must be ≥ 0");
            if (spec.forest.min_leaf < 1) throw SpecError(fp + ".min_leaf", "must be ≥ 1");
            if (!(spec.forest.feature_subsample >= 0 && spec.forest.feature_subsample <= 1)) {
                throw SpecError(fp + ".feature_subsample", "must be in [0, 1]");
            }
        }
        if (m.contains("default_family")) {
            spec.default_family = parse_model_family(string_at(m["default_family"], "models.default_family"),
                                                     "models.default_family");
        }
    }

    if (raw.contains("transform_order")) {
        const auto order = string_at(raw["transform_order"], "transform_order");
        if (order == "anonymize-first") {
            spec.transform_order = TransformOrder::anonymize_first;
        } else if (order == "minimize-first") {
            spec.transform_order = TransformOrder::minimize_first;
        } else {
            throw SpecError("transform_order", fmt::format("unknown order '{}'", order));
        }
    }

    if (raw.contains("prune")) {
        const auto& p = raw["prune"];
        reject_unknown_keys(p, {"max_count", "scores"}, "prune");
        if (p.contains("max_count")) {
            const auto mc = integer_at(p["max_count"], "prune.max_count");
            if (mc < 1) throw SpecError("prune.max_count", "must be ≥ 1");
            spec.prune.max_count = static_cast<std::size_t>(mc);
        }
        if (p.contains("scores")) {
            for (const auto& [key, value] : p["scores"].items()) {
                int id = 0;
                try {
                    id = std::stoi(key);
                } catch (const std::exception&) {
                    throw SpecError("prune.scores." + key, "keys are set ids");
                }
                spec.prune.scores[id] = number_at(value, "prune.scores." + key);
            }
        }
    }

    if (raw.contains("deployment")) {
        const auto& d = raw["deployment"];
        reject_unknown_keys(d, {"shared_externally"}, "deployment");
        if (d.contains("shared_externally")) {
            if (!d["shared_externally"].is_boolean()) throw SpecError("deployment.shared_externally", "expected a boolean");
            spec.model_shared_externally = d["shared_externally"].get<bool>();
        }
    }

    if (raw.contains("risk_overrides")) {
        for (const auto& [key, value] : raw["risk_overrides"].items()) {
            int id = 0;
            try {
                id = std::stoi(key);
            } catch (const std::exception&) {
                throw SpecError("risk_overrides." + key, "keys are set ids");
            }
            spec.risk_overrides[id] = parse_risk_category(string_at(value, "risk_overrides." + key), "risk_overrides." + key);
        }
    }
    return spec;
}

RunSpec load_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open spec '{}'", path.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SpecError("", fmt::format("malformed JSON: {}", e.what()));
    }
    return validate_spec(doc);
}

json to_json(const RunSpec& spec) {
    json doc;
    doc["name"] = spec.name;
    doc["requirements"] = json::array();
    for (const auto& r : spec.requirements) {
        doc["requirements"].push_back({{"id", r.id}, {"name", r.name}, {"evaluation", to_string(r.evaluation)}});
    }
    doc["operationalizations"] = json::array();
    for (const auto& op : spec.operationalizations) {
        json j{{"id", op.id},
               {"requirement", op.requirement},
               {"index", op.index},
               {"kind", to_string(op.kind)},
               {"params", params_to_json(op.params)}};
        if (op.extends) j["extends"] = *op.extends;
        doc["operationalizations"].push_back(std::move(j));
    }
    doc["rules"] = json::array();
    for (const auto& r : spec.rules) {
        doc["rules"].push_back({{"kind", r.kind == RuleKind::implies ? "implies" : "excludes"},
                                {"antecedent", {{"requirement", r.antecedent.requirement}, {"index", r.antecedent.index}}},
                                {"consequent", {{"requirement", r.consequent.requirement}, {"index", r.consequent.index}}}});
    }
    doc["protected_feature"] = spec.protected_feature;
    doc["strata_features"] = spec.strata_features;
    doc["quasi_identifiers"] = spec.quasi_identifiers;
    doc["split"] = {{"train", spec.split.train}, {"valid", spec.split.valid}, {"test", spec.split.test}};
    doc["seed"] = spec.seed;
    doc["selection"] = to_json(spec.selection);
    doc["models"] = {
        {"logreg", {{"learning_rate", spec.logreg.learning_rate}, {"epochs", spec.logreg.epochs}, {"l2", spec.logreg.l2}}},
        {"forest",
         {{"n_trees", spec.forest.n_trees},
          {"max_depth", spec.forest.max_depth},
          {"min_leaf", spec.forest.min_leaf},
          {"feature_subsample", spec.forest.feature_subsample}}},
        {"default_family", to_string(spec.default_family)}};
    doc["transform_order"] = spec.transform_order == TransformOrder::anonymize_first ? "anonymize-first" : "minimize-first";
    json prune = json::object();
    if (spec.prune.max_count) prune["max_count"] = spec.prune.max_count;
    json scores = json::object();
    for (const auto& [id, s] : spec.prune.scores) scores[std::to_string(id)] = s;
    prune["scores"] = scores;
    doc["prune"] = prune;
    doc["deployment"] = {{"shared_externally", spec.model_shared_externally}};
    json overrides = json::object();
    for (const auto& [id, r] : spec.risk_overrides) overrides[std::to_string(id)] = to_string(r);
    doc["risk_overrides"] = overrides;
    return doc;
}

std::vector<std::string> validate_dataset(const Dataset& dataset, const RunSpec& spec) {
    std::vector<std::string> violations;
    const auto n = dataset.rows();

    if (dataset.columns.size() != dataset.schema.size()) violations.push_back("schema and column count differ");
    for (std::size_t c = 0; c < dataset.columns.size() && c < dataset.schema.size(); ++c) {
        const auto& def = dataset.schema[c];
        const auto& col = dataset.columns[c];
        const auto size = def.is_numeric() ? col.numbers.size() : col.strings.size();
        if (size != n) violations.push_back(fmt::format("column '{}' has {} values, expected {}", def.name, size, n));
    }

    std::size_t label_count = 0;
    std::size_t protected_count = 0;
    for (std::size_t c = 0; c < dataset.schema.size(); ++c) {
        const auto& def = dataset.schema[c];
        if (def.role == FeatureRole::protected_attr) ++protected_count;
        if (def.role == FeatureRole::label) {
            ++label_count;
            if (def.kind != FeatureKind::categorical) violations.push_back("label is not categorical");
            const auto& values = dataset.columns[c].strings;
            const bool binary = std::all_of(values.begin(), values.end(), [](const auto& v) { return v == "0" || v == "1"; });
            if (!binary) violations.push_back("label not binary");
        }
        if (def.kind == FeatureKind::categorical && def.role != FeatureRole::label && !def.domain.empty()) {
            std::set<std::string> domain(def.domain.begin(), def.domain.end());
            std::size_t outside = 0;
            for (const auto& v : dataset.columns[c].strings) outside += domain.count(v) == 0;
            if (outside) {
                violations.push_back(fmt::format("{} value(s) of '{}' outside the declared domain", outside, def.name));
            }
        }
    }
    if (label_count != 1) violations.push_back(fmt::format("expected exactly one label column, found {}", label_count));
    if (protected_count > 1) violations.push_back("more than one protected feature");

    if (!dataset.find(spec.protected_feature) && !dataset.find_held(spec.protected_feature)) {
        violations.push_back("protected feature absent");
    }
    for (const auto& s : spec.strata_features) {
        if (!dataset.find(s) && !dataset.find_held(s)) violations.push_back(fmt::format("strata feature absent: {}", s));
    }
    return violations;
}

} // namespace tforge
