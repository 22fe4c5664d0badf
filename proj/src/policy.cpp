#include "tforge/policy.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tforge/errors.hpp"

namespace tforge {

using nlohmann::json;

std::string_view to_string(Dimension d) {
    switch (d) {
    case Dimension::accuracy: return "accuracy";
    case Dimension::precision: return "precision";
    case Dimension::f1: return "f1";
    case Dimension::recall: return "recall";
    case Dimension::data_used: return "data_used";
    case Dimension::k_anon: return "k_anon";
    case Dimension::cdd: return "cdd";
    case Dimension::risk: return "risk";
    case Dimension::explainability: return "explainability";
    }
    return "unknown";
}

std::string_view to_string(Direction d) {
    switch (d) {
    case Direction::maximize: return "maximize";
    case Direction::minimize: return "minimize";
    case Direction::ignore: return "ignore";
    }
    return "unknown";
}

Dimension parse_dimension(std::string_view text, const std::string& path) {
    for (auto d : kAllDimensions) {
        if (to_string(d) == text) return d;
    }
    throw SpecError(path, fmt::format("unknown dimension '{}'", text));
}

Direction parse_direction(std::string_view text, const std::string& path) {
    for (auto d : {Direction::maximize, Direction::minimize, Direction::ignore}) {
        if (to_string(d) == text) return d;
    }
    throw SpecError(path, fmt::format("unknown direction '{}'", text));
}

Direction natural_direction(Dimension d) {
    switch (d) {
    case Dimension::data_used:
    case Dimension::cdd:
    case Dimension::risk: return Direction::minimize;
    default: return Direction::maximize;
    }
}

std::string Threshold::describe() const {
    const auto name = std::string(to_string(dimension));
    if (required) return name + " required";
    if (!allowed.empty()) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        return fmt::format("{} in {{{}}}", name, list);
    }
    const auto label = dimension == Dimension::cdd ? std::string("|cdd|") : name;
    if (min && max) return fmt::format("{} <= {} <= {}", *min, label, *max);
    if (min) return fmt::format("{} >= {}", label, *min);
    if (max) return fmt::format("{} <= {}", label, *max);
    return name;
}

namespace {

const std::vector<std::string>& category_vocabulary(Dimension d) {
    static const std::vector<std::string> risk{"Very Low", "Low", "Moderate", "High", "Very High"};
    static const std::vector<std::string> expl{"Low", "Moderate", "High"};
    static const std::vector<std::string> none;
    if (d == Dimension::risk) return risk;
    if (d == Dimension::explainability) return expl;
    return none;
}

double number_at(const json& j, const std::string& path) {
    if (!j.is_number()) throw SpecError(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw SpecError(path, "must be finite");
    return v;
}

} // namespace

SelectionPolicy policy_from_json(const json& doc, const std::string& path) {
    if (!doc.is_object()) throw SpecError(path, "expected an object");
    SelectionPolicy policy;

    if (auto it = doc.find("thresholds"); it != doc.end()) {
        if (!it->is_array()) throw SpecError(path + ".thresholds", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& t = (*it)[i];
            const auto tp = fmt::format("{}.thresholds[{}]", path, i);
            if (!t.is_object() || !t.contains("dimension") || !t["dimension"].is_string()) {
                throw SpecError(tp + ".dimension", "missing dimension");
            }
            Threshold th;
            th.dimension = parse_dimension(t["dimension"].get<std::string>(), tp + ".dimension");
            if (t.contains("min")) th.min = number_at(t["min"], tp + ".min");
            if (t.contains("max")) th.max = number_at(t["max"], tp + ".max");
            if (t.contains("required")) th.required = t["required"].get<bool>();
            if (t.contains("allowed")) {
                const auto& vocab = category_vocabulary(th.dimension);
                if (vocab.empty()) throw SpecError(tp + ".allowed", "only risk and explainability take categories");
                for (const auto& a : t["allowed"]) {
                    auto s = a.get<std::string>();
                    if (std::find(vocab.begin(), vocab.end(), s) == vocab.end()) {
                        throw SpecError(tp + ".allowed", fmt::format("unknown category '{}'", s));
                    }
                    th.allowed.push_back(std::move(s));
                }
            }
            if (th.required && th.dimension != Dimension::k_anon) {
                throw SpecError(tp + ".required", "only k_anon can be required");
            }
            if (!th.required && th.allowed.empty() && !th.min && !th.max) {
                throw SpecError(tp, "threshold sets no bound");
            }
            if ((th.min || th.max) && !category_vocabulary(th.dimension).empty()) {
                throw SpecError(tp, "categorical dimensions take 'allowed', not numeric bounds");
            }
            policy.thresholds.push_back(std::move(th));
        }
    }

    if (auto it = doc.find("ranking"); it != doc.end()) {
        const auto rp = path + ".ranking";
        const auto& r = *it;
        const auto kind = r.value("kind", std::string("lexicographic"));
        if (kind == "lexicographic") {
            policy.ranking = RankingKind::lexicographic;
            policy.order.clear();
            const auto& dims = r.at("dimensions");
            for (std::size_t i = 0; i < dims.size(); ++i) {
                policy.order.push_back(
                    parse_dimension(dims[i].get<std::string>(), fmt::format("{}.dimensions[{}]", rp, i)));
            }
            if (policy.order.empty()) throw SpecError(rp + ".dimensions", "must not be empty");
        } else if (kind == "weighted") {
            policy.ranking = RankingKind::weighted;
            const auto& w = r.at("weights");
            if (!w.is_object()) throw SpecError(rp + ".weights", "expected an object");
            bool any_positive = false;
            for (const auto& [name, value] : w.items()) {
                const auto wp = rp + ".weights." + name;
                RankTerm term;
                term.dimension = parse_dimension(name, wp);
                term.direction = natural_direction(term.dimension);
                if (value.is_object()) {
                    term.weight = number_at(value.at("weight"), wp + ".weight");
                    if (value.contains("direction")) {
                        term.direction = parse_direction(value["direction"].get<std::string>(), wp + ".direction");
                    }
                } else {
                    term.weight = number_at(value, wp);
                }
                if (term.weight < 0) throw SpecError(wp, "weights must be nonnegative");
                any_positive = any_positive || term.weight > 0;
                policy.weights.push_back(term);
            }
            if (!any_positive) throw SpecError(rp + ".weights", "weights must not be all zero");
        } else {
            throw SpecError(rp + ".kind", fmt::format("unknown ranking kind '{}'", kind));
        }
    }

    if (auto it = doc.find("pareto"); it != doc.end()) {
        policy.pareto.clear();
        bool any = false;
        for (const auto& [name, value] : it->items()) {
            const auto pp = path + ".pareto." + name;
            const auto dir = parse_direction(value.get<std::string>(), pp);
            policy.pareto[parse_dimension(name, pp)] = dir;
            any = any || dir != Direction::ignore;
        }
        if (!any) throw SpecError(path + ".pareto", "needs at least one non-ignored dimension");
    }

    if (auto it = doc.find("cdd_soft_limit"); it != doc.end()) {
        policy.cdd_soft_limit = number_at(*it, path + ".cdd_soft_limit");
    }

    for (const auto& [key, _] : doc.items()) {
        if (key != "thresholds" && key != "ranking" && key != "pareto" && key != "cdd_soft_limit") {
            throw SpecError(path + "." + key, "unknown field");
        }
    }
    return policy;
}

json to_json(const SelectionPolicy& policy) {
    json doc;
    doc["thresholds"] = json::array();
    for (const auto& t : policy.thresholds) {
        json j{{"dimension", to_string(t.dimension)}};
        if (t.min) j["min"] = *t.min;
        if (t.max) j["max"] = *t.max;
        if (!t.allowed.empty()) j["allowed"] = t.allowed;
        if (t.required) j["required"] = true;
        doc["thresholds"].push_back(std::move(j));
    }
    if (policy.ranking == RankingKind::lexicographic) {
        json dims = json::array();
        for (auto d : policy.order) dims.push_back(to_string(d));
        doc["ranking"] = {{"kind", "lexicographic"}, {"dimensions", dims}};
    } else {
        json w = json::object();
        for (const auto& t : policy.weights) {
            w[std::string(to_string(t.dimension))] = {{"weight", t.weight}, {"direction", to_string(t.direction)}};
        }
        doc["ranking"] = {{"kind", "weighted"}, {"weights", w}};
    }
    json p = json::object();
    for (const auto& [d, dir] : policy.pareto) p[std::string(to_string(d))] = to_string(dir);
    doc["pareto"] = p;
    doc["cdd_soft_limit"] = policy.cdd_soft_limit;
    return doc;
}

} // namespace tforge
