#include "tforge/trademap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "tforge/csv.hpp"
#include "tforge/dataset.hpp"
#include "tforge/errors.hpp"

namespace tforge {

namespace {

std::string two_dp(double v) {
    auto s = fmt::format("{:.2f}", v);
    return s == "-0.00" ? "0.00" : s;
}

std::string pct_label(double pct) { return data_usage(pct / 100.0).label(); }

std::string observed_text(const TradeoffRecord& r, Dimension d) {
    switch (d) {
    case Dimension::k_anon: return r.k_anon ? "Yes" : "No";
    case Dimension::risk: return std::string(to_string(r.risk));
    case Dimension::explainability: return std::string(to_string(r.explainability));
    case Dimension::cdd: return fmt::format("|cdd| = {:.4f}", std::abs(r.cdd));
    case Dimension::data_used: return fmt::format("{:.1f}%", r.data_used_pct);
    default: return fmt::format("{:.4f}", dimension_value(r, d));
    }
}

} // namespace

nlohmann::json to_json(const TradeoffRecord& r) {
    return {{"set_id", r.set_id},
            {"status", r.ok() ? "ok" : "failed"},
            {"accuracy", r.accuracy},
            {"precision", r.precision},
            {"f1", r.f1},
            {"recall", r.recall},
            {"data_used_pct", r.data_used_pct},
            {"k_anon", r.k_anon},
            {"k_achieved", r.k_achieved},
            {"cdd", r.cdd},
            {"risk", std::string(to_string(r.risk))},
            {"explainability", std::string(to_string(r.explainability))},
            {"notes", r.notes}};
}

TradeoffRecord record_from_json(const nlohmann::json& doc) {
    TradeoffRecord r;
    r.set_id = doc.at("set_id").get<int>();
    r.status = doc.at("status").get<std::string>() == "ok" ? RecordStatus::ok : RecordStatus::failed;
    r.accuracy = doc.at("accuracy").get<double>();
    r.precision = doc.at("precision").get<double>();
    r.f1 = doc.at("f1").get<double>();
    r.recall = doc.at("recall").get<double>();
    r.data_used_pct = doc.at("data_used_pct").get<double>();
    r.k_anon = doc.at("k_anon").get<bool>();
    r.k_achieved = doc.at("k_achieved").get<std::size_t>();
    r.cdd = doc.at("cdd").get<double>();
    r.risk = parse_risk_category(doc.at("risk").get<std::string>());
    r.explainability = parse_explainability(doc.at("explainability").get<std::string>());
    r.notes = doc.at("notes").get<std::vector<std::string>>();
    return r;
}

double dimension_value(const TradeoffRecord& r, Dimension d) {
    switch (d) {
    case Dimension::accuracy: return r.accuracy;
    case Dimension::precision: return r.precision;
    case Dimension::f1: return r.f1;
    case Dimension::recall: return r.recall;
    case Dimension::data_used: return r.data_used_pct;
    case Dimension::k_anon: return r.k_anon ? 1.0 : 0.0;
    case Dimension::cdd: return std::abs(r.cdd);
    case Dimension::risk: return static_cast<double>(r.risk);
    case Dimension::explainability: return static_cast<double>(r.explainability);
    }
    return 0.0;
}

TradeoffTable build_table(std::vector<TradeoffRecord> records) {
    std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.set_id < b.set_id; });
    return TradeoffTable{std::move(records)};
}

std::string TradeoffTable::to_csv() const {
    std::string out = csv::record({"set_id", "status", "accuracy", "precision", "f1", "data_used_pct", "k_anonymity",
                                   "k_achieved", "cdd", "risk", "explainability", "recall", "notes"});
    for (const auto& r : records) {
        std::string notes;
        for (const auto& n : r.notes) notes += (notes.empty() ? "" : "; ") + n;
        if (!r.ok()) {
            out += csv::record({std::to_string(r.set_id), "failed", "", "", "", "", "", "", "", "", "", "", notes});
            continue;
        }
        out += csv::record({std::to_string(r.set_id), "ok", format_number(r.accuracy), format_number(r.precision),
                            format_number(r.f1), format_number(r.data_used_pct), r.k_anon ? "Yes" : "No",
                            std::to_string(r.k_achieved), format_number(r.cdd), std::string(to_string(r.risk)),
                            std::string(to_string(r.explainability)), format_number(r.recall), notes});
    }
    return out;
}

std::string TradeoffTable::to_markdown() const {
    std::string out;
    out += "| Number Set | Predictive Performance | | | Data Minimization | | Non-discrimination "
           "| Personal Data Qualification | AML Requirements | |\n";
    out += "|---|---|---|---|---|---|---|---|---|---|\n";
    out += "| | Accuracy | Precision | F1 Score | % Data Used | K-Anonymity | CDD (Gender) "
           "| Likelihood re-identification | Explainability | Recall |\n";
    std::vector<std::string> failures;
    for (const auto& r : records) {
        if (!r.ok()) {
            out += fmt::format("| Set {} | — | — | — | — | — | — | — | — | — |\n", r.set_id);
            std::string notes;
            for (const auto& n : r.notes) notes += (notes.empty() ? "" : "; ") + n;
            failures.push_back(fmt::format("Set {} failed: {}", r.set_id, notes.empty() ? "no detail recorded" : notes));
            continue;
        }
        out += fmt::format("| Set {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n", r.set_id, two_dp(r.accuracy),
                           two_dp(r.precision), two_dp(r.f1), pct_label(r.data_used_pct), r.k_anon ? "Yes" : "No",
                           two_dp(r.cdd), to_string(r.risk), to_string(r.explainability), two_dp(r.recall));
    }
    if (!failures.empty()) {
        out += "\n";
        for (const auto& f : failures) out += "- " + f + "\n";
    }
    return out;
}

nlohmann::json TradeoffTable::to_json() const {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& r : records) doc.push_back(tforge::to_json(r));
    return doc;
}

TradeoffTable TradeoffTable::from_json(const nlohmann::json& doc) {
    std::vector<TradeoffRecord> records;
    for (const auto& j : doc) records.push_back(record_from_json(j));
    return build_table(std::move(records));
}

std::vector<int> pareto_front(std::span<const TradeoffRecord> records, const std::map<Dimension, Direction>& directions) {
    std::vector<const TradeoffRecord*> ok;
    for (const auto& r : records) {
        if (r.ok()) ok.push_back(&r);
    }
    auto dominates = [&](const TradeoffRecord& a, const TradeoffRecord& b) {
        bool strict = false;
        for (const auto& [dim, dir] : directions) {
            if (dir == Direction::ignore) continue;
            double va = dimension_value(a, dim), vb = dimension_value(b, dim);
            if (dir == Direction::minimize) {
                va = -va;
                vb = -vb;
            }
            if (va < vb) return false;
            if (va > vb) strict = true;
        }
        return strict;
    };
    std::vector<int> front;
    for (const auto* r : ok) {
        const bool dominated = std::any_of(ok.begin(), ok.end(), [&](const auto* q) { return dominates(*q, *r); });
        if (!dominated) front.push_back(r->set_id);
    }
    std::sort(front.begin(), front.end());
    return front;
}

bool passes(const TradeoffRecord& r, const Threshold& t) {
    if (!r.ok()) return false;
    const double v = dimension_value(r, t.dimension);
    if (t.required && !(v > 0)) return false;
    if (!t.allowed.empty()) {
        const auto text = observed_text(r, t.dimension);
        if (std::find(t.allowed.begin(), t.allowed.end(), text) == t.allowed.end()) return false;
    }
    if (t.min && v < *t.min) return false;
    if (t.max && v > *t.max) return false;
    return true;
}

Selection select(std::span<const TradeoffRecord> records, const SelectionPolicy& policy) {
    Selection sel;
    std::vector<const TradeoffRecord*> feasible;
    std::vector<bool> anyone_passes(policy.thresholds.size(), false);
    for (const auto& r : records) {
        auto& checks = sel.matrix[r.set_id];
        bool all = r.ok();
        for (std::size_t i = 0; i < policy.thresholds.size(); ++i) {
            const auto& t = policy.thresholds[i];
            ThresholdCheck c;
            c.threshold = t.describe();
            c.observed = r.ok() ? observed_text(r, t.dimension) : "set failed";
            c.pass = passes(r, t);
            anyone_passes[i] = anyone_passes[i] || c.pass;
            all = all && c.pass;
            checks.push_back(std::move(c));
        }
        if (all) feasible.push_back(&r);
    }
    std::sort(feasible.begin(), feasible.end(), [](const auto* a, const auto* b) { return a->set_id < b->set_id; });
    for (const auto* r : feasible) sel.feasible.push_back(r->set_id);
    for (std::size_t i = 0; i < policy.thresholds.size(); ++i) {
        if (!anyone_passes[i]) sel.binding.push_back(policy.thresholds[i].describe());
    }
    if (feasible.empty()) return sel;

    const TradeoffRecord* best = nullptr;
    if (policy.ranking == RankingKind::lexicographic) {
        auto better = [&](const TradeoffRecord& a, const TradeoffRecord& b) {
            for (auto d : policy.order) {
                double va = dimension_value(a, d), vb = dimension_value(b, d);
                if (natural_direction(d) == Direction::minimize) {
                    va = -va;
                    vb = -vb;
                }
                if (va != vb) return va > vb;
            }
            return false;
        };
        for (const auto* r : feasible) {
            if (!best || better(*r, *best)) best = r;
        }
        for (auto d : policy.order) {
            sel.rationale[std::string(to_string(d))] =
                fmt::format("ranked on {} ({}): Set {} has {}", to_string(d), to_string(natural_direction(d)),
                            best->set_id, observed_text(*best, d));
        }
    } else {
        // Each term is min-max normalised over the feasible records so weights
        // compare dimensions on a common scale.
        std::vector<double> score(feasible.size(), 0.0);
        for (const auto& term : policy.weights) {
            if (term.direction == Direction::ignore || term.weight == 0) continue;
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (const auto* r : feasible) {
                lo = std::min(lo, dimension_value(*r, term.dimension));
                hi = std::max(hi, dimension_value(*r, term.dimension));
            }
            for (std::size_t i = 0; i < feasible.size(); ++i) {
                double v = hi > lo ? (dimension_value(*feasible[i], term.dimension) - lo) / (hi - lo) : 0.0;
                if (term.direction == Direction::minimize) v = -v;
                score[i] += term.weight * v;
            }
        }
        std::size_t arg = 0;
        for (std::size_t i = 1; i < feasible.size(); ++i) {
            if (score[i] > score[arg]) arg = i;
        }
        best = feasible[arg];
        for (const auto& term : policy.weights) {
            sel.rationale[std::string(to_string(term.dimension))] =
                fmt::format("weight {} ({}): Set {} has {}", term.weight, to_string(term.direction), best->set_id,
                            observed_text(*best, term.dimension));
        }
    }
    sel.chosen = best->set_id;
    for (const auto& t : policy.thresholds) {
        auto& slot = sel.rationale[std::string(to_string(t.dimension))];
        slot += (slot.empty() ? "" : "; ") + fmt::format("meets {} with {}", t.describe(), observed_text(*best, t.dimension));
    }
    return sel;
}

} // namespace tforge
