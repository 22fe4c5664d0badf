#include "tforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "tforge/errors.hpp"
#include "tforge/metrics.hpp"
#include "tforge/rng.hpp"
#include "tforge/setform.hpp"

namespace tforge {

namespace fs = std::filesystem;

namespace {

// Stream ids for derive_seed(spec.seed, ...). Set seeds use the set id (>= 1).
constexpr std::uint64_t kSplitStream = 0;
constexpr std::uint64_t kBatchStream = 0x6d696e696d697a65ULL;

// Forest size used when scoring subsets during minimisation.
constexpr int kProxyTrees = 25;

std::string op_label(const Operationalization& op) { return fmt::format("{}({})", op.requirement, op.index); }

double mean_log_loss(std::span<const double> probs, std::span<const int> y, std::span<const double> w) {
    double sum = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], 1e-6, 1.0 - 1e-6);
        sum += w[i] * -(y[i] == 1 ? std::log(p) : std::log1p(-p));
    }
    return probs.empty() ? 0.0 : sum / static_cast<double>(probs.size());
}

std::vector<std::string> present(const Dataset& dataset, std::span<const std::string> names) {
    std::vector<std::string> out;
    for (const auto& n : names) {
        if (dataset.find(n)) out.push_back(n);
    }
    return out;
}

struct Plan {
    std::vector<std::string> drop;
    std::optional<int> k;
    std::optional<MinimizationParams> minimization;
    ModelFamily family = ModelFamily::logreg;
    ClassWeightParams weights;
    bool weighted = false;
    std::optional<RejectOptionParams> reject;
};

Plan make_plan(const std::vector<const Operationalization*>& ops, const RunSpec& spec) {
    Plan plan;
    plan.family = spec.default_family;
    for (const auto* op : ops) {
        if (!params_match_kind(op->kind, op->params)) {
            throw Error(fmt::format("{} of kind {} has no matching transform", op_label(*op), to_string(op->kind)));
        }
        switch (op->kind) {
        case OpKind::no_op: break;
        case OpKind::feature_drop:
            for (const auto& f : std::get<FeatureDropParams>(op->params).features) {
                if (std::find(plan.drop.begin(), plan.drop.end(), f) == plan.drop.end()) plan.drop.push_back(f);
            }
            break;
        case OpKind::reject_option: plan.reject = std::get<RejectOptionParams>(op->params); break;
        case OpKind::data_minimization: plan.minimization = std::get<MinimizationParams>(op->params); break;
        case OpKind::k_anonymity: {
            const int k = std::get<KAnonymityParams>(op->params).k;
            plan.k = std::max(plan.k.value_or(0), k);
            break;
        }
        case OpKind::model_family: plan.family = std::get<ModelFamilyParams>(op->params).family; break;
        case OpKind::class_weighting:
            plan.weights = std::get<ClassWeightParams>(op->params);
            plan.weighted = true;
            break;
        }
    }
    return plan;
}

Model train_family(ModelFamily family, const Dataset& train, std::span<const double> weights, const RunSpec& spec,
                   std::uint64_t seed, int max_trees) {
    if (family == ModelFamily::logreg) return train_logreg(train, weights, spec.logreg);
    auto hyper = spec.forest;
    hyper.seed = seed;
    if (max_trees > 0) hyper.n_trees = std::min(hyper.n_trees, max_trees);
    return train_forest(train, weights, hyper);
}

std::vector<double> weights_for(std::span<const int> labels, const Plan& plan) {
    if (!plan.weighted) return std::vector<double>(labels.size(), 1.0);
    return class_weights(labels, plan.weights);
}

nlohmann::json perf_json(const ConfusionCounts& c, const PerfPanel& p) {
    return {{"confusion", {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}},
            {"accuracy", p.accuracy},
            {"precision", p.precision},
            {"recall", p.recall},
            {"f1", p.f1},
            {"undefined", {{"precision", p.precision_undefined}, {"recall", p.recall_undefined}, {"f1", p.f1_undefined}}}};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
    out << text;
    if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
    return std::string(std::istreambuf_iterator<char>(in), {});
}

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::string pretty(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

std::uint64_t fnv1a64(std::string_view text, std::uint64_t h = 14695981039346656037ULL) {
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

RunContext make_context(const Splits& data, const RunSpec& spec) {
    RunContext ctx;
    const auto& gender = data.train.column_any(spec.protected_feature).strings;
    const auto labels = data.train.labels();
    std::map<std::string, std::pair<std::size_t, std::size_t>> tally; // value -> (alerts, rows)
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& t = tally[gender[i]];
        t.first += labels[i] == 1;
        ++t.second;
    }
    double best_rate = -1;
    for (const auto& [value, t] : tally) {
        const double rate = static_cast<double>(t.first) / static_cast<double>(t.second);
        if (rate > best_rate) {
            best_rate = rate;
            ctx.unprivileged_value = value;
        }
    }
    nlohmann::json valid_edges, test_edges;
    ctx.valid_strata = stratum_keys(data.valid, spec.strata_features, &valid_edges);
    ctx.test_strata = stratum_keys(data.test, spec.strata_features, &test_edges);
    ctx.strata_edges = {{"valid", valid_edges}, {"test", test_edges}};
    ctx.batch_seed = derive_seed(spec.seed, kBatchStream);
    return ctx;
}

std::vector<const Operationalization*> effective_operationalizations(const OperationalizationSet& set,
                                                                     const RunSpec& spec) {
    std::vector<const Operationalization*> out;
    std::set<std::string> seen;
    for (const auto& choice : set.choices) {
        std::vector<const Operationalization*> chain;
        const Operationalization* cur = &choice;
        while (cur && chain.size() <= spec.operationalizations.size()) {
            chain.push_back(cur);
            cur = cur->extends ? spec.operationalization({cur->requirement, *cur->extends}) : nullptr;
        }
        // Base operationalizations first.
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
            if (seen.insert(op_label(**it)).second) out.push_back(*it);
        }
    }
    return out;
}

SetResult execute_set(const OperationalizationSet& set, const Splits& data, const RunSpec& spec) {
    return execute_set(set, data, spec, make_context(data, spec));
}

SetResult execute_set(const OperationalizationSet& set, const Splits& data, const RunSpec& spec,
                      const RunContext& ctx) {
    SetResult result;
    result.set = set;
    result.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(set.set_id));
    result.record.set_id = set.set_id;

    nlohmann::json metrics;
    metrics["set_id"] = set.set_id;
    metrics["seed"] = result.seed;
    std::vector<std::string> labels;
    for (const auto& c : set.choices) labels.push_back(op_label(c));
    metrics["operationalizations"] = labels;

    try {
        const auto ops = effective_operationalizations(set, spec);
        const Plan plan = make_plan(ops, spec);
        std::vector<std::string> applied;
        for (const auto* op : ops) applied.push_back(fmt::format("{} {}", op_label(*op), to_string(op->kind)));
        metrics["applied"] = applied;
        metrics["family"] = std::string(to_string(plan.family));

        // 1. Drop features.
        Dataset train = drop_features(data.train, plan.drop);
        Dataset valid = drop_features(data.valid, plan.drop);
        Dataset test = drop_features(data.test, plan.drop);

        const auto qis = present(train, spec.quasi_identifiers);
        std::vector<std::size_t> groups;
        auto anonymize = [&] {
            if (!plan.k) return;
            auto anon = k_anonymize(train, qis, *plan.k);
            train = std::move(anon.data);
            valid = apply_generalization(valid, anon.map);
            test = apply_generalization(test, anon.map);
            groups = std::move(anon.cell_of_row);
            result.genmap = std::move(anon.map);
        };

        const auto valid_y = valid.labels();
        const auto valid_w = weights_for(valid_y, plan);
        auto minimize = [&] {
            if (!plan.minimization) return;
            const auto& mp = *plan.minimization;
            const std::uint64_t proxy_seed = derive_seed(result.seed, 2);
            SubsetLoss loss = [&](const Dataset& subset) {
                std::vector<double> w;
                try {
                    w = weights_for(subset.labels(), plan);
                } catch (const NoPositives& e) {
                    throw DegenerateData(e.what());
                }
                const auto model = train_family(plan.family, subset, w, spec, proxy_seed, kProxyTrees);
                return mean_log_loss(predict_proba(model, valid), valid_y, valid_w);
            };
            MinimizeOptions options;
            options.threshold = mp.stopping_threshold;
            options.batch_size = mp.batch_size;
            options.window = mp.window;
            options.seed = ctx.batch_seed;
            options.groups = groups;
            auto minimized = minimize_data(train, loss, options);
            train = std::move(minimized.data);
            result.trace = std::move(minimized.trace);
        };

        // 2-3. Anonymise then minimise, unless the spec asks for the reverse.
        if (spec.transform_order == TransformOrder::anonymize_first) {
            anonymize();
            minimize();
        } else {
            minimize();
            anonymize();
        }

        // 4-5. Weight and train.
        const auto train_y = train.labels();
        const auto weights = weights_for(train_y, plan);
        result.model = train_family(plan.family, train, weights, spec, derive_seed(result.seed, 1), 0);
        double positive_weight = 1.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (train_y[i] == 1) {
                positive_weight = weights[i];
                break;
            }
        }
        const double fraction = result.trace ? result.trace->fraction_used : 1.0;
        result.provenance = {{"set_id", set.set_id},
                             {"seed", result.seed},
                             {"data_fraction", fraction},
                             {"training_rows", train.rows()},
                             {"weight_policy",
                              !plan.weighted          ? "none"
                              : plan.weights.balanced ? "balanced"
                                                      : fmt::format("fixed {}", format_number(plan.weights.positive_weight))},
                             {"positive_weight", positive_weight},
                             {"dataset", train.provenance}};

        // 6. Post-process.
        const auto& test_gender = data.test.column_any(spec.protected_feature).strings;
        result.test_probs = predict_proba(*result.model, test);
        nlohmann::json reject_doc{{"applied", false}};
        if (plan.reject) {
            RejectOptionRule rule{0.5, ctx.unprivileged_value, 0};
            reject_doc = {{"applied", true}, {"epsilon", plan.reject->epsilon}};
            if (plan.reject->theta) {
                rule.theta = *plan.reject->theta;
                reject_doc["tuned"] = false;
            } else {
                const auto valid_probs = predict_proba(*result.model, valid);
                const auto& valid_gender = data.valid.column_any(spec.protected_feature).strings;
                reject_doc["tuned"] = true;
                try {
                    const auto tuning = tune_theta(valid_probs, valid_gender, valid_y, ctx.valid_strata,
                                                   ctx.unprivileged_value, plan.reject->epsilon);
                    rule = tuning.rule;
                    reject_doc["baseline_recall"] = tuning.baseline_recall;
                    reject_doc["baseline_cdd"] = tuning.baseline_cdd;
                    nlohmann::json grid = nlohmann::json::array();
                    for (const auto& g : tuning.grid) {
                        grid.push_back({{"theta", g.theta}, {"recall", g.recall}, {"cdd", g.cdd}, {"feasible", g.feasible}});
                    }
                    reject_doc["grid"] = grid;
                } catch (const NoFeasibleTheta& e) {
                    rule.theta = 0.5;
                    reject_doc["fallback"] = e.what();
                    result.record.notes.push_back("no feasible theta; reject option left at 0.5");
                }
            }
            reject_doc["theta"] = rule.theta;
            reject_doc["unprivileged_value"] = rule.unprivileged_value;
            result.test_predictions = apply_reject_option(result.test_probs, test_gender, rule);
            result.record.notes.push_back(fmt::format("theta {}", format_number(rule.theta)));
        } else {
            result.test_predictions.resize(result.test_probs.size());
            for (std::size_t i = 0; i < result.test_probs.size(); ++i) result.test_predictions[i] = result.test_probs[i] >= 0.5;
        }
        metrics["reject_option"] = reject_doc;

        // Evaluation on the untouched test labels.
        const auto test_y = data.test.labels();
        const auto counts = confusion(test_y, result.test_predictions);
        const auto panel = perf_panel(counts);
        std::vector<std::uint8_t> in_group(test_gender.size());
        for (std::size_t i = 0; i < in_group.size(); ++i) in_group[i] = test_gender[i] == ctx.unprivileged_value;
        const auto disparity = cdd(result.test_predictions, in_group, ctx.test_strata);
        const auto usage = data_usage(fraction);
        const auto achieved = qis.empty() ? train.rows() : verify_k_anonymity(train, qis);
        const auto risk = risk_category(set, spec);

        auto& r = result.record;
        r.accuracy = panel.accuracy;
        r.precision = panel.precision;
        r.f1 = panel.f1;
        r.recall = panel.recall;
        r.data_used_pct = usage.raw_pct;
        r.k_achieved = achieved;
        r.k_anon = plan.k.has_value() && achieved >= static_cast<std::size_t>(*plan.k);
        r.cdd = disparity.cdd;
        r.risk = risk.category;
        r.explainability = explainability_category(plan.family);
        if (plan.k && !r.k_anon) r.notes.push_back(fmt::format("k-anonymity not met: smallest class {}", achieved));

        metrics["status"] = "ok";
        metrics["performance"] = perf_json(counts, panel);
        metrics["cdd"] = disparity.to_json();
        metrics["cdd"]["unprivileged_value"] = ctx.unprivileged_value;
        metrics["cdd"]["strata_features"] = spec.strata_features;
        metrics["data_usage"] = {{"fraction_used", fraction},
                                 {"raw_pct", usage.raw_pct},
                                 {"rounded_pct", usage.rounded_pct},
                                 {"training_rows", train.rows()},
                                 {"available_rows", data.train.rows()}};
        if (result.trace) {
            metrics["data_usage"]["stop_step"] = result.trace->stop_step;
            metrics["data_usage"]["exhausted"] = result.trace->exhausted;
            const double slope = result.trace->slope_at_stop();
            metrics["data_usage"]["slope_at_stop"] = std::isnan(slope) ? nlohmann::json(nullptr) : nlohmann::json(slope);
            metrics["data_usage"]["threshold"] =
                std::isinf(result.trace->threshold) ? nlohmann::json("never") : nlohmann::json(result.trace->threshold);
        }
        metrics["k_anonymity"] = {{"applied", plan.k.has_value()},
                                  {"k", plan.k.value_or(0)},
                                  {"achieved", achieved},
                                  {"quasi_identifiers", qis},
                                  {"cells", result.genmap ? result.genmap->cells.size() : 0}};
        metrics["risk"] = {{"category", std::string(to_string(risk.category))}, {"overridden", risk.overridden}};
        metrics["explainability"] = std::string(to_string(r.explainability));
        metrics["class_weights"] = result.provenance["weight_policy"];
    } catch (const std::exception& e) {
        result.record = TradeoffRecord{};
        result.record.set_id = set.set_id;
        result.record.status = RecordStatus::failed;
        result.record.notes = {fmt::format("set {}: {}", set.set_id, e.what())};
        result.model.reset();
        result.trace.reset();
        result.genmap.reset();
        metrics["status"] = "failed";
    }
    metrics["notes"] = result.record.notes;
    result.metrics = std::move(metrics);
    return result;
}

std::string compute_run_id(const RunSpec& spec, const Dataset& dataset) {
    std::uint64_t h = fnv1a64(to_json(spec).dump());
    h = fnv1a64("\x1e", h);
    h = fnv1a64(to_csv(dataset), h);
    return fmt::format("{:016x}", h);
}

RunArtifacts execute_run(const RunSpec& spec, const Dataset& dataset, const RunOptions& options) {
    if (auto problems = validate_dataset(dataset, spec); !problems.empty()) {
        std::string text;
        for (const auto& p : problems) text += (text.empty() ? "" : "; ") + p;
        throw SchemaMismatch("dataset does not satisfy the spec: " + text);
    }
    const auto splits = split(dataset, spec.split, derive_seed(spec.seed, kSplitStream));
    const auto sets = prune_sets(enumerate_sets(spec), spec.prune);
    const auto ctx = make_context(splits, spec);

    RunArtifacts run;
    run.run_id = compute_run_id(spec, dataset);
    run.sets.resize(sets.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next++; i < sets.size(); i = next++) run.sets[i] = execute_set(sets[i], splits, spec, ctx);
    };
    const auto n_workers = static_cast<std::size_t>(std::clamp(options.parallel, 1, 64));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(n_workers, sets.size()); ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<TradeoffRecord> records;
    for (const auto& s : run.sets) records.push_back(s.record);
    run.table = build_table(std::move(records));
    if (options.out_root.empty()) return run;

    run.dir = options.out_root / run.run_id;
    std::error_code ec;
    fs::remove_all(run.dir / "sets", ec);
    fs::create_directories(run.dir / "sets", ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", run.dir.string(), ec.message()));

    write_text(run.dir / "spec.snapshot", pretty(to_json(spec)));
    nlohmann::json index;
    index["run_id"] = run.run_id;
    index["name"] = spec.name;
    index["seed"] = spec.seed;
    index["dataset"] = {{"rows", dataset.rows()}, {"provenance", dataset.provenance}};
    index["split"] = {{"train", splits.train.rows()}, {"valid", splits.valid.rows()}, {"test", splits.test.rows()}};
    index["unprivileged_value"] = ctx.unprivileged_value;
    index["strata_edges"] = ctx.strata_edges;
    index["sets"] = nlohmann::json::array();
    for (const auto& s : run.sets) {
        const auto dir = run.dir / "sets" / std::to_string(s.set.set_id);
        fs::create_directories(dir, ec);
        if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
        write_text(dir / "metrics.json", pretty(s.metrics));
        if (s.model) write_text(dir / "model.json", pretty({{"provenance", s.provenance}, {"model", model_to_json(*s.model)}}));
        if (s.trace) write_text(dir / "trace.json", pretty(s.trace->to_json()));
        if (s.genmap) write_text(dir / "genmap.json", pretty(s.genmap->to_json()));
        std::vector<std::string> choices;
        for (const auto& c : s.set.choices) choices.push_back(op_label(c));
        index["sets"].push_back({{"set_id", s.set.set_id},
                                 {"seed", s.seed},
                                 {"choices", choices},
                                 {"status", s.record.ok() ? "ok" : "failed"}});
    }
    write_text(run.dir / "tradeoff.csv", run.table.to_csv());
    write_text(run.dir / "tradeoff.md", run.table.to_markdown());
    write_text(run.dir / "tradeoff.json", pretty(run.table.to_json()));
    write_text(run.dir / "run.json", pretty(index));
    write_report(run.dir);
    return run;
}

RunRecordings load_run(const fs::path& run_dir) {
    RunRecordings rec;
    rec.spec = validate_spec(read_json(run_dir / "spec.snapshot"));
    rec.run = read_json(run_dir / "run.json");
    rec.table = TradeoffTable::from_json(read_json(run_dir / "tradeoff.json"));
    for (const auto& r : rec.table.records) {
        const auto path = run_dir / "sets" / std::to_string(r.set_id) / "metrics.json";
        if (fs::exists(path)) rec.set_metrics[r.set_id] = read_json(path);
    }
    return rec;
}

Selection write_report(const fs::path& run_dir, const std::optional<SelectionPolicy>& policy) {
    const auto rec = load_run(run_dir);
    const auto& chosen_policy = policy ? *policy : rec.spec.selection;
    const auto selection = select(rec.table.records, chosen_policy);
    write_text(run_dir / "report.md", render_report(rec, chosen_policy, selection));

    nlohmann::json doc;
    doc["policy"] = to_json(chosen_policy);
    doc["chosen"] = selection.chosen ? nlohmann::json(*selection.chosen) : nlohmann::json(nullptr);
    doc["feasible"] = selection.feasible;
    doc["binding"] = selection.binding;
    doc["rationale"] = selection.rationale;
    doc["matrix"] = nlohmann::json::object();
    for (const auto& [id, checks] : selection.matrix) {
        auto& row = doc["matrix"][std::to_string(id)];
        row = nlohmann::json::array();
        for (const auto& c : checks) row.push_back({{"threshold", c.threshold}, {"observed", c.observed}, {"pass", c.pass}});
    }
    write_text(run_dir / "selection.json", pretty(doc));
    return selection;
}

} // namespace tforge
