// Acceptance checks for tradeoff-forge. Prints one PASS/FAIL line per
// criterion followed by the measured values; exits nonzero if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "tforge/metrics.hpp"
#include "tforge/models.hpp"
#include "tforge/pipeline.hpp"
#include "tforge/rng.hpp"
#include "tforge/setform.hpp"
#include "tforge/synthgen.hpp"
#include "tforge/trademap.hpp"
#include "tforge/transforms.hpp"

namespace {

using namespace tforge;
using namespace tforge::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Tolerances and sizes, pinned.
constexpr double kPlanSeconds = 1.0;
constexpr double kRunSeconds = 300.0;
constexpr std::size_t kRunRows = 10000;
constexpr int kCddInstances = 200;
constexpr double kCddTolerance = 1e-9;
constexpr std::array kKValues{2, 5, 7};
constexpr std::array<std::uint64_t, 3> kKSeeds{11, 12, 13};
constexpr std::size_t kAc5Rows = 20000;
constexpr double kAc5Disparity = 0.5;
constexpr double kAc5Epsilon = 0.05;
constexpr double kAc5Factor = 0.6;
constexpr double kAc5RecallDrop = 0.05;
constexpr std::array<std::uint64_t, 5> kAc5Seeds{1, 2, 3, 4, 5};
constexpr std::array kAc6Weights{1.0, 5.0, 10.0};
constexpr std::array<std::uint64_t, 3> kAc6Seeds{21, 22, 23};
constexpr double kAc6Tolerance = 0.01;
constexpr double kMinimizeThreshold = -1.0e-7;
constexpr std::array kMinimizeSweep{-1e-9, -1e-7, -1e-5};
constexpr int kGradientDraws = 20;
constexpr double kGradientTolerance = 1e-4;
constexpr int kParetoTrials = 100;
constexpr int kParetoMaxRecords = 64;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Shell {
    int status = -1;
    std::string out;
};

Shell shell(const std::string& args) {
    const std::string cmd = std::string("\"") + TFORGE_CLI_PATH + "\" " + args + " 2>/dev/null";
    Shell r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    while (auto n = fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
    const int st = pclose(pipe);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string spec_path() { return (source_dir() / "specs" / "case_study.json").string(); }

// ---------------------------------------------------------------------------

Outcome ac1_table1() {
    // Rows ND, DM, PD, MODEL, RISK; columns Sets 1..8.
    const int table1[5][8] = {{1, 1, 1, 1, 2, 2, 2, 2},
                              {1, 1, 2, 2, 1, 1, 2, 2},
                              {1, 1, 2, 2, 1, 1, 2, 2},
                              {1, 2, 1, 2, 1, 2, 1, 2},
                              {1, 1, 1, 1, 1, 1, 1, 1}};
    const auto t0 = Clock::now();
    const auto planned = shell("plan --spec " + spec_path() + " --format json");
    const double elapsed = seconds_since(t0);
    const auto free = shell("plan --spec " + spec_path() + " --format json --ignore-rules");
    if (planned.status != 0 || free.status != 0) return {false, "plan exited nonzero"};

    const auto doc = nlohmann::json::parse(planned.out);
    const auto& sets = doc.at("sets");
    const char* reqs[5] = {"ND", "DM", "PD", "MODEL", "RISK"};
    int mismatches = 0;
    if (sets.size() != 8) ++mismatches;
    for (std::size_t s = 0; s < std::min<std::size_t>(sets.size(), 8); ++s) {
        for (int r = 0; r < 5; ++r) mismatches += sets[s]["choices"][reqs[r]]["index"].get<int>() != table1[r][s];
    }
    const auto n_free = nlohmann::json::parse(free.out).at("sets").size();
    return {mismatches == 0 && n_free == 16 && elapsed < kPlanSeconds,
            fmt::format("sets={} cell_mismatches={} without_rules={} plan_time={:.3f}s", sets.size(), mismatches, n_free,
                        elapsed)};
}

struct FullRun {
    fs::path dir;
    double seconds = 0;
    int status = -1;
};

FullRun cli_run(const fs::path& data, const fs::path& out, int parallel) {
    const auto t0 = Clock::now();
    const auto r = shell(fmt::format("run --spec {} --data {} --out {} --parallel {} --format json", spec_path(),
                                     data.string(), out.string(), parallel));
    FullRun run;
    run.seconds = seconds_since(t0);
    run.status = r.status;
    if (r.status == 0) run.dir = nlohmann::json::parse(r.out).at("dir").get<std::string>();
    return run;
}

Outcome ac2_table2_shape(const FullRun& run) {
    if (run.status != 0) return {false, "run exited nonzero"};
    const std::string header = "| | Accuracy | Precision | F1 Score | % Data Used | K-Anonymity | CDD (Gender) "
                               "| Likelihood re-identification | Explainability | Recall |";
    const auto md = slurp(run.dir / "tradeoff.md");
    const bool columns = md.find(header) != std::string::npos;
    const auto table = TradeoffTable::from_json(nlohmann::json::parse(slurp(run.dir / "tradeoff.json")));
    int bad = 0;
    for (const auto& r : table.records) {
        const bool kanon_set = r.set_id == 3 || r.set_id == 4 || r.set_id == 7 || r.set_id == 8;
        const bool forest_set = r.set_id % 2 == 0;
        bad += !r.ok();
        bad += r.k_anon != kanon_set;
        bad += r.risk != (kanon_set ? RiskCategory::very_low : RiskCategory::low);
        bad += r.explainability != (forest_set ? Explainability::high : Explainability::moderate);
    }
    return {columns && table.records.size() == 8 && bad == 0 && run.seconds < kRunSeconds,
            fmt::format("columns_match={} records={} category_mismatches={} run_time={:.1f}s", columns,
                        table.records.size(), bad, run.seconds)};
}

// Brute-force oracle: enumerate strata, count each cell directly.
double cdd_by_counting(const std::vector<int>& pred, const std::vector<std::uint8_t>& prot,
                       const std::vector<std::string>& key) {
    std::vector<std::string> names(key);
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    double sum = 0;
    for (const auto& s : names) {
        double n = 0, adv = 0, adv_p = 0, fav = 0, fav_p = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (key[i] != s) continue;
            n += 1;
            if (pred[i] == 1) {
                adv += 1;
                adv_p += prot[i] == 1;
            } else {
                fav += 1;
                fav_p += prot[i] == 1;
            }
        }
        if (adv > 0 && fav > 0) sum += n * (adv_p / adv - fav_p / fav);
    }
    return sum / static_cast<double>(pred.size());
}

Outcome ac3_cdd() {
    Rng rng(20240501);
    double worst = 0;
    for (int t = 0; t < kCddInstances; ++t) {
        const std::size_t n = 2 + rng.below(999);
        const std::size_t strata = 2 + rng.below(19);
        std::vector<int> pred(n);
        std::vector<std::uint8_t> prot(n);
        std::vector<std::string> key(n);
        const double pf = 0.2 + 0.6 * rng.uniform();
        const double alert_f = rng.uniform(), alert_m = rng.uniform();
        for (std::size_t i = 0; i < n; ++i) {
            prot[i] = rng.bernoulli(pf);
            pred[i] = rng.bernoulli(prot[i] ? alert_f : alert_m);
            key[i] = fmt::format("s{}", rng.below(strata));
        }
        prot[0] = 1;
        prot[n - 1] = 0;
        worst = std::max(worst, std::abs(cdd(pred, prot, key).cdd - cdd_by_counting(pred, prot, key)));
    }
    const std::vector<int> hp{1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
    const std::vector<std::uint8_t> hf{1, 1, 1, 1, 0, 0, 1, 1, 0, 0};
    const std::vector<std::string> hk(10, "all");
    const double hand = cdd(hp, hf, hk).cdd;
    const double expected = 4.0 / 6.0 - 2.0 / 4.0;
    return {worst <= kCddTolerance && hand == expected,
            fmt::format("instances={} max_abs_diff={:.3g} hand_case={:.17g} (expected {:.17g})", kCddInstances, worst,
                        hand, expected)};
}

Outcome ac4_k_anonymity() {
    const auto spec = case_study_spec();
    std::string detail;
    bool ok = true;
    for (auto seed : kKSeeds) {
        GenConfig cfg;
        cfg.n_rows = kRunRows;
        cfg.seed = seed;
        const auto data = generate(cfg);
        for (int k : kKValues) {
            const auto anon = k_anonymize(data, spec.quasi_identifiers, k);
            const auto achieved = verify_k_anonymity(anon.data, spec.quasi_identifiers);
            const bool good = achieved >= static_cast<std::size_t>(k) && anon.data.rows() == data.rows() &&
                              anon.data.labels() == data.labels();
            ok = ok && good;
            detail += fmt::format("{}seed{}/k{}:{}", detail.empty() ? "" : " ", seed, k, achieved);
        }
    }
    return {ok, detail};
}

Outcome ac5_reject_option() {
    auto spec = case_study_spec();
    for (auto& op : spec.operationalizations) {
        if (op.kind == OpKind::reject_option) std::get<RejectOptionParams>(op.params).epsilon = kAc5Epsilon;
    }
    const auto sets = enumerate_sets(spec);
    const auto& set1 = sets[0];
    const auto& set5 = sets[4];
    double base_sum = 0, post_sum = 0, worst_drop = -1;
    std::string per_seed;
    for (auto seed : kAc5Seeds) {
        GenConfig cfg;
        cfg.n_rows = kAc5Rows;
        cfg.disparity_strength = kAc5Disparity;
        cfg.seed = seed;
        auto run_spec = spec;
        run_spec.seed = seed;
        const auto data = generate(cfg);
        const auto splits = split(data, run_spec.split, derive_seed(run_spec.seed, 0));
        const auto ctx = make_context(splits, run_spec);
        const auto base = execute_set(set1, splits, run_spec, ctx);
        const auto post = execute_set(set5, splits, run_spec, ctx);
        if (!base.record.ok() || !post.record.ok()) return {false, fmt::format("seed {}: set failed", seed)};
        base_sum += std::abs(base.record.cdd);
        post_sum += std::abs(post.record.cdd);
        worst_drop = std::max(worst_drop, base.record.recall - post.record.recall);
        per_seed += fmt::format(" [{}: {:.4f}->{:.4f}]", seed, base.record.cdd, post.record.cdd);
    }
    const double n = static_cast<double>(kAc5Seeds.size());
    const double ratio = post_sum / base_sum;
    return {ratio <= kAc5Factor && worst_drop <= kAc5RecallDrop,
            fmt::format("mean|cdd| set1={:.4f} set5={:.4f} ratio={:.3f} (limit {}) max_recall_drop={:.4f} (limit {}){}",
                        base_sum / n, post_sum / n, ratio, kAc5Factor, worst_drop, kAc5RecallDrop, per_seed)};
}

double recall_at_half(const std::vector<double>& probs, const std::vector<int>& y) {
    double tp = 0, pos = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        pos += y[i];
        tp += y[i] && probs[i] >= 0.5;
    }
    return tp / pos;
}

Outcome ac6_cost_sensitive() {
    const auto spec = case_study_spec();
    std::map<ModelFamily, std::vector<double>> mean_recall;
    for (auto family : {ModelFamily::logreg, ModelFamily::forest}) mean_recall[family].assign(kAc6Weights.size(), 0.0);
    for (auto seed : kAc6Seeds) {
        GenConfig cfg;
        cfg.n_rows = kRunRows;
        cfg.seed = seed;
        const auto splits = split(generate(cfg), spec.split, derive_seed(seed, 0));
        const auto y_train = splits.train.labels();
        const auto y_test = splits.test.labels();
        for (std::size_t wi = 0; wi < kAc6Weights.size(); ++wi) {
            const auto w = class_weights(y_train, ClassWeightParams{false, kAc6Weights[wi]});
            const auto lr = train_logreg(splits.train, w, spec.logreg);
            auto fh = spec.forest;
            fh.seed = derive_seed(seed, 1);
            const auto rf = train_forest(splits.train, w, fh);
            mean_recall[ModelFamily::logreg][wi] += recall_at_half(predict_proba(lr, splits.test), y_test);
            mean_recall[ModelFamily::forest][wi] += recall_at_half(predict_proba(rf, splits.test), y_test);
        }
    }
    bool ok = true;
    std::string detail;
    for (auto& [family, recalls] : mean_recall) {
        for (auto& r : recalls) r /= static_cast<double>(kAc6Seeds.size());
        for (std::size_t i = 1; i < recalls.size(); ++i) ok = ok && recalls[i] >= recalls[i - 1] - kAc6Tolerance;
        detail += fmt::format("{}{}: {:.4f} {:.4f} {:.4f}", detail.empty() ? "" : "; ", to_string(family), recalls[0],
                              recalls[1], recalls[2]);
    }
    return {ok, "mean test recall at w=1/5/10 " + detail};
}

Outcome ac7_minimization() {
    const auto spec = case_study_spec();
    GenConfig cfg;
    cfg.n_rows = kRunRows;
    cfg.seed = 31;
    const auto splits = split(generate(cfg), spec.split, derive_seed(cfg.seed, 0));
    const auto y_valid = splits.valid.labels();
    LogRegHyper hyper = spec.logreg;
    hyper.epochs = 200;
    // Validation log-loss of a model trained on the subset.
    const SubsetLoss loss = [&](const Dataset& subset) {
        const std::vector<double> w(subset.rows(), 1.0);
        const auto model = train_logreg(subset, w, hyper);
        const auto p = predict_proba(model, splits.valid);
        double total = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double q = std::clamp(y_valid[i] ? p[i] : 1 - p[i], 1e-6, 1.0);
            total -= std::log(q);
        }
        return total / static_cast<double>(p.size());
    };
    auto run = [&](double threshold) {
        MinimizeOptions opt;
        opt.threshold = threshold;
        opt.batch_size = 250;
        opt.window = 3;
        opt.seed = 5;
        return minimize_data(splits.train, loss, opt).trace;
    };
    const auto at_default = run(kMinimizeThreshold);
    const bool halted = at_default.fraction_used > 0 && at_default.fraction_used <= 1 &&
                        (at_default.exhausted || at_default.slope_at_stop() >= kMinimizeThreshold);
    const auto never = run(kNeverStop);
    std::vector<double> fractions;
    for (double t : kMinimizeSweep) fractions.push_back(run(t).fraction_used);
    const bool monotone = fractions[0] >= fractions[1] && fractions[1] >= fractions[2];
    return {halted && never.fraction_used == 1.0 && monotone,
            fmt::format("threshold -1e-7: fraction={:.4f} stop_step={} slope_at_stop={:.3g} exhausted={}; never-stop "
                        "fraction={}; fractions at -1e-9/-1e-7/-1e-5 = {:.4f}/{:.4f}/{:.4f}",
                        at_default.fraction_used, at_default.stop_step, at_default.exhausted ? 0.0 : at_default.slope_at_stop(), at_default.exhausted,
                        never.fraction_used, fractions[0], fractions[1], fractions[2])};
}

Outcome ac8_gradient() {
    Rng rng(8);
    double worst = 0;
    for (int draw = 0; draw < kGradientDraws; ++draw) {
        const std::size_t n = 10 + rng.below(90), d = 1 + rng.below(12);
        std::vector<std::vector<double>> rows(n, std::vector<double>(d));
        std::vector<int> y(n);
        std::vector<double> w(n), beta(d);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : rows[i]) v = rng.normal();
            y[i] = rng.bernoulli(0.3);
            w[i] = rng.bernoulli(0.3) ? 1 + 9 * rng.uniform() : 1.0;
        }
        for (auto& b : beta) b = 0.5 * rng.normal();
        const double b0 = rng.normal(), l2 = 1e-4 + 0.05 * rng.uniform();
        const auto x = DesignMatrix::dense(rows);
        double g0 = 0;
        auto analytic = weighted_log_loss_gradient(x, y, w, beta, b0, l2, g0);
        analytic.push_back(g0);
        const double h = 1e-5;
        std::vector<double> numeric(d + 1);
        for (std::size_t j = 0; j <= d; ++j) {
            auto up = beta, down = beta;
            double c_up = b0, c_down = b0;
            if (j < d) {
                up[j] += h;
                down[j] -= h;
            } else {
                c_up += h;
                c_down -= h;
            }
            numeric[j] = (weighted_log_loss(x, y, w, up, c_up, l2) - weighted_log_loss(x, y, w, down, c_down, l2)) /
                         (2 * h);
        }
        double diff = 0, scale = 0;
        for (std::size_t j = 0; j <= d; ++j) {
            diff += (analytic[j] - numeric[j]) * (analytic[j] - numeric[j]);
            scale += analytic[j] * analytic[j];
        }
        worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(scale), 1e-12));
    }
    return {worst <= kGradientTolerance, fmt::format("draws={} max_relative_error={:.3g}", kGradientDraws, worst)};
}

Outcome ac9_pareto_selection() {
    const std::map<Dimension, Direction> dirs{{Dimension::recall, Direction::maximize},
                                              {Dimension::cdd, Direction::minimize},
                                              {Dimension::data_used, Direction::minimize},
                                              {Dimension::accuracy, Direction::maximize}};
    auto dominates = [](const TradeoffRecord& a, const TradeoffRecord& b) {
        const double av[4] = {a.recall, -std::abs(a.cdd), -a.data_used_pct, a.accuracy};
        const double bv[4] = {b.recall, -std::abs(b.cdd), -b.data_used_pct, b.accuracy};
        bool strict = false;
        for (int i = 0; i < 4; ++i) {
            if (av[i] < bv[i]) return false;
            strict = strict || av[i] > bv[i];
        }
        return strict;
    };
    Rng rng(9);
    int mismatched = 0;
    for (int t = 0; t < kParetoTrials; ++t) {
        std::vector<TradeoffRecord> rs;
        const int n = 1 + static_cast<int>(rng.below(kParetoMaxRecords));
        for (int i = 1; i <= n; ++i) {
            TradeoffRecord r;
            r.set_id = i;
            r.recall = static_cast<double>(rng.below(10)) / 10;
            r.cdd = (static_cast<double>(rng.below(11)) - 5) / 50;
            r.data_used_pct = 50 + 10 * static_cast<double>(rng.below(6));
            r.accuracy = static_cast<double>(rng.below(5)) / 5;
            if (rng.bernoulli(0.05)) r.status = RecordStatus::failed;
            rs.push_back(r);
        }
        std::vector<int> oracle;
        for (const auto& r : rs) {
            if (!r.ok()) continue;
            bool dominated = false;
            for (const auto& q : rs) dominated = dominated || (q.ok() && dominates(q, r));
            if (!dominated) oracle.push_back(r.set_id);
        }
        mismatched += pareto_front(rs, dirs) != oracle;
    }
    SelectionPolicy policy;
    Threshold recall;
    recall.dimension = Dimension::recall;
    recall.min = 0.90;
    Threshold kanon;
    kanon.dimension = Dimension::k_anon;
    kanon.required = true;
    policy.thresholds = {recall, kanon};
    policy.order = {Dimension::recall};
    const auto sel = select(table2_fixture(), policy);
    const int chosen = sel.chosen.value_or(0);
    return {mismatched == 0 && chosen == 3,
            fmt::format("pareto trials={} mismatches={}; fixture selection=Set {}", kParetoTrials, mismatched, chosen)};
}

Outcome ac10_determinism(const FullRun& first, const fs::path& data, const fs::path& scratch) {
    if (first.status != 0) return {false, "first run failed"};
    const auto second = cli_run(data, scratch / "runs_b", 1);
    const auto parallel = cli_run(data, scratch / "runs_c", 4);
    if (second.status != 0 || parallel.status != 0) return {false, "repeat run failed"};
    int differing = 0;
    for (const char* f : {"tradeoff.csv", "report.md"}) {
        const auto ref = slurp(first.dir / f);
        differing += ref.empty();
        differing += slurp(second.dir / f) != ref;
        differing += slurp(parallel.dir / f) != ref;
    }
    return {differing == 0, fmt::format("runs=3 (parallel 1, 1, 4) differing_files={} parallel_4_time={:.1f}s", differing,
                                        parallel.seconds)};
}

} // namespace

int main() {
    const auto scratch = scratch_dir("acceptance");
    const auto data = scratch / "case_study_10k.csv";
    const bool generated = shell(fmt::format("gen-data --out {} --rows {}", data.string(), kRunRows)).status == 0;

    FullRun first;
    std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
        {"AC1 Table 1 reproduction", ac1_table1},
        {"AC2 Table 2 shape",
         [&] {
             if (!generated) return Outcome{false, "gen-data failed"};
             first = cli_run(data, scratch / "runs_a", 1);
             return ac2_table2_shape(first);
         }},
        {"AC3 CDD oracle", ac3_cdd},
        {"AC4 k-anonymity guarantee", ac4_k_anonymity},
        {"AC5 reject-option efficacy", ac5_reject_option},
        {"AC6 cost-sensitive monotonicity", ac6_cost_sensitive},
        {"AC7 data-minimization contract", ac7_minimization},
        {"AC8 gradient check", ac8_gradient},
        {"AC9 Pareto and selection", ac9_pareto_selection},
        {"AC10 determinism", [&] { return ac10_determinism(first, data, scratch); }},
    };

    int failures = 0;
    for (const auto& [name, check] : checks) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        fmt::print("{} {} ({:.1f}s)\n    {}\n", o.pass ? "PASS" : "FAIL", name, seconds_since(t0), o.detail);
        std::fflush(stdout);
    }
    fmt::print("{}/{} criteria passed\n", checks.size() - static_cast<std::size_t>(failures), checks.size());
    return failures == 0 ? 0 : 1;
}
