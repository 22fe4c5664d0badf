#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "tforge/errors.hpp"
#include "tforge/pipeline.hpp"
#include "tforge/setform.hpp"
#include "tforge/synthgen.hpp"

using namespace tforge;
using namespace tforge::testing;

namespace {

// Small hyperparameters keep these runs to a few seconds on one core.
RunSpec quick_spec() {
    auto spec = case_study_spec();
    spec.logreg.epochs = 150;
    spec.forest.n_trees = 8;
    spec.forest.max_depth = 4;
    return spec;
}

Dataset quick_data(std::size_t rows = 1500) {
    GenConfig cfg;
    cfg.n_rows = rows;
    cfg.disparity_strength = 0.5;
    return generate(cfg);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(ExecuteSet, MismatchedParamsGiveFailedRecord) {
    const auto spec = quick_spec();
    const auto data = quick_data();
    const auto splits = split(data, spec.split, 1);
    auto set = enumerate_sets(spec)[0];
    for (auto& c : set.choices) {
        if (c.kind == OpKind::model_family) c.params = KAnonymityParams{7};
    }
    const auto r = execute_set(set, splits, spec);
    EXPECT_FALSE(r.record.ok());
    ASSERT_FALSE(r.record.notes.empty());
    EXPECT_FALSE(r.model.has_value());
}

TEST(ExecuteSet, Set1AndSet8Shape) {
    const auto spec = quick_spec();
    const auto data = quick_data();
    const auto splits = split(data, spec.split, 1);
    const auto ctx = make_context(splits, spec);
    const auto sets = enumerate_sets(spec);

    const auto one = execute_set(sets[0], splits, spec, ctx);
    ASSERT_TRUE(one.record.ok()) << (one.record.notes.empty() ? "" : one.record.notes[0]);
    EXPECT_FALSE(one.record.k_anon);
    EXPECT_EQ(one.record.risk, RiskCategory::low);
    EXPECT_EQ(one.record.explainability, Explainability::moderate);
    EXPECT_TRUE(one.trace.has_value());
    EXPECT_FALSE(one.genmap.has_value());
    EXPECT_LE(one.record.data_used_pct, 100.0);
    EXPECT_EQ(one.test_predictions.size(), splits.test.rows());

    const auto eight = execute_set(sets[7], splits, spec, ctx);
    ASSERT_TRUE(eight.record.ok()) << (eight.record.notes.empty() ? "" : eight.record.notes[0]);
    EXPECT_TRUE(eight.record.k_anon);
    EXPECT_GE(eight.record.k_achieved, 7u);
    EXPECT_EQ(eight.record.risk, RiskCategory::very_low);
    EXPECT_EQ(eight.record.explainability, Explainability::high);
    EXPECT_TRUE(eight.genmap.has_value());
    for (double v : {eight.record.accuracy, eight.record.precision, eight.record.recall, eight.record.f1}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_LE(std::abs(eight.record.cdd), 1.0);
}

TEST(ExecuteRun, DeterministicAcrossWorkerCounts) {
    const auto spec = quick_spec();
    const auto data = quick_data();
    const auto a = execute_run(spec, data, {scratch_dir("det_a"), 1});
    const auto b = execute_run(spec, data, {scratch_dir("det_b"), 2});
    EXPECT_EQ(a.run_id, b.run_id);
    EXPECT_EQ(a.table.records, b.table.records);
    for (const char* f : {"tradeoff.csv", "tradeoff.md", "report.md", "run.json"}) {
        EXPECT_EQ(slurp(a.dir / f), slurp(b.dir / f)) << f;
    }
    EXPECT_TRUE(std::filesystem::exists(a.dir / "sets" / "3" / "model.json"));
    EXPECT_EQ(a.table.records.size(), 8u);
}

TEST(ExecuteRun, PruneKeepsFourRecords) {
    auto spec = quick_spec();
    spec.prune = {4, {{3, 1.0}, {4, 1.0}, {7, 1.0}, {8, 1.0}}};
    const auto run = execute_run(spec, quick_data(), {"", 1});
    ASSERT_EQ(run.table.records.size(), 4u);
    EXPECT_EQ(run.table.records[0].set_id, 3);
    EXPECT_TRUE(run.dir.empty());
}

TEST(ExecuteRun, RejectsDatasetMissingProtectedFeature) {
    const auto spec = quick_spec();
    const auto data = quick_data(300);
    auto stripped = data;
    const auto idx = *stripped.find("Gender");
    stripped.schema.erase(stripped.schema.begin() + static_cast<std::ptrdiff_t>(idx));
    stripped.columns.erase(stripped.columns.begin() + static_cast<std::ptrdiff_t>(idx));
    EXPECT_THROW(execute_run(spec, stripped, {"", 1}), SchemaMismatch);
}

TEST(Report, SelectRewritesReport) {
    const auto spec = quick_spec();
    const auto run = execute_run(spec, quick_data(), {scratch_dir("report"), 1});
    SelectionPolicy p;
    p.ranking = RankingKind::weighted;
    p.weights = {{Dimension::accuracy, 1.0, Direction::maximize}};
    const auto sel = write_report(run.dir, p);
    ASSERT_TRUE(sel.chosen.has_value());
    const auto report = slurp(run.dir / "report.md");
    EXPECT_NE(report.find("Set " + std::to_string(*sel.chosen)), std::string::npos);
    EXPECT_TRUE(std::filesystem::exists(run.dir / "selection.json"));
    EXPECT_EQ(load_run(run.dir).table.records, run.table.records);
}

TEST(RunId, DependsOnSpecAndData) {
    const auto spec = quick_spec();
    const auto data = quick_data(300);
    const auto id = compute_run_id(spec, data);
    EXPECT_EQ(id.size(), 16u);
    EXPECT_EQ(compute_run_id(spec, data), id);
    auto other = spec;
    other.seed = 7;
    EXPECT_NE(compute_run_id(other, data), id);
    EXPECT_NE(compute_run_id(spec, quick_data(301)), id);
}
