#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "helpers.hpp"
#include "tforge/errors.hpp"
#include "tforge/metrics.hpp"
#include "tforge/rng.hpp"
#include "tforge/setform.hpp"

using namespace tforge;
using namespace tforge::testing;

namespace {

// Independent counting oracle: per stratum, count protected/other rows among
// adverse and favourable predictions and combine with size weights.
double cdd_oracle(const std::vector<int>& pred, const std::vector<std::uint8_t>& prot,
                  const std::vector<std::string>& key) {
    struct Counts {
        double adverse_p = 0, adverse = 0, favourable_p = 0, favourable = 0;
    };
    std::map<std::string, Counts> by;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        auto& c = by[key[i]];
        if (pred[i] == 1) {
            c.adverse += 1;
            c.adverse_p += prot[i];
        } else {
            c.favourable += 1;
            c.favourable_p += prot[i];
        }
    }
    double total = 0;
    for (const auto& [k, c] : by) {
        if (c.adverse == 0 || c.favourable == 0) continue;
        total += (c.adverse + c.favourable) * (c.adverse_p / c.adverse - c.favourable_p / c.favourable);
    }
    return total / static_cast<double>(pred.size());
}

} // namespace

TEST(Confusion, Examples) {
    const std::vector<int> truth{1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
    EXPECT_EQ(confusion(truth, truth), (ConfusionCounts{3, 0, 7, 0}));
    EXPECT_EQ(confusion(truth, std::vector<int>(10, 0)), (ConfusionCounts{0, 0, 7, 3}));
    std::vector<int> inverted;
    for (int v : truth) inverted.push_back(1 - v);
    EXPECT_EQ(confusion(truth, inverted), (ConfusionCounts{0, 7, 0, 3}));
    EXPECT_THROW(confusion(truth, std::vector<int>{1}), LengthMismatch);
}

TEST(PerfPanel, Examples) {
    const auto perfect = perf_panel({3, 0, 7, 0});
    EXPECT_EQ(perfect.accuracy, 1.0);
    EXPECT_EQ(perfect.precision, 1.0);
    EXPECT_EQ(perfect.recall, 1.0);
    EXPECT_EQ(perfect.f1, 1.0);

    const auto silent = perf_panel({0, 0, 7, 3});
    EXPECT_EQ(silent.recall, 0.0);
    EXPECT_EQ(silent.precision, 0.0);
    EXPECT_TRUE(silent.precision_undefined);
    EXPECT_FALSE(silent.recall_undefined);

    const auto mixed = perf_panel({2, 1, 6, 1});
    EXPECT_DOUBLE_EQ(mixed.precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(mixed.recall, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(mixed.f1, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(mixed.accuracy, 0.8);
}

TEST(PerfPanel, F1IsHarmonicMean) {
    Rng rng(6);
    for (int i = 0; i < 200; ++i) {
        const ConfusionCounts c{rng.below(50), rng.below(50), rng.below(50), rng.below(50)};
        if (c.total() == 0) continue;
        const auto p = perf_panel(c);
        if (p.precision + p.recall > 0) {
            EXPECT_NEAR(p.f1, 2 * p.precision * p.recall / (p.precision + p.recall), 1e-15);
        }
    }
}

TEST(Cdd, HandCase) {
    // Adverse: 4 F, 2 M. Favourable: 2 F, 2 M.
    const std::vector<int> pred{1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
    const std::vector<std::uint8_t> f{1, 1, 1, 1, 0, 0, 1, 1, 0, 0};
    const std::vector<std::string> key(10, "all");
    const auto r = cdd(pred, f, key);
    EXPECT_EQ(r.cdd, 4.0 / 6.0 - 2.0 / 4.0);
    ASSERT_EQ(r.strata.size(), 1u);
    EXPECT_EQ(r.strata[0].n, 10u);
}

TEST(Cdd, IndependentPredictionsGiveZero) {
    // Same protected share on both sides of every stratum.
    const std::vector<int> pred{1, 1, 0, 0, 1, 0, 1, 0};
    const std::vector<std::uint8_t> f{1, 0, 1, 0, 1, 1, 0, 0};
    const std::vector<std::string> key{"a", "a", "a", "a", "b", "b", "b", "b"};
    EXPECT_EQ(cdd(pred, f, key).cdd, 0.0);
}

TEST(Cdd, MatchesOracleOnRandomInstances) {
    Rng rng(1234);
    for (int instance = 0; instance < 200; ++instance) {
        const std::size_t n = 2 + rng.below(999);
        const std::size_t strata = 2 + rng.below(19);
        std::vector<int> pred(n);
        std::vector<std::uint8_t> prot(n);
        std::vector<std::string> key(n);
        const double bias = rng.uniform();
        for (std::size_t i = 0; i < n; ++i) {
            prot[i] = rng.bernoulli(0.5);
            pred[i] = rng.bernoulli(prot[i] ? bias : 0.3);
            key[i] = "s" + std::to_string(rng.below(strata));
        }
        if (std::all_of(prot.begin(), prot.end(), [&](auto v) { return v == prot[0]; })) prot[0] ^= 1;
        const auto r = cdd(pred, prot, key);
        EXPECT_NEAR(r.cdd, cdd_oracle(pred, prot, key), 1e-9) << instance;
        EXPECT_LE(std::abs(r.cdd), 1.0);

        double weights = 0, weighted = 0;
        for (const auto& s : r.strata) {
            weights += static_cast<double>(s.n) / static_cast<double>(n);
            weighted += static_cast<double>(s.n) / static_cast<double>(n) * s.dd;
            if (s.empty_side) EXPECT_EQ(s.dd, 0.0);
        }
        EXPECT_NEAR(weights, 1.0, 1e-12);
        EXPECT_NEAR(weighted, r.cdd, 1e-12);

        // Swapping the protected designation flips the sign.
        auto flipped = prot;
        for (auto& v : flipped) v ^= 1;
        EXPECT_NEAR(cdd(pred, flipped, key).cdd, -r.cdd, 1e-12);
    }
}

TEST(Cdd, Errors) {
    const std::vector<int> pred{1, 0};
    const std::vector<std::string> key{"a", "a"};
    EXPECT_THROW(cdd(pred, std::vector<std::uint8_t>{1, 1}, key), NoProtectedVariation);
    EXPECT_THROW(cdd(pred, std::vector<std::uint8_t>{1}, key), LengthMismatch);
}

TEST(StratumKeys, QuintilesOnNumericFeature) {
    std::vector<double> assets;
    std::vector<std::string> industry;
    for (int i = 1; i <= 100; ++i) {
        assets.push_back(i);
        industry.push_back(i % 2 ? "A" : "B");
    }
    const auto ds = make_dataset({categorical("Industry", industry), numeric("Assets", assets), label_column(std::vector<int>(100, 0))});
    nlohmann::json edges;
    const std::vector<std::string> features{"Industry", "Assets"};
    const auto keys = stratum_keys(ds, features, &edges);
    std::map<std::string, int> counts;
    for (const auto& k : keys) ++counts[k];
    EXPECT_EQ(counts.size(), 10u);
    for (const auto& [k, c] : counts) EXPECT_EQ(c, 10) << k;
    EXPECT_NE(keys[0].find("A"), std::string::npos);
    EXPECT_FALSE(edges.empty());
}

TEST(DataUsage, RoundHalfUp) {
    EXPECT_EQ(data_usage(0.70).label(), "70%");
    EXPECT_EQ(data_usage(1.0).label(), "100%");
    EXPECT_EQ(data_usage(0.838).label(), "84%");
    EXPECT_EQ(data_usage(0.835).label(), "84%");
    EXPECT_EQ(data_usage(0.8349).label(), "83%");
    EXPECT_DOUBLE_EQ(data_usage(0.838).raw_pct, 83.8);
}

TEST(Categories, RiskAndExplainability) {
    auto spec = case_study_spec();
    const auto sets = enumerate_sets(spec);
    for (int id : {3, 4, 7, 8}) {
        EXPECT_EQ(risk_category(sets[static_cast<std::size_t>(id - 1)], spec).category, RiskCategory::very_low);
        EXPECT_TRUE(applies_k_anonymity(sets[static_cast<std::size_t>(id - 1)], spec));
    }
    for (int id : {1, 2, 5, 6}) {
        EXPECT_EQ(risk_category(sets[static_cast<std::size_t>(id - 1)], spec).category, RiskCategory::low);
    }
    spec.model_shared_externally = true;
    EXPECT_EQ(risk_category(sets[0], spec).category, RiskCategory::moderate);
    spec.risk_overrides[1] = RiskCategory::high;
    const auto overridden = risk_category(sets[0], spec);
    EXPECT_EQ(overridden.category, RiskCategory::high);
    EXPECT_TRUE(overridden.overridden);

    EXPECT_EQ(explainability_category(ModelFamily::logreg), Explainability::moderate);
    EXPECT_EQ(explainability_category(ModelFamily::forest), Explainability::high);
    for (auto e : {Explainability::low, Explainability::moderate, Explainability::high}) {
        EXPECT_EQ(parse_explainability(to_string(e)), e);
    }
}
