#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "helpers.hpp"
#include "tforge/errors.hpp"
#include "tforge/metrics.hpp"
#include "tforge/models.hpp"
#include "tforge/rng.hpp"
#include "tforge/synthgen.hpp"

using namespace tforge;
using namespace tforge::testing;

namespace {

double norm(std::span<const double> v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

// Two well-separated clusters in the plane.
Dataset separable(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> a(n), b(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(i % 2);
        const double shift = y[i] ? 2.0 : -2.0;
        a[i] = shift + 0.5 * rng.normal();
        b[i] = -shift + 0.5 * rng.normal();
    }
    return make_dataset({numeric("a", a), numeric("b", b), label_column(y)});
}

std::vector<int> argmax_labels(std::span<const double> p) {
    std::vector<int> out;
    for (double v : p) out.push_back(v >= 0.5);
    return out;
}

} // namespace

TEST(Encoder, OneHotWithOtherBucketAndZScores) {
    auto train = make_dataset({numeric("x", {1, 2, 3, 4}), numeric("flat", {7, 7, 7, 7}),
                               categorical("c", {"b", "a", "b", "a"}), label_column({0, 1, 0, 1})});
    const auto enc = FeatureEncoder::fit(train);
    // x (1) + c (a, b, other); flat is constant and dropped.
    EXPECT_EQ(enc.width(), 4u);
    const auto test = make_dataset({numeric("x", {2.5}), numeric("flat", {7}), categorical("c", {"zzz"}),
                                    label_column({0})});
    const auto m = enc.transform(test);
    ASSERT_EQ(m.rows, 1u);
    // Row holds z(x) = 0 (maybe omitted) and the "other" column.
    double other = 0;
    for (std::size_t k = m.row_start[0]; k < m.row_start[1]; ++k) {
        if (m.index[k] == 3) other = m.value[k];
        if (m.index[k] == 0) EXPECT_NEAR(m.value[k], 0.0, 1e-12);
    }
    EXPECT_EQ(other, 1.0);
    EXPECT_EQ(FeatureEncoder::from_json(enc.to_json()).to_json(), enc.to_json());

    const auto missing = make_dataset({numeric("x", {1}), label_column({0})});
    EXPECT_THROW(enc.transform(missing), SchemaMismatch);
}

// Central differences on 20 random problems.
TEST(LogReg, GradientMatchesFiniteDifferences) {
    Rng rng(2024);
    for (int draw = 0; draw < 20; ++draw) {
        const std::size_t n = 5 + rng.below(40), d = 1 + rng.below(8);
        std::vector<std::vector<double>> rows(n, std::vector<double>(d));
        std::vector<int> y(n);
        std::vector<double> w(n), beta(d);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : rows[i]) v = rng.normal();
            y[i] = rng.bernoulli(0.4);
            w[i] = 0.1 + 5 * rng.uniform();
        }
        for (auto& b : beta) b = rng.normal();
        const double b0 = rng.normal(), l2 = rng.uniform() * 0.1;
        const auto x = DesignMatrix::dense(rows);

        double g0 = 0;
        const auto g = weighted_log_loss_gradient(x, y, w, beta, b0, l2, g0);
        std::vector<double> analytic(g.begin(), g.end()), numeric_grad(d + 1);
        analytic.push_back(g0);
        const double h = 1e-6;
        auto loss = [&](const std::vector<double>& b, double c) { return weighted_log_loss(x, y, w, b, c, l2); };
        for (std::size_t j = 0; j < d; ++j) {
            auto up = beta, down = beta;
            up[j] += h;
            down[j] -= h;
            numeric_grad[j] = (loss(up, b0) - loss(down, b0)) / (2 * h);
        }
        numeric_grad[d] = (loss(beta, b0 + h) - loss(beta, b0 - h)) / (2 * h);
        std::vector<double> diff(d + 1);
        for (std::size_t j = 0; j <= d; ++j) diff[j] = analytic[j] - numeric_grad[j];
        EXPECT_LE(norm(diff) / std::max(norm(analytic), 1e-12), 1e-4) << "draw " << draw;
    }
}

TEST(LogReg, SeparableToyIsFitExactly) {
    const auto data = separable(200, 3);
    const std::vector<double> w(200, 1.0);
    const auto model = train_logreg(data, w, {0.1, 500, 0.0});
    EXPECT_EQ(argmax_labels(predict_proba(model, data)), data.labels());
    EXPECT_LE(model.final_loss, model.initial_loss);
}

TEST(LogReg, DoubledWeightsWithHalvedRateGiveIdenticalIterates) {
    const auto data = separable(120, 8);
    const std::vector<double> w1(120, 1.0), w2(120, 2.0);
    const auto a = train_logreg(data, w1, {0.2, 300, 0.0});
    const auto b = train_logreg(data, w2, {0.1, 300, 0.0});
    EXPECT_EQ(a.coefficients, b.coefficients);
    EXPECT_EQ(a.intercept, b.intercept);
    EXPECT_DOUBLE_EQ(b.final_loss, 2 * a.final_loss);
}

TEST(LogReg, FinalLossNeverExceedsInitial) {
    GenConfig cfg;
    cfg.n_rows = 600;
    const auto data = generate(cfg);
    const auto y = data.labels();
    std::vector<double> w(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) w[i] = y[i] ? 9.0 : 1.0;
    // A deliberately large step forces halvings.
    const auto model = train_logreg(data, w, {50.0, 50, 1e-4});
    EXPECT_LE(model.final_loss, model.initial_loss);
    EXPECT_GT(model.step_halvings, 0);
    const auto again = train_logreg(data, w, {50.0, 50, 1e-4});
    EXPECT_EQ(again.coefficients, model.coefficients);
}

TEST(LogReg, SingleClassIsDegenerate) {
    auto data = make_dataset({numeric("x", {1, 2, 3}), label_column({1, 1, 1})});
    const std::vector<double> w(3, 1.0);
    EXPECT_THROW(train_logreg(data, w, {}), DegenerateData);
    EXPECT_THROW(train_forest(data, w, {}), DegenerateData);
    EXPECT_THROW(train_logreg(data, std::vector<double>(2, 1.0), {}), LengthMismatch);
}

TEST(LogReg, ZeroModelPredictsOneHalf) {
    const auto data = separable(10, 1);
    LogRegModel model;
    model.encoder = FeatureEncoder::fit(data);
    model.coefficients.assign(model.encoder.width(), 0.0);
    for (double p : predict_proba(model, data)) EXPECT_EQ(p, 0.5);
}

TEST(Forest, PerfectBinaryFeatureIsChosenAtRoot) {
    Rng rng(4);
    std::vector<std::string> flag, noise;
    std::vector<double> junk;
    std::vector<int> y;
    for (int i = 0; i < 300; ++i) {
        y.push_back(i % 3 == 0);
        flag.push_back(y.back() ? "yes" : "no");
        noise.push_back(rng.bernoulli(0.5) ? "u" : "v");
        junk.push_back(rng.normal());
    }
    const auto data = make_dataset({categorical("noise", noise), numeric("junk", junk), categorical("flag", flag),
                                    label_column(y)});
    ForestHyper hyper;
    hyper.n_trees = 1;
    hyper.max_depth = 1;
    hyper.feature_subsample = 1.0;
    const auto forest = train_forest(data, std::vector<double>(300, 1.0), hyper);
    ASSERT_EQ(forest.trees.size(), 1u);
    const auto& root = forest.trees[0].nodes[0];
    ASSERT_GE(root.feature, 0);
    EXPECT_EQ(forest.inputs[static_cast<std::size_t>(root.feature)].name, "flag");
    EXPECT_EQ(forest.trees[0].depth(), 1);
    EXPECT_EQ(argmax_labels(predict_proba(forest, data)), y);
}

TEST(Forest, SameSeedSameTrees) {
    GenConfig cfg;
    cfg.n_rows = 800;
    const auto data = generate(cfg);
    ForestHyper hyper;
    hyper.n_trees = 5;
    hyper.seed = 77;
    const std::vector<double> w(800, 1.0);
    const auto a = train_forest(data, w, hyper);
    const auto b = train_forest(data, w, hyper);
    EXPECT_EQ(model_to_json(a).dump(), model_to_json(b).dump());
    hyper.seed = 78;
    EXPECT_NE(model_to_json(train_forest(data, w, hyper)).dump(), model_to_json(a).dump());
    for (const auto& t : a.trees) EXPECT_LE(t.depth(), hyper.max_depth);
}

TEST(Forest, MinLeafAboveRowCountGivesMajorityLeaves) {
    std::vector<double> x(100);
    std::vector<int> y(100);
    for (int i = 0; i < 100; ++i) {
        x[static_cast<std::size_t>(i)] = i;
        y[static_cast<std::size_t>(i)] = i < 15;
    }
    const auto data = make_dataset({numeric("x", x), label_column(y)});
    ForestHyper hyper;
    hyper.n_trees = 3;
    hyper.min_leaf = 101;
    const auto forest = train_forest(data, std::vector<double>(100, 1.0), hyper);
    for (const auto& t : forest.trees) EXPECT_EQ(t.nodes.size(), 1u);
    for (double p : predict_proba(forest, data)) EXPECT_LT(p, 0.5);
}

TEST(Forest, ProbabilityIsMeanOfTrees) {
    GenConfig cfg;
    cfg.n_rows = 500;
    const auto data = generate(cfg);
    ForestHyper hyper;
    hyper.n_trees = 7;
    const auto forest = train_forest(data, std::vector<double>(500, 1.0), hyper);
    const auto p = predict_proba(forest, data);
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        for (const auto& node : forest.trees[t].nodes) {
            if (node.feature < 0) {
                EXPECT_GE(node.p1, 0.0);
                EXPECT_LE(node.p1, 1.0);
            }
        }
    }
    // Single-tree forests reproduce tree_proba, and their mean is the forest.
    std::vector<double> mean(data.rows(), 0.0);
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        ForestModel one = forest;
        one.trees = {forest.trees[t]};
        const auto pt = predict_proba(one, data);
        for (std::size_t r = 0; r < pt.size(); ++r) mean[r] += pt[r];
    }
    for (std::size_t r = 0; r < p.size(); ++r) EXPECT_NEAR(p[r], mean[r] / 7.0, 1e-15);
}

TEST(Forest, ConstantLeavesPredictConstant) {
    const auto data = separable(20, 2);
    ForestModel forest;
    forest.inputs = {ForestInput{"a", true, {}, {}}};
    TreeNode leaf;
    leaf.p1 = 0.7;
    forest.trees = {DecisionTree{{leaf}}, DecisionTree{{leaf}}, DecisionTree{{leaf}}};
    for (double p : predict_proba(forest, data)) EXPECT_DOUBLE_EQ(p, 0.7);
}

TEST(Predict, BoundedOnRandomInputsAndSerialisable) {
    GenConfig cfg;
    cfg.n_rows = 700;
    const auto data = generate(cfg);
    const std::vector<double> w(700, 1.0);
    ForestHyper fh;
    fh.n_trees = 4;
    const Model models[] = {train_logreg(data, w, {0.1, 100, 1e-4}), train_forest(data, w, fh)};
    cfg.seed = 99;
    const auto fresh = generate(cfg);
    for (const auto& m : models) {
        const auto p = predict_proba(m, fresh);
        for (double v : p) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        const auto back = model_from_json(model_to_json(m));
        EXPECT_EQ(family_of(back), family_of(m));
        EXPECT_EQ(predict_proba(back, fresh), p);
    }
    auto broken = fresh;
    const auto amount = *broken.find("Amount");
    broken.schema[amount].kind = FeatureKind::categorical;
    broken.columns[amount].strings.assign(broken.rows(), "x");
    broken.columns[amount].numbers.clear();
    EXPECT_THROW(predict_proba(models[0], broken), SchemaMismatch);
    EXPECT_THROW(predict_proba(models[1], broken), SchemaMismatch);
}

TEST(RejectOption, Examples) {
    const std::vector<std::string> unpriv{"F", "F"};
    RejectOptionRule rule{0.6, "F", 0};
    EXPECT_EQ(apply_reject_option(std::vector<double>{0.55, 0.95}, unpriv, rule), (std::vector<int>{0, 1}));

    const std::vector<std::string> priv{"M", "M", "M"};
    EXPECT_EQ(apply_reject_option(std::vector<double>{0.55, 0.55, 0.55}, priv, rule), (std::vector<int>{1, 1, 1}));

    // theta = 0.5: identity with argmax except rows at exactly 0.5.
    rule.theta = 0.5;
    const std::vector<double> p{0.1, 0.5, 0.7, 0.5};
    const std::vector<std::string> g{"F", "F", "M", "M"};
    EXPECT_EQ(apply_reject_option(p, g, rule), (std::vector<int>{0, 0, 1, 1}));
    EXPECT_THROW(apply_reject_option(p, unpriv, rule), LengthMismatch);
}

TEST(RejectOption, ChangesOnlyInsideARegionThatGrowsWithTheta) {
    Rng rng(12);
    std::vector<double> p(500);
    std::vector<std::string> g(500);
    for (std::size_t i = 0; i < 500; ++i) {
        p[i] = rng.uniform();
        g[i] = rng.bernoulli(0.5) ? "F" : "M";
    }
    const auto base = argmax_labels(p);
    std::vector<bool> previous(500, false);
    for (int step = 1; step <= 10; ++step) {
        const double theta = (50.0 + 5.0 * step) / 100.0;
        const auto out = apply_reject_option(p, g, {theta, "F", 0});
        for (std::size_t i = 0; i < 500; ++i) {
            const bool changed = out[i] != base[i];
            if (changed) EXPECT_LE(std::max(p[i], 1 - p[i]), theta);
            if (previous[i]) EXPECT_TRUE(changed) << "row " << i << " theta " << theta;
            previous[i] = changed;
        }
    }
}

TEST(TuneTheta, UnconstrainedFindsGridMinimum) {
    Rng rng(31);
    const std::size_t n = 2000;
    std::vector<double> p(n);
    std::vector<std::string> g(n), strata(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = rng.bernoulli(0.5) ? "F" : "M";
        const double shift = g[i] == "F" ? 0.6 : 0.0;
        const double z = rng.normal() + shift;
        p[i] = 1 / (1 + std::exp(-z));
        y[i] = rng.uniform() < p[i];
        strata[i] = rng.bernoulli(0.5) ? "s1" : "s2";
    }
    std::vector<std::uint8_t> in_group(n);
    for (std::size_t i = 0; i < n; ++i) in_group[i] = g[i] == "F";

    const auto tuning = tune_theta(p, g, y, strata, "F", std::numeric_limits<double>::infinity());
    double best = std::abs(cdd(argmax_labels(p), in_group, strata).cdd);
    double best_theta = 0.5;
    for (int i = 1; i <= 10; ++i) {
        const double theta = (50.0 + 5.0 * i) / 100.0;
        const double v = std::abs(cdd(apply_reject_option(p, g, {theta, "F", 0}), in_group, strata).cdd);
        if (v < best) {
            best = v;
            best_theta = theta;
        }
    }
    EXPECT_DOUBLE_EQ(tuning.rule.theta, best_theta);
    EXPECT_LE(best, std::abs(tuning.baseline_cdd));
    EXPECT_EQ(tuning.grid.size(), 10u);
}

TEST(TuneTheta, ZeroDisparityKeepsBaselineAndInfeasibleThrows) {
    // Mirror-image groups: CDD is exactly 0 at every theta.
    std::vector<double> p;
    std::vector<std::string> g, strata;
    std::vector<int> y;
    for (double v : {0.1, 0.3, 0.52, 0.58, 0.7, 0.9}) {
        for (const char* grp : {"F", "M"}) {
            p.push_back(v);
            g.push_back(grp);
            strata.push_back("s");
            y.push_back(v > 0.5);
        }
    }
    const auto t = tune_theta(p, g, y, strata, "F", std::numeric_limits<double>::infinity());
    EXPECT_EQ(t.rule.theta, 0.5);
    EXPECT_EQ(t.baseline_cdd, 0.0);

    // The F positives sit inside every critical region, so any theta loses recall.
    std::vector<double> p2{0.52, 0.54, 0.1, 0.2};
    std::vector<std::string> g2{"F", "F", "M", "M"};
    std::vector<int> y2{1, 1, 0, 0};
    std::vector<std::string> s2(4, "s");
    EXPECT_THROW(tune_theta(p2, g2, y2, s2, "F", 0.0), NoFeasibleTheta);
}
