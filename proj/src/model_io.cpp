#include <fmt/format.h>

#include "tforge/errors.hpp"
#include "tforge/models.hpp"

namespace tforge {

namespace {

nlohmann::json tree_to_json(const DecisionTree& tree) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
        if (n.feature < 0) {
            nodes.push_back({{"p0", 1.0 - n.p1}, {"p1", n.p1}});
            continue;
        }
        nlohmann::json j{{"feature", n.feature}, {"left_child", n.left_child}, {"right_child", n.right_child}};
        if (n.left.empty()) {
            j["threshold"] = n.threshold;
        } else {
            std::string bits;
            for (auto b : n.left) bits.push_back(b ? '1' : '0');
            j["left_categories"] = bits;
        }
        nodes.push_back(std::move(j));
    }
    return nodes;
}

DecisionTree tree_from_json(const nlohmann::json& doc) {
    DecisionTree tree;
    for (const auto& j : doc) {
        TreeNode n;
        if (j.contains("feature")) {
            n.feature = j.at("feature").get<int>();
            n.left_child = j.at("left_child").get<int>();
            n.right_child = j.at("right_child").get<int>();
            if (j.contains("threshold")) {
                n.threshold = j.at("threshold").get<double>();
            } else {
                for (char c : j.at("left_categories").get<std::string>()) n.left.push_back(c == '1');
            }
        } else {
            n.p1 = j.at("p1").get<double>();
        }
        tree.nodes.push_back(std::move(n));
    }
    return tree;
}

} // namespace

ModelFamily family_of(const Model& model) {
    return std::holds_alternative<LogRegModel>(model) ? ModelFamily::logreg : ModelFamily::forest;
}

std::vector<double> predict_proba(const Model& model, const Dataset& rows) {
    return std::visit([&](const auto& m) { return predict_proba(m, rows); }, model);
}

nlohmann::json model_to_json(const Model& model) {
    if (const auto* lr = std::get_if<LogRegModel>(&model)) {
        return {{"family", "logreg"},
                {"hyper", {{"learning_rate", lr->hyper.learning_rate}, {"epochs", lr->hyper.epochs}, {"l2", lr->hyper.l2}}},
                {"encoding", lr->encoder.to_json()},
                {"columns", lr->encoder.column_names()},
                {"coefficients", lr->coefficients},
                {"intercept", lr->intercept},
                {"training", {{"initial_loss", lr->initial_loss}, {"final_loss", lr->final_loss}, {"step_halvings", lr->step_halvings}}}};
    }
    const auto& rf = std::get<ForestModel>(model);
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& in : rf.inputs) {
        nlohmann::json j{{"name", in.name}, {"numeric", in.numeric}};
        if (in.numeric) {
            j["edges"] = in.edges;
        } else {
            j["categories"] = in.categories;
        }
        inputs.push_back(std::move(j));
    }
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : rf.trees) trees.push_back(tree_to_json(t));
    return {{"family", "forest"},
            {"hyper",
             {{"n_trees", rf.hyper.n_trees},
              {"max_depth", rf.hyper.max_depth},
              {"min_leaf", rf.hyper.min_leaf},
              {"feature_subsample", rf.hyper.feature_subsample},
              {"seed", rf.hyper.seed}}},
            {"inputs", std::move(inputs)},
            {"trees", std::move(trees)}};
}

Model model_from_json(const nlohmann::json& doc) {
    const auto family = doc.at("family").get<std::string>();
    const auto& h = doc.at("hyper");
    if (family == "logreg") {
        LogRegModel lr;
        lr.hyper.learning_rate = h.at("learning_rate").get<double>();
        lr.hyper.epochs = h.at("epochs").get<int>();
        lr.hyper.l2 = h.at("l2").get<double>();
        lr.encoder = FeatureEncoder::from_json(doc.at("encoding"));
        lr.coefficients = doc.at("coefficients").get<std::vector<double>>();
        lr.intercept = doc.at("intercept").get<double>();
        if (doc.contains("training")) {
            const auto& t = doc.at("training");
            lr.initial_loss = t.at("initial_loss").get<double>();
            lr.final_loss = t.at("final_loss").get<double>();
            lr.step_halvings = t.at("step_halvings").get<int>();
        }
        if (lr.coefficients.size() != lr.encoder.width()) throw SchemaMismatch("coefficient count differs from the encoding");
        return lr;
    }
    if (family == "forest") {
        ForestModel rf;
        rf.hyper.n_trees = h.at("n_trees").get<int>();
        rf.hyper.max_depth = h.at("max_depth").get<int>();
        rf.hyper.min_leaf = h.at("min_leaf").get<int>();
        rf.hyper.feature_subsample = h.at("feature_subsample").get<double>();
        rf.hyper.seed = h.at("seed").get<std::uint64_t>();
        for (const auto& j : doc.at("inputs")) {
            ForestInput in;
            in.name = j.at("name").get<std::string>();
            in.numeric = j.at("numeric").get<bool>();
            if (in.numeric) {
                in.edges = j.at("edges").get<std::vector<double>>();
            } else {
                in.categories = j.at("categories").get<std::vector<std::string>>();
            }
            rf.inputs.push_back(std::move(in));
        }
        for (const auto& t : doc.at("trees")) rf.trees.push_back(tree_from_json(t));
        return rf;
    }
    throw Error(fmt::format("unknown model family '{}'", family));
}

} // namespace tforge
