// tradeoff-forge: generate data, plan operationalization sets, run them and
// select a model from the trade-off table.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tforge/errors.hpp"
#include "tforge/pipeline.hpp"
#include "tforge/setform.hpp"
#include "tforge/spec.hpp"
#include "tforge/synthgen.hpp"

namespace {

using namespace tforge;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("TRADEOFF_FORGE_SEED");
    if (!raw || !*raw) return std::nullopt;
    try {
        std::size_t used = 0;
        const auto v = std::stoull(raw, &used);
        if (used != std::string(raw).size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw SpecError("TRADEOFF_FORGE_SEED", fmt::format("not an unsigned integer: '{}'", raw));
    }
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text)) throw IoError(fmt::format("cannot write {}", path.string()));
}

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SpecError("", fmt::format("malformed JSON in {}: {}", path.string(), e.what()));
    }
}

struct GenArgs {
    std::string out;
    long long rows = 10000;
    double positive_rate = 0.10;
    double disparity = 0.0;
    std::uint64_t seed = 42;
};

int cmd_gen_data(const GenArgs& args) {
    GenConfig cfg;
    if (args.rows < 100) {
        std::cerr << fmt::format("error: --rows must be at least 100 (got {})\n", args.rows);
        return kUsage;
    }
    cfg.n_rows = static_cast<std::size_t>(args.rows);
    cfg.positive_rate = args.positive_rate;
    cfg.disparity_strength = args.disparity;
    cfg.seed = env_seed().value_or(args.seed);
    try {
        validate(cfg);
    } catch (const GenError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    try {
        const auto data = generate(cfg);
        write_csv(data, args.out);
        nlohmann::json sidecar{{"generator", to_json(cfg)},
                               {"rows", data.rows()},
                               {"columns", [&] {
                                    nlohmann::json cols = nlohmann::json::array();
                                    for (const auto& f : data.schema) {
                                        cols.push_back({{"name", f.name},
                                                        {"kind", std::string(to_string(f.kind))},
                                                        {"role", std::string(to_string(f.role))}});
                                    }
                                    return cols;
                                }()},
                               {"provenance", data.provenance}};
        write_file(args.out + ".provenance.json", sidecar.dump(2) + "\n");
        std::cout << fmt::format("wrote {} rows to {}\n", data.rows(), args.out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kOk;
}

struct PlanArgs {
    std::string spec;
    std::string format = "md";
    bool ignore_rules = false;
};

int cmd_plan(const PlanArgs& args) {
    try {
        auto spec = load_spec(args.spec);
        if (args.ignore_rules) spec.rules.clear();
        const auto sets = prune_sets(enumerate_sets(spec), spec.prune);
        if (args.format == "csv") {
            std::cout << plan_csv(spec, sets);
        } else if (args.format == "json") {
            std::cout << plan_json(spec, sets).dump(2) << "\n";
        } else {
            std::cout << plan_markdown(spec, sets);
        }
        return kOk;
    } catch (const SpecError& e) {
        std::cerr << "spec error: " << e.what() << "\n";
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return kUsage;
}

struct RunArgs {
    std::string spec;
    std::string data;
    std::string out = "runs";
    std::optional<std::uint64_t> seed;
    int parallel = 1;
    std::string format = "text";
};

int cmd_run(const RunArgs& args) {
    try {
        auto spec = load_spec(args.spec);
        if (auto s = env_seed()) {
            spec.seed = *s;
        } else if (args.seed) {
            spec.seed = *args.seed;
        }
        const auto schema = case_study_schema();
        const auto data = read_csv(args.data, schema);
        const auto run = execute_run(spec, data, {args.out, args.parallel});
        std::size_t failed = 0;
        for (const auto& r : run.table.records) failed += !r.ok();
        if (args.format == "json") {
            nlohmann::json summary{{"run_id", run.run_id},
                                   {"dir", run.dir.string()},
                                   {"sets", run.table.records.size()},
                                   {"failed", failed},
                                   {"table", run.table.to_json()}};
            std::cout << summary.dump(2) << "\n";
        } else {
            std::cout << fmt::format("run {} -> {}\n\n", run.run_id, run.dir.string());
            std::cout << run.table.to_markdown();
            if (failed) std::cout << fmt::format("\n{} of {} sets failed\n", failed, run.table.records.size());
        }
        for (const auto& r : run.table.records) {
            if (!r.ok()) {
                for (const auto& n : r.notes) std::cerr << "warning: " << n << "\n";
            }
        }
        return kOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}

struct SelectArgs {
    std::string run;
    std::string policy;
    std::string format = "text";
};

int cmd_select(const SelectArgs& args, bool policy_required) {
    std::optional<SelectionPolicy> policy;
    if (!args.policy.empty()) {
        try {
            policy = policy_from_json(read_json_file(args.policy), "policy");
        } catch (const SpecError& e) {
            std::cerr << "policy error: " << e.what() << "\n";
            return kUsage;
        } catch (const Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kUsage;
        }
    } else if (policy_required) {
        std::cerr << "error: --policy is required\n";
        return kUsage;
    }
    try {
        const auto selection = write_report(args.run, policy);
        if (args.format == "json") {
            nlohmann::json doc{{"chosen", selection.chosen ? nlohmann::json(*selection.chosen) : nlohmann::json(nullptr)},
                               {"feasible", selection.feasible},
                               {"binding", selection.binding},
                               {"rationale", selection.rationale}};
            std::cout << doc.dump(2) << "\n";
        } else if (selection.chosen) {
            std::cout << fmt::format("chosen: Set {}\n", *selection.chosen);
            for (const auto& [dim, text] : selection.rationale) std::cout << fmt::format("  {}: {}\n", dim, text);
        } else {
            std::cout << "chosen: none (no set meets all thresholds)\n";
            for (const auto& b : selection.binding) std::cout << "  binding: " << b << "\n";
        }
        std::cout << fmt::format("report: {}\n", (fs::path(args.run) / "report.md").string());
        return kOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Design, evaluate and select models under several legal requirements"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic transaction dataset");
    gen_cmd->add_option("--out", gen.out, "Output CSV path")->required();
    gen_cmd->add_option("--rows", gen.rows, "Number of rows (>= 100)");
    gen_cmd->add_option("--positive-rate", gen.positive_rate, "Share of suspicious transactions")->check(CLI::Range(0.0, 1.0));
    gen_cmd->add_option("--disparity", gen.disparity, "Planted gender disparity strength")->check(CLI::Range(0.0, 10.0));
    gen_cmd->add_option("--seed", gen.seed, "Generator seed (TRADEOFF_FORGE_SEED overrides)");

    PlanArgs plan;
    auto* plan_cmd = app.add_subcommand("plan", "Print the operationalization set matrix");
    plan_cmd->add_option("--spec", plan.spec, "Run specification (JSON)")->required();
    plan_cmd->add_option("--format", plan.format, "md, csv or json")->check(CLI::IsMember({"md", "csv", "json"}));
    plan_cmd->add_flag("--ignore-rules", plan.ignore_rules, "Enumerate without compatibility rules");

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Train and evaluate every operationalization set");
    run_cmd->add_option("--spec", run.spec, "Run specification (JSON)")->required();
    run_cmd->add_option("--data", run.data, "Dataset CSV")->required();
    run_cmd->add_option("--out", run.out, "Directory that receives <run id>/");
    run_cmd->add_option("--seed", run.seed, "Override the spec seed (TRADEOFF_FORGE_SEED overrides)");
    run_cmd->add_option("--parallel", run.parallel, "Worker threads")->check(CLI::Range(1, 64));
    run_cmd->add_option("--format", run.format, "text or json")->check(CLI::IsMember({"text", "json"}));

    SelectArgs sel;
    auto* select_cmd = app.add_subcommand("select", "Apply a selection policy and rewrite report.md");
    select_cmd->add_option("--run", sel.run, "Run directory")->required();
    select_cmd->add_option("--policy", sel.policy, "Selection policy (JSON)")->required();
    select_cmd->add_option("--format", sel.format, "text or json")->check(CLI::IsMember({"text", "json"}));

    SelectArgs rep;
    auto* report_cmd = app.add_subcommand("report", "Re-render report.md from a run directory");
    report_cmd->add_option("--run", rep.run, "Run directory")->required();
    report_cmd->add_option("--policy", rep.policy, "Selection policy (JSON); defaults to the spec's");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*gen_cmd) return cmd_gen_data(gen);
        if (*plan_cmd) return cmd_plan(plan);
        if (*run_cmd) return cmd_run(run);
        if (*select_cmd) return cmd_select(sel, true);
        if (*report_cmd) return cmd_select(rep, false);
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
