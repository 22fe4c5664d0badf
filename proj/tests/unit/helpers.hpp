#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tforge/dataset.hpp"
#include "tforge/spec.hpp"
#include "tforge/trademap.hpp"

namespace tforge::testing {

inline std::filesystem::path source_dir() { return TFORGE_SOURCE_DIR; }

inline RunSpec case_study_spec() { return load_spec(source_dir() / "specs" / "case_study.json"); }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("tforge_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

struct ColumnSpec {
    FeatureDef def;
    Column values;
};

inline ColumnSpec numeric(std::string name, std::vector<double> v, FeatureRole role = FeatureRole::feature) {
    return {{std::move(name), FeatureKind::numeric, role, {}}, {std::move(v), {}}};
}

inline ColumnSpec categorical(std::string name, std::vector<std::string> v, FeatureRole role = FeatureRole::feature) {
    return {{std::move(name), FeatureKind::categorical, role, {}}, {{}, std::move(v)}};
}

inline ColumnSpec label_column(const std::vector<int>& y) {
    std::vector<std::string> s;
    for (int v : y) s.push_back(std::to_string(v));
    return {{"Label", FeatureKind::categorical, FeatureRole::label, {"0", "1"}}, {{}, std::move(s)}};
}

inline Dataset make_dataset(std::vector<ColumnSpec> cols) {
    Dataset ds;
    for (auto& c : cols) {
        ds.schema.push_back(std::move(c.def));
        ds.columns.push_back(std::move(c.values));
    }
    return ds;
}

inline TradeoffRecord fixture_record(int id, double acc, double prec, double f1, double data_pct, bool kanon,
                                     double cdd, RiskCategory risk, Explainability expl, double recall) {
    TradeoffRecord r;
    r.set_id = id;
    r.accuracy = acc;
    r.precision = prec;
    r.f1 = f1;
    r.data_used_pct = data_pct;
    r.k_anon = kanon;
    r.k_achieved = kanon ? 7 : 1;
    r.cdd = cdd;
    r.risk = risk;
    r.explainability = expl;
    r.recall = recall;
    return r;
}

/// Eight reference trade-off rows (the case-study table), used as a rendering
/// and selection fixture.
inline std::vector<TradeoffRecord> table2_fixture() {
    using R = RiskCategory;
    using E = Explainability;
    return {
        fixture_record(1, .85, .80, .86, 84, false, .10, R::low, E::moderate, .94),
        fixture_record(2, .82, .85, .88, 70, false, .12, R::low, E::high, .92),
        fixture_record(3, .83, .79, .85, 70, true, .11, R::very_low, E::moderate, .93),
        fixture_record(4, .83, .76, .82, 68, true, .13, R::very_low, E::high, .90),
        fixture_record(5, .82, .78, .84, 68, false, .10, R::low, E::moderate, .92),
        fixture_record(6, .81, .77, .83, 62, false, .06, R::low, E::high, .89),
        fixture_record(7, .84, .79, .84, 72, true, .03, R::very_low, E::moderate, .89),
        fixture_record(8, .79, .76, .81, 65, true, .07, R::very_low, E::high, .86),
    };
}

} // namespace tforge::testing
