#include "tforge/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "tforge/csv.hpp"
#include "tforge/errors.hpp"

namespace tforge {

std::string_view to_string(FeatureKind kind) {
    switch (kind) {
    case FeatureKind::categorical: return "categorical";
    case FeatureKind::numeric: return "numeric";
    case FeatureKind::date: return "date";
    case FeatureKind::account_id: return "account-id";
    }
    return "unknown";
}

std::string_view to_string(FeatureRole role) {
    switch (role) {
    case FeatureRole::feature: return "feature";
    case FeatureRole::quasi_identifier: return "quasi-identifier";
    case FeatureRole::protected_attr: return "protected";
    case FeatureRole::label: return "label";
    case FeatureRole::excluded: return "excluded";
    }
    return "unknown";
}

FeatureKind parse_feature_kind(std::string_view text) {
    for (auto k : {FeatureKind::categorical, FeatureKind::numeric, FeatureKind::date, FeatureKind::account_id}) {
        if (to_string(k) == text) return k;
    }
    throw Error(fmt::format("unknown feature kind '{}'", text));
}

FeatureRole parse_feature_role(std::string_view text) {
    for (auto r : {FeatureRole::feature, FeatureRole::quasi_identifier, FeatureRole::protected_attr,
                   FeatureRole::label, FeatureRole::excluded}) {
        if (to_string(r) == text) return r;
    }
    throw Error(fmt::format("unknown feature role '{}'", text));
}

std::size_t Dataset::rows() const noexcept {
    if (!columns.empty()) return columns.front().size();
    if (!held_columns.empty()) return held_columns.front().size();
    return 0;
}

std::optional<std::size_t> Dataset::find(std::string_view name) const {
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (schema[i].name == name) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> Dataset::find_held(std::string_view name) const {
    for (std::size_t i = 0; i < held_schema.size(); ++i) {
        if (held_schema[i].name == name) return i;
    }
    return std::nullopt;
}

const Column& Dataset::column_any(std::string_view name) const {
    if (auto i = find(name)) return columns[*i];
    if (auto i = find_held(name)) return held_columns[*i];
    throw UnknownFeature(fmt::format("unknown feature '{}'", name));
}

const FeatureDef& Dataset::feature_any(std::string_view name) const {
    if (auto i = find(name)) return schema[*i];
    if (auto i = find_held(name)) return held_schema[*i];
    throw UnknownFeature(fmt::format("unknown feature '{}'", name));
}

std::size_t Dataset::label_index() const {
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (schema[i].role == FeatureRole::label) return i;
    }
    throw Error("dataset has no label column");
}

std::vector<int> Dataset::labels() const {
    const auto& col = columns[label_index()];
    std::vector<int> out;
    out.reserve(rows());
    for (const auto& v : col.strings) {
        if (v == "0") {
            out.push_back(0);
        } else if (v == "1") {
            out.push_back(1);
        } else {
            throw Error(fmt::format("label value '{}' is not binary", v));
        }
    }
    return out;
}

std::string Dataset::cell_text(std::size_t col, std::size_t row) const {
    const auto& def = schema[col];
    if (def.kind == FeatureKind::date) return format_date(columns[col].numbers[row]);
    if (def.kind == FeatureKind::numeric) return format_number(columns[col].numbers[row]);
    return columns[col].strings[row];
}

std::string Dataset::value_text(std::string_view name, std::size_t row) const {
    const auto& def = feature_any(name);
    const auto& col = column_any(name);
    if (def.kind == FeatureKind::date) return format_date(col.numbers[row]);
    if (def.kind == FeatureKind::numeric) return format_number(col.numbers[row]);
    return col.strings[row];
}

namespace {

Column take(const Column& column, std::span<const std::size_t> indices) {
    Column out;
    if (!column.numbers.empty()) {
        out.numbers.reserve(indices.size());
        for (auto i : indices) out.numbers.push_back(column.numbers[i]);
    } else {
        out.strings.reserve(indices.size());
        for (auto i : indices) out.strings.push_back(column.strings[i]);
    }
    return out;
}

} // namespace

Dataset Dataset::select_rows(std::span<const std::size_t> indices) const {
    Dataset out;
    out.schema = schema;
    out.held_schema = held_schema;
    out.provenance = provenance;
    out.columns.reserve(columns.size());
    for (const auto& c : columns) out.columns.push_back(take(c, indices));
    for (const auto& c : held_columns) out.held_columns.push_back(take(c, indices));
    return out;
}

// Civil-calendar conversions (proleptic Gregorian), days relative to 1970-01-01.
namespace {

long long days_from_civil(long long y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long long>(doe) - 719468;
}

void civil_from_days(long long z, long long& y, unsigned& m, unsigned& d) {
    z += 719468;
    const long long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<long long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y += m <= 2;
}

} // namespace

std::string format_date(double days_since_epoch) {
    long long y;
    unsigned m, d;
    civil_from_days(static_cast<long long>(std::floor(days_since_epoch)), y, m, d);
    return fmt::format("{:04d}-{:02d}-{:02d}", y, m, d);
}

std::optional<double> parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    int y = 0, m = 0, d = 0;
    auto ok = [](std::string_view s, int& out) {
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        return ec == std::errc{} && p == s.data() + s.size();
    };
    if (!ok(text.substr(0, 4), y) || !ok(text.substr(5, 2), m) || !ok(text.substr(8, 2), d)) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (m < 1 || d < 1 || !ymd.ok()) return std::nullopt;
    return static_cast<double>(days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d)));
}

std::string format_number(double value) {
    if (value == 0.0) return "0";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, p);
}

std::string to_csv(const Dataset& dataset) {
    std::string out;
    std::vector<std::string> fields;
    for (const auto& f : dataset.schema) fields.push_back(f.name);
    out += csv::record(fields);
    const auto n = dataset.rows();
    for (std::size_t r = 0; r < n; ++r) {
        fields.clear();
        for (std::size_t c = 0; c < dataset.schema.size(); ++c) fields.push_back(dataset.cell_text(c, r));
        out += csv::record(fields);
    }
    return out;
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    out << to_csv(dataset);
    if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

Dataset parse_csv(std::string_view text, std::span<const FeatureDef> schema_template) {
    auto records = csv::parse(text);
    if (records.empty()) throw Error("csv: missing header row");
    const auto header = records.front();

    Dataset ds;
    for (const auto& name : header) {
        auto it = std::find_if(schema_template.begin(), schema_template.end(),
                               [&](const FeatureDef& f) { return f.name == name; });
        ds.schema.push_back(it != schema_template.end() ? *it : FeatureDef{name, FeatureKind::categorical,
                                                                            FeatureRole::feature, {}});
    }
    ds.columns.resize(header.size());

    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() == 1 && rec.front().empty()) continue;
        if (rec.size() != header.size()) {
            throw Error(fmt::format("csv: record {} has {} fields, header has {}", r, rec.size(), header.size()));
        }
        for (std::size_t c = 0; c < rec.size(); ++c) {
            const auto& def = ds.schema[c];
            if (def.kind == FeatureKind::date) {
                auto d = parse_date(rec[c]);
                if (!d) throw Error(fmt::format("csv: record {}: '{}' is not an ISO-8601 date", r, rec[c]));
                ds.columns[c].numbers.push_back(*d);
            } else if (def.kind == FeatureKind::numeric) {
                double v = 0;
                const auto& s = rec[c];
                auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
                if (ec != std::errc{} || p != s.data() + s.size()) {
                    throw Error(fmt::format("csv: record {}: '{}' is not a number", r, s));
                }
                ds.columns[c].numbers.push_back(v);
            } else {
                ds.columns[c].strings.push_back(rec[c]);
            }
        }
    }

    for (std::size_t c = 0; c < ds.schema.size(); ++c) {
        auto& def = ds.schema[c];
        if (def.kind == FeatureKind::categorical && def.domain.empty()) {
            std::set<std::string> seen(ds.columns[c].strings.begin(), ds.columns[c].strings.end());
            def.domain.assign(seen.begin(), seen.end());
        }
    }
    return ds;
}

Dataset read_csv(const std::filesystem::path& path, std::span<const FeatureDef> schema_template) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    auto ds = parse_csv(buf.str(), schema_template);
    ds.provenance.push_back("source " + path.filename().string());
    return ds;
}

} // namespace tforge
