#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tforge {

enum class FeatureKind { categorical, numeric, date, account_id };
enum class FeatureRole { feature, quasi_identifier, protected_attr, label, excluded };

std::string_view to_string(FeatureKind kind);
std::string_view to_string(FeatureRole role);
FeatureKind parse_feature_kind(std::string_view text);
FeatureRole parse_feature_role(std::string_view text);

struct FeatureDef {
    std::string name;
    FeatureKind kind = FeatureKind::categorical;
    FeatureRole role = FeatureRole::feature;
    /// Declared value domain for categorical features. Empty means open.
    std::vector<std::string> domain;

    bool is_numeric() const noexcept { return kind == FeatureKind::numeric || kind == FeatureKind::date; }
    bool operator==(const FeatureDef&) const = default;
};

/// One column of values. Numeric and date features use `numbers` (dates as
/// days since 1970-01-01); categorical and account-id features use `strings`.
struct Column {
    std::vector<double> numbers;
    std::vector<std::string> strings;

    std::size_t size() const noexcept { return numbers.empty() ? strings.size() : numbers.size(); }
    bool operator==(const Column&) const = default;
};

/// Columnar table. Columns removed from the model view by a feature drop are
/// moved to `held_schema`/`held_columns`: invisible to models, still available
/// to evaluation.
struct Dataset {
    std::vector<FeatureDef> schema;
    std::vector<Column> columns;
    std::vector<FeatureDef> held_schema;
    std::vector<Column> held_columns;
    std::vector<std::string> provenance;

    std::size_t rows() const noexcept;

    std::optional<std::size_t> find(std::string_view name) const;
    std::optional<std::size_t> find_held(std::string_view name) const;

    /// Column by name from the model view or the held-out columns.
    /// Throws UnknownFeature when absent from both.
    const Column& column_any(std::string_view name) const;
    const FeatureDef& feature_any(std::string_view name) const;

    std::size_t label_index() const;
    /// Label column as 0/1 integers. Throws Error on non-binary values.
    std::vector<int> labels() const;

    /// Cell rendered the way it is written to CSV.
    std::string cell_text(std::size_t col, std::size_t row) const;
    std::string value_text(std::string_view name, std::size_t row) const;

    Dataset select_rows(std::span<const std::size_t> indices) const;

    bool operator==(const Dataset&) const = default;
};

std::string format_date(double days_since_epoch);
/// Parses YYYY-MM-DD. Returns nullopt on malformed input.
std::optional<double> parse_date(std::string_view text);

/// Shortest text that round-trips the double.
std::string format_number(double value);

/// Writes an RFC-4180 CSV with a header row; rows are in dataset order.
std::string to_csv(const Dataset& dataset);
void write_csv(const Dataset& dataset, const std::filesystem::path& path);

/// Reads a CSV against a schema template. Columns are matched by header name;
/// template features that do not appear in the file are left out of the result.
/// Categorical features with an empty template domain get the sorted distinct
/// values observed. Unknown header columns are loaded as categorical features.
Dataset read_csv(const std::filesystem::path& path, std::span<const FeatureDef> schema_template);
Dataset parse_csv(std::string_view text, std::span<const FeatureDef> schema_template);

} // namespace tforge
