#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace tforge {

/// Evaluated dimensions of a trade-off record.
enum class Dimension { accuracy, precision, f1, recall, data_used, k_anon, cdd, risk, explainability };
enum class Direction { maximize, minimize, ignore };

inline constexpr Dimension kAllDimensions[] = {Dimension::accuracy, Dimension::precision, Dimension::f1,
                                               Dimension::recall,   Dimension::data_used, Dimension::k_anon,
                                               Dimension::cdd,      Dimension::risk,      Dimension::explainability};

std::string_view to_string(Dimension d);
std::string_view to_string(Direction d);
/// Throws SpecError("unknown dimension") for unrecognised names.
Dimension parse_dimension(std::string_view text, const std::string& path = {});
Direction parse_direction(std::string_view text, const std::string& path = {});

/// The direction in which a dimension improves: data usage, |CDD| and
/// re-identification risk are minimised, everything else maximised.
Direction natural_direction(Dimension d);

/// Hard constraint on one dimension. Numeric bounds apply to the value used
/// for ranking (|CDD| for cdd, percent for data_used); `allowed` lists category
/// names for risk/explainability; `required` demands k_anon = Yes.
struct Threshold {
    Dimension dimension = Dimension::recall;
    std::optional<double> min;
    std::optional<double> max;
    std::vector<std::string> allowed;
    bool required = false;

    std::string describe() const;
    bool operator==(const Threshold&) const = default;
};

enum class RankingKind { lexicographic, weighted };

struct RankTerm {
    Dimension dimension = Dimension::recall;
    double weight = 1.0;
    Direction direction = Direction::maximize;
    bool operator==(const RankTerm&) const = default;
};

struct SelectionPolicy {
    std::vector<Threshold> thresholds;
    RankingKind ranking = RankingKind::lexicographic;
    /// Lexicographic order, each dimension in its natural direction.
    std::vector<Dimension> order{Dimension::recall};
    std::vector<RankTerm> weights;
    /// Dimensions compared by the Pareto filter.
    std::map<Dimension, Direction> pareto{{Dimension::recall, Direction::maximize},
                                          {Dimension::cdd, Direction::minimize},
                                          {Dimension::data_used, Direction::minimize}};
    /// |CDD| above this raises a monitoring recommendation in the report.
    double cdd_soft_limit = 0.05;

    bool operator==(const SelectionPolicy&) const = default;
};

/// Parses and validates a policy document. `path` prefixes error locations.
SelectionPolicy policy_from_json(const nlohmann::json& doc, const std::string& path = "selection");
nlohmann::json to_json(const SelectionPolicy& policy);

} // namespace tforge
