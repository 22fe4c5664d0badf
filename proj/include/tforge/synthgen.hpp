#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tforge/dataset.hpp"
#include "tforge/spec.hpp"

namespace tforge {

/// Column names of the AML case-study schema.
namespace col {
inline constexpr const char* gender = "Gender";
inline constexpr const char* legal_domicile = "Legal Domicile";
inline constexpr const char* tax_residency = "Tax Residency";
inline constexpr const char* wealth_industry = "Source of Wealth Industry";
inline constexpr const char* total_assets = "Total Estimated Assets";
inline constexpr const char* profession = "Profession";
inline constexpr const char* pep = "PEP Status";
inline constexpr const char* direction = "Direction";
inline constexpr const char* sender_account = "Sender Account Number";
inline constexpr const char* sender_country = "Sender Country";
inline constexpr const char* receiver_account = "Receiver Account Number";
inline constexpr const char* receiver_country = "Receiver Country";
inline constexpr const char* date = "Transaction Date";
inline constexpr const char* type = "Transaction Type";
inline constexpr const char* amount = "Amount";
inline constexpr const char* currency = "Transaction Currency";
inline constexpr const char* label = "Label";
} // namespace col

/// Fixture value lists for the categorical case-study features.
struct CategoricalDomains {
    std::vector<std::string> genders{"F", "M"};
    std::vector<std::string> countries;
    std::vector<std::string> high_risk_countries;
    std::vector<std::string> industries;
    std::vector<std::string> high_risk_industries;
    std::vector<std::string> professions;
    std::vector<std::string> currencies{"EUR", "USD", "GBP", "CHF", "AED", "RUB"};

    static CategoricalDomains defaults();
    bool operator==(const CategoricalDomains&) const = default;
};

/// 16 features plus the binary label, with default roles: Gender protected,
/// the other account-holder features and Amount quasi-identifiers, account
/// numbers excluded, the rest plain features.
std::vector<FeatureDef> case_study_schema(const CategoricalDomains& domains = CategoricalDomains::defaults());

struct GenConfig {
    std::size_t n_rows = 10000;
    double positive_rate = 0.10;
    /// Log-odds shift added to the label model for rows of `disparity_group`.
    double disparity_strength = 0.0;
    std::string disparity_group = "F";
    /// Probability that Profession is drawn from the gender-associated half
    /// of its domain. Gives unaware models a proxy for Gender.
    double gender_proxy_strength = 1.0;
    /// Average transactions per account holder.
    double rows_per_client = 2.0;
    /// (feature, effect size) pairs of the ground-truth logistic label model.
    /// Numeric features enter standardised on the log scale, categorical
    /// features as a high-risk indicator.
    std::vector<std::pair<std::string, double>> signal_features{
        {col::pep, 3.2},              {col::type, 2.0},           {col::amount, 1.8},
        {col::receiver_country, 2.6}, {col::sender_country, 2.6}, {col::wealth_industry, 1.6}};
    std::uint64_t seed = 42;
    CategoricalDomains domains = CategoricalDomains::defaults();

    bool operator==(const GenConfig&) const = default;
};

/// Throws GenError on invalid configuration or an empty categorical domain.
void validate(const GenConfig& config);

/// Deterministic for a fixed config: identical configs yield byte-identical CSV.
Dataset generate(const GenConfig& config);

nlohmann::json to_json(const GenConfig& config);

struct Splits {
    Dataset train;
    Dataset valid;
    Dataset test;
};

/// Label-stratified split. Per class, floor(train*n_c) rows go to train,
/// floor(valid*n_c) to valid and the rest to test; rows keep dataset order
/// within each split. Throws SpecError when fractions do not sum to 1 and
/// SplitError when a split would receive fewer than 2 positive rows.
Splits split(const Dataset& dataset, const SplitFractions& fractions, std::uint64_t seed);

} // namespace tforge
