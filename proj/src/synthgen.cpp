#include "tforge/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "tforge/errors.hpp"
#include "tforge/rng.hpp"

namespace tforge {

CategoricalDomains CategoricalDomains::defaults() {
    CategoricalDomains d;
    d.countries = {"NL", "DE", "BE", "FR", "LU", "IT", "ES", "PT", "IE", "AT", "DK", "SE", "FI", "PL", "CZ",
                   "GB", "CH", "US", "CA", "MT", "CY", "HK", "SG", "TR", "AE", "PA", "KY", "VG", "RU", "NG"};
    d.high_risk_countries = {"AE", "PA", "KY", "VG", "RU", "NG"};
    d.industries = {"Finance",      "Real Estate", "Technology",   "Manufacturing", "Retail",          "Healthcare",
                    "Energy",       "Construction", "Gambling",    "Precious Metals", "Agriculture",   "Hospitality"};
    d.high_risk_industries = {"Real Estate", "Construction", "Gambling", "Precious Metals"};
    d.professions = {"Engineer", "Teacher", "Nurse",      "Lawyer",     "Physician",
                     "Accountant", "Trader", "Consultant", "Artist", "Retired"};
    return d;
}

std::vector<FeatureDef> case_study_schema(const CategoricalDomains& d) {
    using K = FeatureKind;
    using R = FeatureRole;
    return {
        {col::gender, K::categorical, R::protected_attr, d.genders},
        {col::legal_domicile, K::categorical, R::quasi_identifier, d.countries},
        {col::tax_residency, K::categorical, R::quasi_identifier, d.countries},
        {col::wealth_industry, K::categorical, R::quasi_identifier, d.industries},
        {col::total_assets, K::numeric, R::quasi_identifier, {}},
        {col::profession, K::categorical, R::quasi_identifier, d.professions},
        {col::pep, K::categorical, R::quasi_identifier, {"No", "Yes"}},
        {col::direction, K::categorical, R::feature, {"incoming", "outgoing"}},
        {col::sender_account, K::account_id, R::excluded, {}},
        {col::sender_country, K::categorical, R::feature, d.countries},
        {col::receiver_account, K::account_id, R::excluded, {}},
        {col::receiver_country, K::categorical, R::feature, d.countries},
        {col::date, K::date, R::feature, {}},
        {col::type, K::categorical, R::feature, {"cash", "securities"}},
        {col::amount, K::numeric, R::quasi_identifier, {}},
        {col::currency, K::categorical, R::feature, d.currencies},
        {col::label, K::categorical, R::label, {"0", "1"}},
    };
}

void validate(const GenConfig& c) {
    if (c.n_rows < 100) throw GenError(fmt::format("n_rows must be ≥ 100 (got {})", c.n_rows));
    if (!(c.positive_rate > 0 && c.positive_rate < 1)) throw GenError("positive_rate must be in (0, 1)");
    if (!(c.disparity_strength >= 0 && c.disparity_strength <= 1)) throw GenError("disparity_strength must be in [0, 1]");
    if (!(c.gender_proxy_strength >= 0 && c.gender_proxy_strength <= 1)) {
        throw GenError("gender_proxy_strength must be in [0, 1]");
    }
    if (!(c.rows_per_client >= 1)) throw GenError("rows_per_client must be ≥ 1");
    const auto& d = c.domains;
    for (auto [name, values] : {std::pair{"genders", &d.genders}, {"countries", &d.countries},
                                {"industries", &d.industries}, {"professions", &d.professions},
                                {"currencies", &d.currencies}}) {
        if (values->empty()) throw GenError(fmt::format("empty categorical domain: {}", name));
    }
    if (d.genders.size() != 2) throw GenError("the gender domain must have exactly two values");
    if (std::find(d.genders.begin(), d.genders.end(), c.disparity_group) == d.genders.end()) {
        throw GenError(fmt::format("disparity_group '{}' is not a gender value", c.disparity_group));
    }
    const auto schema = case_study_schema(d);
    for (const auto& [feature, effect] : c.signal_features) {
        const bool known = std::any_of(schema.begin(), schema.end(), [&](const auto& f) {
            return f.name == feature && f.role != FeatureRole::label && f.kind != FeatureKind::account_id;
        });
        if (!known) throw GenError(fmt::format("unknown signal feature '{}'", feature));
        if (!std::isfinite(effect)) throw GenError("signal effect sizes must be finite");
    }
}

namespace {

struct Client {
    std::string gender;
    std::string domicile;
    std::string tax_residency;
    std::string industry;
    double assets = 0;
    std::string profession;
    std::string pep;
    std::string account;
};

template <class T>
const T& pick(Rng& rng, const std::vector<T>& values) {
    return values[rng.below(values.size())];
}

std::string make_account(Rng& rng, const std::string& country) {
    std::string digits;
    for (int i = 0; i < 10; ++i) digits.push_back(static_cast<char>('0' + rng.below(10)));
    return fmt::format("{}{:02d}SYNB{}", country, rng.below(100), digits);
}

bool contains(const std::vector<std::string>& values, const std::string& v) {
    return std::find(values.begin(), values.end(), v) != values.end();
}

double sigmoid(double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Indicator used when a categorical feature drives the label model.
double risk_indicator(const GenConfig& c, const std::string& feature, const std::string& value) {
    const auto& d = c.domains;
    if (feature == col::pep) return value == "Yes";
    if (feature == col::type) return value == "cash";
    if (feature == col::legal_domicile || feature == col::tax_residency || feature == col::sender_country ||
        feature == col::receiver_country) {
        return contains(d.high_risk_countries, value);
    }
    if (feature == col::wealth_industry) return contains(d.high_risk_industries, value);
    if (feature == col::currency) return value != d.currencies.front();
    if (feature == col::direction) return value == "outgoing";
    if (feature == col::gender) return value == c.disparity_group;
    if (feature == col::profession) {
        const auto it = std::find(d.professions.begin(), d.professions.end(), value);
        return static_cast<std::size_t>(it - d.professions.begin()) >= d.professions.size() / 2;
    }
    return 0.0;
}

} // namespace

Dataset generate(const GenConfig& config) {
    validate(config);
    const auto& d = config.domains;
    Rng rng(config.seed);

    const std::size_t n_clients = std::max<std::size_t>(50, static_cast<std::size_t>(static_cast<double>(config.n_rows) / config.rows_per_client));
    const std::string home = d.countries.front();
    const std::size_t half = d.professions.size() / 2;

    std::vector<Client> clients(n_clients);
    for (auto& cl : clients) {
        cl.gender = pick(rng, d.genders);
        cl.domicile = rng.bernoulli(0.6) ? home : pick(rng, d.countries);
        cl.tax_residency = rng.bernoulli(0.8) ? cl.domicile : pick(rng, d.countries);
        cl.industry = pick(rng, d.industries);
        cl.assets = std::round(std::exp(12.0 + 1.2 * rng.normal()) / 1000.0) * 1000.0;
        const bool first_half = cl.gender == d.genders.front();
        if (half > 0 && rng.bernoulli(config.gender_proxy_strength)) {
            const std::size_t offset = first_half ? 0 : half;
            const std::size_t width = first_half ? half : d.professions.size() - half;
            cl.profession = d.professions[offset + rng.below(width)];
        } else {
            cl.profession = pick(rng, d.professions);
        }
        cl.pep = rng.bernoulli(0.04) ? "Yes" : "No";
        cl.account = make_account(rng, home);
    }

    const auto schema = case_study_schema(d);
    Dataset ds;
    ds.schema = schema;
    ds.columns.resize(schema.size());
    auto& c = ds.columns;
    const std::size_t n = config.n_rows;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (schema[i].is_numeric()) {
            c[i].numbers.reserve(n);
        } else {
            c[i].strings.reserve(n);
        }
    }
    const double first_day = *parse_date("2024-01-01");
    std::vector<double> label_draws(n);

    for (std::size_t r = 0; r < n; ++r) {
        const auto& cl = clients[rng.below(n_clients)];
        const bool outgoing = rng.bernoulli(0.5);
        const std::string counter_country = rng.bernoulli(0.5) ? home : pick(rng, d.countries);
        const std::string counter_account = make_account(rng, counter_country);

        c[0].strings.push_back(cl.gender);
        c[1].strings.push_back(cl.domicile);
        c[2].strings.push_back(cl.tax_residency);
        c[3].strings.push_back(cl.industry);
        c[4].numbers.push_back(cl.assets);
        c[5].strings.push_back(cl.profession);
        c[6].strings.push_back(cl.pep);
        c[7].strings.push_back(outgoing ? "outgoing" : "incoming");
        c[8].strings.push_back(outgoing ? cl.account : counter_account);
        c[9].strings.push_back(outgoing ? home : counter_country);
        c[10].strings.push_back(outgoing ? counter_account : cl.account);
        c[11].strings.push_back(outgoing ? counter_country : home);
        c[12].numbers.push_back(first_day + static_cast<double>(rng.below(366)));
        c[13].strings.push_back(rng.bernoulli(0.3) ? "cash" : "securities");
        c[14].numbers.push_back(std::round(std::exp(6.0 + 1.4 * rng.normal()) * 100.0) / 100.0);
        c[15].strings.push_back(rng.bernoulli(0.75) ? d.currencies.front() : pick(rng, d.currencies));
        label_draws[r] = rng.uniform();
    }

    // Ground-truth logit without intercept.
    std::vector<double> score(n, 0.0);
    for (const auto& [feature, effect] : config.signal_features) {
        const auto idx = *ds.find(feature);
        if (schema[idx].is_numeric()) {
            std::vector<double> z(n);
            for (std::size_t r = 0; r < n; ++r) z[r] = std::log1p(std::max(0.0, c[idx].numbers[r]));
            const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(n);
            double var = 0;
            for (double v : z) var += (v - mean) * (v - mean);
            const double sd = std::sqrt(var / static_cast<double>(n));
            if (sd > 0) {
                for (std::size_t r = 0; r < n; ++r) score[r] += effect * (z[r] - mean) / sd;
            }
        } else {
            for (std::size_t r = 0; r < n; ++r) score[r] += effect * risk_indicator(config, feature, c[idx].strings[r]);
        }
    }
    for (std::size_t r = 0; r < n; ++r) {
        if (c[0].strings[r] == config.disparity_group) score[r] += config.disparity_strength;
    }

    // Intercept such that the expected positive rate matches the target.
    auto mean_rate = [&](double b) {
        double s = 0;
        for (double v : score) s += sigmoid(b + v);
        return s / static_cast<double>(n);
    };
    double lo = -40, hi = 40;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mean_rate(mid) < config.positive_rate ? lo : hi) = mid;
    }
    const double intercept = 0.5 * (lo + hi);

    auto& labels = c[16].strings;
    for (std::size_t r = 0; r < n; ++r) labels.push_back(label_draws[r] < sigmoid(intercept + score[r]) ? "1" : "0");

    ds.provenance.push_back(fmt::format("synthetic rows={} positive_rate={} disparity={} seed={}", n,
                                        config.positive_rate, config.disparity_strength, config.seed));
    return ds;
}

nlohmann::json to_json(const GenConfig& c) {
    nlohmann::json signals = nlohmann::json::array();
    for (const auto& [f, e] : c.signal_features) signals.push_back({{"feature", f}, {"effect", e}});
    return {{"n_rows", c.n_rows},
            {"positive_rate", c.positive_rate},
            {"disparity_strength", c.disparity_strength},
            {"disparity_group", c.disparity_group},
            {"gender_proxy_strength", c.gender_proxy_strength},
            {"rows_per_client", c.rows_per_client},
            {"signal_features", signals},
            {"seed", c.seed},
            {"domains",
             {{"genders", c.domains.genders},
              {"countries", c.domains.countries},
              {"high_risk_countries", c.domains.high_risk_countries},
              {"industries", c.domains.industries},
              {"high_risk_industries", c.domains.high_risk_industries},
              {"professions", c.domains.professions},
              {"currencies", c.domains.currencies}}}};
}

Splits split(const Dataset& dataset, const SplitFractions& f, std::uint64_t seed) {
    if (!(f.train > 0 && f.valid > 0 && f.test > 0) || std::abs(f.train + f.valid + f.test - 1.0) > 1e-9) {
        throw SpecError("split", "fractions must be positive and sum to 1.0");
    }
    const auto labels = dataset.labels();
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    Rng rng(seed);
    std::vector<std::size_t> parts[3];
    for (int cls : {1, 0}) {
        auto& idx = by_class[cls];
        rng.shuffle(std::span<std::size_t>(idx));
        const auto n_c = static_cast<double>(idx.size());
        const auto n_train = static_cast<std::size_t>(std::floor(f.train * n_c + 1e-9));
        const auto n_valid = static_cast<std::size_t>(std::floor(f.valid * n_c + 1e-9));
        if (cls == 1) {
            const auto n_test = idx.size() - n_train - n_valid;
            if (n_train < 2 || n_valid < 2 || n_test < 2) {
                throw SplitError(fmt::format("split would leave fewer than 2 positive rows in a part "
                                             "({}/{}/{} of {} positives)",
                                             n_train, n_valid, n_test, idx.size()));
            }
        }
        parts[0].insert(parts[0].end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        parts[1].insert(parts[1].end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                        idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
        parts[2].insert(parts[2].end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), idx.end());
    }
    for (auto& p : parts) std::sort(p.begin(), p.end());

    Splits out{dataset.select_rows(parts[0]), dataset.select_rows(parts[1]), dataset.select_rows(parts[2])};
    out.train.provenance.push_back(fmt::format("split train {} seed={}", f.train, seed));
    out.valid.provenance.push_back(fmt::format("split valid {} seed={}", f.valid, seed));
    out.test.provenance.push_back(fmt::format("split test {} seed={}", f.test, seed));
    return out;
}

} // namespace tforge
