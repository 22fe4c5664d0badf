#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "tforge/errors.hpp"
#include "tforge/models.hpp"

namespace tforge {

void DesignMatrix::push_row(std::span<const std::pair<std::uint32_t, double>> entries) {
    for (const auto& [j, v] : entries) {
        index.push_back(j);
        value.push_back(v);
    }
    row_start.push_back(index.size());
    ++rows;
}

DesignMatrix DesignMatrix::dense(const std::vector<std::vector<double>>& rows) {
    DesignMatrix m;
    m.cols = rows.empty() ? 0 : rows.front().size();
    std::vector<std::pair<std::uint32_t, double>> entries;
    for (const auto& row : rows) {
        entries.clear();
        for (std::size_t j = 0; j < row.size(); ++j) entries.emplace_back(static_cast<std::uint32_t>(j), row[j]);
        m.push_row(entries);
    }
    return m;
}

std::vector<std::size_t> model_inputs(const Dataset& dataset) {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < dataset.schema.size(); ++c) {
        const auto& def = dataset.schema[c];
        if (def.role == FeatureRole::label || def.role == FeatureRole::excluded) continue;
        if (def.kind == FeatureKind::account_id) continue;
        out.push_back(c);
    }
    return out;
}

FeatureEncoder FeatureEncoder::fit(const Dataset& train) {
    FeatureEncoder enc;
    const std::size_t n = train.rows();
    for (auto c : model_inputs(train)) {
        const auto& def = train.schema[c];
        const auto& column = train.columns[c];
        EncodedInput in;
        in.name = def.name;
        in.numeric = def.is_numeric();
        if (in.numeric) {
            double sum = 0;
            for (double v : column.numbers) sum += v;
            in.mean = n ? sum / static_cast<double>(n) : 0.0;
            double ss = 0;
            for (double v : column.numbers) ss += (v - in.mean) * (v - in.mean);
            in.stddev = n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
            if (!(in.stddev > 0)) continue;
        } else {
            std::set<std::string> seen(column.strings.begin(), column.strings.end());
            in.categories.assign(seen.begin(), seen.end());
        }
        in.offset = enc.width_;
        enc.width_ += in.width();
        enc.inputs_.push_back(std::move(in));
    }
    return enc;
}

DesignMatrix FeatureEncoder::transform(const Dataset& rows) const {
    const std::size_t n = rows.rows();
    struct Bound {
        const EncodedInput* input;
        const Column* column;
        std::unordered_map<std::string, std::uint32_t> codes;
    };
    std::vector<Bound> bound;
    for (const auto& in : inputs_) {
        const auto c = rows.find(in.name);
        if (!c) throw SchemaMismatch(fmt::format("input '{}' is missing", in.name));
        if (rows.schema[*c].is_numeric() != in.numeric) {
            throw SchemaMismatch(fmt::format("input '{}' changed kind", in.name));
        }
        Bound b{&in, &rows.columns[*c], {}};
        for (std::size_t i = 0; i < in.categories.size(); ++i) b.codes[in.categories[i]] = static_cast<std::uint32_t>(i);
        bound.push_back(std::move(b));
    }

    DesignMatrix m;
    m.cols = width_;
    m.row_start.reserve(n + 1);
    m.index.reserve(n * inputs_.size());
    m.value.reserve(n * inputs_.size());
    std::vector<std::pair<std::uint32_t, double>> entries;
    for (std::size_t r = 0; r < n; ++r) {
        entries.clear();
        for (const auto& b : bound) {
            const auto base = static_cast<std::uint32_t>(b.input->offset);
            if (b.input->numeric) {
                const double z = (b.column->numbers[r] - b.input->mean) / b.input->stddev;
                if (z != 0.0) entries.emplace_back(base, z);
            } else {
                auto it = b.codes.find(b.column->strings[r]);
                const auto code = it == b.codes.end() ? static_cast<std::uint32_t>(b.input->categories.size()) : it->second;
                entries.emplace_back(base + code, 1.0);
            }
        }
        m.push_row(entries);
    }
    return m;
}

std::vector<std::string> FeatureEncoder::column_names() const {
    std::vector<std::string> names;
    for (const auto& in : inputs_) {
        if (in.numeric) {
            names.push_back(in.name);
        } else {
            for (const auto& cat : in.categories) names.push_back(in.name + "=" + cat);
            names.push_back(in.name + "=<other>");
        }
    }
    return names;
}

nlohmann::json FeatureEncoder::to_json() const {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& in : inputs_) {
        if (in.numeric) {
            doc.push_back({{"name", in.name}, {"numeric", true}, {"mean", in.mean}, {"stddev", in.stddev}});
        } else {
            doc.push_back({{"name", in.name}, {"numeric", false}, {"categories", in.categories}});
        }
    }
    return doc;
}

FeatureEncoder FeatureEncoder::from_json(const nlohmann::json& doc) {
    FeatureEncoder enc;
    for (const auto& j : doc) {
        EncodedInput in;
        in.name = j.at("name").get<std::string>();
        in.numeric = j.at("numeric").get<bool>();
        if (in.numeric) {
            in.mean = j.at("mean").get<double>();
            in.stddev = j.at("stddev").get<double>();
        } else {
            in.categories = j.at("categories").get<std::vector<std::string>>();
        }
        in.offset = enc.width_;
        enc.width_ += in.width();
        enc.inputs_.push_back(std::move(in));
    }
    return enc;
}

} // namespace tforge
