#pragma once

// One-hot encoding with a dictionary fitted on training rows only. Categories
// first seen outside training encode as an all-zero indicator block.

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfs/design_matrix.hpp"
#include "dfs/error.hpp"
#include "dfs/feature_matrix.hpp"

namespace dfs {

struct CategoryDictionary {
    // categorical column name -> categories observed in training, sorted
    std::map<std::string, std::vector<std::string>> categories;

    const std::vector<std::string>& of(const std::string& column) const {
        auto it = categories.find(column);
        if (it == categories.end()) throw SchemaError("category dictionary has no column '" + column + "'");
        return it->second;
    }

    friend bool operator==(const CategoryDictionary&, const CategoryDictionary&) = default;
};

inline nlohmann::json to_json(const CategoryDictionary& d) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [col, cats] : d.categories) j[col] = cats;
    return j;
}

inline CategoryDictionary dictionary_from_json(const nlohmann::json& j) {
    CategoryDictionary d;
    for (const auto& [col, cats] : j.items()) d.categories[col] = cats.get<std::vector<std::string>>();
    return d;
}

inline std::string indicator_name(const std::string& column, const std::string& category) {
    return column + " = " + category;
}

inline CategoryDictionary fit_categories(const FeatureMatrix& m, std::span<const std::size_t> training_positions) {
    CategoryDictionary d;
    for (const auto& col : m.columns) {
        if (!col.categorical) continue;
        std::set<std::string> seen;
        for (auto p : training_positions)
            if (!col.is_null(p)) seen.insert(col.dictionary[col.codes[p]]);
        d.categories[col.name] = {seen.begin(), seen.end()};
    }
    return d;
}

// Numeric columns pass through unchanged; each categorical column expands to
// one indicator per dictionary category, in dictionary order.
inline DesignMatrix apply_encoding(const FeatureMatrix& m, const CategoryDictionary& d) {
    std::vector<std::string> names;
    for (const auto& col : m.columns) {
        if (!col.categorical) {
            names.push_back(col.name);
            continue;
        }
        for (const auto& cat : d.of(col.name)) names.push_back(indicator_name(col.name, cat));
    }
    DesignMatrix out(std::move(names), m.size());
    std::size_t j = 0;
    for (const auto& col : m.columns) {
        if (!col.categorical) {
            std::copy(col.values.begin(), col.values.end(), out.col(j).begin());
            ++j;
            continue;
        }
        const auto& cats = d.of(col.name);
        // source code -> indicator offset, -1 for unseen categories
        std::vector<std::ptrdiff_t> slot(col.dictionary.size(), -1);
        for (std::size_t c = 0; c < col.dictionary.size(); ++c) {
            auto it = std::lower_bound(cats.begin(), cats.end(), col.dictionary[c]);
            if (it != cats.end() && *it == col.dictionary[c]) slot[c] = it - cats.begin();
        }
        for (std::size_t i = 0; i < m.size(); ++i) {
            const auto code = col.codes[i];
            if (code != kNullCode && slot[code] >= 0) out.at(i, j + static_cast<std::size_t>(slot[code])) = 1.0;
        }
        j += cats.size();
    }
    return out;
}

struct Encoded {
    DesignMatrix matrix;
    CategoryDictionary dictionary;
};

inline Encoded one_hot_encode(const FeatureMatrix& m, std::span<const std::size_t> training_positions) {
    auto dict = fit_categories(m, training_positions);
    auto matrix = apply_encoding(m, dict);
    return {std::move(matrix), std::move(dict)};
}

}  // namespace dfs
