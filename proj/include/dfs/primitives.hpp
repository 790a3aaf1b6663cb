#pragma once

// Transform and aggregation primitives.
//
// Aggregations take a multiset of values and skip nulls (NaN for numbers,
// kNullCode for coded values, kNullTime for timestamps). Empty-set results:
// SUM and COUNT give 0, everything else gives null.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dfs/civil_time.hpp"
#include "dfs/entityset.hpp"
#include "dfs/error.hpp"

namespace dfs {

inline constexpr double kNull = std::numeric_limits<double>::quiet_NaN();

// Semantic class of a value flowing through a feature expression.
enum class ValueClass { numeric, boolean, ordinal, categorical, identifier, timestamp };

inline std::optional<ValueClass> value_class_of(ColumnKind k) {
    switch (k) {
        case ColumnKind::numeric: return ValueClass::numeric;
        case ColumnKind::boolean: return ValueClass::boolean;
        case ColumnKind::categorical: return ValueClass::categorical;
        case ColumnKind::identifier: return ValueClass::identifier;
        case ColumnKind::timestamp: return ValueClass::timestamp;
        case ColumnKind::foreign_key: return std::nullopt;
    }
    return std::nullopt;
}

enum class PrimitiveId { sum, mean, std_dev, count, num_unique, mode, avg_time_between, weekend, day, hour };

enum class PrimitiveKind { transform, aggregation };

struct PrimitiveSignature {
    PrimitiveId id;
    std::string name;  // canonical upper-case form used in feature names
    PrimitiveKind kind;
    std::vector<ValueClass> inputs;
    std::optional<ValueClass> output;  // nullopt: same class as the input

    bool accepts(ValueClass c) const { return std::find(inputs.begin(), inputs.end(), c) != inputs.end(); }
    ValueClass output_for(ValueClass in) const { return output.value_or(in); }
};

// Registry order is the canonical primitive order.
inline const std::vector<PrimitiveSignature>& primitive_registry() {
    using V = ValueClass;
    using K = PrimitiveKind;
    static const std::vector<PrimitiveSignature> registry{
        {PrimitiveId::sum, "SUM", K::aggregation, {V::numeric, V::boolean}, V::numeric},
        {PrimitiveId::mean, "MEAN", K::aggregation, {V::numeric, V::boolean, V::ordinal}, V::numeric},
        {PrimitiveId::std_dev, "STD", K::aggregation, {V::numeric, V::ordinal}, V::numeric},
        {PrimitiveId::count, "COUNT", K::aggregation, {V::numeric}, V::numeric},
        {PrimitiveId::num_unique, "NUM_UNIQUE", K::aggregation, {V::categorical, V::identifier, V::ordinal},
         V::numeric},
        {PrimitiveId::mode, "MODE", K::aggregation, {V::categorical, V::ordinal}, std::nullopt},
        {PrimitiveId::avg_time_between, "AVG_TIME_BETWEEN", K::aggregation, {V::timestamp}, V::numeric},
        {PrimitiveId::weekend, "WEEKEND", K::transform, {V::timestamp}, V::boolean},
        {PrimitiveId::day, "DAY", K::transform, {V::timestamp}, V::ordinal},
        {PrimitiveId::hour, "HOUR", K::transform, {V::timestamp}, V::ordinal},
    };
    return registry;
}

inline const PrimitiveSignature& primitive(PrimitiveId id) {
    for (const auto& p : primitive_registry())
        if (p.id == id) return p;
    throw std::logic_error("unregistered primitive");
}

inline const PrimitiveSignature& primitive(std::string_view name) {
    for (const auto& p : primitive_registry())
        if (p.name == name) return p;
    throw UsageError("unknown primitive '" + std::string(name) + "'");
}

// Parses a comma-separated list of canonical names ("MEAN,HOUR"); the result
// follows registry order regardless of the order given.
inline std::vector<PrimitiveId> parse_primitive_list(std::string_view list) {
    std::vector<bool> wanted(primitive_registry().size(), false);
    std::stringstream ss{std::string(list)};
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty()) continue;
        std::transform(item.begin(), item.end(), item.begin(), [](unsigned char c) { return std::toupper(c); });
        const auto& p = primitive(item);
        wanted[static_cast<std::size_t>(&p - primitive_registry().data())] = true;
    }
    std::vector<PrimitiveId> out;
    for (std::size_t i = 0; i < wanted.size(); ++i)
        if (wanted[i]) out.push_back(primitive_registry()[i].id);
    return out;
}

inline std::vector<PrimitiveId> all_primitive_ids() {
    std::vector<PrimitiveId> out;
    for (const auto& p : primitive_registry()) out.push_back(p.id);
    return out;
}

namespace prim {

// Neumaier-compensated sum over non-null values.
inline double sum(std::span<const double> values) {
    double s = 0.0, c = 0.0;
    for (double v : values) {
        if (std::isnan(v)) continue;
        const double t = s + v;
        if (std::abs(s) >= std::abs(v))
            c += (s - t) + v;
        else
            c += (v - t) + s;
        s = t;
    }
    return s + c;
}

inline double count(std::span<const double> values) {
    std::size_t n = 0;
    for (double v : values) n += !std::isnan(v);
    return static_cast<double>(n);
}

inline double mean(std::span<const double> values) {
    const double n = count(values);
    return n == 0 ? kNull : sum(values) / n;
}

// Sample standard deviation (n - 1 denominator), Welford update.
inline double std_dev(std::span<const double> values) {
    std::size_t n = 0;
    double m = 0.0, m2 = 0.0;
    for (double v : values) {
        if (std::isnan(v)) continue;
        ++n;
        const double d = v - m;
        m += d / static_cast<double>(n);
        m2 += d * (v - m);
    }
    if (n < 2) return kNull;
    return std::sqrt(std::max(0.0, m2 / static_cast<double>(n - 1)));
}

inline double num_unique(std::span<const std::int32_t> codes) {
    thread_local std::vector<std::int32_t> buf;
    buf.clear();
    for (auto c : codes)
        if (c != kNullCode) buf.push_back(c);
    std::sort(buf.begin(), buf.end());
    return static_cast<double>(std::unique(buf.begin(), buf.end()) - buf.begin());
}

inline double num_unique(std::span<const double> values) {
    thread_local std::vector<double> buf;
    buf.clear();
    for (auto v : values)
        if (!std::isnan(v)) buf.push_back(v);
    std::sort(buf.begin(), buf.end());
    return static_cast<double>(std::unique(buf.begin(), buf.end()) - buf.begin());
}

// Most frequent code; ties go to the smallest rank (lexicographic order of
// the underlying strings). Returns kNullCode for an empty input.
inline std::int32_t mode(std::span<const std::int32_t> codes, std::span<const std::int32_t> ranks) {
    thread_local std::vector<std::int32_t> buf;
    buf.clear();
    for (auto c : codes)
        if (c != kNullCode) buf.push_back(c);
    if (buf.empty()) return kNullCode;
    std::sort(buf.begin(), buf.end());
    std::int32_t best = kNullCode;
    std::size_t best_n = 0;
    for (std::size_t i = 0; i < buf.size();) {
        std::size_t j = i;
        while (j < buf.size() && buf[j] == buf[i]) ++j;
        const std::size_t n = j - i;
        if (n > best_n || (n == best_n && ranks[buf[i]] < ranks[best])) {
            best = buf[i];
            best_n = n;
        }
        i = j;
    }
    return best;
}

// Numeric mode; ties go to the smallest value.
inline double mode(std::span<const double> values) {
    thread_local std::vector<double> buf;
    buf.clear();
    for (auto v : values)
        if (!std::isnan(v)) buf.push_back(v);
    if (buf.empty()) return kNull;
    std::sort(buf.begin(), buf.end());
    double best = buf[0];
    std::size_t best_n = 0;
    for (std::size_t i = 0; i < buf.size();) {
        std::size_t j = i;
        while (j < buf.size() && buf[j] == buf[i]) ++j;
        if (j - i > best_n) {
            best = buf[i];
            best_n = j - i;
        }
        i = j;
    }
    return best;
}

// String conveniences; std::nullopt is a null.
inline double num_unique(std::span<const std::optional<std::string>> values) {
    std::vector<std::string> seen;
    for (const auto& v : values)
        if (v) seen.push_back(*v);
    std::sort(seen.begin(), seen.end());
    return static_cast<double>(std::unique(seen.begin(), seen.end()) - seen.begin());
}

inline std::optional<std::string> mode(std::span<const std::optional<std::string>> values) {
    std::map<std::string, std::int32_t> dict;
    for (const auto& v : values)
        if (v) dict.emplace(*v, 0);
    std::vector<std::string> names;
    for (auto& [k, code] : dict) {
        code = static_cast<std::int32_t>(names.size());
        names.push_back(k);
    }
    std::vector<std::int32_t> codes, ranks(names.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) ranks[i] = static_cast<std::int32_t>(i);
    for (const auto& v : values) codes.push_back(v ? dict.at(*v) : kNullCode);
    const auto m = mode(codes, ranks);
    if (m == kNullCode) return std::nullopt;
    return names[m];
}

// Mean spacing of the non-null timestamps: (max - min) / (n - 1).
inline double avg_time_between(std::span<const Timestamp> times) {
    std::size_t n = 0;
    Timestamp lo = std::numeric_limits<Timestamp>::max(), hi = std::numeric_limits<Timestamp>::min();
    for (auto t : times) {
        if (t == kNullTime) continue;
        ++n;
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    if (n < 2) return kNull;
    return static_cast<double>(hi - lo) / static_cast<double>(n - 1);
}

inline bool weekend(Timestamp t) { return is_weekend(t); }
inline unsigned day(Timestamp t) { return day_of_month(t); }
inline unsigned hour(Timestamp t) { return hour_of_day(t); }

// Row-wise transform to a number; null in, null out.
inline double apply_transform(PrimitiveId id, Timestamp t) {
    if (t == kNullTime) return kNull;
    switch (id) {
        case PrimitiveId::weekend: return weekend(t) ? 1.0 : 0.0;
        case PrimitiveId::day: return day(t);
        case PrimitiveId::hour: return hour(t);
        default: throw std::logic_error("not a transform primitive");
    }
}

}  // namespace prim
}  // namespace dfs
