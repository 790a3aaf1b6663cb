#pragma once

// Independent reference implementations used as test oracles. They work on
// the raw string rows and recompute everything by linear scans, sharing no
// code with the library beyond the data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dfs.hpp"

namespace oracle {

using dfs::Timestamp;

// days since 1970-01-01 -> (y, m, d); H. Hinnant's civil_from_days
inline void civil(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<int>(yoe + era * 400) + (m <= 2);
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); }

inline double hour(Timestamp t) { return static_cast<double>((t - floor_div(t, 86400) * 86400) / 3600); }
inline double day(Timestamp t) {
    int y;
    unsigned m, d;
    civil(floor_div(t, 86400), y, m, d);
    return d;
}
// 1970-01-01 was a Thursday
inline double weekend(Timestamp t) {
    const auto wd = ((floor_div(t, 86400) + 4) % 7 + 7) % 7;  // 0 = Sunday
    return (wd == 0 || wd == 6) ? 1.0 : 0.0;
}

inline Timestamp grid(Timestamp t, int days, Timestamp anchor) {
    if (days == 0) return t;
    if (t < anchor) return anchor;
    Timestamp g = anchor;
    const Timestamp step = static_cast<Timestamp>(days) * 86400;
    while (g + step <= t) g += step;
    return g;
}

// A cell value as seen by the oracle: a number, a string, or null.
struct Value {
    std::optional<double> number;
    std::optional<std::string> text;
    bool null() const { return !number && !text; }
};

// Raw relational data: string rows per entity, looked up by column name.
struct Table {
    dfs::EntitySchema schema;
    std::vector<std::vector<std::string>> rows;

    std::size_t col(const std::string& name) const {
        for (std::size_t i = 0; i < schema.columns.size(); ++i)
            if (schema.columns[i].name == name) return i;
        throw std::runtime_error("oracle: no column " + name);
    }
    const std::string& cell(std::size_t r, const std::string& name) const { return rows[r][col(name)]; }
};

struct Data {
    std::map<std::string, Table> tables;
    std::vector<dfs::Relationship> rels;

    // key value of the ancestor `anc` that row r of `entity` belongs to
    std::optional<std::string> ancestor_key(const std::string& entity, std::size_t r, const std::string& anc) const {
        auto& cache = ancestor_cache_[entity + ">" + anc];
        if (cache.empty()) {
            const auto n = tables.at(entity).rows.size();
            cache.resize(n);
            for (std::size_t i = 0; i < n; ++i) cache[i] = walk(entity, i, anc);
        }
        return cache[r];
    }

private:
    std::optional<std::string> walk(const std::string& entity, std::size_t r, const std::string& anc) const {
        std::string cur = entity;
        std::size_t row = r;
        while (cur != anc) {
            const dfs::Relationship* up = nullptr;
            for (const auto& rel : rels)
                if (rel.child == cur) up = &rel;
            if (!up) return std::nullopt;
            const std::string fk = tables.at(cur).cell(row, up->child_fk);
            if (fk.empty()) return std::nullopt;
            auto& keys = key_cache_[up->parent];
            if (keys.empty()) {
                const Table& parent = tables.at(up->parent);
                for (std::size_t p = 0; p < parent.rows.size(); ++p) keys.emplace(parent.cell(p, up->parent_key), p);
            }
            auto it = keys.find(fk);
            if (it == keys.end()) return std::nullopt;
            row = it->second;
            cur = up->parent;
        }
        return tables.at(anc).cell(row, tables.at(anc).schema.key);
    }

    mutable std::map<std::string, std::vector<std::optional<std::string>>> ancestor_cache_;
    mutable std::map<std::string, std::map<std::string, std::size_t>> key_cache_;
};

inline Data from_generated(const dfs::GeneratedData& g) {
    Data d;
    d.tables["customers"] = {g.customer_schema, g.customers};
    d.tables["cards"] = {g.card_schema, g.cards};
    d.tables["transactions"] = {g.transaction_schema, g.transactions};
    d.rels = {{"customers", "customer_id", "cards", "customer_id"}, {"cards", "card_id", "transactions", "card_id"}};
    return d;
}

inline std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

inline std::optional<double> parse_bool(const std::string& s) {
    if (s == "1" || s == "true" || s == "True" || s == "TRUE") return 1.0;
    if (s == "0" || s == "false" || s == "False" || s == "FALSE") return 0.0;
    return std::nullopt;
}

inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// "YYYY-MM-DD HH:MM:SS" or "YYYY-MM-DD"
inline std::optional<Timestamp> parse_time(const std::string& s) {
    int y, mo, d, h = 0, mi = 0, se = 0;
    char tail;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d %2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &se, &tail) == 6 ||
        (s.size() == 10 && std::sscanf(s.c_str(), "%4d-%2d-%2d%c", &y, &mo, &d, &tail) == 3))
        return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 + h * 3600 + mi * 60 + se;
    return std::nullopt;
}

// Value of the feature's inner expression (column or transform of column) at row r.
inline Value inner_value(const Table& t, std::size_t r, const dfs::FeatureDefinition& f) {
    const std::string& s = t.cell(r, f.base_column);
    const auto kind = t.schema.find(f.base_column)->type.kind;
    Value v;
    if (f.transform) {
        auto ts = parse_time(s);
        if (!ts) return v;
        switch (*f.transform) {
            case dfs::PrimitiveId::hour: v.number = hour(*ts); break;
            case dfs::PrimitiveId::day: v.number = day(*ts); break;
            case dfs::PrimitiveId::weekend: v.number = weekend(*ts); break;
            default: throw std::runtime_error("oracle: bad transform");
        }
        return v;
    }
    switch (kind) {
        case dfs::ColumnKind::numeric: v.number = parse_number(s); break;
        case dfs::ColumnKind::boolean: v.number = parse_bool(s); break;
        case dfs::ColumnKind::timestamp:
            if (auto ts = parse_time(s)) v.number = static_cast<double>(*ts);
            break;
        default:
            if (!s.empty()) v.text = s;
    }
    return v;
}

// Brute-force aggregation over a multiset of values.
inline Value aggregate(dfs::PrimitiveId agg, const std::vector<Value>& in) {
    std::vector<double> nums;
    std::vector<std::string> texts;
    for (const auto& v : in) {
        if (v.number) nums.push_back(*v.number);
        if (v.text) texts.push_back(*v.text);
    }
    Value out;
    using P = dfs::PrimitiveId;
    switch (agg) {
        case P::sum: {
            long double s = 0;
            for (double x : nums) s += x;
            out.number = static_cast<double>(s);
            break;
        }
        case P::count: out.number = static_cast<double>(nums.size() + texts.size()); break;
        case P::mean: {
            if (nums.empty()) break;
            long double s = 0;
            for (double x : nums) s += x;
            out.number = static_cast<double>(s / nums.size());
            break;
        }
        case P::std_dev: {
            if (nums.size() < 2) break;
            long double s = 0;
            for (double x : nums) s += x;
            const long double m = s / nums.size();
            long double ss = 0;
            for (double x : nums) ss += (x - m) * (x - m);
            out.number = static_cast<double>(std::sqrt(ss / (nums.size() - 1)));
            break;
        }
        case P::num_unique: {
            if (!texts.empty()) {
                out.number = static_cast<double>(std::set<std::string>(texts.begin(), texts.end()).size());
            } else {
                out.number = static_cast<double>(std::set<double>(nums.begin(), nums.end()).size());
            }
            break;
        }
        case P::mode: {
            if (!texts.empty()) {
                std::map<std::string, int> c;
                for (auto& t : texts) ++c[t];
                int best = 0;
                for (auto& [k, n] : c)
                    if (n > best) {
                        best = n;
                        out.text = k;
                    }
            } else if (!nums.empty()) {
                std::map<double, int> c;
                for (auto x : nums) ++c[x];
                int best = 0;
                for (auto& [k, n] : c)
                    if (n > best) {
                        best = n;
                        out.number = k;
                    }
            }
            break;
        }
        case P::avg_time_between: {
            if (nums.size() < 2) break;
            std::sort(nums.begin(), nums.end());
            long double gaps = 0;
            for (std::size_t i = 1; i < nums.size(); ++i) gaps += nums[i] - nums[i - 1];
            out.number = static_cast<double>(gaps / (nums.size() - 1));
            break;
        }
        default: throw std::runtime_error("oracle: not an aggregation");
    }
    return out;
}

// Source rows a feature of `f`'s scope aggregates for target row r at
// raw cutoff `cutoff`, found by scanning every source row.
inline std::vector<std::size_t> scope_rows(const Data& d, const dfs::FeatureDefinition& f, std::size_t r,
                                           Timestamp cutoff, int approx_days = 0, Timestamp anchor = 0) {
    const Table& target = d.tables.at(f.root_entity);
    const Timestamp eff = grid(cutoff, approx_days, anchor);
    std::vector<std::size_t> out;
    if (f.scope == dfs::Scope::ancestor) {
        const auto mine = d.ancestor_key(f.root_entity, r, f.scope_entity);
        if (!mine) return out;
        const std::size_t time_col = target.col(target.schema.time_index);
        for (std::size_t s = 0; s < target.rows.size(); ++s) {
            auto ts = parse_time(target.rows[s][time_col]);
            if (!ts || *ts >= eff) continue;
            if (d.ancestor_key(f.root_entity, s, f.scope_entity) != mine) continue;
            out.push_back(s);
        }
    } else if (f.scope == dfs::Scope::child) {
        const Table& child = d.tables.at(f.source_entity);
        const std::string key = target.cell(r, target.schema.key);
        const std::size_t time_col = child.col(child.schema.time_index);
        for (std::size_t s = 0; s < child.rows.size(); ++s) {
            auto ts = parse_time(child.rows[s][time_col]);
            if (!ts || *ts >= eff) continue;
            if (d.ancestor_key(f.source_entity, s, f.root_entity) != key) continue;
            out.push_back(s);
        }
    }
    return out;
}

inline Value feature_value_over(const Data& d, const dfs::FeatureDefinition& f, std::size_t r,
                                const std::vector<std::size_t>& rows) {
    if (f.scope == dfs::Scope::row) return inner_value(d.tables.at(f.root_entity), r, f);
    const Table& source = d.tables.at(f.source_entity);
    std::vector<Value> values;
    for (auto s : rows) values.push_back(inner_value(source, s, f));
    return aggregate(*f.aggregation, values);
}

// Feature value of `f` for the target row r with raw cutoff `cutoff`.
inline Value feature_value(const Data& d, const dfs::FeatureDefinition& f, std::size_t r, Timestamp cutoff,
                           int approx_days = 0, Timestamp anchor = 0) {
    return feature_value_over(d, f, r, scope_rows(d, f, r, cutoff, approx_days, anchor));
}

inline bool close(double a, double b, double rel = 1e-9) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

// Compares one matrix cell to an oracle value; exact for counts and modes.
inline bool matches(const dfs::FeatureColumn& c, std::size_t i, const Value& v, const dfs::FeatureDefinition& f) {
    if (c.categorical) {
        if (c.is_null(i)) return v.null();
        return v.text && c.dictionary[c.codes[i]] == *v.text;
    }
    const double got = c.values[i];
    if (std::isnan(got)) return v.null();
    if (!v.number) return false;
    const bool exact = f.aggregation && (*f.aggregation == dfs::PrimitiveId::count ||
                                         *f.aggregation == dfs::PrimitiveId::num_unique ||
                                         *f.aggregation == dfs::PrimitiveId::mode);
    return exact ? got == *v.number : close(got, *v.number);
}

// Exhaustive threshold scan: every distinct score is a candidate, the
// precision is computed by a fresh count at each one.
struct ScanResult {
    double gamma;
    double precision;
    double tpr;
    bool feasible;
};

inline ScanResult scan_thresholds(const std::vector<double>& scores, const std::vector<int>& labels, double target) {
    std::set<double> cands(scores.begin(), scores.end());
    std::optional<ScanResult> best, widest;
    for (double g : cands) {
        int tp = 0, fp = 0, pos = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            pos += labels[i];
            if (scores[i] >= g) (labels[i] ? tp : fp)++;
        }
        const double tpr = static_cast<double>(tp) / pos;
        const double prec = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
        if (!widest || tpr > widest->tpr || (tpr == widest->tpr && g > widest->gamma)) widest = ScanResult{g, prec, tpr, false};
        if (tpr >= target) {
            // strict improvement or an exact tie at a larger gamma
            if (!best || prec > best->precision || (prec == best->precision && g > best->gamma))
                best = ScanResult{g, prec, tpr, true};
        }
    }
    return best ? *best : *widest;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace oracle
