#pragma once

// Point-in-time feature computation. A target row r with cutoff c only sees
// source rows whose timestamp is strictly less than effective_cutoff(c).

#include <algorithm>
#include <charconv>
#include <tuple>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dfs/civil_time.hpp"
#include "dfs/entityset.hpp"
#include "dfs/error.hpp"
#include "dfs/primitives.hpp"
#include "dfs/synthesis.hpp"

namespace dfs {

struct CutoffPolicy {
    std::vector<std::uint32_t> rows;  // target rows, in output order
    std::vector<Timestamp> cutoffs;   // aligned with rows
    int approximate_days = 0;         // 0 = exact
    Timestamp anchor = 0;             // grid origin, midnight UTC

    // Cutoff of every listed row is its own time-index value.
    static CutoffPolicy at_event_times(const Entity& target, std::vector<std::uint32_t> rows,
                                       int approximate_days = 0, Timestamp anchor = 0) {
        if (approximate_days < 0) throw UsageError("approximation interval must be non-negative");
        if (anchor % kSecondsPerDay != 0) throw UsageError("approximation anchor must fall on midnight UTC");
        CutoffPolicy p;
        const auto times = target.times();
        for (auto r : rows) p.cutoffs.push_back(times[r]);
        p.rows = std::move(rows);
        p.approximate_days = approximate_days;
        p.anchor = anchor;
        return p;
    }

    static CutoffPolicy all_rows(const Entity& target, int approximate_days = 0, Timestamp anchor = 0) {
        std::vector<std::uint32_t> rows(target.size());
        std::iota(rows.begin(), rows.end(), 0u);
        return at_event_times(target, std::move(rows), approximate_days, anchor);
    }
};

// Exact mode returns t. Otherwise the latest grid point anchor + k*interval
// that is <= t; times before the anchor clamp to the anchor.
inline Timestamp effective_cutoff(Timestamp t, int approximate_days, Timestamp anchor) {
    if (approximate_days <= 0) return t;
    if (t < anchor) return anchor;
    const Timestamp step = static_cast<Timestamp>(approximate_days) * kSecondsPerDay;
    return anchor + (t - anchor) / step * step;
}

inline Timestamp effective_cutoff(Timestamp t, const CutoffPolicy& p) {
    return effective_cutoff(t, p.approximate_days, p.anchor);
}

// One computed column: numeric values (NaN = null) or categorical codes into
// `dictionary` (kNullCode = null).
struct FeatureColumn {
    std::string name;
    bool categorical = false;
    std::vector<double> values;
    std::vector<std::int32_t> codes;
    std::vector<std::string> dictionary;

    bool is_null(std::size_t i) const { return categorical ? codes[i] == kNullCode : std::isnan(values[i]); }

    std::string text(std::size_t i) const {
        if (is_null(i)) return {};
        if (categorical) return dictionary[codes[i]];
        char buf[64];
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, values[i]);
        return std::string(buf, ptr);
    }
};

struct FeatureMatrix {
    std::string entity;
    std::vector<std::uint32_t> rows;  // target entity row ids
    std::vector<std::string> keys;    // target entity keys, aligned with rows
    std::vector<FeatureColumn> columns;

    std::size_t size() const noexcept { return rows.size(); }

    const FeatureColumn& column(std::string_view name) const {
        for (const auto& c : columns)
            if (c.name == name) return c;
        throw SchemaError("feature matrix has no column '" + std::string(name) + "'");
    }
};

// Column-wise concatenation of matrices over the same rows.
inline FeatureMatrix hconcat(FeatureMatrix a, const FeatureMatrix& b) {
    if (a.rows != b.rows) throw SchemaError("cannot concatenate feature matrices over different rows");
    a.columns.insert(a.columns.end(), b.columns.begin(), b.columns.end());
    return a;
}

inline std::size_t default_thread_count() {
    if (const char* env = std::getenv("DFS_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<std::size_t>(n);
    }
    return 1;
}

namespace detail {

// Read-only view of a feature's input values over the source entity.
struct InputView {
    ValueClass cls = ValueClass::numeric;
    std::span<const double> numbers;
    std::span<const Timestamp> times;
    std::span<const std::int32_t> codes;
    std::span<const std::int32_t> ranks;
    const std::vector<std::string>* dictionary = nullptr;
};

struct Scratch {
    std::vector<double> numbers;
    std::vector<Timestamp> times;
    std::vector<std::int32_t> codes;
};

inline void evaluate_aggregation(PrimitiveId agg, const InputView& in, std::span<const std::uint32_t> members,
                                 Scratch& s, double& number, std::int32_t& code) {
    const bool coded = in.cls == ValueClass::categorical || in.cls == ValueClass::identifier;
    if (agg == PrimitiveId::avg_time_between) {
        s.times.clear();
        for (auto r : members) s.times.push_back(in.times[r]);
        number = prim::avg_time_between(s.times);
        return;
    }
    if (coded) {
        s.codes.clear();
        for (auto r : members) s.codes.push_back(in.codes[r]);
        if (agg == PrimitiveId::num_unique)
            number = prim::num_unique(std::span<const std::int32_t>(s.codes));
        else if (agg == PrimitiveId::mode)
            code = prim::mode(s.codes, in.ranks);
        else
            throw std::logic_error("aggregation does not accept coded input");
        return;
    }
    s.numbers.clear();
    for (auto r : members) s.numbers.push_back(in.numbers[r]);
    const std::span<const double> v(s.numbers);
    switch (agg) {
        case PrimitiveId::sum: number = prim::sum(v); break;
        case PrimitiveId::mean: number = prim::mean(v); break;
        case PrimitiveId::std_dev: number = prim::std_dev(v); break;
        case PrimitiveId::count: number = prim::count(v); break;
        case PrimitiveId::num_unique: number = prim::num_unique(v); break;
        case PrimitiveId::mode: number = prim::mode(v); break;
        default: throw std::logic_error("not an aggregation primitive");
    }
}

// Splits [0, n) into at most `parts` contiguous ranges whose boundaries fall
// where key(i-1) != key(i).
template <class Key>
std::vector<std::size_t> partition_points(std::size_t n, std::size_t parts, Key key) {
    std::vector<std::size_t> cuts{0};
    for (std::size_t k = 1; k < parts; ++k) {
        std::size_t at = std::max(cuts.back(), n * k / parts);
        while (at > 0 && at < n && key(at - 1) == key(at)) ++at;
        if (at > cuts.back() && at < n) cuts.push_back(at);
    }
    cuts.push_back(n);
    return cuts;
}

template <class Fn>
void run_parallel(const std::vector<std::size_t>& cuts, Fn fn) {
    const std::size_t parts = cuts.size() - 1;
    if (parts <= 1) {
        fn(cuts[0], cuts[1]);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < parts; ++i) pool.emplace_back(fn, cuts[i], cuts[i + 1]);
    for (auto& t : pool) t.join();
}

}  // namespace detail

// Evaluates `features` for every row of `policy`. Rows that share a scope
// group and an effective cutoff share one aggregation evaluation. Work is
// partitioned by group across `threads`; output does not depend on the count.
inline FeatureMatrix compute_matrix(const EntitySet& es, const std::vector<FeatureDefinition>& features,
                                    const CutoffPolicy& policy, std::size_t threads = 1) {
    if (policy.rows.size() != policy.cutoffs.size()) throw UsageError("cutoff policy rows/cutoffs length mismatch");
    FeatureMatrix m;
    if (features.empty()) return m;
    const std::string& target = features.front().root_entity;
    const Entity& root = es.entity(target);
    m.entity = target;
    m.rows = policy.rows;
    m.keys.reserve(m.rows.size());
    for (auto r : m.rows) {
        if (r >= root.size()) throw UsageError("cutoff policy references row beyond " + target);
        m.keys.push_back(root.key_of(r));
    }
    const std::size_t n = m.rows.size();
    std::vector<Timestamp> eff(n);
    for (std::size_t p = 0; p < n; ++p) eff[p] = effective_cutoff(policy.cutoffs[p], policy);

    // Materialized inputs, shared between features with the same inner expression.
    std::map<std::string, std::vector<double>> transformed;
    std::vector<detail::InputView> inputs(features.size());
    for (std::size_t k = 0; k < features.size(); ++k) {
        const auto& f = features[k];
        if (f.root_entity != target) throw SchemaError("features span several target entities");
        const Entity& src = es.entity(f.source_entity);
        const Column* col = src.find(f.base_column);
        if (!col) throw SchemaError("feature " + f.name + " references missing column " + f.inner_name());
        auto cls = value_class_of(col->type().kind);
        if (!cls || *cls != f.input_class)
            throw SchemaError("feature " + f.name + ": column " + f.inner_name() + " has an incompatible type");
        auto& in = inputs[k];
        in.cls = *cls;
        if (f.transform) {
            auto [it, inserted] = transformed.try_emplace(f.inner_name());
            if (inserted) {
                const auto times = col->times();
                it->second.resize(times.size());
                for (std::size_t r = 0; r < times.size(); ++r)
                    it->second[r] = prim::apply_transform(*f.transform, times[r]);
            }
            in.cls = primitive(*f.transform).output_for(*cls);
            in.numbers = it->second;
        } else {
            in.numbers = col->numbers();
            in.times = col->times();
            in.codes = col->codes();
            in.ranks = col->ranks();
            in.dictionary = &col->dictionary();
        }
        FeatureColumn out;
        out.name = f.name;
        out.categorical = f.categorical_output();
        if (out.categorical) {
            out.codes.assign(n, kNullCode);
            out.dictionary = col->dictionary();
        } else {
            out.values.assign(n, kNull);
        }
        m.columns.push_back(std::move(out));
    }

    threads = std::max<std::size_t>(1, threads);

    // Row-scope features read the target row directly.
    for (std::size_t k = 0; k < features.size(); ++k) {
        if (features[k].scope != Scope::row) continue;
        const auto& in = inputs[k];
        auto& out = m.columns[k];
        for (std::size_t p = 0; p < n; ++p) {
            const auto r = m.rows[p];
            if (out.categorical)
                out.codes[p] = in.codes[r];
            else
                out.values[p] = in.numbers.empty() ? kNull : in.numbers[r];
        }
    }

    // Aggregations, one pass per scope.
    std::map<std::tuple<int, std::string, std::string>, std::vector<std::size_t>> by_scope;
    for (std::size_t k = 0; k < features.size(); ++k) {
        const auto& f = features[k];
        if (f.scope == Scope::row) continue;
        by_scope[{static_cast<int>(f.scope), f.scope_entity, f.source_entity}].push_back(k);
    }
    for (const auto& [scope_key, members_of_scope] : by_scope) {
        const auto& f0 = features[members_of_scope.front()];
        const GroupIndex& ix = f0.scope == Scope::ancestor ? es.group_index(f0.scope_entity, target)
                                                           : es.group_index(target, f0.source_entity);
        std::vector<std::int64_t> group(n);
        for (std::size_t p = 0; p < n; ++p)
            group[p] = f0.scope == Scope::ancestor ? ix.group_of[m.rows[p]] : static_cast<std::int64_t>(m.rows[p]);

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) {
            if (group[a] != group[b]) return group[a] < group[b];
            if (eff[a] != eff[b]) return eff[a] < eff[b];
            return a < b;
        });
        const auto cuts = detail::partition_points(n, threads, [&](std::size_t i) { return group[order[i]]; });

        detail::run_parallel(cuts, [&](std::size_t begin, std::size_t end) {
            detail::Scratch scratch;
            for (std::size_t i = begin; i < end;) {
                const std::size_t p0 = order[i];
                std::size_t j = i + 1;
                while (j < end && group[order[j]] == group[p0] && eff[order[j]] == eff[p0]) ++j;
                std::span<const std::uint32_t> hist;
                if (group[p0] >= 0) hist = ix.before(static_cast<std::size_t>(group[p0]), eff[p0]);
                for (auto k : members_of_scope) {
                    double number = kNull;
                    std::int32_t code = kNullCode;
                    detail::evaluate_aggregation(*features[k].aggregation, inputs[k], hist, scratch, number, code);
                    auto& out = m.columns[k];
                    for (std::size_t q = i; q < j; ++q) {
                        if (out.categorical)
                            out.codes[order[q]] = code;
                        else
                            out.values[order[q]] = number;
                    }
                }
                i = j;
            }
        });
    }
    return m;
}

// The target's own attributes: numeric and boolean columns as numbers,
// categorical columns as codes. Keys, foreign keys, identifiers and
// timestamps are excluded.
inline FeatureMatrix transactional_features(const EntitySet& es, const std::string& target,
                                            const std::vector<std::uint32_t>& rows) {
    const Entity& e = es.entity(target);
    FeatureMatrix m;
    m.entity = target;
    m.rows = rows;
    for (auto r : rows) m.keys.push_back(e.key_of(r));
    for (const auto& col : e.columns()) {
        const auto kind = col.type().kind;
        FeatureColumn out;
        out.name = target + "." + col.name();
        if (kind == ColumnKind::numeric || kind == ColumnKind::boolean) {
            const auto v = col.numbers();
            for (auto r : rows) out.values.push_back(v[r]);
        } else if (kind == ColumnKind::categorical) {
            out.categorical = true;
            out.dictionary = col.dictionary();
            const auto c = col.codes();
            for (auto r : rows) out.codes.push_back(c[r]);
        } else {
            continue;
        }
        m.columns.push_back(std::move(out));
    }
    return m;
}

}  // namespace dfs
