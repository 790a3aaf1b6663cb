#pragma once

// Deep feature enumeration: stacks transform and aggregation primitives over
// the relationships reachable from a target entity.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dfs/entityset.hpp"
#include "dfs/error.hpp"
#include "dfs/primitives.hpp"

namespace dfs {

// Where an aggregation draws its rows from, relative to a target row r:
//   row:      no aggregation, the feature reads r itself
//   ancestor: rows of the target entity sharing r's ancestor (e.g. the card's transactions)
//   child:    rows of a child entity that belong to r
enum class Scope { row, ancestor, child };

struct FeatureDefinition {
    std::string root_entity;
    Scope scope = Scope::row;
    std::string scope_entity;   // entity that owns the aggregated group (empty for row scope)
    std::string source_entity;  // entity that owns base_column
    std::string base_column;
    std::optional<PrimitiveId> transform;
    std::optional<PrimitiveId> aggregation;
    ValueClass input_class = ValueClass::numeric;  // class of base_column
    ValueClass output = ValueClass::numeric;
    int depth = 0;
    std::string name;

    // "HOUR(transactions.date)" or "transactions.amount"
    std::string inner_name() const {
        const std::string base = source_entity + "." + base_column;
        return transform ? primitive(*transform).name + "(" + base + ")" : base;
    }

    bool categorical_output() const { return output == ValueClass::categorical; }

    friend bool operator==(const FeatureDefinition& a, const FeatureDefinition& b) { return a.name == b.name; }
};

inline FeatureDefinition make_feature(std::string root, Scope scope, std::string scope_entity, std::string source,
                                      std::string column, ValueClass input_class,
                                      std::optional<PrimitiveId> transform,
                                      std::optional<PrimitiveId> aggregation) {
    FeatureDefinition f;
    f.root_entity = std::move(root);
    f.scope = scope;
    f.scope_entity = std::move(scope_entity);
    f.source_entity = std::move(source);
    f.base_column = std::move(column);
    f.input_class = input_class;
    f.transform = transform;
    f.aggregation = aggregation;
    ValueClass cls = input_class;
    if (transform) {
        cls = primitive(*transform).output_for(cls);
        ++f.depth;
    }
    if (aggregation) {
        cls = primitive(*aggregation).output_for(cls);
        ++f.depth;
    }
    f.output = cls;
    f.name = aggregation ? f.scope_entity + "." + primitive(*aggregation).name + "(" + f.inner_name() + ")"
                         : f.inner_name();
    return f;
}

namespace detail {

// Columns of `e` eligible as primitive inputs: everything except the key and
// foreign keys, paired with their value class.
inline std::vector<std::pair<std::string, ValueClass>> source_columns(const Entity& e) {
    std::vector<std::pair<std::string, ValueClass>> out;
    for (const auto& c : e.schema().columns) {
        if (c.name == e.key_name()) continue;
        if (auto cls = value_class_of(c.type.kind)) out.emplace_back(c.name, *cls);
    }
    return out;
}

}  // namespace detail

// Enumerates every type-correct stack of at most `max_depth` primitives.
// Depth 1: transforms of target columns, and aggregations of raw columns over
// each scope. Depth 2: aggregations of transformed columns. The relationship
// graph only offers two stacking levels, so larger depths add nothing.
// Output is deduplicated and sorted by canonical name.
inline std::vector<FeatureDefinition> synthesize(const EntitySet& es, const std::string& target, int max_depth,
                                                 const std::vector<PrimitiveId>& registry) {
    if (!es.has_entity(target)) throw SchemaError("unknown target entity '" + target + "'");
    if (registry.empty()) throw UsageError("empty primitive registry");
    if (max_depth < 1) throw UsageError("max_depth must be at least 1");

    std::vector<const PrimitiveSignature*> transforms, aggregations;
    for (auto id : registry) {
        const auto& p = primitive(id);
        (p.kind == PrimitiveKind::transform ? transforms : aggregations).push_back(&p);
    }

    std::vector<FeatureDefinition> out;
    const Entity& root = es.entity(target);
    for (const auto& [col, cls] : detail::source_columns(root))
        for (const auto* t : transforms)
            if (t->accepts(cls)) out.push_back(make_feature(target, Scope::row, {}, target, col, cls, t->id, {}));

    struct ScopeSpec {
        Scope scope;
        std::string scope_entity;
        std::string source_entity;
    };
    std::vector<ScopeSpec> scopes;
    for (const auto& a : es.ancestors_of(target)) scopes.push_back({Scope::ancestor, a, target});
    for (const auto& c : es.children_of(target)) scopes.push_back({Scope::child, target, c});

    for (const auto& s : scopes) {
        const Entity& source = es.entity(s.source_entity);
        for (const auto& [col, cls] : detail::source_columns(source)) {
            for (const auto* a : aggregations) {
                if (a->accepts(cls))
                    out.push_back(
                        make_feature(target, s.scope, s.scope_entity, s.source_entity, col, cls, {}, a->id));
                if (max_depth < 2) continue;
                for (const auto* t : transforms) {
                    if (!t->accepts(cls) || !a->accepts(t->output_for(cls))) continue;
                    out.push_back(
                        make_feature(target, s.scope, s.scope_entity, s.source_entity, col, cls, t->id, a->id));
                }
            }
        }
    }

    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Looks up a feature by canonical name among the enumerable features of `es`.
inline FeatureDefinition find_feature(const std::vector<FeatureDefinition>& features, const std::string& name) {
    for (const auto& f : features)
        if (f.name == name) return f;
    throw SchemaError("feature '" + name + "' is not defined for this entity set");
}

}  // namespace dfs
