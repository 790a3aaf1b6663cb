#pragma once

// Relational data model: typed columnar entities, parent/child relationships,
// and time-sorted group indexes used for cutoff-bounded aggregation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dfs/civil_time.hpp"
#include "dfs/csv.hpp"
#include "dfs/error.hpp"

namespace dfs {

enum class ColumnKind { identifier, foreign_key, timestamp, numeric, categorical, boolean };

enum class Unit { dimensionless, currency_euro, count, hours };

struct ColumnType {
    ColumnKind kind = ColumnKind::numeric;
    std::string target;  // referenced entity, foreign keys only
    Unit unit = Unit::dimensionless;

    static ColumnType identifier() { return {ColumnKind::identifier, {}, Unit::dimensionless}; }
    static ColumnType foreign_key(std::string entity) { return {ColumnKind::foreign_key, std::move(entity), {}}; }
    static ColumnType timestamp() { return {ColumnKind::timestamp, {}, Unit::dimensionless}; }
    static ColumnType numeric(Unit u = Unit::dimensionless) { return {ColumnKind::numeric, {}, u}; }
    static ColumnType categorical() { return {ColumnKind::categorical, {}, Unit::dimensionless}; }
    static ColumnType boolean() { return {ColumnKind::boolean, {}, Unit::dimensionless}; }

    bool is_coded() const noexcept {
        return kind == ColumnKind::identifier || kind == ColumnKind::foreign_key || kind == ColumnKind::categorical;
    }

    friend bool operator==(const ColumnType&, const ColumnType&) = default;
};

inline std::string to_string(ColumnKind k) {
    switch (k) {
        case ColumnKind::identifier: return "identifier";
        case ColumnKind::foreign_key: return "foreign_key";
        case ColumnKind::timestamp: return "timestamp";
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::boolean: return "boolean";
    }
    return "?";
}

inline std::string to_string(Unit u) {
    switch (u) {
        case Unit::dimensionless: return "dimensionless";
        case Unit::currency_euro: return "currency-euro";
        case Unit::count: return "count";
        case Unit::hours: return "hours";
    }
    return "?";
}

struct ColumnSchema {
    std::string name;
    ColumnType type;
};

struct EntitySchema {
    std::string entity;
    std::string key;
    std::string time_index;  // empty when the entity has no time index
    std::vector<ColumnSchema> columns;

    const ColumnSchema* find(std::string_view name) const {
        for (const auto& c : columns)
            if (c.name == name) return &c;
        return nullptr;
    }
};

inline nlohmann::json to_json(const EntitySchema& s) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : s.columns) {
        nlohmann::json j{{"name", c.name}, {"type", to_string(c.type.kind)}};
        if (c.type.kind == ColumnKind::foreign_key) j["target"] = c.type.target;
        if (c.type.kind == ColumnKind::numeric) j["unit"] = to_string(c.type.unit);
        cols.push_back(std::move(j));
    }
    nlohmann::json out{{"entity", s.entity}, {"key", s.key}, {"columns", std::move(cols)}};
    if (!s.time_index.empty()) out["time_index"] = s.time_index;
    return out;
}

inline EntitySchema schema_from_json(const nlohmann::json& j) {
    static const std::map<std::string, ColumnKind, std::less<>> kinds{
        {"identifier", ColumnKind::identifier}, {"foreign_key", ColumnKind::foreign_key},
        {"timestamp", ColumnKind::timestamp},   {"numeric", ColumnKind::numeric},
        {"categorical", ColumnKind::categorical}, {"boolean", ColumnKind::boolean}};
    static const std::map<std::string, Unit, std::less<>> units{{"dimensionless", Unit::dimensionless},
                                                                {"currency-euro", Unit::currency_euro},
                                                                {"count", Unit::count},
                                                                {"hours", Unit::hours}};
    try {
        EntitySchema s;
        s.entity = j.at("entity").get<std::string>();
        s.key = j.at("key").get<std::string>();
        s.time_index = j.value("time_index", std::string{});
        for (const auto& c : j.at("columns")) {
            ColumnSchema col;
            col.name = c.at("name").get<std::string>();
            const auto type = c.at("type").get<std::string>();
            auto it = kinds.find(type);
            if (it == kinds.end()) throw SchemaError("column '" + col.name + "': unknown type '" + type + "'");
            col.type.kind = it->second;
            if (col.type.kind == ColumnKind::foreign_key) col.type.target = c.value("target", std::string{});
            if (c.contains("unit")) {
                auto u = units.find(c.at("unit").get<std::string>());
                if (u == units.end()) throw SchemaError("column '" + col.name + "': unknown unit");
                col.type.unit = u->second;
            }
            s.columns.push_back(std::move(col));
        }
        const auto* key = s.find(s.key);
        if (!key || key->type.kind != ColumnKind::identifier)
            throw SchemaError(s.entity + ": key '" + s.key + "' must be an identifier column");
        if (!s.time_index.empty()) {
            const auto* ti = s.find(s.time_index);
            if (!ti || ti->type.kind != ColumnKind::timestamp)
                throw SchemaError(s.entity + ": time index '" + s.time_index + "' must be a timestamp column");
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed schema: ") + e.what());
    }
}

inline EntitySchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open schema " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    return schema_from_json(j);
}

inline constexpr Timestamp kNullTime = std::numeric_limits<Timestamp>::min();
inline constexpr std::int32_t kNullCode = -1;

// One typed column. Exactly one of the storage vectors is populated:
//   numbers: numeric and boolean (0/1), NaN = null
//   times:   timestamp, kNullTime = null
//   codes:   identifier / foreign key / categorical, kNullCode = null;
//            codes index `dictionary`, assigned in first-appearance order.
class Column {
public:
    Column(std::string name, ColumnType type) : name_(std::move(name)), type_(std::move(type)) {}

    const std::string& name() const noexcept { return name_; }
    const ColumnType& type() const noexcept { return type_; }
    std::size_t size() const noexcept {
        if (type_.is_coded()) return codes_.size();
        if (type_.kind == ColumnKind::timestamp) return times_.size();
        return numbers_.size();
    }
    std::size_t null_count() const noexcept { return null_count_; }
    std::size_t malformed_count() const noexcept { return malformed_count_; }

    std::span<const double> numbers() const noexcept { return numbers_; }
    std::span<const Timestamp> times() const noexcept { return times_; }
    std::span<const std::int32_t> codes() const noexcept { return codes_; }
    const std::vector<std::string>& dictionary() const noexcept { return dictionary_; }

    // code -> position of its string in lexicographic order
    std::span<const std::int32_t> ranks() const noexcept { return ranks_; }

    bool is_null(std::size_t row) const {
        if (type_.is_coded()) return codes_[row] == kNullCode;
        if (type_.kind == ColumnKind::timestamp) return times_[row] == kNullTime;
        return std::isnan(numbers_[row]);
    }

    std::optional<std::int32_t> code_of(std::string_view value) const {
        auto it = lookup_.find(std::string(value));
        if (it == lookup_.end()) return std::nullopt;
        return it->second;
    }

    // Appends one cell; returns false (and stores a null) when the text does
    // not parse as this column's type. Empty text is a plain null.
    bool append(std::string_view text) {
        if (text.empty()) {
            push_null();
            return true;
        }
        switch (type_.kind) {
            case ColumnKind::identifier:
            case ColumnKind::foreign_key:
            case ColumnKind::categorical: codes_.push_back(intern(text)); return true;
            case ColumnKind::timestamp: {
                auto t = parse_timestamp(text);
                if (!t) return malformed();
                times_.push_back(*t);
                return true;
            }
            case ColumnKind::boolean: {
                if (text == "1" || text == "true" || text == "True" || text == "TRUE") {
                    numbers_.push_back(1.0);
                    return true;
                }
                if (text == "0" || text == "false" || text == "False" || text == "FALSE") {
                    numbers_.push_back(0.0);
                    return true;
                }
                return malformed();
            }
            case ColumnKind::numeric: {
                double v = 0.0;
                const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
                if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) return malformed();
                numbers_.push_back(v);
                return true;
            }
        }
        return malformed();
    }

    void finalize() {
        if (!type_.is_coded()) return;
        std::vector<std::int32_t> order(dictionary_.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return dictionary_[a] < dictionary_[b]; });
        ranks_.assign(dictionary_.size(), 0);
        for (std::size_t r = 0; r < order.size(); ++r) ranks_[order[r]] = static_cast<std::int32_t>(r);
    }

    std::string text(std::size_t row) const {
        if (is_null(row)) return {};
        if (type_.is_coded()) return dictionary_[codes_[row]];
        if (type_.kind == ColumnKind::timestamp) return format_timestamp(times_[row]);
        if (type_.kind == ColumnKind::boolean) return numbers_[row] != 0.0 ? "1" : "0";
        char buf[64];
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, numbers_[row]);
        return std::string(buf, ptr);
    }

private:
    std::int32_t intern(std::string_view text) {
        auto [it, inserted] = lookup_.try_emplace(std::string(text), static_cast<std::int32_t>(dictionary_.size()));
        if (inserted) dictionary_.emplace_back(text);
        return it->second;
    }

    void push_null() {
        ++null_count_;
        if (type_.is_coded())
            codes_.push_back(kNullCode);
        else if (type_.kind == ColumnKind::timestamp)
            times_.push_back(kNullTime);
        else
            numbers_.push_back(std::numeric_limits<double>::quiet_NaN());
    }

    bool malformed() {
        ++malformed_count_;
        push_null();
        return false;
    }

    std::string name_;
    ColumnType type_;
    std::vector<double> numbers_;
    std::vector<Timestamp> times_;
    std::vector<std::int32_t> codes_;
    std::vector<std::string> dictionary_;
    std::vector<std::int32_t> ranks_;
    std::unordered_map<std::string, std::int32_t> lookup_;
    std::size_t null_count_ = 0;
    std::size_t malformed_count_ = 0;
};

class Entity {
public:
    explicit Entity(EntitySchema schema) : schema_(std::move(schema)) {
        for (const auto& c : schema_.columns) columns_.emplace_back(c.name, c.type);
        key_col_ = index_of(schema_.key);
        if (!schema_.time_index.empty()) time_col_ = index_of(schema_.time_index);
    }

    const std::string& name() const noexcept { return schema_.entity; }
    const EntitySchema& schema() const noexcept { return schema_; }
    const std::string& key_name() const noexcept { return schema_.key; }
    bool has_time_index() const noexcept { return time_col_.has_value(); }
    const std::string& time_index_name() const noexcept { return schema_.time_index; }
    std::size_t size() const noexcept { return rows_; }
    const std::vector<Column>& columns() const noexcept { return columns_; }

    const Column* find(std::string_view name) const {
        for (const auto& c : columns_)
            if (c.name() == name) return &c;
        return nullptr;
    }

    const Column& column(std::string_view name) const {
        if (const auto* c = find(name)) return *c;
        throw SchemaError(schema_.entity + ": no column '" + std::string(name) + "'");
    }

    const Column& key_column() const { return columns_[key_col_]; }

    std::span<const Timestamp> times() const {
        if (!time_col_) throw SchemaError(schema_.entity + " has no time index");
        return columns_[*time_col_].times();
    }

    std::optional<std::size_t> row_of(std::string_view key) const {
        auto code = key_column().code_of(key);
        if (!code) return std::nullopt;
        return static_cast<std::size_t>(row_by_code_[*code]);
    }

    std::string key_of(std::size_t row) const { return key_column().text(row); }

    // Cell count must equal the column count. `line` is used in messages only.
    void append_row(const std::vector<std::string>& cells, std::size_t line) {
        if (cells.size() != columns_.size())
            throw SchemaError(schema_.entity + " row " + std::to_string(line) + ": expected " +
                              std::to_string(columns_.size()) + " fields, got " + std::to_string(cells.size()));
        const std::string& key = cells[key_col_];
        if (key.empty()) throw SchemaError(schema_.entity + " row " + std::to_string(line) + ": empty key");
        if (columns_[key_col_].code_of(key))
            throw SchemaError(schema_.entity + ": duplicate key \"" + key + "\" at row " + std::to_string(line));
        if (time_col_) {
            const std::string& ts = cells[*time_col_];
            if (!parse_timestamp(ts))
                throw SchemaError(schema_.entity + " row " + std::to_string(line) + ": unparseable timestamp \"" + ts +
                                  "\" in time index '" + schema_.time_index + "'");
        }
        for (std::size_t i = 0; i < columns_.size(); ++i) columns_[i].append(cells[i]);
        row_by_code_.push_back(static_cast<std::int32_t>(rows_));
        ++rows_;
    }

    void finalize() {
        for (auto& c : columns_) c.finalize();
    }

    std::size_t malformed_cells() const {
        std::size_t n = 0;
        for (const auto& c : columns_) n += c.malformed_count();
        return n;
    }

private:
    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < columns_.size(); ++i)
            if (columns_[i].name() == name) return i;
        throw SchemaError(schema_.entity + ": no column '" + name + "'");
    }

    EntitySchema schema_;
    std::vector<Column> columns_;
    std::size_t key_col_ = 0;
    std::optional<std::size_t> time_col_;
    std::vector<std::int32_t> row_by_code_;  // key code -> row (keys are unique, so code order == row order)
    std::size_t rows_ = 0;
};

// Builds an entity from in-memory string rows (same parsing as CSV input).
inline Entity make_entity(EntitySchema schema, const std::vector<std::vector<std::string>>& rows) {
    Entity e(std::move(schema));
    for (std::size_t i = 0; i < rows.size(); ++i) e.append_row(rows[i], i + 1);
    e.finalize();
    return e;
}

inline Entity load_entity(const std::string& path, const EntitySchema& schema) {
    auto table = csv::read(path);
    if (table.header.size() != schema.columns.size())
        throw SchemaError(path + ": header has " + std::to_string(table.header.size()) + " columns, schema declares " +
                          std::to_string(schema.columns.size()));
    // Reorder cells into schema order by header name.
    std::vector<std::size_t> pos;
    for (const auto& c : schema.columns) {
        auto it = std::find(table.header.begin(), table.header.end(), c.name);
        if (it == table.header.end()) throw SchemaError(path + ": column '" + c.name + "' missing from header");
        pos.push_back(static_cast<std::size_t>(it - table.header.begin()));
    }
    Entity e(schema);
    std::vector<std::string> cells(pos.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        auto& row = table.rows[r];
        if (row.size() != pos.size())
            throw SchemaError(path + " row " + std::to_string(r + 1) + ": expected " + std::to_string(pos.size()) +
                              " fields, got " + std::to_string(row.size()));
        for (std::size_t i = 0; i < pos.size(); ++i) cells[i] = std::move(row[pos[i]]);
        e.append_row(cells, r + 1);
    }
    e.finalize();
    return e;
}

struct Relationship {
    std::string parent;
    std::string parent_key;
    std::string child;
    std::string child_fk;

    friend bool operator==(const Relationship&, const Relationship&) = default;
};

// Rows of a descendant entity grouped by the ancestor row they belong to,
// each group sorted by (timestamp, row id). CSR layout.
struct GroupIndex {
    std::vector<std::uint32_t> offsets;  // groups + 1
    std::vector<std::uint32_t> rows;
    std::vector<Timestamp> times;        // aligned with rows
    std::vector<std::int32_t> group_of;  // descendant row -> ancestor row, -1 when unlinked

    std::size_t groups() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }

    std::span<const std::uint32_t> group(std::size_t g) const {
        return std::span<const std::uint32_t>(rows).subspan(offsets[g], offsets[g + 1] - offsets[g]);
    }

    // Members with timestamp strictly less than `cutoff`.
    std::span<const std::uint32_t> before(std::size_t g, Timestamp cutoff) const {
        const auto first = times.begin() + offsets[g];
        const auto last = times.begin() + offsets[g + 1];
        const auto n = std::lower_bound(first, last, cutoff) - first;
        return std::span<const std::uint32_t>(rows).subspan(offsets[g], static_cast<std::size_t>(n));
    }
};

class EntitySet {
public:
    void add_entity(Entity e) {
        const std::string name = e.name();
        if (entities_.count(name)) throw SchemaError("entity '" + name + "' already present");
        entities_.emplace(name, std::move(e));
    }

    bool has_entity(std::string_view name) const { return entities_.find(name) != entities_.end(); }

    const Entity& entity(std::string_view name) const {
        auto it = entities_.find(name);
        if (it == entities_.end()) throw SchemaError("unknown entity '" + std::string(name) + "'");
        return it->second;
    }

    const std::map<std::string, Entity, std::less<>>& entities() const noexcept { return entities_; }
    const std::vector<Relationship>& relationships() const noexcept { return relationships_; }

    void add_relationship(const Relationship& rel) {
        const Entity& parent = entity(rel.parent);
        const Entity& child = entity(rel.child);
        if (rel.parent_key != parent.key_name())
            throw SchemaError("relationship " + describe(rel) + ": '" + rel.parent_key + "' is not the key of " +
                              rel.parent);
        const Column& fk = child.column(rel.child_fk);
        const auto kind = fk.type().kind;
        if (kind != ColumnKind::foreign_key && kind != ColumnKind::identifier)
            throw SchemaError("relationship " + describe(rel) + ": '" + rel.child_fk + "' has type " +
                              to_string(kind) + ", expected foreign_key");
        if (kind == ColumnKind::foreign_key && !fk.type().target.empty() && fk.type().target != rel.parent)
            throw SchemaError("relationship " + describe(rel) + ": '" + rel.child_fk + "' references " +
                              fk.type().target);
        if (!child.has_time_index())
            throw SchemaError("relationship " + describe(rel) + ": child entity has no time index");
        if (rel.parent == rel.child || reaches(rel.child, rel.parent))
            throw SchemaError("relationship " + describe(rel) + " introduces a cycle");
        for (const auto& r : relationships_)
            if (r.parent == rel.parent && r.child == rel.child)
                throw SchemaError("relationship " + describe(rel) + " duplicates an existing link");

        // Referential integrity.
        std::vector<std::int32_t> parent_row(fk.dictionary().size(), -1);
        for (std::size_t code = 0; code < fk.dictionary().size(); ++code) {
            auto row = parent.row_of(fk.dictionary()[code]);
            if (row) parent_row[code] = static_cast<std::int32_t>(*row);
        }
        std::vector<std::int32_t> link(child.size(), -1);
        const auto codes = fk.codes();
        for (std::size_t r = 0; r < child.size(); ++r) {
            if (codes[r] == kNullCode) continue;
            if (parent_row[codes[r]] < 0)
                throw SchemaError("dangling foreign key \"" + fk.dictionary()[codes[r]] + "\" in " + rel.child + "." +
                                  rel.child_fk + " (row " + std::to_string(r + 1) + ")");
            link[r] = parent_row[codes[r]];
        }

        relationships_.push_back(rel);
        links_.push_back(std::move(link));
        try {
            rebuild_indexes();
        } catch (...) {
            relationships_.pop_back();
            links_.pop_back();
            rebuild_indexes();
            throw;
        }
    }

    std::optional<std::size_t> find_relationship(std::string_view parent, std::string_view child) const {
        for (std::size_t i = 0; i < relationships_.size(); ++i)
            if (relationships_[i].parent == parent && relationships_[i].child == child) return i;
        return std::nullopt;
    }

    // Child rows of `parent_key` with timestamp < cutoff, time-ordered.
    // Unknown parent keys yield an empty slice.
    std::span<const std::uint32_t> children_before(const Relationship& rel, std::string_view parent_key,
                                                   Timestamp cutoff) const {
        auto row = entity(rel.parent).row_of(parent_key);
        if (!row) return {};
        return group_index(rel.parent, rel.child).before(*row, cutoff);
    }

    bool has_group_index(std::string_view ancestor, std::string_view descendant) const {
        return indexes_.count({std::string(ancestor), std::string(descendant)}) != 0;
    }

    const GroupIndex& group_index(std::string_view ancestor, std::string_view descendant) const {
        auto it = indexes_.find({std::string(ancestor), std::string(descendant)});
        if (it == indexes_.end())
            throw SchemaError("no relationship path from " + std::string(ancestor) + " to " + std::string(descendant));
        return it->second;
    }

    // Parent -> child row links for relationship `i` (child row -> parent row, -1 when null).
    std::span<const std::int32_t> links(std::size_t i) const { return links_[i]; }

    // Ancestors of `name`, nearest first, ties by name.
    std::vector<std::string> ancestors_of(std::string_view name) const {
        std::vector<std::string> out;
        std::vector<std::string> frontier{std::string(name)};
        while (!frontier.empty()) {
            std::vector<std::string> next;
            for (const auto& f : frontier)
                for (const auto& r : relationships_)
                    if (r.child == f) next.push_back(r.parent);
            std::sort(next.begin(), next.end());
            next.erase(std::unique(next.begin(), next.end()), next.end());
            out.insert(out.end(), next.begin(), next.end());
            frontier = std::move(next);
        }
        return out;
    }

    std::vector<std::string> children_of(std::string_view name) const {
        std::vector<std::string> out;
        for (const auto& r : relationships_)
            if (r.parent == name) out.push_back(r.child);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    static std::string describe(const Relationship& r) {
        return r.parent + "." + r.parent_key + " <- " + r.child + "." + r.child_fk;
    }

    // True if `from` reaches `to` following parent -> child edges.
    bool reaches(const std::string& from, const std::string& to) const {
        std::vector<std::string> stack{from};
        std::set<std::string> seen;
        while (!stack.empty()) {
            auto cur = stack.back();
            stack.pop_back();
            if (cur == to) return true;
            if (!seen.insert(cur).second) continue;
            for (const auto& r : relationships_)
                if (r.parent == cur) stack.push_back(r.child);
        }
        return false;
    }

    // Ancestor -> descendant paths must be unique; each (ancestor,
    // time-indexed descendant) pair gets a group index.
    void rebuild_indexes() {
        indexes_.clear();
        for (const auto& [name, ent] : entities_) {
            if (!ent.has_time_index()) continue;
            // Walk upward, composing row links. Each entry: ancestor name -> row map.
            std::vector<std::pair<std::string, std::vector<std::int32_t>>> frontier;
            std::vector<std::int32_t> identity(ent.size());
            std::iota(identity.begin(), identity.end(), 0);
            frontier.emplace_back(name, std::move(identity));
            std::set<std::string> reached;
            while (!frontier.empty()) {
                std::vector<std::pair<std::string, std::vector<std::int32_t>>> next;
                for (const auto& [cur, rows] : frontier) {
                    for (std::size_t i = 0; i < relationships_.size(); ++i) {
                        if (relationships_[i].child != cur) continue;
                        const auto& ancestor = relationships_[i].parent;
                        if (!reached.insert(ancestor).second)
                            throw SchemaError("ambiguous relationship paths from " + ancestor + " to " + name);
                        std::vector<std::int32_t> up(rows.size(), -1);
                        for (std::size_t r = 0; r < rows.size(); ++r)
                            if (rows[r] >= 0) up[r] = links_[i][rows[r]];
                        indexes_[{ancestor, name}] = build_index(entity(ancestor).size(), up, ent.times());
                        next.emplace_back(ancestor, std::move(up));
                    }
                }
                frontier = std::move(next);
            }
        }
    }

    static GroupIndex build_index(std::size_t groups, const std::vector<std::int32_t>& group_of,
                                  std::span<const Timestamp> times) {
        GroupIndex ix;
        ix.group_of = group_of;
        ix.offsets.assign(groups + 1, 0);
        for (auto g : group_of)
            if (g >= 0) ++ix.offsets[g + 1];
        for (std::size_t g = 0; g < groups; ++g) ix.offsets[g + 1] += ix.offsets[g];
        ix.rows.resize(ix.offsets.back());
        std::vector<std::uint32_t> fill(ix.offsets.begin(), ix.offsets.end() - 1);
        for (std::size_t r = 0; r < group_of.size(); ++r)
            if (group_of[r] >= 0) ix.rows[fill[group_of[r]]++] = static_cast<std::uint32_t>(r);
        for (std::size_t g = 0; g < groups; ++g) {
            auto first = ix.rows.begin() + ix.offsets[g];
            auto last = ix.rows.begin() + ix.offsets[g + 1];
            // rows are already ascending, so a stable sort by time keeps row-id order on ties
            std::stable_sort(first, last, [&](auto a, auto b) { return times[a] < times[b]; });
        }
        ix.times.resize(ix.rows.size());
        for (std::size_t i = 0; i < ix.rows.size(); ++i) ix.times[i] = times[ix.rows[i]];
        return ix;
    }

    std::map<std::string, Entity, std::less<>> entities_;
    std::vector<Relationship> relationships_;
    std::vector<std::vector<std::int32_t>> links_;
    std::map<std::pair<std::string, std::string>, GroupIndex> indexes_;
};

}  // namespace dfs
