#pragma once

// End-to-end experiment plumbing: configuration and its hash, the stage
// functions the command-line tool chains together, and artifact IO.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "dfs/civil_time.hpp"
#include "dfs/csv.hpp"
#include "dfs/datagen.hpp"
#include "dfs/dataprep.hpp"
#include "dfs/design_matrix.hpp"
#include "dfs/encoding.hpp"
#include "dfs/entityset.hpp"
#include "dfs/error.hpp"
#include "dfs/evaluation.hpp"
#include "dfs/feature_matrix.hpp"
#include "dfs/forest.hpp"
#include "dfs/primitives.hpp"
#include "dfs/synthesis.hpp"

namespace dfs {

enum class Weighting { plain, amount, both };

struct ExperimentConfig {
    std::uint64_t seed = 7;
    std::string data_dir;  // empty: generate in memory from `generator`
    GenConfig generator;
    double sample_ratio = 1.0;
    SplitFractions split;
    SplitMode split_mode = SplitMode::transaction;
    std::string target = "transactions";
    int max_depth = 2;
    std::vector<PrimitiveId> primitives = all_primitive_ids();
    int approximate_days = 0;  // interval used for the main comparison
    std::vector<int> approximation_sweep{1, 7, 21, 35};
    Timestamp anchor = 0;
    double target_tpr = 0.89;
    Weighting weighting = Weighting::both;
    Hyperparams forest;
    CostConstants costs;
};

inline std::string to_string(Weighting w) {
    switch (w) {
        case Weighting::plain: return "plain";
        case Weighting::amount: return "amount";
        case Weighting::both: return "both";
    }
    return "both";
}

inline Weighting weighting_from_string(const std::string& s) {
    if (s == "plain") return Weighting::plain;
    if (s == "amount") return Weighting::amount;
    if (s == "both") return Weighting::both;
    throw UsageError("weighting must be plain, amount or both, got '" + s + "'");
}

inline SplitMode split_mode_from_string(const std::string& s) {
    if (s == "transaction") return SplitMode::transaction;
    if (s == "card") return SplitMode::card;
    throw UsageError("split mode must be transaction or card, got '" + s + "'");
}

// The top-level seed drives generation too, so the generator block omits it.
inline nlohmann::json generator_json(const GenConfig& g) {
    auto j = to_json(g);
    j.erase("seed");
    return j;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    std::vector<std::string> prims;
    for (auto id : c.primitives) prims.push_back(primitive(id).name);
    const auto& hp = c.forest;
    return {{"seed", c.seed},
            {"data_dir", c.data_dir},
            {"generator", generator_json(c.generator)},
            {"sample_ratio", c.sample_ratio},
            {"split",
             {{"train", c.split.train},
              {"tune", c.split.tune},
              {"test", c.split.test},
              {"mode", c.split_mode == SplitMode::card ? "card" : "transaction"}}},
            {"target", c.target},
            {"max_depth", c.max_depth},
            {"primitives", prims},
            {"approximate_days", c.approximate_days},
            {"approximation_sweep", c.approximation_sweep},
            {"anchor", format_date(c.anchor)},
            {"target_tpr", c.target_tpr},
            {"weighting", to_string(c.weighting)},
            {"forest",
             {{"n_trees", hp.n_trees},
              {"max_features", hp.max_features},
              {"min_samples_leaf", hp.min_samples_leaf},
              {"max_depth", hp.max_depth},
              {"bootstrap", hp.bootstrap},
              {"importance",
               hp.importance == ImportanceKind::impurity_decrease ? "impurity_decrease" : "samples_reaching_node"}}},
            {"costs", {{"interchange_fee", c.costs.interchange_fee}, {"lost_sale_fraction", c.costs.lost_sale_fraction}}}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c = {}) {
    static const std::vector<std::string> known{"seed",      "data_dir",          "generator",
                                                "sample_ratio", "split",          "target",
                                                "max_depth", "primitives",        "approximate_days",
                                                "approximation_sweep", "anchor",  "target_tpr",
                                                "weighting", "forest",            "costs"};
    if (!j.is_object()) throw UsageError("configuration must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw UsageError("unknown configuration key '" + k + "'");
    try {
        c.seed = j.value("seed", c.seed);
        c.generator.seed = c.seed;
        c.data_dir = j.value("data_dir", c.data_dir);
        if (j.contains("generator")) {
            if (j.at("generator").contains("seed")) throw UsageError("set the generator seed through the top-level 'seed'");
            c.generator = gen_config_from_json(j.at("generator"), c.generator);
        }
        c.sample_ratio = j.value("sample_ratio", c.sample_ratio);
        if (j.contains("split")) {
            const auto& s = j.at("split");
            c.split.train = s.value("train", c.split.train);
            c.split.tune = s.value("tune", c.split.tune);
            c.split.test = s.value("test", c.split.test);
            if (s.contains("mode")) c.split_mode = split_mode_from_string(s.at("mode"));
        }
        c.target = j.value("target", c.target);
        c.max_depth = j.value("max_depth", c.max_depth);
        if (j.contains("primitives")) {
            c.primitives.clear();
            for (const auto& name : j.at("primitives")) c.primitives.push_back(primitive(name.get<std::string>()).id);
        }
        c.approximate_days = j.value("approximate_days", c.approximate_days);
        c.approximation_sweep = j.value("approximation_sweep", c.approximation_sweep);
        if (j.contains("anchor")) {
            auto t = parse_date(j.at("anchor").get<std::string>());
            if (!t) throw UsageError("anchor must be YYYY-MM-DD");
            c.anchor = *t;
        }
        c.target_tpr = j.value("target_tpr", c.target_tpr);
        if (j.contains("weighting")) c.weighting = weighting_from_string(j.at("weighting"));
        if (j.contains("forest")) {
            const auto& f = j.at("forest");
            c.forest.n_trees = f.value("n_trees", c.forest.n_trees);
            c.forest.max_features = f.value("max_features", c.forest.max_features);
            c.forest.min_samples_leaf = f.value("min_samples_leaf", c.forest.min_samples_leaf);
            c.forest.max_depth = f.value("max_depth", c.forest.max_depth);
            c.forest.bootstrap = f.value("bootstrap", c.forest.bootstrap);
            if (f.contains("importance"))
                c.forest.importance = f.at("importance") == "impurity_decrease" ? ImportanceKind::impurity_decrease
                                                                                 : ImportanceKind::samples_reaching_node;
        }
        if (j.contains("costs")) {
            const auto& k = j.at("costs");
            c.costs.interchange_fee = k.value("interchange_fee", c.costs.interchange_fee);
            c.costs.lost_sale_fraction = k.value("lost_sale_fraction", c.costs.lost_sale_fraction);
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("malformed configuration: ") + e.what());
    }
    c.forest.seed = c.seed;
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open configuration " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(path + ": " + e.what());
    }
    return config_from_json(j);
}

// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Hash of the canonical configuration (object keys sorted). Thread count and
// output locations are not part of the configuration, so they never change it.
inline std::string config_hash(const ExperimentConfig& c) { return fnv1a_hex(to_json(c).dump()); }

inline void log_stage(const std::string& hash, const std::string& msg) {
    std::cerr << "[dfsfraud " << hash << "] " << msg << '\n';
}

// ---------------------------------------------------------------- stages

struct Prepared {
    std::vector<std::uint32_t> rows;  // sampled transaction rows, ascending
    std::vector<Label> labels;        // aligned with rows
    Split split;
    MatchStats match;
    std::size_t fraud_cards = 0;
    std::size_t clean_cards = 0;
    bool clean_cards_exhausted = false;
};

inline Prepared prepare(const EntitySet& es, const std::vector<FraudReport>& reports, const ExperimentConfig& cfg,
                        const TransactionColumns& cols = {}) {
    auto labeled = match_reports(reports, es, cols);
    auto sample = sample_cards(es, labeled.labels, cfg.sample_ratio, cfg.seed, cols);
    Prepared p;
    p.rows = sample.rows;
    for (auto r : p.rows) p.labels.push_back(labeled.labels[r]);
    p.match = labeled.stats;
    p.fraud_cards = sample.fraud_cards.size();
    p.clean_cards = sample.clean_cards.size();
    p.clean_cards_exhausted = sample.clean_cards_exhausted;
    std::vector<std::string> cards;
    if (cfg.split_mode == SplitMode::card) {
        const Column& card = es.entity(cols.entity).column(cols.card);
        for (auto r : p.rows) cards.push_back(card.text(r));
    }
    p.split = split(p.rows, p.labels, cfg.split, cfg.seed + 1, cfg.split_mode, cards);
    return p;
}

inline std::vector<FraudReport> reports_from_rows(const std::vector<std::vector<std::string>>& rows) {
    std::vector<FraudReport> out;
    for (const auto& r : rows) {
        FraudReport f;
        f.card_number = r.at(0);
        f.operation_date = parse_date(r.at(1)).value();
        f.amount = std::stod(r.at(2));
        if (r.size() > 3 && !r[3].empty()) f.currency = r[3];
        out.push_back(std::move(f));
    }
    return out;
}

// Position of each row id inside `rows`.
inline std::vector<std::size_t> positions_of(std::span<const std::uint32_t> rows,
                                             std::span<const std::uint32_t> subset) {
    std::unordered_map<std::uint32_t, std::size_t> at;
    for (std::size_t p = 0; p < rows.size(); ++p) at.emplace(rows[p], p);
    std::vector<std::size_t> out;
    out.reserve(subset.size());
    for (auto r : subset) {
        auto it = at.find(r);
        if (it == at.end()) throw SchemaError("row " + std::to_string(r) + " is not part of the feature matrix");
        out.push_back(it->second);
    }
    return out;
}

enum class FeatureSet { transactional, dfs };

inline std::string to_string(FeatureSet f) { return f == FeatureSet::dfs ? "dfs" : "transactional"; }

// The DFS feature set is every synthesized feature followed by the
// transactional columns; the baseline is the transactional columns alone.
inline FeatureMatrix build_features(const EntitySet& es, const std::vector<std::uint32_t>& rows,
                                    const ExperimentConfig& cfg, FeatureSet set, int approximate_days,
                                    std::size_t threads) {
    auto base = transactional_features(es, cfg.target, rows);
    if (set == FeatureSet::transactional) return base;
    const auto defs = synthesize(es, cfg.target, cfg.max_depth, cfg.primitives);
    const auto policy = CutoffPolicy::at_event_times(es.entity(cfg.target), rows, approximate_days, cfg.anchor);
    return hconcat(compute_matrix(es, defs, policy, threads), base);
}

struct Model {
    Forest forest;
    CategoryDictionary dictionary;
};

// Encodes with a dictionary fitted on the training positions, drops columns
// that are entirely null on those positions, and fits the forest.
inline Model train_model(const FeatureMatrix& m, std::span<const std::size_t> train, std::span<const Label> y_train,
                         const Hyperparams& hp, std::size_t threads) {
    auto enc = one_hot_encode(m, train);
    const auto x_train = enc.matrix.select_rows(train);
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < x_train.cols(); ++j) {
        const auto col = x_train.col(j);
        if (std::any_of(col.begin(), col.end(), [](double v) { return !std::isnan(v); })) keep.push_back(j);
    }
    return {fit(x_train.select_cols(keep), y_train, hp, threads), std::move(enc.dictionary)};
}

// Encoded columns of `m` in the order the forest was trained on.
inline DesignMatrix model_inputs(const Model& model, const FeatureMatrix& m, std::span<const std::size_t> positions) {
    const auto encoded = apply_encoding(m, model.dictionary);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < encoded.cols(); ++j) index.emplace(encoded.names()[j], j);
    std::vector<std::size_t> cols;
    for (const auto& name : model.forest.feature_names) {
        auto it = index.find(name);
        if (it == index.end()) throw SchemaError("feature matrix lacks model input '" + name + "'");
        cols.push_back(it->second);
    }
    return encoded.select_rows(positions).select_cols(cols);
}

inline std::vector<double> score(const Model& model, const FeatureMatrix& m, std::span<const std::size_t> positions) {
    return predict_proba(model.forest, model_inputs(model, m, positions));
}

inline nlohmann::json model_to_json(const Model& model) {
    auto j = to_json(model.forest);
    j["category_dictionary"] = to_json(model.dictionary);
    return j;
}

inline Model model_from_json(const nlohmann::json& j) {
    Model m{forest_from_json(j), {}};
    if (j.contains("category_dictionary")) m.dictionary = dictionary_from_json(j.at("category_dictionary"));
    return m;
}

inline void save_model(const Model& model, const std::string& path, const std::string& hash) {
    save_forest(model.forest, path,
                {{"category_dictionary", to_json(model.dictionary)}, {"config_hash", hash}});
}

inline Model load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open model " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    return model_from_json(j);
}

struct Evaluation {
    std::string method;
    int approximate_days = 0;
    bool amount_weighted = false;
    OperatingPoint tuned;  // on the tune set
    Confusion test;        // at the tuned gamma, on the test set
    CostReport cost;       // on the test set
};

inline std::vector<double> amounts_at(const EntitySet& es, const ExperimentConfig& cfg,
                                      std::span<const std::uint32_t> rows, const TransactionColumns& cols = {}) {
    const auto amount = es.entity(cfg.target).column(cols.amount).numbers();
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(amount[r]);
    return out;
}

inline Evaluation evaluate_scores(std::string method, int approximate_days, bool weighted,
                                  std::span<const double> tune_scores, std::span<const Label> tune_labels,
                                  std::span<const double> tune_amounts, std::span<const double> test_scores,
                                  std::span<const Label> test_labels, std::span<const double> test_amounts,
                                  double target_tpr, const CostConstants& costs) {
    Evaluation e;
    e.method = std::move(method);
    e.approximate_days = approximate_days;
    e.amount_weighted = weighted;
    std::vector<double> tune_s(tune_scores.begin(), tune_scores.end()), test_s(test_scores.begin(), test_scores.end());
    if (weighted) {
        tune_s = amount_weight(tune_scores, tune_amounts);
        test_s = amount_weight(test_scores, test_amounts);
    }
    e.tuned = tune_threshold(tune_s, tune_labels, target_tpr, weighted);
    e.test = confusion_at(test_s, test_labels, e.tuned.gamma);
    const auto predicted = predict_labels(test_s, e.tuned.gamma);
    e.cost = cost_model(predicted, test_labels, test_amounts, costs);
    return e;
}

inline nlohmann::json to_json(const Evaluation& e) {
    auto opt = [](const std::optional<double>& v) -> nlohmann::json {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    return {{"method", e.method},
            {"approximate_days", e.approximate_days},
            {"threshold", e.amount_weighted ? "amount_weighted" : "plain"},
            {"tune",
             {{"gamma", e.tuned.gamma},
              {"tpr", e.tuned.tpr},
              {"fpr", e.tuned.fpr},
              {"precision", e.tuned.precision},
              {"f1", e.tuned.f1},
              {"feasible", e.tuned.feasible}}},
            {"test",
             {{"gamma", e.tuned.gamma},
              {"tpr", opt(e.test.tpr)},
              {"fpr", opt(e.test.fpr)},
              {"precision", opt(e.test.precision)},
              {"recall", opt(e.test.recall)},
              {"f1", opt(e.test.f1)},
              {"fp_count", e.cost.fp_count},
              {"fn_count", e.cost.fn_count},
              {"cost_fp", e.cost.cost_fp},
              {"cost_fn", e.cost.cost_fn},
              {"total_cost", e.cost.total}}}};
}

// ---------------------------------------------------------------- artifacts

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingInputError("cannot write " + path);
    out << text;
}

inline std::string hash_line(const std::string& hash) { return "# config_hash=" + hash + "\n"; }

// Feature matrix: CSV with the target key first, categorical cells as their
// text and null as an empty cell, plus a JSON sidecar at <path>.json.
inline void write_matrix(const FeatureMatrix& m, const std::string& path, const nlohmann::json& sidecar_extra,
                         const std::string& hash) {
    std::ostringstream os;
    os << hash_line(hash);
    std::vector<std::string> header{"key"};
    nlohmann::json columns = nlohmann::json::array();
    for (const auto& c : m.columns) {
        header.push_back(c.name);
        columns.push_back({{"name", c.name}, {"categorical", c.categorical}});
    }
    csv::write_row(os, header);
    std::vector<std::string> cells(header.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        cells[0] = m.keys[i];
        for (std::size_t k = 0; k < m.columns.size(); ++k) cells[k + 1] = m.columns[k].text(i);
        csv::write_row(os, cells);
    }
    write_text(path, os.str());
    nlohmann::json side = sidecar_extra.is_object() ? sidecar_extra : nlohmann::json::object();
    side["entity"] = m.entity;
    side["columns"] = columns;
    side["config_hash"] = hash;
    write_text(path + ".json", side.dump(2) + "\n");
}

inline nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open " + path);
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

// Reads a matrix written by write_matrix; rows are resolved against `target`.
inline FeatureMatrix read_matrix(const std::string& path, const Entity& target) {
    const auto side = read_json(path + ".json");
    auto table = csv::read(path);
    FeatureMatrix m;
    try {
        m.entity = side.at("entity");
        const auto& cols = side.at("columns");
        if (table.header.size() != cols.size() + 1) throw SchemaError(path + ": header disagrees with sidecar");
        for (std::size_t k = 0; k < cols.size(); ++k) {
            FeatureColumn c;
            c.name = cols[k].at("name");
            c.categorical = cols[k].at("categorical");
            if (table.header[k + 1] != c.name) throw SchemaError(path + ": column " + c.name + " out of place");
            m.columns.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ".json: " + e.what());
    }
    std::vector<std::unordered_map<std::string, std::int32_t>> codes(m.columns.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size()) throw SchemaError(path + ": bad width at row " + std::to_string(r + 1));
        auto id = target.row_of(row[0]);
        if (!id) throw SchemaError(path + ": unknown key " + row[0]);
        m.rows.push_back(static_cast<std::uint32_t>(*id));
        m.keys.push_back(row[0]);
        for (std::size_t k = 0; k < m.columns.size(); ++k) {
            auto& c = m.columns[k];
            const auto& cell = row[k + 1];
            if (c.categorical) {
                if (cell.empty()) {
                    c.codes.push_back(kNullCode);
                    continue;
                }
                auto [it, inserted] = codes[k].try_emplace(cell, static_cast<std::int32_t>(c.dictionary.size()));
                if (inserted) c.dictionary.push_back(cell);
                c.codes.push_back(it->second);
            } else {
                double v = kNull;
                if (!cell.empty()) {
                    const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                    if (ec != std::errc{} || p != cell.data() + cell.size())
                        throw SchemaError(path + ": non-numeric cell in " + c.name);
                }
                c.values.push_back(v);
            }
        }
    }
    return m;
}

// labels.csv: every sampled transaction with its label, card, amount and split part.
inline void write_prepared(const Prepared& p, const EntitySet& es, const ExperimentConfig& cfg, const std::string& dir,
                           const std::string& hash, const TransactionColumns& cols = {}) {
    std::filesystem::create_directories(dir);
    const Entity& tx = es.entity(cfg.target);
    const Column& card = tx.column(cols.card);
    std::map<std::uint32_t, const char*> part;
    for (auto r : p.split.train) part[r] = "train";
    for (auto r : p.split.tune) part[r] = "tune";
    for (auto r : p.split.test) part[r] = "test";
    std::ostringstream os;
    os << hash_line(hash);
    csv::write_row(os, {"transaction_id", "card_id", "amount", "label", "part"});
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
        const auto r = p.rows[i];
        csv::write_row(os, {tx.key_of(r), card.text(r), tx.column(cols.amount).text(r),
                            std::to_string(p.labels[i]), part.count(r) ? part[r] : ""});
    }
    write_text((std::filesystem::path(dir) / "labels.csv").string(), os.str());
    nlohmann::json stats{{"config_hash", hash},
                         {"reports", p.match.reported},
                         {"matched", p.match.matched},
                         {"unmatched", p.match.unmatched},
                         {"fraud_cards", p.fraud_cards},
                         {"clean_cards", p.clean_cards},
                         {"clean_cards_exhausted", p.clean_cards_exhausted},
                         {"transactions", p.rows.size()},
                         {"train", p.split.train.size()},
                         {"tune", p.split.tune.size()},
                         {"test", p.split.test.size()}};
    write_text((std::filesystem::path(dir) / "prepare.json").string(), stats.dump(2) + "\n");
    auto split_json = split_to_json(p.split, tx);
    split_json["config_hash"] = hash;
    write_text((std::filesystem::path(dir) / "split.json").string(), split_json.dump() + "\n");
}

inline Prepared read_prepared(const std::string& dir, const Entity& tx) {
    namespace fs = std::filesystem;
    auto table = csv::read((fs::path(dir) / "labels.csv").string());
    if (table.header.size() < 4 || table.header[0] != "transaction_id" || table.header[3] != "label")
        throw SchemaError(dir + "/labels.csv: unexpected header");
    Prepared p;
    for (const auto& row : table.rows) {
        auto r = tx.row_of(row.at(0));
        if (!r) throw SchemaError(dir + "/labels.csv: unknown transaction " + row.at(0));
        p.rows.push_back(static_cast<std::uint32_t>(*r));
        p.labels.push_back(row.at(3) == "1" ? 1 : 0);
    }
    p.split = split_from_json(read_json((fs::path(dir) / "split.json").string()), tx);
    return p;
}

// ---------------------------------------------------------------- experiment

struct ExperimentReport {
    std::string hash;
    nlohmann::json metrics;      // metrics.json
    std::string comparison_csv;  // transactional vs DFS, plain vs amount-weighted
    std::string approximation_csv;
    nlohmann::json timing;  // wall-clock seconds per stage; not deterministic
    bool all_feasible = true;
    std::vector<Evaluation> comparison;
    std::vector<Evaluation> approximation;
};

inline std::string comparison_table(const std::vector<Evaluation>& rows, const std::string& hash) {
    std::ostringstream os;
    os << hash_line(hash);
    csv::write_row(os, {"method", "approximate_days", "threshold", "gamma", "tpr", "fpr", "precision", "recall", "f1",
                        "fp_count", "fn_count", "cost_fp", "cost_fn", "total_cost", "savings_vs_transactional"});
    auto num = [](const std::optional<double>& v) { return v ? nlohmann::json(*v).dump() : std::string(); };
    auto money = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    for (const auto& e : rows) {
        // baseline: the transactional model with the same threshold mode
        std::string savings;
        for (const auto& b : rows)
            if (b.method == "transactional" && b.amount_weighted == e.amount_weighted)
                savings = money(b.cost.total - e.cost.total);
        csv::write_row(os, {e.method, std::to_string(e.approximate_days),
                            e.amount_weighted ? "amount_weighted" : "plain", nlohmann::json(e.tuned.gamma).dump(),
                            num(e.test.tpr), num(e.test.fpr), num(e.test.precision), num(e.test.recall),
                            num(e.test.f1), std::to_string(e.cost.fp_count), std::to_string(e.cost.fn_count),
                            money(e.cost.cost_fp), money(e.cost.cost_fn), money(e.cost.total), savings});
    }
    return os.str();
}

inline std::vector<bool> weighting_modes(Weighting w) {
    if (w == Weighting::plain) return {false};
    if (w == Weighting::amount) return {true};
    return {false, true};
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, std::size_t threads) {
    using clock = std::chrono::steady_clock;
    ExperimentReport rep;
    rep.hash = config_hash(cfg);
    const auto t_start = clock::now();
    auto lap = [&, t = clock::now()]() mutable {
        const auto now = clock::now();
        const double s = std::chrono::duration<double>(now - t).count();
        t = now;
        return s;
    };
    auto& timing = rep.timing;
    timing["config_hash"] = rep.hash;
    timing["threads"] = threads;

    EntitySet es;
    std::vector<FraudReport> reports;
    if (cfg.data_dir.empty()) {
        log_stage(rep.hash, "generating synthetic data");
        auto gen = cfg.generator;
        gen.seed = cfg.seed;
        auto data = generate(gen);
        es = build_entityset(data);
        reports = reports_from_rows(data.reports);
    } else {
        log_stage(rep.hash, "loading " + cfg.data_dir);
        auto ds = load_dataset(cfg.data_dir);
        es = std::move(ds.es);
        reports = load_reports(ds.reports_path);
    }
    timing["load"] = lap();

    const auto prep = prepare(es, reports, cfg);
    timing["prepare"] = lap();
    const auto train = positions_of(prep.rows, prep.split.train);
    const auto tune = positions_of(prep.rows, prep.split.tune);
    const auto test = positions_of(prep.rows, prep.split.test);
    auto pick = [&](const auto& v, const std::vector<std::size_t>& pos) {
        std::vector<std::decay_t<decltype(v[0])>> out;
        out.reserve(pos.size());
        for (auto p : pos) out.push_back(v[p]);
        return out;
    };
    const auto y_train = pick(prep.labels, train), y_tune = pick(prep.labels, tune), y_test = pick(prep.labels, test);
    const auto amounts = amounts_at(es, cfg, prep.rows);
    const auto a_tune = pick(amounts, tune), a_test = pick(amounts, test);

    nlohmann::json importances;
    std::size_t n_synth = 0;
    auto run = [&](FeatureSet set, int days, std::vector<Evaluation>& sink) {
        const std::string label = to_string(set) + (set == FeatureSet::dfs ? " @" + std::to_string(days) + "d" : "");
        log_stage(rep.hash, "features " + label);
        const auto m = build_features(es, prep.rows, cfg, set, days, threads);
        timing["features " + label] = lap();
        log_stage(rep.hash, "training " + label + " on " + std::to_string(m.columns.size()) + " columns");
        auto hp = cfg.forest;
        hp.seed = cfg.seed;
        const auto model = train_model(m, train, y_train, hp, threads);
        timing["train " + label] = lap();
        const auto s_tune = score(model, m, tune), s_test = score(model, m, test);
        for (bool weighted : weighting_modes(cfg.weighting)) {
            auto e = evaluate_scores(to_string(set), set == FeatureSet::dfs ? days : 0, weighted, s_tune, y_tune,
                                     a_tune, s_test, y_test, a_test, cfg.target_tpr, cfg.costs);
            rep.all_feasible = rep.all_feasible && e.tuned.feasible;
            sink.push_back(std::move(e));
        }
        if (set == FeatureSet::dfs && days == cfg.approximate_days) {
            n_synth = m.columns.size() - transactional_features(es, cfg.target, {}).columns.size();
            std::vector<std::size_t> order(model.forest.importances.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
                return model.forest.importances[a] > model.forest.importances[b];
            });
            importances = nlohmann::json::array();
            for (std::size_t k = 0; k < std::min<std::size_t>(20, order.size()); ++k)
                importances.push_back({{"feature", model.forest.feature_names[order[k]]},
                                       {"importance", model.forest.importances[order[k]]}});
        }
        timing["evaluate " + label] = lap();
    };

    run(FeatureSet::transactional, 0, rep.comparison);
    run(FeatureSet::dfs, cfg.approximate_days, rep.comparison);
    for (int days : cfg.approximation_sweep) run(FeatureSet::dfs, days, rep.approximation);
    timing["total"] = std::chrono::duration<double>(clock::now() - t_start).count();

    auto& j = rep.metrics;
    j["config_hash"] = rep.hash;
    j["config"] = to_json(cfg);
    j["dataset"] = {{"transactions", es.entity(cfg.target).size()},
                    {"reports", prep.match.reported},
                    {"matched", prep.match.matched},
                    {"unmatched", prep.match.unmatched},
                    {"sampled_transactions", prep.rows.size()},
                    {"fraud_cards", prep.fraud_cards},
                    {"clean_cards", prep.clean_cards},
                    {"fraud_transactions", std::count(prep.labels.begin(), prep.labels.end(), 1)},
                    {"train", train.size()},
                    {"tune", tune.size()},
                    {"test", test.size()}};
    j["synthesized_features"] = n_synth;
    j["comparison"] = nlohmann::json::array();
    for (const auto& e : rep.comparison) j["comparison"].push_back(to_json(e));
    j["approximation"] = nlohmann::json::array();
    for (const auto& e : rep.approximation) j["approximation"].push_back(to_json(e));
    j["top_importances"] = importances;
    rep.comparison_csv = comparison_table(rep.comparison, rep.hash);
    rep.approximation_csv = comparison_table(rep.approximation, rep.hash);
    return rep;
}

inline void write_report(const ExperimentReport& rep, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_text((fs::path(dir) / "metrics.json").string(), rep.metrics.dump(2) + "\n");
    write_text((fs::path(dir) / "comparison.csv").string(), rep.comparison_csv);
    write_text((fs::path(dir) / "approximation.csv").string(), rep.approximation_csv);
    write_text((fs::path(dir) / "timing.json").string(), rep.timing.dump(2) + "\n");
}

}  // namespace dfs
