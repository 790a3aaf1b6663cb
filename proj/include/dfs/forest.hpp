#pragma once

// Random forest classifier for binary labels: bootstrap samples, weighted
// Gini splits over a random feature subset per node, class-balanced sample
// weights and median imputation of missing values.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "dfs/design_matrix.hpp"
#include "dfs/error.hpp"

namespace dfs {

using Label = int;  // 1 = fraud, 0 = legitimate

enum class ImportanceKind { samples_reaching_node, impurity_decrease };

struct Hyperparams {
    int n_trees = 100;
    int max_features = 0;  // 0: floor(sqrt(d))
    int min_samples_leaf = 1;
    int max_depth = 0;  // 0: unlimited
    bool bootstrap = true;
    std::uint64_t seed = 0;
    ImportanceKind importance = ImportanceKind::samples_reaching_node;
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // go left when x <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::array<double, 2> mass{0.0, 0.0};  // weighted class mass reaching the node

    bool is_leaf() const noexcept { return feature < 0; }
    double positive_fraction() const {
        const double total = mass[0] + mass[1];
        return total > 0 ? mass[1] / total : 0.0;
    }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    template <class Row>
    const TreeNode& leaf_for(Row&& value_of) const {
        std::size_t i = 0;
        while (!nodes[i].is_leaf()) i = value_of(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i];
    }
    friend bool operator==(const Tree&, const Tree&) = default;
};

struct Forest {
    std::vector<std::string> feature_names;
    std::vector<Tree> trees;
    std::array<double, 2> class_weights{1.0, 1.0};
    std::vector<double> impute_values;
    std::vector<double> importances;           // per the configured kind
    std::vector<double> impurity_importances;  // always computed, for comparison
    Hyperparams hyperparams;

    friend bool operator==(const Forest& a, const Forest& b) {
        return a.feature_names == b.feature_names && a.trees == b.trees && a.class_weights == b.class_weights &&
               a.impute_values == b.impute_values && a.importances == b.importances;
    }
};

// weight(c) = n / (n_classes * count(c))
inline std::array<double, 2> balanced_weights(std::span<const Label> labels) {
    std::array<std::size_t, 2> count{0, 0};
    for (auto y : labels) {
        if (y != 0 && y != 1) throw UsageError("labels must be 0 or 1");
        ++count[static_cast<std::size_t>(y)];
    }
    if (count[0] == 0 || count[1] == 0) throw UsageError("balanced weights need both classes present");
    const double n = static_cast<double>(labels.size());
    return {n / (2.0 * static_cast<double>(count[0])), n / (2.0 * static_cast<double>(count[1]))};
}

// 1 - sum p_c^2 over the weighted class masses.
inline double gini(double w0, double w1) {
    const double t = w0 + w1;
    if (t <= 0) return 0.0;
    const double p0 = w0 / t, p1 = w1 / t;
    return 1.0 - p0 * p0 - p1 * p1;
}

inline double median_of(std::vector<double> v) {
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
    if (v.empty()) return std::nan("");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return lo + (hi - lo) / 2;
}

namespace detail {

struct TreeBuilder {
    const DesignMatrix& X;  // imputed, no NaN
    std::span<const Label> y;
    const Hyperparams& hp;
    std::array<double, 2> class_weights;
    std::size_t mtry;

    struct Sample {
        std::uint32_t row;
        std::uint32_t multiplicity;
        double weight;  // multiplicity * class weight
    };

    struct Result {
        Tree tree;
        std::vector<double> reach;     // weighted samples reaching split nodes, per feature
        std::vector<double> decrease;  // weighted impurity decrease, per feature
    };

    Result grow(std::uint64_t seed) const {
        std::mt19937_64 rng(seed);
        const std::size_t n = X.rows(), d = X.cols();
        std::vector<std::uint32_t> mult(n, hp.bootstrap ? 0u : 1u);
        if (hp.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (std::size_t i = 0; i < n; ++i) ++mult[pick(rng)];
        }
        std::vector<Sample> samples;
        for (std::size_t i = 0; i < n; ++i)
            if (mult[i]) samples.push_back({static_cast<std::uint32_t>(i), mult[i], mult[i] * class_weights[y[i]]});

        Result res;
        res.reach.assign(d, 0.0);
        res.decrease.assign(d, 0.0);
        std::vector<std::size_t> features(d);
        std::iota(features.begin(), features.end(), 0);

        struct Pending {
            std::size_t node, begin, end;
            int depth;
        };
        res.tree.nodes.emplace_back();
        std::vector<Pending> stack{{0, 0, samples.size(), 0}};
        struct Entry {
            double value;
            double weight;
            std::uint32_t multiplicity;
            Label label;
        };
        std::vector<Entry> sorted;
        while (!stack.empty()) {
            const Pending job = stack.back();
            stack.pop_back();
            std::array<double, 2> mass{0.0, 0.0};
            std::size_t count = 0;
            for (std::size_t i = job.begin; i < job.end; ++i) {
                mass[y[samples[i].row]] += samples[i].weight;
                count += samples[i].multiplicity;
            }
            res.tree.nodes[job.node].mass = mass;
            const bool pure = mass[0] == 0.0 || mass[1] == 0.0;
            const auto min_leaf = static_cast<std::size_t>(std::max(1, hp.min_samples_leaf));
            if (pure || count < 2 * min_leaf || (hp.max_depth > 0 && job.depth >= hp.max_depth)) continue;

            // Best split over randomly ordered features; constant features do
            // not count toward mtry, and the search goes on past mtry until a
            // valid split turns up.
            double best_score = std::numeric_limits<double>::infinity();
            std::optional<std::size_t> best_feature;
            double best_threshold = 0.0;
            std::size_t visited = 0;
            for (std::size_t k = 0; k < d; ++k) {
                if (visited >= mtry && best_feature) break;
                std::uniform_int_distribution<std::size_t> pick(k, d - 1);
                std::swap(features[k], features[pick(rng)]);
                const std::size_t f = features[k];
                const auto col = X.col(f);
                const double first = col[samples[job.begin].row];
                bool constant = true;
                for (std::size_t i = job.begin + 1; i < job.end && constant; ++i) constant = col[samples[i].row] == first;
                if (constant) continue;
                ++visited;
                sorted.clear();
                for (std::size_t i = job.begin; i < job.end; ++i) {
                    const auto& s = samples[i];
                    sorted.push_back({col[s.row], s.weight, s.multiplicity, y[s.row]});
                }
                // order within ties does not affect any candidate split
                std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
                std::array<double, 2> left{0.0, 0.0};
                std::size_t left_count = 0;
                for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                    const auto& s = sorted[i];
                    left[s.label] += s.weight;
                    left_count += s.multiplicity;
                    if (s.value == sorted[i + 1].value) continue;
                    if (left_count < min_leaf || count - left_count < min_leaf) continue;
                    const double r0 = mass[0] - left[0], r1 = mass[1] - left[1];
                    const double wl = left[0] + left[1], wr = r0 + r1;
                    const double score = wl * gini(left[0], left[1]) + wr * gini(r0, r1);
                    if (score < best_score) {
                        best_score = score;
                        best_feature = f;
                        const double lo = s.value, hi = sorted[i + 1].value;
                        double mid = lo + (hi - lo) / 2;
                        if (mid >= hi) mid = lo;
                        best_threshold = mid;
                    }
                }
            }
            if (!best_feature) continue;

            const auto col = X.col(*best_feature);
            const auto split = std::partition(samples.begin() + static_cast<std::ptrdiff_t>(job.begin),
                                              samples.begin() + static_cast<std::ptrdiff_t>(job.end),
                                              [&](const Sample& s) { return col[s.row] <= best_threshold; });
            const std::size_t mid = static_cast<std::size_t>(split - samples.begin());
            const double node_weight = mass[0] + mass[1];
            res.reach[*best_feature] += node_weight;
            res.decrease[*best_feature] += node_weight * gini(mass[0], mass[1]) - best_score;

            const auto left_id = res.tree.nodes.size();
            res.tree.nodes.emplace_back();
            res.tree.nodes.emplace_back();
            auto& node = res.tree.nodes[job.node];
            node.feature = static_cast<std::int32_t>(*best_feature);
            node.threshold = best_threshold;
            node.left = static_cast<std::int32_t>(left_id);
            node.right = static_cast<std::int32_t>(left_id + 1);
            // right first so the left subtree is grown first (stable node numbering)
            stack.push_back({left_id + 1, mid, job.end, job.depth + 1});
            stack.push_back({left_id, job.begin, mid, job.depth + 1});
        }
        return res;
    }
};

inline std::vector<double> normalized(std::vector<double> v) {
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    if (total <= 0) {
        std::fill(v.begin(), v.end(), v.empty() ? 0.0 : 1.0 / static_cast<double>(v.size()));
        return v;
    }
    for (auto& x : v) x /= total;
    return v;
}

inline DesignMatrix imputed(const DesignMatrix& X, std::span<const double> fill) {
    DesignMatrix out = X;
    for (std::size_t j = 0; j < X.cols(); ++j)
        for (auto& v : out.col(j))
            if (std::isnan(v)) v = fill[j];
    return out;
}

}  // namespace detail

// Trees are grown independently with per-tree seed hp.seed + t, so the
// result does not depend on `threads`.
inline Forest fit(const DesignMatrix& X, std::span<const Label> y, const Hyperparams& hp, std::size_t threads = 1) {
    if (X.rows() == 0 || X.cols() == 0) throw UsageError("cannot fit a forest on an empty matrix");
    if (y.size() != X.rows()) throw UsageError("label count does not match matrix rows");
    if (hp.n_trees < 1) throw UsageError("n_trees must be at least 1");
    const std::size_t d = X.cols();
    if (hp.max_features < 0 || static_cast<std::size_t>(hp.max_features) > d)
        throw UsageError("max_features must lie in [1, " + std::to_string(d) + "]");

    Forest forest;
    forest.hyperparams = hp;
    forest.feature_names = X.names();
    forest.class_weights = balanced_weights(y);
    for (std::size_t j = 0; j < d; ++j) {
        const auto col = X.col(j);
        const double med = median_of({col.begin(), col.end()});
        if (std::isnan(med)) throw UsageError("column '" + X.names()[j] + "' is entirely null");
        forest.impute_values.push_back(med);
    }
    const DesignMatrix clean = detail::imputed(X, forest.impute_values);

    const std::size_t mtry =
        hp.max_features > 0 ? static_cast<std::size_t>(hp.max_features)
                            : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
    const detail::TreeBuilder builder{clean, y, hp, forest.class_weights, mtry};

    std::vector<detail::TreeBuilder::Result> results(static_cast<std::size_t>(hp.n_trees));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t; (t = next++) < results.size();) results[t] = builder.grow(hp.seed + t);
    };
    threads = std::clamp<std::size_t>(threads, 1, results.size());
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<double> reach(d, 0.0), decrease(d, 0.0);
    for (auto& r : results) {
        for (std::size_t j = 0; j < d; ++j) {
            reach[j] += r.reach[j] / static_cast<double>(results.size());
            decrease[j] += r.decrease[j] / static_cast<double>(results.size());
        }
        forest.trees.push_back(std::move(r.tree));
    }
    forest.impurity_importances = detail::normalized(decrease);
    forest.importances = hp.importance == ImportanceKind::samples_reaching_node ? detail::normalized(reach)
                                                                                : forest.impurity_importances;
    return forest;
}

inline void check_columns(const Forest& f, const DesignMatrix& X) {
    if (X.names() == f.feature_names) return;
    std::string msg = "feature columns differ from training:";
    const std::size_t n = std::max(X.cols(), f.feature_names.size());
    int shown = 0;
    for (std::size_t j = 0; j < n && shown < 5; ++j) {
        const std::string a = j < f.feature_names.size() ? f.feature_names[j] : "<none>";
        const std::string b = j < X.cols() ? X.names()[j] : "<none>";
        if (a != b) {
            msg += " [" + std::to_string(j) + "] expected '" + a + "' got '" + b + "';";
            ++shown;
        }
    }
    throw SchemaError(msg);
}

// Mean over trees of the leaf's weighted class-1 fraction.
inline std::vector<double> predict_proba(const Forest& f, const DesignMatrix& X) {
    check_columns(f, X);
    std::vector<double> out(X.rows(), 0.0);
    std::vector<double> row(X.cols());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        for (std::size_t j = 0; j < X.cols(); ++j) {
            const double v = X.at(i, j);
            row[j] = std::isnan(v) ? f.impute_values[j] : v;
        }
        double s = 0.0;
        for (const auto& t : f.trees) s += t.leaf_for([&](std::int32_t j) { return row[j]; }).positive_fraction();
        out[i] = s / static_cast<double>(f.trees.size());
    }
    return out;
}

inline const std::vector<double>& feature_importances(const Forest& f) { return f.importances; }

inline nlohmann::json to_json(const Forest& f) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : f.trees) {
        nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                       left = nlohmann::json::array(), right = nlohmann::json::array(), m0 = nlohmann::json::array(),
                       m1 = nlohmann::json::array();
        for (const auto& n : t.nodes) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            m0.push_back(n.mass[0]);
            m1.push_back(n.mass[1]);
        }
        trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
                         {"mass0", m0}, {"mass1", m1}});
    }
    const auto& hp = f.hyperparams;
    return {{"format", "dfs-forest"},
            {"version", 1},
            {"feature_names", f.feature_names},
            {"class_weights", f.class_weights},
            {"impute_values", f.impute_values},
            {"importances", f.importances},
            {"impurity_importances", f.impurity_importances},
            {"hyperparams",
             {{"n_trees", hp.n_trees},
              {"max_features", hp.max_features},
              {"min_samples_leaf", hp.min_samples_leaf},
              {"max_depth", hp.max_depth},
              {"bootstrap", hp.bootstrap},
              {"seed", hp.seed},
              {"importance",
               hp.importance == ImportanceKind::samples_reaching_node ? "samples_reaching_node" : "impurity_decrease"}}},
            {"trees", trees}};
}

inline Forest forest_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "dfs-forest") throw SchemaError("not a forest model file");
        if (j.at("version") != 1) throw SchemaError("unsupported forest model version");
        Forest f;
        f.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        f.class_weights = j.at("class_weights").get<std::array<double, 2>>();
        f.impute_values = j.at("impute_values").get<std::vector<double>>();
        f.importances = j.at("importances").get<std::vector<double>>();
        f.impurity_importances = j.at("impurity_importances").get<std::vector<double>>();
        const auto& hp = j.at("hyperparams");
        f.hyperparams.n_trees = hp.at("n_trees");
        f.hyperparams.max_features = hp.at("max_features");
        f.hyperparams.min_samples_leaf = hp.at("min_samples_leaf");
        f.hyperparams.max_depth = hp.at("max_depth");
        f.hyperparams.bootstrap = hp.at("bootstrap");
        f.hyperparams.seed = hp.at("seed");
        f.hyperparams.importance = hp.at("importance") == "impurity_decrease" ? ImportanceKind::impurity_decrease
                                                                              : ImportanceKind::samples_reaching_node;
        for (const auto& t : j.at("trees")) {
            Tree tree;
            const auto& feature = t.at("feature");
            for (std::size_t i = 0; i < feature.size(); ++i) {
                TreeNode n;
                n.feature = feature[i];
                n.threshold = t.at("threshold")[i];
                n.left = t.at("left")[i];
                n.right = t.at("right")[i];
                n.mass = {t.at("mass0")[i].get<double>(), t.at("mass1")[i].get<double>()};
                tree.nodes.push_back(n);
            }
            f.trees.push_back(std::move(tree));
        }
        if (f.impute_values.size() != f.feature_names.size()) throw SchemaError("forest model is inconsistent");
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed forest model: ") + e.what());
    }
}

inline void save_forest(const Forest& f, const std::string& path, const nlohmann::json& extra = {}) {
    auto j = to_json(f);
    if (extra.is_object())
        for (const auto& [k, v] : extra.items()) j[k] = v;
    std::ofstream out(path);
    if (!out) throw MissingInputError("cannot write " + path);
    out << j.dump() << '\n';
}

inline Forest load_forest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open model " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    return forest_from_json(j);
}

}  // namespace dfs
