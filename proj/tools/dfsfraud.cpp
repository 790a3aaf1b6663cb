// dfsfraud: command-line front end for the fraud-detection pipeline.
//
//   dfsfraud generate   --out data/ --cards 4400 --days 180 --seed 7
//   dfsfraud prepare    --data data/ --out prep/
//   dfsfraud synthesize --data data/ --prepared prep/ --out dfs.csv --approximate 7d
//   dfsfraud train      --data data/ --prepared prep/ --matrix dfs.csv --out model.json
//   dfsfraud tune       --data data/ --prepared prep/ --matrix dfs.csv --model model.json --out threshold.json
//   dfsfraud evaluate   --data data/ --prepared prep/ --matrix dfs.csv --model model.json
//                       --threshold threshold.json --out metrics.json
//   dfsfraud experiment --seed 7 --out report/
//   dfsfraud bench      --rows 100000 --thread-counts 1,4
//
// Exit status: 0 ok, 2 usage, 3 missing input, 4 schema mismatch, 5 infeasible tpr target.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dfs.hpp"

namespace {

using namespace dfs;
namespace fs = std::filesystem;

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::size_t threads = default_thread_count();
};

ExperimentConfig base_config(const Common& c) {
    ExperimentConfig cfg = c.config_path.empty() ? config_from_json(nlohmann::json::object()) : load_config(c.config_path);
    if (c.seed) {
        cfg.seed = *c.seed;
        cfg.generator.seed = *c.seed;
        cfg.forest.seed = *c.seed;
    }
    return cfg;
}

int parse_days(const std::string& text) {
    if (text == "exact") return 0;
    std::string digits = text;
    if (!digits.empty() && (digits.back() == 'd' || digits.back() == 'D')) digits.pop_back();
    int days = 0;
    const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), days);
    if (digits.empty() || ec != std::errc{} || p != digits.data() + digits.size() || days < 0)
        throw UsageError("approximation must look like 7d, 7 or exact, got '" + text + "'");
    return days;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config_path, "JSON configuration; flags override it");
    sub->add_option("--seed", c.seed, "seed for generation, sampling, splitting and training");
    sub->add_option("--threads", c.threads, "worker threads (default: $DFS_THREADS or 1)")->check(CLI::PositiveNumber);
}

struct Inputs {
    Dataset data;
    Prepared prep;
};

Inputs load_inputs(const std::string& data_dir, const std::string& prepared_dir, const ExperimentConfig& cfg) {
    Inputs in{load_dataset(data_dir), {}};
    in.prep = read_prepared(prepared_dir, in.data.es.entity(cfg.target));
    return in;
}

template <class T>
std::vector<T> take(const std::vector<T>& v, const std::vector<std::size_t>& pos) {
    std::vector<T> out;
    for (auto p : pos) out.push_back(v[p]);
    return out;
}

// Labels and amounts of a split part, in matrix position order.
struct Part {
    std::vector<std::size_t> positions;
    std::vector<Label> labels;
    std::vector<double> amounts;
};

Part part_of(const FeatureMatrix& m, const Inputs& in, const ExperimentConfig& cfg,
             const std::vector<std::uint32_t>& rows) {
    Part p;
    p.positions = positions_of(m.rows, rows);
    const auto label_pos = positions_of(in.prep.rows, rows);
    p.labels = take(in.prep.labels, label_pos);
    p.amounts = amounts_at(in.data.es, cfg, rows);
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep feature synthesis fraud-detection pipeline"};
    app.require_subcommand(1);
    Common common;

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic transaction dataset");
    add_common(gen, common);
    std::string gen_out;
    std::optional<int> gen_cards, gen_days;
    std::optional<double> gen_fraud_cards, gen_fraud_txns;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--cards", gen_cards, "number of cards")->check(CLI::PositiveNumber);
    gen->add_option("--days", gen_days, "days of history")->check(CLI::PositiveNumber);
    gen->add_option("--fraud-card-rate", gen_fraud_cards, "share of compromised cards");
    gen->add_option("--fraud-txn-rate", gen_fraud_txns, "target share of fraudulent transactions");

    // prepare
    auto* prep = app.add_subcommand("prepare", "label transactions from fraud reports, sample cards and split");
    add_common(prep, common);
    std::string prep_data, prep_out, prep_mode;
    std::optional<double> prep_ratio;
    prep->add_option("--data", prep_data, "dataset directory")->required();
    prep->add_option("--out", prep_out, "output directory")->required();
    prep->add_option("--ratio", prep_ratio, "clean cards kept per fraud card");
    prep->add_option("--split-mode", prep_mode, "transaction or card");

    // synthesize
    auto* syn = app.add_subcommand("synthesize", "compute a feature matrix");
    add_common(syn, common);
    std::string syn_data, syn_prepared, syn_out, syn_target, syn_approx, syn_prims, syn_set = "dfs";
    std::optional<int> syn_depth;
    syn->add_option("--data", syn_data, "dataset directory")->required();
    syn->add_option("--prepared", syn_prepared, "prepare output; its rows are used (default: every row)");
    syn->add_option("--out", syn_out, "matrix CSV path")->required();
    syn->add_option("--target", syn_target, "target entity");
    syn->add_option("--max-depth", syn_depth, "maximum feature depth");
    syn->add_option("--approximate", syn_approx, "cutoff grid interval: 7d, 7 or exact (default: config, else exact)");
    syn->add_option("--primitives", syn_prims, "comma-separated primitive names");
    syn->add_option("--features", syn_set, "dfs or transactional")->check(CLI::IsMember({"dfs", "transactional"}));

    // train
    auto* trn = app.add_subcommand("train", "fit a random forest on the training rows");
    add_common(trn, common);
    std::string trn_data, trn_prepared, trn_matrix, trn_out;
    std::optional<int> trn_trees, trn_mtry, trn_leaf;
    trn->add_option("--data", trn_data, "dataset directory")->required();
    trn->add_option("--prepared", trn_prepared, "prepare output directory")->required();
    trn->add_option("--matrix", trn_matrix, "feature matrix CSV")->required();
    trn->add_option("--out", trn_out, "model JSON path")->required();
    trn->add_option("--trees", trn_trees, "number of trees")->check(CLI::PositiveNumber);
    trn->add_option("--max-features", trn_mtry, "features tried per split (0: sqrt)");
    trn->add_option("--min-samples-leaf", trn_leaf, "minimum samples per leaf")->check(CLI::PositiveNumber);

    // tune
    auto* tun = app.add_subcommand("tune", "pick the decision threshold on the tune rows");
    add_common(tun, common);
    std::string tun_data, tun_prepared, tun_matrix, tun_model, tun_out, tun_weighting;
    std::optional<double> tun_tpr;
    tun->add_option("--data", tun_data, "dataset directory")->required();
    tun->add_option("--prepared", tun_prepared, "prepare output directory")->required();
    tun->add_option("--matrix", tun_matrix, "feature matrix CSV")->required();
    tun->add_option("--model", tun_model, "model JSON")->required();
    tun->add_option("--out", tun_out, "threshold JSON path")->required();
    tun->add_option("--target-tpr", tun_tpr, "minimum true-positive rate");
    tun->add_option("--weighting", tun_weighting, "plain or amount (default: amount if the config says so, else plain)")
        ->check(CLI::IsMember({"plain", "amount"}));

    // evaluate
    auto* evl = app.add_subcommand("evaluate", "metrics and cost on the test rows");
    add_common(evl, common);
    std::string evl_data, evl_prepared, evl_matrix, evl_model, evl_threshold, evl_out;
    evl->add_option("--data", evl_data, "dataset directory")->required();
    evl->add_option("--prepared", evl_prepared, "prepare output directory")->required();
    evl->add_option("--matrix", evl_matrix, "feature matrix CSV")->required();
    evl->add_option("--model", evl_model, "model JSON")->required();
    evl->add_option("--threshold", evl_threshold, "threshold JSON from tune")->required();
    evl->add_option("--out", evl_out, "metrics JSON path")->required();

    // experiment
    auto* exp = app.add_subcommand("experiment", "run every stage and write the comparison reports");
    add_common(exp, common);
    std::string exp_out = "report", exp_data;
    std::optional<int> exp_cards, exp_trees;
    exp->add_option("--out", exp_out, "report directory");
    exp->add_option("--data", exp_data, "dataset directory (default: generate in memory)");
    exp->add_option("--cards", exp_cards, "generated cards")->check(CLI::PositiveNumber);
    exp->add_option("--trees", exp_trees, "trees per forest")->check(CLI::PositiveNumber);

    // bench
    auto* bch = app.add_subcommand("bench", "time feature-matrix computation");
    add_common(bch, common);
    std::size_t bch_rows = 100000;
    std::vector<std::size_t> bch_threads;
    std::string bch_out;
    bch->add_option("--rows", bch_rows, "transactions to featurize")->check(CLI::PositiveNumber);
    bch->add_option("--thread-counts", bch_threads, "thread counts to time, e.g. 1,4")->delimiter(',');
    bch->add_option("--out", bch_out, "write the report here as well as to stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(ErrorKind::usage);
    }

    try {
        auto cfg = base_config(common);

        if (gen->parsed()) {
            if (gen_cards) cfg.generator.n_cards = *gen_cards;
            if (gen_days) cfg.generator.days = *gen_days;
            if (gen_fraud_cards) cfg.generator.fraud_card_rate = *gen_fraud_cards;
            if (gen_fraud_txns) cfg.generator.fraud_txn_rate = *gen_fraud_txns;
            const auto hash = config_hash(cfg);
            log_stage(hash, "generate -> " + gen_out);
            const auto data = generate(cfg.generator);
            write_dataset(data, gen_out, {{"config_hash", hash}, {"generator", to_json(cfg.generator)}});
            std::cout << data.transactions.size() << " transactions, " << data.cards.size() << " cards, "
                      << data.reports.size() << " fraud reports\n";
            return 0;
        }

        if (prep->parsed()) {
            if (prep_ratio) cfg.sample_ratio = *prep_ratio;
            if (!prep_mode.empty()) cfg.split_mode = split_mode_from_string(prep_mode);
            const auto hash = config_hash(cfg);
            log_stage(hash, "prepare " + prep_data + " -> " + prep_out);
            auto ds = load_dataset(prep_data);
            const auto p = prepare(ds.es, load_reports(ds.reports_path), cfg);
            write_prepared(p, ds.es, cfg, prep_out, hash);
            std::cout << p.match.matched << " of " << p.match.reported << " reports matched; " << p.rows.size()
                      << " transactions kept (" << p.split.train.size() << "/" << p.split.tune.size() << "/"
                      << p.split.test.size() << ")\n";
            return 0;
        }

        if (syn->parsed()) {
            if (!syn_target.empty()) cfg.target = syn_target;
            if (syn_depth) cfg.max_depth = *syn_depth;
            if (!syn_prims.empty()) cfg.primitives = parse_primitive_list(syn_prims);
            if (!syn_approx.empty()) cfg.approximate_days = parse_days(syn_approx);
            const auto hash = config_hash(cfg);
            auto ds = load_dataset(syn_data);
            const Entity& target = ds.es.entity(cfg.target);
            std::vector<std::uint32_t> rows;
            if (!syn_prepared.empty()) {
                rows = read_prepared(syn_prepared, target).rows;
            } else {
                rows.resize(target.size());
                std::iota(rows.begin(), rows.end(), 0u);
            }
            log_stage(hash, "synthesize " + std::to_string(rows.size()) + " rows, approximate " +
                                std::to_string(cfg.approximate_days) + "d");
            const auto set = syn_set == "dfs" ? FeatureSet::dfs : FeatureSet::transactional;
            const auto m = build_features(ds.es, rows, cfg, set, cfg.approximate_days, common.threads);
            nlohmann::json side{{"features", syn_set},
                                {"policy",
                                 {{"cutoff", "event_time"},
                                  {"approximate_days", cfg.approximate_days},
                                  {"anchor", format_date(cfg.anchor)}}},
                                {"max_depth", cfg.max_depth}};
            if (!syn_prepared.empty()) {
                // dictionary fitted on the training rows, as train will refit it
                const auto p = read_prepared(syn_prepared, target);
                side["category_dictionary"] = to_json(fit_categories(m, positions_of(m.rows, p.split.train)));
            }
            write_matrix(m, syn_out, side, hash);
            std::cout << m.columns.size() << " columns x " << m.size() << " rows -> " << syn_out << '\n';
            return 0;
        }

        if (trn->parsed()) {
            if (trn_trees) cfg.forest.n_trees = *trn_trees;
            if (trn_mtry) cfg.forest.max_features = *trn_mtry;
            if (trn_leaf) cfg.forest.min_samples_leaf = *trn_leaf;
            const auto hash = config_hash(cfg);
            const auto in = load_inputs(trn_data, trn_prepared, cfg);
            const auto m = read_matrix(trn_matrix, in.data.es.entity(cfg.target));
            const auto train = part_of(m, in, cfg, in.prep.split.train);
            log_stage(hash, "train " + std::to_string(cfg.forest.n_trees) + " trees on " +
                                std::to_string(train.positions.size()) + " rows");
            const auto model = train_model(m, train.positions, train.labels, cfg.forest, common.threads);
            save_model(model, trn_out, hash);
            std::cout << model.forest.feature_names.size() << " inputs -> " << trn_out << '\n';
            return 0;
        }

        if (tun->parsed()) {
            if (tun_tpr) cfg.target_tpr = *tun_tpr;
            if (!tun_weighting.empty()) cfg.weighting = weighting_from_string(tun_weighting);
            const auto hash = config_hash(cfg);
            const auto model = load_model(tun_model);
            const auto in = load_inputs(tun_data, tun_prepared, cfg);
            const auto m = read_matrix(tun_matrix, in.data.es.entity(cfg.target));
            const auto tune = part_of(m, in, cfg, in.prep.split.tune);
            auto scores = dfs::score(model, m, tune.positions);
            const bool weighted = cfg.weighting == Weighting::amount;
            if (weighted) scores = amount_weight(scores, tune.amounts);
            const auto op = tune_threshold(scores, tune.labels, cfg.target_tpr, weighted);
            nlohmann::json out{{"config_hash", hash},
                               {"gamma", op.gamma},
                               {"amount_weighted", weighted},
                               {"target_tpr", cfg.target_tpr},
                               {"feasible", op.feasible},
                               {"tune",
                                {{"tpr", op.tpr}, {"fpr", op.fpr}, {"precision", op.precision}, {"f1", op.f1}}}};
            write_text(tun_out, out.dump(2) + "\n");
            log_stage(hash, "tuned gamma " + nlohmann::json(op.gamma).dump());
            if (!op.feasible)
                throw InfeasibleError("no threshold reaches tpr " + nlohmann::json(cfg.target_tpr).dump() +
                                      " on the tune rows");
            return 0;
        }

        if (evl->parsed()) {
            const auto threshold = read_json(evl_threshold);
            const auto model = load_model(evl_model);
            const auto in = load_inputs(evl_data, evl_prepared, cfg);
            const auto m = read_matrix(evl_matrix, in.data.es.entity(cfg.target));
            const auto test = part_of(m, in, cfg, in.prep.split.test);
            auto scores = dfs::score(model, m, test.positions);
            const bool weighted = threshold.value("amount_weighted", false);
            if (weighted) scores = amount_weight(scores, test.amounts);
            const double gamma = threshold.at("gamma");
            const auto c = confusion_at(scores, test.labels, gamma);
            const auto cost = cost_model(predict_labels(scores, gamma), test.labels, test.amounts, cfg.costs);
            OperatingPoint op;
            op.gamma = gamma;
            op.tpr = c.tpr.value_or(0.0);
            op.recall = op.tpr;
            op.fpr = c.fpr.value_or(0.0);
            op.precision = c.precision.value_or(0.0);
            op.f1 = c.f1.value_or(0.0);
            op.amount_weighted = weighted;
            op.feasible = threshold.value("feasible", true);
            auto out = to_json(op, cost);
            out["config_hash"] = config_hash(cfg);
            write_text(evl_out, out.dump(2) + "\n");
            std::cout << out.dump(2) << '\n';
            return 0;
        }

        if (exp->parsed()) {
            if (exp_cards) cfg.generator.n_cards = *exp_cards;
            if (exp_trees) cfg.forest.n_trees = *exp_trees;
            if (!exp_data.empty()) cfg.data_dir = exp_data;
            const auto rep = run_experiment(cfg, common.threads);
            write_report(rep, exp_out);
            std::cout << rep.comparison_csv;
            log_stage(rep.hash, "reports written to " + exp_out);
            if (!rep.all_feasible) throw InfeasibleError("at least one tuning run missed the tpr target");
            return 0;
        }

        if (bch->parsed()) {
            const auto hash = config_hash(cfg);
            if (bch_threads.empty()) bch_threads = {common.threads};
            // enough cards to produce the requested number of transactions
            GenConfig g = cfg.generator;
            const double per_card = g.txns_per_card_day * 1.13 * g.days;
            g.n_cards = static_cast<int>(static_cast<double>(bch_rows) / per_card * 1.1) + 1;
            auto data = generate(g);
            const auto es = build_entityset(data);
            const Entity& target = es.entity(cfg.target);
            const std::size_t n = std::min(bch_rows, target.size());
            std::vector<std::uint32_t> rows(n);
            std::iota(rows.begin(), rows.end(), 0u);
            const auto defs = synthesize(es, cfg.target, cfg.max_depth, cfg.primitives);
            const auto policy = CutoffPolicy::at_event_times(target, rows, cfg.approximate_days, cfg.anchor);
            nlohmann::json runs = nlohmann::json::array();
            for (auto t : bch_threads) {
                const auto t0 = std::chrono::steady_clock::now();
                const auto m = compute_matrix(es, defs, policy, t);
                const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                runs.push_back({{"threads", t}, {"seconds", s}, {"rows_per_second", static_cast<double>(n) / s}});
            }
            nlohmann::json out{{"config_hash", hash},
                               {"rows", n},
                               {"features", defs.size()},
                               {"hardware_threads", std::thread::hardware_concurrency()},
                               {"runs", runs}};
            if (!bch_out.empty()) write_text(bch_out, out.dump(2) + "\n");
            std::cout << out.dump(2) << '\n';
            return 0;
        }
    } catch (const dfs::Error& e) {
        std::cerr << "dfsfraud: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "dfsfraud: " << e.what() << '\n';
        return 1;
    }
    return static_cast<int>(ErrorKind::usage);
}
