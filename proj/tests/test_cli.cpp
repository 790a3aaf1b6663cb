#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "oracle.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("dfs_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        std::ofstream(d / "config.json") << R"({"generator": {"n_cards": 200, "days": 60, "n_merchants": 60},
            "forest": {"n_trees": 8}, "approximate_days": 7, "approximation_sweep": [1]})";
        return d;
    }();
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = std::string(DFSFRAUD_BIN) + " " + args + " >>" + (work() / "log.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string p(const std::string& name) { return (work() / name).string(); }

std::string cfg() { return " --config " + p("config.json"); }

// Builds the dataset, preparation, matrix and model once for the tests below.
void ensure_chain() {
    static bool done = false;
    if (done) return;
    ASSERT_EQ(run("generate --out " + p("data") + cfg()), 0);
    ASSERT_EQ(run("prepare --data " + p("data") + " --out " + p("prep") + cfg()), 0);
    ASSERT_EQ(run("synthesize --data " + p("data") + " --prepared " + p("prep") + " --out " + p("dfs.csv") + cfg()), 0);
    ASSERT_EQ(run("train --data " + p("data") + " --prepared " + p("prep") + " --matrix " + p("dfs.csv") + " --out " +
                  p("model.json") + cfg()),
              0);
    done = true;
}

std::string hash_in_json(const std::string& path) {
    std::ifstream in(path);
    const auto j = nlohmann::json::parse(in);
    if (j.contains("provenance")) return j.at("provenance").at("config_hash").get<std::string>();
    return j.at("config_hash").get<std::string>();
}

}  // namespace

TEST(Cli, UsageErrorsExitWithTwo) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("generate"), 2);  // --out is required
    EXPECT_EQ(run("generate --out " + p("x") + " --cards -3"), 2);
    EXPECT_EQ(run("synthesize --data " + p("data") + " --out " + p("y.csv") + " --approximate weekly"), 2);
    EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, MissingInputsExitWithThree) {
    ensure_chain();
    EXPECT_EQ(run("tune --data " + p("data") + " --prepared " + p("prep") + " --matrix " + p("dfs.csv") + " --model " +
                  p("no_model.json") + " --out " + p("t.json")),
              3);
    EXPECT_EQ(run("prepare --data " + p("no_data") + " --out " + p("prep2")), 3);
    EXPECT_EQ(run("experiment --config " + p("no_config.json")), 3);
}

TEST(Cli, SchemaProblemsExitWithFour) {
    ensure_chain();
    const auto bad = work() / "bad_data";
    fs::remove_all(bad);
    fs::copy(work() / "data", bad);
    {
        std::ofstream(bad / "cards.csv", std::ios::app) << "c000000,u000000,2016-06-01 00:00:00,debit\n";
    }
    EXPECT_EQ(run("prepare --data " + bad.string() + " --out " + p("prep_bad")), 4);

    // a matrix whose columns differ from the model's
    EXPECT_EQ(run("synthesize --data " + p("data") + " --prepared " + p("prep") + " --features transactional --out " +
                  p("txn.csv") + cfg()),
              0);
    EXPECT_EQ(run("tune --data " + p("data") + " --prepared " + p("prep") + " --matrix " + p("txn.csv") + " --model " +
                  p("model.json") + " --out " + p("t.json") + cfg()),
              4);
}

TEST(Cli, UnreachableTprExitsWithFive) {
    ensure_chain();
    EXPECT_EQ(run("tune --data " + p("data") + " --prepared " + p("prep") + " --matrix " + p("dfs.csv") + " --model " +
                  p("model.json") + " --out " + p("infeasible.json") + " --target-tpr 1.5" + cfg()),
              5);
    std::ifstream in(p("infeasible.json"));
    EXPECT_FALSE(nlohmann::json::parse(in).at("feasible").get<bool>());
}

TEST(Cli, ChainSharesOneConfigHashAcrossArtifacts) {
    ensure_chain();
    ASSERT_EQ(run("tune --data " + p("data") + " --prepared " + p("prep") + " --matrix " + p("dfs.csv") + " --model " +
                  p("model.json") + " --out " + p("threshold.json") + cfg()),
              0);
    ASSERT_EQ(run("evaluate --data " + p("data") + " --prepared " + p("prep") + " --matrix " + p("dfs.csv") +
                  " --model " + p("model.json") + " --threshold " + p("threshold.json") + " --out " +
                  p("metrics.json") + cfg()),
              0);
    const std::string hash = hash_in_json(p("threshold.json"));
    ASSERT_EQ(hash.size(), 16u);
    for (const auto* f : {"data/dataset.json", "prep/prepare.json", "prep/split.json", "dfs.csv.json", "model.json",
                          "metrics.json"})
        EXPECT_EQ(hash_in_json(p(f)), hash) << f;
    for (const auto* f : {"prep/labels.csv", "dfs.csv"})
        EXPECT_EQ(oracle::slurp(p(f)).rfind("# config_hash=" + hash + "\n", 0), 0u) << f;

    std::ifstream in(p("metrics.json"));
    const auto m = nlohmann::json::parse(in);
    for (const auto* k : {"tpr", "precision", "cost_fp", "cost_fn", "total_cost"}) EXPECT_TRUE(m.contains(k)) << k;
}

TEST(Cli, ExperimentIsReproducible) {
    ASSERT_EQ(run("experiment --out " + p("rep1") + cfg() + " --seed 3"), 0);
    ASSERT_EQ(run("experiment --out " + p("rep2") + cfg() + " --seed 3 --threads 2"), 0);
    for (const auto* f : {"metrics.json", "comparison.csv", "approximation.csv"})
        EXPECT_EQ(oracle::slurp(work() / "rep1" / f), oracle::slurp(work() / "rep2" / f)) << f;
    EXPECT_TRUE(fs::exists(work() / "rep1" / "timing.json"));
    const auto hash = hash_in_json(p("rep1/metrics.json"));
    EXPECT_EQ(oracle::slurp(work() / "rep1" / "comparison.csv").rfind("# config_hash=" + hash, 0), 0u);
    ASSERT_EQ(run("experiment --out " + p("rep3") + cfg() + " --seed 4"), 0);
    EXPECT_NE(hash_in_json(p("rep3/metrics.json")), hash);
}

TEST(Cli, BenchReportsThroughput) {
    ASSERT_EQ(run("bench --rows 3000 --thread-counts 1,2 --out " + p("bench.json") + cfg()), 0);
    std::ifstream in(p("bench.json"));
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j.at("rows").get<int>(), 3000);
    ASSERT_EQ(j.at("runs").size(), 2u);
    for (const auto& r : j.at("runs")) EXPECT_GT(r.at("rows_per_second").get<double>(), 0.0);
}
