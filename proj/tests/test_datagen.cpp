#include <gtest/gtest.h>

#include <filesystem>

#include "dfs.hpp"
#include "oracle.hpp"

using namespace dfs;
namespace fs = std::filesystem;

namespace {

GenConfig small(std::uint64_t seed = 7) {
    GenConfig c;
    c.n_cards = 200;
    c.days = 60;
    c.seed = seed;
    return c;
}

std::string dump_dir(const GeneratedData& g, const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("dfs_datagen_" + name);
    fs::remove_all(dir);
    write_dataset(g, dir.string(), {{"seed", 1}});
    std::string all;
    for (const auto* f : {"customers.csv", "cards.csv", "transactions.csv", "fraud_reports.csv", "dataset.json",
                          "transactions.schema.json"})
        all += oracle::slurp(dir / f);
    return all;
}

// Mutual information in nats between a binary label and a feature cut into
// equal-count bins.
double mutual_information(const std::vector<int>& y, const std::vector<double>& x, int bins) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    std::vector<int> bin(x.size());
    for (std::size_t k = 0; k < order.size(); ++k) bin[order[k]] = static_cast<int>(k * bins / order.size());
    std::vector<std::array<double, 2>> joint(bins, {0, 0});
    for (std::size_t i = 0; i < x.size(); ++i) joint[bin[i]][y[i]] += 1;
    const double n = static_cast<double>(x.size());
    double py[2] = {0, 0};
    for (const auto& b : joint) {
        py[0] += b[0] / n;
        py[1] += b[1] / n;
    }
    double mi = 0;
    for (const auto& b : joint) {
        const double pb = (b[0] + b[1]) / n;
        for (int c = 0; c < 2; ++c)
            if (b[c] > 0) mi += b[c] / n * std::log((b[c] / n) / (pb * py[c]));
    }
    return mi;
}

}  // namespace

TEST(Generate, SameSeedGivesByteIdenticalFiles) {
    EXPECT_EQ(dump_dir(generate(small()), "a"), dump_dir(generate(small()), "b"));
}

TEST(Generate, DifferentSeedsDiffer) {
    const auto a = generate(small(1)), b = generate(small(2));
    EXPECT_NE(a.transactions, b.transactions);
}

TEST(Generate, NoCompromisedCardsMeansNoReports) {
    auto cfg = small();
    cfg.fraud_card_rate = 0;
    const auto g = generate(cfg);
    EXPECT_TRUE(g.reports.empty());
    EXPECT_EQ(std::count(g.is_fraud.begin(), g.is_fraud.end(), 1), 0);
    EXPECT_FALSE(g.transactions.empty());
}

TEST(Generate, FraudFractionNearConfiguredRateAtDefaults) {
    const GenConfig cfg;
    const auto g = generate(cfg);
    const double frac = static_cast<double>(std::count(g.is_fraud.begin(), g.is_fraud.end(), 1)) /
                        static_cast<double>(g.is_fraud.size());
    EXPECT_GE(frac, 0.8 * cfg.fraud_txn_rate);
    EXPECT_LE(frac, 1.2 * cfg.fraud_txn_rate);
    // one report per fraud transaction
    EXPECT_EQ(g.reports.size(), static_cast<std::size_t>(std::count(g.is_fraud.begin(), g.is_fraud.end(), 1)));
}

TEST(Generate, PerCardTimestampsStrictlyIncrease) {
    const auto g = generate(small());
    std::map<std::string, Timestamp> last;
    // rows are globally time-sorted; per card the times must never repeat
    for (const auto& t : g.transactions) {
        const Timestamp ts = *oracle::parse_time(t[2]);
        auto it = last.find(t[1]);
        if (it != last.end()) { ASSERT_LT(it->second, ts) << t[0]; }
        last[t[1]] = ts;
    }
}

TEST(Generate, ReferentialIntegrityAndRoundTripThroughDisk) {
    const auto g = generate(small());
    const auto dir = fs::temp_directory_path() / "dfs_datagen_load";
    fs::remove_all(dir);
    write_dataset(g, dir.string());
    const auto ds = load_dataset(dir.string());
    EXPECT_EQ(ds.es.entity("transactions").size(), g.transactions.size());
    EXPECT_EQ(ds.es.relationships().size(), 2u);
    EXPECT_EQ(load_reports(ds.reports_path).size(), g.reports.size());
    EXPECT_THROW(load_dataset((dir / "nowhere").string()), MissingInputError);
}

TEST(Generate, PlantedSignalIsInTheDeviationNotTheAmount) {
    const GenConfig cfg;
    const auto g = generate(cfg);
    std::vector<int> y;
    std::vector<double> amount, deviation;
    std::map<std::string, std::pair<double, int>> history;  // card -> (sum, count) of earlier amounts
    for (std::size_t i = 0; i < g.transactions.size(); ++i) {
        const auto& t = g.transactions[i];
        const double a = std::stod(t[4]);
        auto& [sum, n] = history[t[1]];
        if (n >= 3) {
            y.push_back(g.is_fraud[i]);
            amount.push_back(a);
            deviation.push_back(std::abs(a - sum / n));
        }
        sum += a;
        ++n;
    }
    const double mi_amount = mutual_information(y, amount, 20);
    const double mi_dev = mutual_information(y, deviation, 20);
    EXPECT_LT(mi_amount, mi_dev) << "MI(amount) = " << mi_amount << ", MI(deviation) = " << mi_dev;
}

TEST(Generate, SampledCardGroupsAreBalanced) {
    const GenConfig cfg;
    const auto g = generate(cfg);
    const auto es = build_entityset(g);
    const auto labels = match_reports(load_reports([&] {
        const auto dir = fs::temp_directory_path() / "dfs_datagen_reports";
        fs::remove_all(dir);
        write_dataset(g, dir.string());
        return (dir / "fraud_reports.csv").string();
    }()), es);
    const auto s = sample_cards(es, labels.labels, 1.0, 8);
    const double a = static_cast<double>(s.fraud_cards.size()), b = static_cast<double>(s.clean_cards.size());
    EXPECT_GT(a, 0);
    EXPECT_LE(std::abs(a - b), 0.1 * std::max(a, b));
}

TEST(GenConfigJson, RoundTripAndValidation) {
    auto cfg = small(99);
    cfg.fraud_txn_rate = 0.02;
    const auto back = gen_config_from_json(to_json(cfg));
    EXPECT_EQ(to_json(back), to_json(cfg));
    EXPECT_EQ(back.seed, 99u);
}
