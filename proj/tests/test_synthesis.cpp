#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dfs.hpp"
#include "oracle.hpp"

using namespace dfs;

namespace {

EntitySet cards_transactions() {
    EntitySchema cards{"cards", "card_id", "", {{"card_id", ColumnType::identifier()}}};
    EntitySchema txns{"transactions",
                      "transaction_id",
                      "date",
                      {{"transaction_id", ColumnType::identifier()},
                       {"card_id", ColumnType::foreign_key("cards")},
                       {"date", ColumnType::timestamp()},
                       {"amount", ColumnType::numeric(Unit::currency_euro)}}};
    EntitySet es;
    es.add_entity(make_entity(cards, {{"c1"}}));
    es.add_entity(make_entity(txns, {{"t1", "c1", "2017-08-24 10:00:00", "10"}}));
    es.add_relationship({"cards", "card_id", "transactions", "card_id"});
    return es;
}

std::set<std::string> names(const std::vector<FeatureDefinition>& fs) {
    std::set<std::string> out;
    for (const auto& f : fs) out.insert(f.name);
    return out;
}

GenConfig tiny() {
    GenConfig c;
    c.n_cards = 30;
    c.days = 20;
    c.n_merchants = 40;
    return c;
}

}  // namespace

TEST(Synthesize, SingleMeanAtDepthOne) {
    const auto fs = synthesize(cards_transactions(), "transactions", 1, {PrimitiveId::mean});
    ASSERT_EQ(fs.size(), 1u);
    EXPECT_EQ(fs[0].name, "cards.MEAN(transactions.amount)");
    EXPECT_EQ(fs[0].depth, 1);
    EXPECT_EQ(fs[0].scope, Scope::ancestor);
}

TEST(Synthesize, StacksTransformUnderAggregation) {
    const auto fs = synthesize(cards_transactions(), "transactions", 2, {PrimitiveId::mean, PrimitiveId::hour});
    const auto n = names(fs);
    EXPECT_TRUE(n.count("cards.MEAN(HOUR(transactions.date))"));
    EXPECT_TRUE(n.count("cards.MEAN(transactions.amount)"));
    EXPECT_TRUE(n.count("HOUR(transactions.date)"));
    EXPECT_EQ(n.size(), 3u);
    EXPECT_EQ(find_feature(fs, "cards.MEAN(HOUR(transactions.date))").depth, 2);
    // depth 1 drops the stacked feature
    EXPECT_FALSE(names(synthesize(cards_transactions(), "transactions", 1, {PrimitiveId::mean, PrimitiveId::hour}))
                     .count("cards.MEAN(HOUR(transactions.date))"));
}

// Hand-written enumeration of the reference schema from the primitive table:
// which aggregations apply to which column kinds, and what each transform emits.
TEST(Synthesize, FullRegistryMatchesIndependentEnumeration) {
    const auto es = build_entityset(generate(tiny()));
    const auto got = names(synthesize(es, "transactions", 2, all_primitive_ids()));

    const std::map<std::string, std::vector<std::string>> aggs_for{
        {"numeric", {"SUM", "MEAN", "STD", "COUNT"}},
        {"boolean", {"SUM", "MEAN"}},
        {"categorical", {"NUM_UNIQUE", "MODE"}},
        {"identifier", {"NUM_UNIQUE"}},
        {"timestamp", {"AVG_TIME_BETWEEN"}},
        {"ordinal", {"MEAN", "STD", "NUM_UNIQUE", "MODE"}},
    };
    const std::map<std::string, std::string> transform_out{{"WEEKEND", "boolean"}, {"DAY", "ordinal"}, {"HOUR", "ordinal"}};
    const std::vector<std::pair<std::string, std::string>> columns{
        {"date", "timestamp"},           {"orig_date", "timestamp"},         {"amount", "numeric"},
        {"currency", "categorical"},     {"country", "categorical"},         {"merchant_id", "identifier"},
        {"mcc", "categorical"},          {"acquirer_id", "identifier"},      {"customer_present", "boolean"},
        {"terminal_capability", "categorical"}, {"terminal_input_mode", "categorical"},
        {"auth_mode", "categorical"},    {"card_verification", "categorical"}, {"terminal_serviced", "boolean"},
        {"pin_max_length", "numeric"}};

    std::set<std::string> expected;
    for (const auto& [col, kind] : columns) {
        const std::string base = "transactions." + col;
        if (kind == "timestamp")
            for (const auto& [t, out] : transform_out) expected.insert(t + "(" + base + ")");
        for (const std::string scope : {"cards", "customers"}) {
            for (const auto& a : aggs_for.at(kind)) expected.insert(scope + "." + a + "(" + base + ")");
            if (kind != "timestamp") continue;
            for (const auto& [t, out] : transform_out)
                for (const auto& a : aggs_for.at(out)) expected.insert(scope + "." + a + "(" + t + "(" + base + "))");
        }
    }
    EXPECT_EQ(got, expected);
}

TEST(Synthesize, OutputIsSortedAndStable) {
    const auto es = build_entityset(generate(tiny()));
    const auto a = synthesize(es, "transactions", 2, all_primitive_ids());
    const auto b = synthesize(es, "transactions", 2, all_primitive_ids());
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].name, b[i].name);
        if (i) { EXPECT_LT(a[i - 1].name, a[i].name); }
    }
}

TEST(Synthesize, CardTargetAggregatesChildren) {
    const auto es = cards_transactions();
    const auto n = names(synthesize(es, "cards", 2, {PrimitiveId::count, PrimitiveId::weekend, PrimitiveId::sum}));
    EXPECT_TRUE(n.count("cards.COUNT(transactions.amount)"));
    EXPECT_TRUE(n.count("cards.SUM(WEEKEND(transactions.date))"));
}

TEST(Synthesize, Errors) {
    const auto es = cards_transactions();
    EXPECT_THROW(synthesize(es, "merchants", 2, all_primitive_ids()), SchemaError);
    EXPECT_THROW(synthesize(es, "transactions", 0, all_primitive_ids()), UsageError);
    EXPECT_THROW(synthesize(es, "transactions", 2, {}), UsageError);
    EXPECT_THROW(find_feature(synthesize(es, "transactions", 1, {PrimitiveId::mean}), "cards.SUM(x)"), SchemaError);
}

TEST(EffectiveCutoff, Examples) {
    const Timestamp t = make_timestamp(2017, 8, 24, 13);
    const Timestamp jan1 = make_timestamp(2017, 1, 1);
    EXPECT_EQ(effective_cutoff(t, 1, jan1), make_timestamp(2017, 8, 24));
    EXPECT_EQ(effective_cutoff(t, 0, jan1), t);
    EXPECT_EQ(effective_cutoff(make_timestamp(2017, 1, 8), 7, jan1), make_timestamp(2017, 1, 8));
    EXPECT_EQ(effective_cutoff(make_timestamp(2016, 12, 31, 12), 7, jan1), jan1);
}

TEST(EffectiveCutoff, StalenessIsBoundedAndFloorIsIdempotent) {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<Timestamp> when(make_timestamp(2017, 1, 1), make_timestamp(2018, 1, 1));
    const Timestamp anchor = make_timestamp(2016, 12, 1);
    for (int days : {1, 7, 21, 35}) {
        for (int i = 0; i < 2000; ++i) {
            const Timestamp t = when(rng);
            const Timestamp e = effective_cutoff(t, days, anchor);
            ASSERT_LE(e, t);
            ASSERT_LT(t - e, days * kSecondsPerDay);
            ASSERT_EQ((e - anchor) % kSecondsPerDay, 0);
            ASSERT_EQ(effective_cutoff(e, days, anchor), e);
            ASSERT_EQ(e, oracle::grid(t, days, anchor));
        }
    }
}
