#include <gtest/gtest.h>

#include <random>

#include "dfs/evaluation.hpp"
#include "oracle.hpp"

using namespace dfs;

namespace {

struct Case {
    std::vector<double> scores;
    std::vector<Label> labels;
};

// Coarse scores so that ties are common.
Case random_case(std::mt19937_64& rng, std::size_t n, int levels) {
    Case c;
    std::uniform_int_distribution<int> level(0, levels);
    std::bernoulli_distribution pos(0.2);
    for (std::size_t i = 0; i < n; ++i) {
        const Label y = pos(rng);
        // positives lean high
        const int l = std::min(levels, level(rng) + (y ? levels / 3 : 0));
        c.scores.push_back(static_cast<double>(l) / levels);
        c.labels.push_back(y);
    }
    if (std::count(c.labels.begin(), c.labels.end(), 1) == 0) c.labels[0] = 1;
    return c;
}

}  // namespace

TEST(TuneThreshold, SeparableExample) {
    const std::vector<double> s{0.9, 0.8, 0.1};
    const std::vector<Label> y{1, 1, 0};
    const auto op = tune_threshold(s, y, 0.89);
    EXPECT_EQ(op.gamma, 0.8);
    EXPECT_EQ(op.tpr, 1.0);
    EXPECT_EQ(op.precision, 1.0);
    EXPECT_TRUE(op.feasible);
}

TEST(TuneThreshold, PositivesBelowNegativesStillReachFullRecallAtTheLowestScore) {
    // flagging everything always gives tpr = 1, so any target <= 1 is feasible
    const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
    const std::vector<Label> y{1, 1, 0, 0};
    const auto op = tune_threshold(s, y, 0.89);
    EXPECT_TRUE(op.feasible);
    EXPECT_EQ(op.gamma, 0.1);
    EXPECT_EQ(op.precision, 0.5);
}

TEST(TuneThreshold, UnreachableTargetIsFlagged) {
    const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
    const std::vector<Label> y{1, 1, 0, 0};
    const auto op = tune_threshold(s, y, 1.5);
    EXPECT_FALSE(op.feasible);
    // fallback: widest recall, largest such gamma
    EXPECT_EQ(op.gamma, 0.1);
    EXPECT_EQ(op.tpr, 1.0);
}

TEST(TuneThreshold, PrecisionTiesGoToLargerGamma) {
    // gamma 0.9 and 0.5 both give precision 1 at tpr >= 0.5
    const std::vector<double> s{0.9, 0.5, 0.1};
    const std::vector<Label> y{1, 1, 0};
    EXPECT_EQ(tune_threshold(s, y, 0.5).gamma, 0.9);
}

TEST(TuneThreshold, MatchesExhaustiveScan) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const auto c = random_case(rng, 500, 5 + trial % 60);
        for (double target : {0.5, 0.89, 1.0}) {
            const auto op = tune_threshold(c.scores, c.labels, target);
            const auto ref = oracle::scan_thresholds(c.scores, c.labels, target);
            ASSERT_EQ(op.gamma, ref.gamma) << "trial " << trial << " target " << target;
            ASSERT_EQ(op.feasible, ref.feasible);
            ASSERT_DOUBLE_EQ(op.precision, ref.precision);
            ASSERT_DOUBLE_EQ(op.tpr, ref.tpr);
        }
    }
}

TEST(TuneThreshold, Errors) {
    EXPECT_THROW(tune_threshold(std::vector<double>{0.1}, std::vector<Label>{0}), UsageError);
    EXPECT_THROW(tune_threshold(std::vector<double>{0.1}, std::vector<Label>{1, 0}), UsageError);
    EXPECT_THROW(tune_threshold(std::vector<double>{std::nan("")}, std::vector<Label>{1}), UsageError);
}

TEST(AmountWeight, Examples) {
    const auto w = amount_weight(std::vector<double>{0.5, 0.5}, std::vector<double>{100, 10});
    EXPECT_EQ(w, (std::vector<double>{50, 5}));
    EXPECT_THROW(amount_weight(std::vector<double>{0.5}, std::vector<double>{0}), UsageError);
}

TEST(AmountWeight, UnitAmountsKeepTheOrdering) {
    std::mt19937_64 rng(2);
    const auto c = random_case(rng, 300, 40);
    const std::vector<double> ones(c.scores.size(), 1.0);
    const auto w = amount_weight(c.scores, ones);
    EXPECT_EQ(w, c.scores);
    EXPECT_EQ(tune_threshold(w, c.labels).gamma, tune_threshold(c.scores, c.labels).gamma);
}

TEST(AmountWeight, ScalingAmountsScalesGamma) {
    std::mt19937_64 rng(3);
    std::lognormal_distribution<double> amount(3.5, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto c = random_case(rng, 400, 50);
        std::vector<double> a(c.scores.size());
        for (auto& x : a) x = amount(rng);
        const auto base = tune_threshold(amount_weight(c.scores, a), c.labels, 0.89, true);
        for (double k : {4.0, 0.25, 3.7}) {
            std::vector<double> scaled_scores = amount_weight(c.scores, a);
            for (auto& v : scaled_scores) v *= k;
            const auto op = tune_threshold(scaled_scores, c.labels, 0.89, true);
            EXPECT_NEAR(op.gamma, base.gamma * k, 1e-12 * base.gamma * k);
            EXPECT_EQ(op.tp, base.tp);
            EXPECT_EQ(op.fp, base.fp);
            EXPECT_EQ(predict_labels(scaled_scores, op.gamma), predict_labels(amount_weight(c.scores, a), base.gamma));
        }
    }
}

TEST(Confusion, Examples) {
    const std::vector<double> s{0.9, 0.8, 0.2, 0.1};
    const std::vector<Label> y{1, 1, 0, 0};
    const auto c = confusion_at(s, y, 0.5);
    EXPECT_EQ(*c.precision, 1.0);
    EXPECT_EQ(*c.recall, 1.0);
    EXPECT_EQ(*c.f1, 1.0);
    EXPECT_EQ(*c.fpr, 0.0);
    const auto none = confusion_at(s, y, 0.95);
    EXPECT_FALSE(none.precision);
    EXPECT_EQ(none.fn, 2u);
    EXPECT_EQ(none.tp + none.fp, 0u);
}

TEST(Confusion, MatchesNaiveRecount) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const auto c = random_case(rng, 200, 20);
        const double g = static_cast<double>(rng() % 21) / 20;
        const auto m = confusion_at(c.scores, c.labels, g);
        std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (std::size_t i = 0; i < c.scores.size(); ++i) {
            if (c.scores[i] >= g && c.labels[i] == 1) ++tp;
            if (c.scores[i] >= g && c.labels[i] == 0) ++fp;
            if (c.scores[i] < g && c.labels[i] == 0) ++tn;
            if (c.scores[i] < g && c.labels[i] == 1) ++fn;
        }
        ASSERT_EQ(m.tp, tp);
        ASSERT_EQ(m.fp, fp);
        ASSERT_EQ(m.tn, tn);
        ASSERT_EQ(m.fn, fn);
        if (tp + fp) { ASSERT_DOUBLE_EQ(*m.precision, static_cast<double>(tp) / (tp + fp)); }
        ASSERT_DOUBLE_EQ(*m.tpr, static_cast<double>(tp) / (tp + fn));
        if (fp + tn) { ASSERT_DOUBLE_EQ(*m.fpr, static_cast<double>(fp) / (fp + tn)); }
    }
}

TEST(Cost, Examples) {
    const auto fp = cost_model(std::vector<Label>{1}, std::vector<Label>{0}, std::vector<double>{1000});
    EXPECT_NEAR(fp.cost_fp, 8.75, 1e-12);
    EXPECT_EQ(fp.cost_fn, 0.0);
    const auto fn = cost_model(std::vector<Label>{0}, std::vector<Label>{1}, std::vector<double>{200});
    EXPECT_EQ(fn.cost_fn, 200.0);
    EXPECT_EQ(fn.fn_count, 1u);
    const auto none = cost_model(std::vector<Label>{1, 0}, std::vector<Label>{1, 0}, std::vector<double>{5, 7});
    EXPECT_EQ(none.total, 0.0);
}

TEST(Cost, AdditiveOverPartitions) {
    std::mt19937_64 rng(5);
    std::lognormal_distribution<double> amount(3.5, 1.2);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1000;
        std::vector<Label> pred(n), lab(n);
        std::vector<double> a(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = rng() % 5 == 0;
            lab[i] = rng() % 7 == 0;
            a[i] = std::round(amount(rng) * 100) / 100;
        }
        const auto whole = cost_model(pred, lab, a);
        const int parts = 2 + trial % 5;
        std::vector<std::vector<Label>> pp(parts), ll(parts);
        std::vector<std::vector<double>> aa(parts);
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = rng() % parts;
            pp[k].push_back(pred[i]);
            ll[k].push_back(lab[i]);
            aa[k].push_back(a[i]);
        }
        double fp = 0, fnc = 0;
        std::size_t fpn = 0, fnn = 0;
        for (int k = 0; k < parts; ++k) {
            const auto r = cost_model(pp[k], ll[k], aa[k]);
            fp += r.cost_fp;
            fnc += r.cost_fn;
            fpn += r.fp_count;
            fnn += r.fn_count;
        }
        EXPECT_LT(std::abs(fp - whole.cost_fp), 0.005);
        EXPECT_LT(std::abs(fnc - whole.cost_fn), 0.005);
        EXPECT_LT(std::abs(fp + fnc - whole.total), 0.005);
        EXPECT_EQ(fpn, whole.fp_count);
        EXPECT_EQ(fnn, whole.fn_count);
    }
}

TEST(Cost, RaisingGammaTradesFalsePositivesForFalseNegatives) {
    std::mt19937_64 rng(6);
    const auto c = random_case(rng, 800, 30);
    std::vector<double> a(c.scores.size());
    for (auto& x : a) x = 1.0 + static_cast<double>(rng() % 500);
    double last_fp = std::numeric_limits<double>::infinity(), last_fn = -1;
    for (int k = 0; k <= 30; ++k) {
        const double g = k / 30.0;
        const auto r = cost_model(predict_labels(c.scores, g), c.labels, a);
        EXPECT_LE(r.cost_fp, last_fp);
        EXPECT_GE(r.cost_fn, last_fn);
        last_fp = r.cost_fp;
        last_fn = r.cost_fn;
    }
}
