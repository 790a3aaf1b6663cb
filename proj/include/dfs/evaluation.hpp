#pragma once

// Operating-point selection, confusion metrics and the false-positive /
// false-negative cost model. A transaction is flagged when score >= gamma.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "dfs/error.hpp"
#include "dfs/forest.hpp"

namespace dfs {

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    // null when the denominator is zero
    std::optional<double> tpr, fpr, precision, recall, f1;
};

inline Confusion confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
    Confusion c{tp, fp, tn, fn, {}, {}, {}, {}, {}};
    auto ratio = [](std::size_t a, std::size_t b) -> std::optional<double> {
        if (b == 0) return std::nullopt;
        return static_cast<double>(a) / static_cast<double>(b);
    };
    c.tpr = ratio(tp, tp + fn);
    c.recall = c.tpr;
    c.fpr = ratio(fp, fp + tn);
    c.precision = ratio(tp, tp + fp);
    if (c.precision && c.recall && *c.precision + *c.recall > 0)
        c.f1 = 2 * *c.precision * *c.recall / (*c.precision + *c.recall);
    return c;
}

inline Confusion confusion_at(std::span<const double> scores, std::span<const Label> labels, double gamma) {
    if (scores.size() != labels.size()) throw UsageError("scores and labels differ in length");
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool flagged = scores[i] >= gamma;
        if (labels[i])
            (flagged ? tp : fn)++;
        else
            (flagged ? fp : tn)++;
    }
    return confusion_from_counts(tp, fp, tn, fn);
}

inline std::vector<Label> predict_labels(std::span<const double> scores, double gamma) {
    std::vector<Label> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= gamma ? 1 : 0;
    return out;
}

struct OperatingPoint {
    double gamma = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool amount_weighted = false;
    bool feasible = true;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// gamma = argmax precision * [tpr >= target] over the distinct scores.
// Precision ties go to the larger gamma. When no candidate reaches the
// target, returns the gamma with the highest tpr and feasible = false.
inline OperatingPoint tune_threshold(std::span<const double> scores, std::span<const Label> labels,
                                     double target_tpr = 0.89, bool amount_weighted = false) {
    if (scores.size() != labels.size()) throw UsageError("scores and labels differ in length");
    for (double s : scores)
        if (!std::isfinite(s)) throw UsageError("scores must be finite");
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (positives == 0) throw UsageError("threshold tuning needs at least one positive label");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

    struct Best {
        std::size_t tp = 0, flagged = 0;
        double gamma = 0.0;
        bool set = false;
    } best, widest;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double gamma = scores[order[i]];
        while (i < order.size() && scores[order[i]] == gamma) tp += labels[order[i++]] == 1;
        const std::size_t flagged = i;
        const double tpr = static_cast<double>(tp) / static_cast<double>(positives);
        if (!widest.set || tp > widest.tp) widest = {tp, flagged, gamma, true};
        if (tpr < target_tpr) continue;
        // precision comparison by cross-multiplication: tp/flagged > best.tp/best.flagged
        if (!best.set || tp * best.flagged > best.tp * flagged) best = {tp, flagged, gamma, true};
    }

    const Best& pick = best.set ? best : widest;
    const auto c = confusion_at(scores, labels, pick.gamma);
    OperatingPoint op;
    op.gamma = pick.gamma;
    op.tpr = c.tpr.value_or(0.0);
    op.recall = op.tpr;
    op.fpr = c.fpr.value_or(0.0);
    op.precision = c.precision.value_or(0.0);
    op.f1 = c.f1.value_or(0.0);
    op.amount_weighted = amount_weighted;
    op.feasible = best.set;
    op.tp = c.tp;
    op.fp = c.fp;
    op.tn = c.tn;
    op.fn = c.fn;
    return op;
}

// score * amount; amounts must be positive.
inline std::vector<double> amount_weight(std::span<const double> scores, std::span<const double> amounts) {
    if (scores.size() != amounts.size()) throw UsageError("scores and amounts differ in length");
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!(amounts[i] > 0)) throw UsageError("amount weighting needs positive amounts");
        out[i] = scores[i] * amounts[i];
    }
    return out;
}

struct CostConstants {
    double interchange_fee = 0.0175;
    double lost_sale_fraction = 0.5;  // share of declined sales that do not go through on retry
};

struct CostReport {
    std::size_t fp_count = 0;
    std::size_t fn_count = 0;
    double cost_fp = 0.0;
    double cost_fn = 0.0;
    double total = 0.0;
};

// cost_fp = fee * lost fraction * sum of declined legitimate amounts;
// cost_fn = sum of missed fraud amounts (fully reimbursed).
inline CostReport cost_model(std::span<const Label> predictions, std::span<const Label> labels,
                             std::span<const double> amounts, const CostConstants& k = {}) {
    if (predictions.size() != labels.size() || labels.size() != amounts.size())
        throw UsageError("cost model inputs differ in length");
    CostReport r;
    double fp_amount = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (amounts[i] < 0) throw UsageError("negative amount in cost model");
        if (predictions[i] && !labels[i]) {
            ++r.fp_count;
            fp_amount += amounts[i];
        } else if (!predictions[i] && labels[i]) {
            ++r.fn_count;
            r.cost_fn += amounts[i];
        }
    }
    r.cost_fp = fp_amount * k.lost_sale_fraction * k.interchange_fee;
    r.total = r.cost_fp + r.cost_fn;
    return r;
}

inline nlohmann::json to_json(const OperatingPoint& op, const CostReport& cost) {
    return {{"gamma", op.gamma},       {"tpr", op.tpr},
            {"fpr", op.fpr},           {"precision", op.precision},
            {"recall", op.recall},     {"f1", op.f1},
            {"amount_weighted", op.amount_weighted},
            {"feasible", op.feasible}, {"fp_count", cost.fp_count},
            {"fn_count", cost.fn_count}, {"cost_fp", cost.cost_fp},
            {"cost_fn", cost.cost_fn}, {"total_cost", cost.total}};
}

}  // namespace dfs
