#pragma once

// Fraud-report labelling, card-level subsampling and stratified splitting.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "dfs/civil_time.hpp"
#include "dfs/csv.hpp"
#include "dfs/entityset.hpp"
#include "dfs/error.hpp"
#include "dfs/forest.hpp"

namespace dfs {

struct FraudReport {
    std::string card_number;
    Timestamp operation_date = 0;  // midnight UTC of the reported day
    double amount = 0.0;           // euros
    std::optional<std::string> currency;
};

inline std::vector<FraudReport> load_reports(const std::string& path) {
    auto t = csv::read(path);
    auto find = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(t.header.begin(), t.header.end(), name);
        if (it == t.header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - t.header.begin());
    };
    const auto card = find("card_number"), date = find("operation_date"), amount = find("amount");
    const auto currency = find("currency");
    if (!card || !date || !amount)
        throw SchemaError(path + ": fraud reports need card_number, operation_date and amount columns");
    std::vector<FraudReport> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (row.size() != t.header.size()) throw SchemaError(path + " row " + std::to_string(r + 1) + ": bad width");
        FraudReport rep;
        rep.card_number = row[*card];
        auto d = parse_date(row[*date]);
        if (!d) throw SchemaError(path + " row " + std::to_string(r + 1) + ": bad operation_date");
        rep.operation_date = *d;
        try {
            rep.amount = std::stod(row[*amount]);
        } catch (const std::exception&) {
            throw SchemaError(path + " row " + std::to_string(r + 1) + ": bad amount");
        }
        if (rep.card_number.empty() || !(rep.amount > 0))
            throw SchemaError(path + " row " + std::to_string(r + 1) + ": report needs a card and a positive amount");
        if (currency && !row[*currency].empty()) rep.currency = row[*currency];
        out.push_back(std::move(rep));
    }
    return out;
}

// Names of the transaction columns the preparation steps read.
struct TransactionColumns {
    std::string entity = "transactions";
    std::string card = "card_id";
    std::string time = "date";
    std::string original_time = "orig_date";
    std::string amount = "amount";
    std::string currency = "currency";
};

struct MatchStats {
    std::size_t reported = 0;
    std::size_t matched = 0;
    std::size_t unmatched = 0;
};

struct LabeledDataset {
    std::vector<Label> labels;                  // one per transaction row
    std::vector<std::uint32_t> matched_rows;    // ascending
    MatchStats stats;
};

inline std::int64_t to_cents(double amount) { return std::llround(amount * 100.0); }

// A report matches a transaction of the same card with the same amount to
// the cent whose timestamp or original timestamp falls on the reported day
// (and the same currency, when the report names one). Each transaction is
// matched at most once; the earliest unmatched candidate wins. Reports are
// processed in a canonical order, so the input order does not matter.
inline LabeledDataset match_reports(std::vector<FraudReport> reports, const EntitySet& es,
                                    const TransactionColumns& cols = {}) {
    const Entity& tx = es.entity(cols.entity);
    const Column& card = tx.column(cols.card);
    const auto times = tx.column(cols.time).times();
    const Column* orig = tx.find(cols.original_time);
    const auto amounts = tx.column(cols.amount).numbers();
    const Column* currency = tx.find(cols.currency);

    std::unordered_map<std::string, std::vector<std::uint32_t>> by_card;
    for (std::size_t r = 0; r < tx.size(); ++r)
        if (!card.is_null(r)) by_card[card.text(r)].push_back(static_cast<std::uint32_t>(r));
    for (auto& [k, rows] : by_card)
        std::stable_sort(rows.begin(), rows.end(), [&](auto a, auto b) { return times[a] < times[b]; });

    std::sort(reports.begin(), reports.end(), [](const FraudReport& a, const FraudReport& b) {
        return std::tuple(a.card_number, a.operation_date, to_cents(a.amount), a.currency.value_or("")) <
               std::tuple(b.card_number, b.operation_date, to_cents(b.amount), b.currency.value_or(""));
    });

    LabeledDataset out;
    out.labels.assign(tx.size(), 0);
    out.stats.reported = reports.size();
    for (const auto& rep : reports) {
        auto it = by_card.find(rep.card_number);
        bool found = false;
        if (it != by_card.end()) {
            const auto day = epoch_day(rep.operation_date);
            const auto cents = to_cents(rep.amount);
            for (auto r : it->second) {
                if (out.labels[r]) continue;
                if (to_cents(amounts[r]) != cents) continue;
                const bool same_day = epoch_day(times[r]) == day ||
                                      (orig && !orig->is_null(r) && epoch_day(orig->times()[r]) == day);
                if (!same_day) continue;
                if (rep.currency && currency && currency->text(r) != *rep.currency) continue;
                out.labels[r] = 1;
                out.matched_rows.push_back(r);
                found = true;
                break;
            }
        }
        (found ? out.stats.matched : out.stats.unmatched)++;
    }
    std::sort(out.matched_rows.begin(), out.matched_rows.end());
    return out;
}

// Fisher-Yates shuffle driven by a seeded engine.
template <class T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(v[i - 1], v[pick(rng)]);
    }
}

struct CardSample {
    std::vector<std::string> fraud_cards;  // sorted
    std::vector<std::string> clean_cards;  // sorted
    std::vector<std::uint32_t> rows;       // all transactions of the kept cards, ascending
    bool clean_cards_exhausted = false;    // ratio asked for more clean cards than exist
};

// Keeps every card with at least one fraud label plus round(ratio * |fraud
// cards|) uniformly drawn fraud-free cards, each with its full history.
inline CardSample sample_cards(const EntitySet& es, std::span<const Label> labels, double ratio, std::uint64_t seed,
                               const TransactionColumns& cols = {}) {
    if (ratio < 0) throw UsageError("sampling ratio must be non-negative");
    const Entity& tx = es.entity(cols.entity);
    if (labels.size() != tx.size()) throw UsageError("labels must cover every transaction");
    const Column& card = tx.column(cols.card);
    std::map<std::string, bool> has_fraud;
    for (std::size_t r = 0; r < tx.size(); ++r) {
        if (card.is_null(r)) continue;
        auto& f = has_fraud[card.text(r)];
        f = f || labels[r] == 1;
    }
    CardSample s;
    std::vector<std::string> clean;
    for (const auto& [c, fraud] : has_fraud) (fraud ? s.fraud_cards : clean).push_back(c);

    const auto wanted = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(s.fraud_cards.size())));
    std::mt19937_64 rng(seed);
    seeded_shuffle(clean, rng);
    if (wanted > clean.size()) s.clean_cards_exhausted = true;
    clean.resize(std::min(wanted, clean.size()));
    std::sort(clean.begin(), clean.end());
    s.clean_cards = std::move(clean);

    std::set<std::string> keep(s.fraud_cards.begin(), s.fraud_cards.end());
    keep.insert(s.clean_cards.begin(), s.clean_cards.end());
    for (std::size_t r = 0; r < tx.size(); ++r)
        if (!card.is_null(r) && keep.count(card.text(r))) s.rows.push_back(static_cast<std::uint32_t>(r));
    return s;
}

struct SplitFractions {
    double train = 0.55;
    double tune = 0.07;
    double test = 0.38;
};

enum class SplitMode { transaction, card };

struct Split {
    std::vector<std::uint32_t> train, tune, test;  // each ascending
    SplitFractions fractions;
};

namespace detail {

inline void check_fractions(const SplitFractions& f) {
    if (f.train < 0 || f.tune < 0 || f.test < 0 || std::abs(f.train + f.tune + f.test - 1.0) > 1e-9)
        throw UsageError("split fractions must be non-negative and sum to 1");
}

// Shuffles one stratum and cuts it by the fractions; test takes the remainder.
template <class T>
std::array<std::vector<T>, 3> cut_stratum(std::vector<T> items, const SplitFractions& f, std::mt19937_64& rng,
                                          const std::string& stratum) {
    seeded_shuffle(items, rng);
    const std::size_t n = items.size();
    const auto n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(f.train * n)));
    const auto n_tune = std::min<std::size_t>(n - n_train, static_cast<std::size_t>(std::llround(f.tune * n)));
    std::array<std::vector<T>, 3> parts;
    parts[0].assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));
    parts[1].assign(items.begin() + static_cast<std::ptrdiff_t>(n_train),
                    items.begin() + static_cast<std::ptrdiff_t>(n_train + n_tune));
    parts[2].assign(items.begin() + static_cast<std::ptrdiff_t>(n_train + n_tune), items.end());
    const double fr[3] = {f.train, f.tune, f.test};
    for (int k = 0; k < 3; ++k)
        if (fr[k] > 0 && parts[k].empty())
            throw UsageError("stratum '" + stratum + "' has " + std::to_string(n) +
                             " members, too few to appear in every split part");
    return parts;
}

}  // namespace detail

// Label-stratified split. `labels` is aligned with `ids`. In card mode all
// transactions of a card land in the same part and cards are stratified by
// whether they carry any fraud; `cards` (aligned with ids) is then required.
inline Split split(std::span<const std::uint32_t> ids, std::span<const Label> labels, const SplitFractions& fractions,
                   std::uint64_t seed, SplitMode mode = SplitMode::transaction,
                   std::span<const std::string> cards = {}) {
    detail::check_fractions(fractions);
    if (labels.size() != ids.size()) throw UsageError("split: labels must align with ids");
    std::mt19937_64 rng(seed);
    Split s;
    s.fractions = fractions;
    if (mode == SplitMode::transaction) {
        std::vector<std::uint32_t> fraud, legit;
        for (std::size_t i = 0; i < ids.size(); ++i) (labels[i] ? fraud : legit).push_back(ids[i]);
        std::sort(fraud.begin(), fraud.end());
        std::sort(legit.begin(), legit.end());
        auto pf = detail::cut_stratum(std::move(fraud), fractions, rng, "fraud");
        auto pl = detail::cut_stratum(std::move(legit), fractions, rng, "legitimate");
        std::vector<std::uint32_t>* parts[3] = {&s.train, &s.tune, &s.test};
        for (int k = 0; k < 3; ++k) {
            parts[k]->insert(parts[k]->end(), pf[k].begin(), pf[k].end());
            parts[k]->insert(parts[k]->end(), pl[k].begin(), pl[k].end());
        }
    } else {
        if (cards.size() != ids.size()) throw UsageError("card-level split needs a card id per transaction");
        std::map<std::string, std::vector<std::uint32_t>> members;
        std::map<std::string, bool> fraud_card;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            members[cards[i]].push_back(ids[i]);
            auto& f = fraud_card[cards[i]];
            f = f || labels[i] == 1;
        }
        std::vector<std::string> fraud, legit;
        for (const auto& [c, f] : fraud_card) (f ? fraud : legit).push_back(c);
        auto pf = detail::cut_stratum(std::move(fraud), fractions, rng, "fraud cards");
        auto pl = detail::cut_stratum(std::move(legit), fractions, rng, "legitimate cards");
        std::vector<std::uint32_t>* parts[3] = {&s.train, &s.tune, &s.test};
        for (int k = 0; k < 3; ++k)
            for (const auto* group : {&pf[k], &pl[k]})
                for (const auto& c : *group) parts[k]->insert(parts[k]->end(), members[c].begin(), members[c].end());
    }
    for (auto* p : {&s.train, &s.tune, &s.test}) std::sort(p->begin(), p->end());
    return s;
}

inline nlohmann::json split_to_json(const Split& s, const Entity& tx) {
    auto keys = [&](const std::vector<std::uint32_t>& rows) {
        std::vector<std::string> out;
        out.reserve(rows.size());
        for (auto r : rows) out.push_back(tx.key_of(r));
        return out;
    };
    return {{"train", keys(s.train)},
            {"tune", keys(s.tune)},
            {"test", keys(s.test)},
            {"fractions", {s.fractions.train, s.fractions.tune, s.fractions.test}}};
}

inline Split split_from_json(const nlohmann::json& j, const Entity& tx) {
    Split s;
    try {
        auto rows = [&](const char* part) {
            std::vector<std::uint32_t> out;
            for (const auto& k : j.at(part)) {
                auto r = tx.row_of(k.get<std::string>());
                if (!r) throw SchemaError(std::string("split manifest names unknown transaction ") + k.dump());
                out.push_back(static_cast<std::uint32_t>(*r));
            }
            std::sort(out.begin(), out.end());
            return out;
        };
        s.train = rows("train");
        s.tune = rows("tune");
        s.test = rows("test");
        const auto& f = j.at("fractions");
        s.fractions = {f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed split manifest: ") + e.what());
    }
    return s;
}

}  // namespace dfs
