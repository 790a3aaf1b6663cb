#pragma once

// Seeded synthetic card-transaction generator.
//
// Every card gets a behavioural profile (typical amount, active hours, home
// country, favourite merchants). Compromised cards additionally receive a
// short burst of fraudulent transactions drawn around the card's own profile:
// a multiple of its usual amount, at an hour it is normally inactive, often
// abroad and at an unfamiliar merchant. The population-wide marginals of
// fraud and legitimate transactions overlap, so the signal is mostly visible
// relative to the card's history.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfs/civil_time.hpp"
#include "dfs/csv.hpp"
#include "dfs/entityset.hpp"
#include "dfs/error.hpp"

namespace dfs {

struct GenConfig {
    int n_cards = 4400;
    int days = 180;
    std::uint64_t seed = 7;
    double fraud_card_rate = 0.25;       // share of cards that get compromised
    double fraud_txn_rate = 0.015;       // target share of fraudulent transactions
    double unmatched_report_rate = 0.05; // reports whose amount is off by one cent
    double txns_per_card_day = 0.14;     // median card intensity
    int n_merchants = 400;
    Timestamp start = make_timestamp(2017, 1, 1);
};

inline nlohmann::json to_json(const GenConfig& c) {
    return {{"n_cards", c.n_cards},
            {"days", c.days},
            {"seed", c.seed},
            {"fraud_card_rate", c.fraud_card_rate},
            {"fraud_txn_rate", c.fraud_txn_rate},
            {"unmatched_report_rate", c.unmatched_report_rate},
            {"txns_per_card_day", c.txns_per_card_day},
            {"n_merchants", c.n_merchants},
            {"start", format_date(c.start)}};
}

inline GenConfig gen_config_from_json(const nlohmann::json& j, GenConfig c = {}) {
    c.n_cards = j.value("n_cards", c.n_cards);
    c.days = j.value("days", c.days);
    c.seed = j.value("seed", c.seed);
    c.fraud_card_rate = j.value("fraud_card_rate", c.fraud_card_rate);
    c.fraud_txn_rate = j.value("fraud_txn_rate", c.fraud_txn_rate);
    c.unmatched_report_rate = j.value("unmatched_report_rate", c.unmatched_report_rate);
    c.txns_per_card_day = j.value("txns_per_card_day", c.txns_per_card_day);
    c.n_merchants = j.value("n_merchants", c.n_merchants);
    if (j.contains("start")) {
        auto t = parse_date(j.at("start").get<std::string>());
        if (!t) throw UsageError("generator start must be YYYY-MM-DD");
        c.start = *t;
    }
    return c;
}

struct CardProfile {
    double mean_amount;
    double amount_dispersion;  // log-space standard deviation
    double active_hour;        // centre of the daily activity window
    double hour_spread;
    int home_country;
    double travel_rate;
    std::vector<int> favourite_merchants;
    double intensity;  // transactions per day
    double present_rate;
};

struct GeneratedData {
    EntitySchema customer_schema, card_schema, transaction_schema;
    std::vector<std::vector<std::string>> customers, cards, transactions;
    std::vector<std::vector<std::string>> reports;  // card_number, operation_date, amount, currency
    std::vector<int> is_fraud;                      // ground truth, aligned with transactions
};

inline EntitySchema reference_transaction_schema() {
    using T = ColumnType;
    return {"transactions",
            "transaction_id",
            "date",
            {{"transaction_id", T::identifier()},
             {"card_id", T::foreign_key("cards")},
             {"date", T::timestamp()},
             {"orig_date", T::timestamp()},
             {"amount", T::numeric(Unit::currency_euro)},
             {"currency", T::categorical()},
             {"country", T::categorical()},
             {"merchant_id", T::identifier()},
             {"mcc", T::categorical()},
             {"acquirer_id", T::identifier()},
             {"customer_present", T::boolean()},
             {"terminal_capability", T::categorical()},
             {"terminal_input_mode", T::categorical()},
             {"auth_mode", T::categorical()},
             {"card_verification", T::categorical()},
             {"terminal_serviced", T::boolean()},
             {"pin_max_length", T::numeric(Unit::count)}}};
}

inline EntitySchema reference_card_schema() {
    using T = ColumnType;
    return {"cards",
            "card_id",
            "issued",
            {{"card_id", T::identifier()},
             {"customer_id", T::foreign_key("customers")},
             {"issued", T::timestamp()},
             {"card_type", T::categorical()}}};
}

inline EntitySchema reference_customer_schema() {
    using T = ColumnType;
    return {"customers", "customer_id", "", {{"customer_id", T::identifier()}, {"segment", T::categorical()}}};
}

namespace detail {

struct Country {
    const char* code;
    const char* currency;
    double weight;
};

inline constexpr std::array<Country, 8> kCountries{{{"ES", "EUR", 0.55},
                                                    {"FR", "EUR", 0.10},
                                                    {"PT", "EUR", 0.08},
                                                    {"IT", "EUR", 0.07},
                                                    {"DE", "EUR", 0.06},
                                                    {"GB", "GBP", 0.05},
                                                    {"US", "USD", 0.04},
                                                    {"MX", "MXN", 0.05}}};

inline constexpr std::array<const char*, 12> kMcc{"5411", "5812", "5541", "5311", "5732", "5944",
                                                  "4111", "7011", "5999", "5912", "4722", "5691"};

inline constexpr std::array<const char*, 5> kTerminalCapability{"can_print", "can_print_and_display", "can_display",
                                                                "cannot_print_or_display", "unknown"};

struct Merchant {
    int mcc;
    int acquirer;
    int capability;
    bool serviced;
    int pin_max_length;
};

struct Txn {
    int card;
    Timestamp time;
    Timestamp orig;
    double amount;
    int country;
    int merchant;
    bool present;
    bool fraud;
    int verification;
    int input_mode;
    int auth_mode;
};

template <class Rng>
int weighted_country(Rng& rng, int exclude = -1) {
    double total = 0;
    for (int i = 0; i < static_cast<int>(kCountries.size()); ++i)
        if (i != exclude) total += kCountries[i].weight;
    double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    for (int i = 0; i < static_cast<int>(kCountries.size()); ++i) {
        if (i == exclude) continue;
        u -= kCountries[i].weight;
        if (u <= 0) return i;
    }
    return exclude == 0 ? 1 : 0;
}

inline double wrap_hour(double h) {
    h = std::fmod(h, 24.0);
    return h < 0 ? h + 24.0 : h;
}

inline std::string money(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace detail

inline GeneratedData generate(const GenConfig& cfg) {
    using namespace detail;
    if (cfg.n_cards < 1 || cfg.days < 2) throw UsageError("generator needs at least one card and two days");
    if (cfg.fraud_card_rate < 0 || cfg.fraud_card_rate >= 1 || cfg.fraud_txn_rate < 0 || cfg.fraud_txn_rate >= 1)
        throw UsageError("fraud rates must lie in [0, 1)");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unif(rng); };
    auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<Merchant> merchants(static_cast<std::size_t>(cfg.n_merchants));
    const int n_acquirers = std::max(4, cfg.n_merchants / 25);
    for (auto& m : merchants) {
        m.mcc = pick(static_cast<int>(kMcc.size()));
        m.acquirer = pick(n_acquirers);
        m.capability = pick(static_cast<int>(kTerminalCapability.size()));
        m.serviced = unif(rng) < 0.8;
        m.pin_max_length = std::array<int, 4>{4, 6, 8, 12}[static_cast<std::size_t>(pick(4))];
    }

    GeneratedData out;
    out.customer_schema = reference_customer_schema();
    out.card_schema = reference_card_schema();
    out.transaction_schema = reference_transaction_schema();

    // Customers own one to three cards.
    std::vector<int> owner(static_cast<std::size_t>(cfg.n_cards));
    int n_customers = 0;
    for (int c = 0; c < cfg.n_cards;) {
        const int k = 1 + pick(3);
        for (int i = 0; i < k && c < cfg.n_cards; ++i) owner[static_cast<std::size_t>(c++)] = n_customers;
        ++n_customers;
    }
    auto customer_id = [](int i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "u%06d", i);
        return std::string(buf);
    };
    auto card_id = [](int i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "c%06d", i);
        return std::string(buf);
    };
    static constexpr std::array<const char*, 3> kSegments{"retail", "premium", "business"};
    for (int u = 0; u < n_customers; ++u)
        out.customers.push_back({customer_id(u), kSegments[static_cast<std::size_t>(pick(3))]});
    static constexpr std::array<const char*, 2> kCardTypes{"debit", "credit"};
    for (int c = 0; c < cfg.n_cards; ++c)
        out.cards.push_back({card_id(c), customer_id(owner[static_cast<std::size_t>(c)]),
                             format_date(cfg.start - static_cast<Timestamp>(30 + pick(1500)) * kSecondsPerDay),
                             kCardTypes[static_cast<std::size_t>(pick(2))]});

    // Profiles first, so the fraud burst size can be calibrated to volume.
    std::vector<CardProfile> profiles;
    std::vector<bool> compromised;
    double expected_volume = 0;
    for (int c = 0; c < cfg.n_cards; ++c) {
        CardProfile p;
        p.mean_amount = std::exp(std::log(45.0) + 0.9 * normal(rng));
        p.amount_dispersion = uniform(0.25, 0.6);
        p.active_hour = uniform(8.0, 21.0);
        p.hour_spread = uniform(1.0, 2.5);
        p.home_country = weighted_country(rng);
        p.travel_rate = uniform(0.01, 0.06);
        const int n_fav = 4 + pick(9);
        for (int i = 0; i < n_fav; ++i) p.favourite_merchants.push_back(pick(cfg.n_merchants));
        p.intensity = cfg.txns_per_card_day * std::exp(0.5 * normal(rng));
        p.present_rate = uniform(0.5, 0.95);
        expected_volume += p.intensity * cfg.days;
        profiles.push_back(std::move(p));
        compromised.push_back(unif(rng) < cfg.fraud_card_rate);
    }
    const auto n_compromised = std::count(compromised.begin(), compromised.end(), true);
    const double burst_mean =
        n_compromised ? std::max(1.0, cfg.fraud_txn_rate * expected_volume / static_cast<double>(n_compromised)) : 0.0;

    // Fraudsters favour merchants whose goods resell easily.
    std::vector<int> risky;
    for (int i = 0; i < cfg.n_merchants; ++i) {
        const std::string mcc = kMcc[static_cast<std::size_t>(merchants[static_cast<std::size_t>(i)].mcc)];
        if (mcc == "5732" || mcc == "5944" || mcc == "4722") risky.push_back(i);
    }
    auto pick_risky = [&] {
        return risky.empty() ? pick(cfg.n_merchants) : risky[static_cast<std::size_t>(pick(static_cast<int>(risky.size())))];
    };

    std::vector<Txn> txns;
    auto draw_hour_time = [&](Timestamp day_start, double hour) {
        const double h = wrap_hour(hour);
        return day_start + static_cast<Timestamp>(h * 3600.0);
    };
    auto present_details = [&](Txn& t) {
        if (t.present) {
            t.input_mode = pick(3);  // chip, contactless, swipe
            t.auth_mode = pick(2);   // pin, signature
        } else {
            t.input_mode = 3 + pick(2);  // ecommerce, keyed
            t.auth_mode = 2 + pick(2);   // 3ds, none
        }
        const double v = unif(rng);
        t.verification = v < 0.97 ? 0 : (v < 0.99 ? 1 : 2);
    };

    for (int c = 0; c < cfg.n_cards; ++c) {
        const auto& p = profiles[static_cast<std::size_t>(c)];
        const std::size_t first = txns.size();
        std::poisson_distribution<int> count(p.intensity * cfg.days);
        const int n = count(rng);
        for (int i = 0; i < n; ++i) {
            Txn t{};
            t.card = c;
            const Timestamp day = cfg.start + static_cast<Timestamp>(pick(cfg.days)) * kSecondsPerDay;
            t.time = draw_hour_time(day, p.active_hour + p.hour_spread * normal(rng));
            t.amount = std::max(0.5, std::round(p.mean_amount * std::exp(p.amount_dispersion * normal(rng)) * 100) / 100);
            t.country = unif(rng) < p.travel_rate ? weighted_country(rng, p.home_country) : p.home_country;
            t.merchant = unif(rng) < 0.85
                             ? p.favourite_merchants[static_cast<std::size_t>(pick(static_cast<int>(p.favourite_merchants.size())))]
                             : pick(cfg.n_merchants);
            t.present = unif(rng) < p.present_rate;
            present_details(t);
            txns.push_back(t);
        }
        if (compromised[static_cast<std::size_t>(c)]) {
            std::poisson_distribution<int> extra(burst_mean - 1.0);
            const int k = 1 + (burst_mean > 1.0 ? extra(rng) : 0);
            const Timestamp day =
                cfg.start + static_cast<Timestamp>(cfg.days / 4 + pick(cfg.days - cfg.days / 4)) * kSecondsPerDay;
            Timestamp when = draw_hour_time(day, p.active_hour + 12.0 + 1.5 * normal(rng));
            const int country = unif(rng) < 0.85 ? weighted_country(rng, p.home_country) : p.home_country;
            for (int i = 0; i < k; ++i) {
                Txn t{};
                t.card = c;
                t.fraud = true;
                t.time = when;
                t.amount = std::round(p.mean_amount * std::exp(uniform(0.8, 2.0)) * 100) / 100;
                t.country = country;
                t.merchant = unif(rng) < 0.5 ? pick_risky() : pick(cfg.n_merchants);
                t.present = unif(rng) < 0.15;
                present_details(t);
                txns.push_back(t);
                when += static_cast<Timestamp>(uniform(600.0, 6 * 3600.0));
            }
        }
        // strictly increasing per-card timestamps
        std::sort(txns.begin() + static_cast<std::ptrdiff_t>(first), txns.end(),
                  [](const Txn& a, const Txn& b) { return a.time < b.time; });
        for (std::size_t i = first + 1; i < txns.size(); ++i)
            if (txns[i].time <= txns[i - 1].time) txns[i].time = txns[i - 1].time + 1;
        for (std::size_t i = first; i < txns.size(); ++i)
            txns[i].orig = unif(rng) < 0.1 ? txns[i].time - static_cast<Timestamp>(uniform(3600.0, 30 * 3600.0))
                                           : txns[i].time;
    }

    std::stable_sort(txns.begin(), txns.end(), [](const Txn& a, const Txn& b) {
        return a.time != b.time ? a.time < b.time : a.card < b.card;
    });

    static constexpr std::array<const char*, 5> kInputModes{"chip", "contactless", "swipe", "ecommerce", "keyed"};
    static constexpr std::array<const char*, 4> kAuthModes{"pin", "signature", "3ds", "none"};
    static constexpr std::array<const char*, 3> kVerification{"ok", "cvv_mismatch", "not_checked"};
    for (std::size_t i = 0; i < txns.size(); ++i) {
        const auto& t = txns[i];
        const auto& m = merchants[static_cast<std::size_t>(t.merchant)];
        char id[32];
        std::snprintf(id, sizeof id, "t%08zu", i);
        char merchant[16], acquirer[16];
        std::snprintf(merchant, sizeof merchant, "m%04d", t.merchant);
        std::snprintf(acquirer, sizeof acquirer, "a%03d", m.acquirer);
        const auto& country = kCountries[static_cast<std::size_t>(t.country)];
        out.transactions.push_back({id,
                                    card_id(t.card),
                                    format_timestamp(t.time),
                                    format_timestamp(t.orig),
                                    money(t.amount),
                                    country.currency,
                                    country.code,
                                    merchant,
                                    kMcc[static_cast<std::size_t>(m.mcc)],
                                    acquirer,
                                    t.present ? "1" : "0",
                                    kTerminalCapability[static_cast<std::size_t>(m.capability)],
                                    kInputModes[static_cast<std::size_t>(t.input_mode)],
                                    kAuthModes[static_cast<std::size_t>(t.auth_mode)],
                                    kVerification[static_cast<std::size_t>(t.verification)],
                                    m.serviced ? "1" : "0",
                                    std::to_string(m.pin_max_length)});
        out.is_fraud.push_back(t.fraud ? 1 : 0);
        if (!t.fraud) continue;
        const bool use_orig = t.orig != t.time && unif(rng) < 0.3;
        double amount = t.amount;
        if (unif(rng) < cfg.unmatched_report_rate) amount += 0.01;
        out.reports.push_back({card_id(t.card), format_date(use_orig ? t.orig : t.time), money(amount),
                               unif(rng) < 0.5 ? country.currency : ""});
    }
    return out;
}

// On-disk layout: one CSV and one schema sidecar per entity, the fraud
// reports, and dataset.json tying entities and relationships together.
inline void write_dataset(const GeneratedData& d, const std::string& dir, const nlohmann::json& provenance = {}) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto write_entity = [&](const EntitySchema& s, const std::vector<std::vector<std::string>>& rows) {
        std::ofstream csv_out(fs::path(dir) / (s.entity + ".csv"));
        std::vector<std::string> header;
        for (const auto& c : s.columns) header.push_back(c.name);
        csv::write_row(csv_out, header);
        for (const auto& r : rows) csv::write_row(csv_out, r);
        std::ofstream schema_out(fs::path(dir) / (s.entity + ".schema.json"));
        schema_out << to_json(s).dump(2) << '\n';
    };
    write_entity(d.customer_schema, d.customers);
    write_entity(d.card_schema, d.cards);
    write_entity(d.transaction_schema, d.transactions);
    {
        std::ofstream rep(fs::path(dir) / "fraud_reports.csv");
        csv::write_row(rep, {"card_number", "operation_date", "amount", "currency"});
        for (const auto& r : d.reports) csv::write_row(rep, r);
    }
    nlohmann::json manifest{
        {"entities",
         {{{"name", "customers"}, {"csv", "customers.csv"}, {"schema", "customers.schema.json"}},
          {{"name", "cards"}, {"csv", "cards.csv"}, {"schema", "cards.schema.json"}},
          {{"name", "transactions"}, {"csv", "transactions.csv"}, {"schema", "transactions.schema.json"}}}},
        {"relationships",
         {{{"parent", "customers"}, {"parent_key", "customer_id"}, {"child", "cards"}, {"child_fk", "customer_id"}},
          {{"parent", "cards"}, {"parent_key", "card_id"}, {"child", "transactions"}, {"child_fk", "card_id"}}}},
        {"reports", "fraud_reports.csv"}};
    if (!provenance.is_null()) manifest["provenance"] = provenance;
    std::ofstream(fs::path(dir) / "dataset.json") << manifest.dump(2) << '\n';
}

// In-memory EntitySet built from generated rows (same parsing as the CSV path).
inline EntitySet build_entityset(const GeneratedData& d) {
    EntitySet es;
    es.add_entity(make_entity(d.customer_schema, d.customers));
    es.add_entity(make_entity(d.card_schema, d.cards));
    es.add_entity(make_entity(d.transaction_schema, d.transactions));
    es.add_relationship({"customers", "customer_id", "cards", "customer_id"});
    es.add_relationship({"cards", "card_id", "transactions", "card_id"});
    return es;
}

struct Dataset {
    EntitySet es;
    std::string reports_path;
};

inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const auto manifest_path = fs::path(dir) / "dataset.json";
    std::ifstream in(manifest_path);
    if (!in) throw MissingInputError("cannot open " + manifest_path.string());
    nlohmann::json m;
    try {
        in >> m;
        Dataset ds;
        for (const auto& e : m.at("entities")) {
            auto schema = load_schema((fs::path(dir) / e.at("schema").get<std::string>()).string());
            if (schema.entity != e.at("name").get<std::string>())
                throw SchemaError("schema for " + e.at("name").get<std::string>() + " declares entity " +
                                  schema.entity);
            ds.es.add_entity(load_entity((fs::path(dir) / e.at("csv").get<std::string>()).string(), schema));
        }
        for (const auto& r : m.at("relationships"))
            ds.es.add_relationship({r.at("parent"), r.at("parent_key"), r.at("child"), r.at("child_fk")});
        ds.reports_path = (fs::path(dir) / m.value("reports", std::string("fraud_reports.csv"))).string();
        return ds;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(manifest_path.string() + ": " + e.what());
    }
}

}  // namespace dfs
