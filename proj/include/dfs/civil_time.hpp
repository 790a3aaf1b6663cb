#pragma once

// UTC calendar helpers over integer epoch seconds. No timezone handling.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace dfs {

using Timestamp = std::int64_t;  // seconds since 1970-01-01T00:00:00Z

inline constexpr Timestamp kSecondsPerDay = 86400;
inline constexpr Timestamp kSecondsPerHour = 3600;

// Days since epoch, floored (correct for negative timestamps too).
constexpr std::int64_t epoch_day(Timestamp t) noexcept {
    return t >= 0 ? t / kSecondsPerDay : -((-t + kSecondsPerDay - 1) / kSecondsPerDay);
}

constexpr Timestamp floor_to_midnight(Timestamp t) noexcept { return epoch_day(t) * kSecondsPerDay; }

inline std::chrono::year_month_day civil_date(Timestamp t) {
    return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{epoch_day(t)}}};
}

inline Timestamp make_timestamp(int y, unsigned m, unsigned d, int hh = 0, int mm = 0, int ss = 0) {
    const auto days = std::chrono::sys_days{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
    return static_cast<Timestamp>(days.time_since_epoch().count()) * kSecondsPerDay + hh * kSecondsPerHour +
           mm * 60 + ss;
}

// 0 = Sunday ... 6 = Saturday.
inline unsigned weekday(Timestamp t) {
    return std::chrono::weekday{std::chrono::sys_days{std::chrono::days{epoch_day(t)}}}.c_encoding();
}

inline bool is_weekend(Timestamp t) {
    const unsigned wd = weekday(t);
    return wd == 0 || wd == 6;
}

inline unsigned hour_of_day(Timestamp t) {
    return static_cast<unsigned>((t - floor_to_midnight(t)) / kSecondsPerHour);
}

inline unsigned day_of_month(Timestamp t) { return static_cast<unsigned>(civil_date(t).day()); }

namespace detail {

inline bool parse_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    const char* first = s.data() + pos;
    const char* last = first + len;
    for (const char* p = first; p != last; ++p)
        if (*p < '0' || *p > '9') return false;
    return std::from_chars(first, last, out).ec == std::errc{};
}

}  // namespace detail

// Accepts "YYYY-MM-DD".
inline std::optional<Timestamp> parse_date(std::string_view s) {
    int y = 0, m = 0, d = 0;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    if (!detail::parse_fixed(s, 0, 4, y) || !detail::parse_fixed(s, 5, 2, m) || !detail::parse_fixed(s, 8, 2, d))
        return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return make_timestamp(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

// Accepts "YYYY-MM-DD HH:MM:SS", the same with a 'T' separator and optional
// trailing 'Z', a bare date, or an integer number of epoch seconds.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.size() >= 10 && s[4] == '-') {
        auto date = parse_date(s.substr(0, 10));
        if (!date) return std::nullopt;
        if (s.size() == 10) return date;
        std::string_view rest = s.substr(10);
        if (rest.back() == 'Z') rest.remove_suffix(1);
        int hh = 0, mm = 0, ss = 0;
        if (rest.size() != 9 || (rest[0] != ' ' && rest[0] != 'T') || rest[3] != ':' || rest[6] != ':')
            return std::nullopt;
        if (!detail::parse_fixed(rest, 1, 2, hh) || !detail::parse_fixed(rest, 4, 2, mm) ||
            !detail::parse_fixed(rest, 7, 2, ss))
            return std::nullopt;
        if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
        return *date + hh * kSecondsPerHour + mm * 60 + ss;
    }
    Timestamp value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

inline std::string format_date(Timestamp t) {
    const auto ymd = civil_date(t);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

inline std::string format_timestamp(Timestamp t) {
    const Timestamp secs = t - floor_to_midnight(t);
    char buf[16];
    std::snprintf(buf, sizeof buf, " %02d:%02d:%02d", static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60),
                  static_cast<int>(secs % 60));
    return format_date(t) + buf;
}

}  // namespace dfs
