#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mobres {

/// Calendar date stored as a count of days since 1970-01-01 (proleptic Gregorian).
class Date {
public:
    Date() = default;
    explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int year, int month, int day) {
        if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month))
            throw std::invalid_argument("invalid calendar date");
        return Date(days_from_civil(year, month, day));
    }

    /// Parses "YYYY-MM-DD".
    static std::optional<Date> parse_iso(std::string_view s) {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
        return parse_parts(s.substr(0, 4), s.substr(5, 2), s.substr(8, 2));
    }

    /// Parses "YYYYMMDD".
    static std::optional<Date> parse_compact(std::string_view s) {
        if (s.size() != 8) return std::nullopt;
        return parse_parts(s.substr(0, 4), s.substr(4, 2), s.substr(6, 2));
    }

    std::int32_t days_since_epoch() const { return days_; }

    std::string to_iso() const {
        auto [y, m, d] = civil_from_days(days_);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
        return buf;
    }

    std::string to_compact() const {
        auto [y, m, d] = civil_from_days(days_);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d%02d%02d", y, m, d);
        return buf;
    }

    Date operator+(int days) const { return Date(days_ + days); }
    Date operator-(int days) const { return Date(days_ - days); }
    int operator-(Date other) const { return days_ - other.days_; }
    Date& operator++() { ++days_; return *this; }

    auto operator<=>(const Date&) const = default;

private:
    std::int32_t days_ = 0;

    static std::optional<Date> parse_parts(std::string_view ys, std::string_view ms, std::string_view ds) {
        int y = 0, m = 0, d = 0;
        if (!to_int(ys, y) || !to_int(ms, m) || !to_int(ds, d)) return std::nullopt;
        if (m < 1 || m > 12 || d < 1 || d > days_in_month(y, m)) return std::nullopt;
        return Date(days_from_civil(y, m, d));
    }

    static bool to_int(std::string_view s, int& out) {
        out = 0;
        for (char c : s) {
            if (c < '0' || c > '9') return false;
            out = out * 10 + (c - '0');
        }
        return !s.empty();
    }

    static bool is_leap(int y) { return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0); }

    static int days_in_month(int y, int m) {
        static constexpr int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        return m == 2 && is_leap(y) ? 29 : lengths[m - 1];
    }

    // Howard Hinnant's civil-days algorithms.
    static std::int32_t days_from_civil(int y, int m, int d) {
        y -= m <= 2;
        const int era = (y >= 0 ? y : y - 399) / 400;
        const unsigned yoe = static_cast<unsigned>(y - era * 400);
        const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return era * 146097 + static_cast<std::int32_t>(doe) - 719468;
    }

    struct Ymd { int y, m, d; };

    static Ymd civil_from_days(std::int32_t z) {
        z += 719468;
        const int era = (z >= 0 ? z : z - 146096) / 146097;
        const unsigned doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const int y = static_cast<int>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        const unsigned d = doy - (153 * mp + 2) / 5 + 1;
        const unsigned m = mp + (mp < 10 ? 3 : -9);
        return {y + (m <= 2), static_cast<int>(m), static_cast<int>(d)};
    }
};

} // namespace mobres
