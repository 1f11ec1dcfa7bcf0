#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace portopt {

// Calendar date stored as days since 1970-01-01 (negative before).
// Weekdays are ISO numbered from Monday: mon=0 .. sun=6.
struct Date {
    std::int64_t days = 0;

    auto operator<=>(const Date&) const = default;

    int weekday() const { return static_cast<int>(((days % 7) + 7 + 3) % 7); }

    Date operator+(std::int64_t d) const { return Date{days + d}; }
    Date operator-(std::int64_t d) const { return Date{days - d}; }
    std::int64_t operator-(const Date& o) const { return days - o.days; }

    static Date from_ymd(int year, int month, int day);
    // Parses strict ISO-8601 "YYYY-MM-DD". Throws InputError on malformed input.
    static Date parse(const std::string& iso);
    std::string to_string() const;
};

inline constexpr int kMonday = 0;
inline constexpr int kTuesday = 1;
inline constexpr int kWednesday = 2;
inline constexpr int kThursday = 3;
inline constexpr int kFriday = 4;
inline constexpr int kSaturday = 5;
inline constexpr int kSunday = 6;

// Weekday name ("monday".."sunday", case-insensitive) to index. Throws InputError.
int parse_weekday(const std::string& name);

}  // namespace portopt
