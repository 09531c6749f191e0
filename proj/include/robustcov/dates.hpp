#pragma once

#include <cstdint>
#include <string>

namespace robustcov::dates {

/// Calendar date stored as days since 1970-01-01 (can be negative).
using CivilDay = std::int64_t;

CivilDay days_from_civil(int year, int month, int day);
void civil_from_days(CivilDay z, int& year, int& month, int& day);

/// ISO weekday, 1 = Monday .. 7 = Sunday.
int iso_weekday(CivilDay z);

/// ISO-8601 week-based year and week number (1..53).
struct IsoWeek {
    int year;
    int week;
    bool operator==(const IsoWeek&) const = default;
};
IsoWeek iso_week(CivilDay z);

/// Sortable scalar key for grouping rows by ISO week.
inline std::int64_t iso_week_key(CivilDay z) {
    IsoWeek w = iso_week(z);
    return static_cast<std::int64_t>(w.year) * 100 + w.week;
}

/// Parses strict "YYYY-MM-DD". Throws Error(Data, "MalformedCsv") on failure.
CivilDay parse_iso_date(const std::string& text);

/// Formats as "YYYY-MM-DD".
std::string format_iso_date(CivilDay z);

} // namespace robustcov::dates
