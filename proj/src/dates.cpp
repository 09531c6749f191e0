#include "robustcov/dates.hpp"

#include "robustcov/errors.hpp"

#include <charconv>
#include <cstdio>

namespace robustcov::dates {

// Days-from-civil algorithm on the proleptic Gregorian calendar.
CivilDay days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);            // [0, 399]
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1; // [0, 365]
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;           // [0, 146096]
    return static_cast<CivilDay>(era) * 146097 + static_cast<CivilDay>(doe) - 719468;
}

void civil_from_days(CivilDay z, int& year, int& month, int& day) {
    z += 719468;
    const CivilDay era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int y = static_cast<int>(yoe) + static_cast<int>(era) * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    month = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    year = y + (month <= 2);
}

int iso_weekday(CivilDay z) {
    // 1970-01-01 was a Thursday (ISO weekday 4).
    return static_cast<int>(((z + 3) % 7 + 7) % 7) + 1;
}

IsoWeek iso_week(CivilDay z) {
    // The Thursday of a date's week determines its ISO year and week number.
    const CivilDay thursday = z + (4 - iso_weekday(z));
    int y, m, d;
    civil_from_days(thursday, y, m, d);
    const CivilDay jan1 = days_from_civil(y, 1, 1);
    const int week = static_cast<int>((thursday - jan1) / 7) + 1;
    return IsoWeek{y, week};
}

namespace {

bool parse_int_field(const char* begin, const char* end, int& out) {
    auto [p, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && p == end;
}

bool days_in_month_ok(int y, int m, int d) {
    static const int mdays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m < 1 || m > 12 || d < 1) return false;
    int cap = mdays[m - 1];
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    if (m == 2 && leap) cap = 29;
    return d <= cap;
}

} // namespace

CivilDay parse_iso_date(const std::string& text) {
    int y = 0, m = 0, d = 0;
    bool ok = text.size() == 10 && text[4] == '-' && text[7] == '-' &&
              parse_int_field(text.data(), text.data() + 4, y) &&
              parse_int_field(text.data() + 5, text.data() + 7, m) &&
              parse_int_field(text.data() + 8, text.data() + 10, d) && days_in_month_ok(y, m, d);
    if (!ok) throw data_error("MalformedCsv", "invalid ISO-8601 date: '" + text + "'");
    return days_from_civil(y, m, d);
}

std::string format_iso_date(CivilDay z) {
    int y, m, d;
    civil_from_days(z, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return std::string(buf);
}

} // namespace robustcov::dates
