#include "ampsim/hours.hpp"

#include <array>
#include <cstdio>

#include "ampsim/errors.hpp"

namespace ampsim {
namespace {

// Days since 1970-01-01 for a proleptic Gregorian civil date (Howard
// Hinnant's days_from_civil). Exact for the full int range we care about.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);             // [0, 399]
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;  // [0, 365]
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;            // [0, 146096]
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);          // [0, 146096]
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yi = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);          // [0, 365]
    const unsigned mp = (5 * doy + 2) / 153;                               // [0, 11]
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yi + (m <= 2));
}

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr std::array<int, 12> lengths = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && leap(y)) return 29;
    return lengths[static_cast<std::size_t>(m - 1)];
}

}  // namespace

std::optional<HourId> try_parse_hour(std::string_view text) {
    // Fixed-width prefix: YYYY-MM-DDTHH:MM
    if (text.size() < 16) return std::nullopt;
    auto digit = [&](std::size_t i) -> int {
        char c = text[i];
        return (c >= '0' && c <= '9') ? c - '0' : -1;
    };
    auto num = [&](std::size_t i, int width) -> int {
        int v = 0;
        for (int k = 0; k < width; ++k) {
            int d = digit(i + static_cast<std::size_t>(k));
            if (d < 0) return -1;
            v = v * 10 + d;
        }
        return v;
    };
    if (text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':') return std::nullopt;
    int year = num(0, 4), month = num(5, 2), day = num(8, 2), hh = num(11, 2), mm = num(14, 2);
    if (year < 0 || month < 0 || day < 0 || hh < 0 || mm < 0) return std::nullopt;
    std::size_t pos = 16;
    if (pos + 3 <= text.size() && text[pos] == ':') {  // optional :SS, must be 00
        if (num(pos + 1, 2) != 0) return std::nullopt;
        pos += 3;
    }
    if (pos < text.size() && text[pos] == 'Z') ++pos;  // optional zone designator
    if (pos != text.size()) return std::nullopt;
    if (month < 1 || month > 12) return std::nullopt;
    if (day < 1 || day > days_in_month(year, month)) return std::nullopt;
    if (hh > 23 || mm != 0) return std::nullopt;
    return days_from_civil(year, month, day) * kHoursPerDay + hh;
}

HourId parse_hour(std::string_view text) {
    auto h = try_parse_hour(text);
    if (!h) fail(Errc::MalformedRow, "bad hour timestamp '" + std::string(text) + "'");
    return *h;
}

std::string format_hour(HourId hour) {
    std::int64_t days = hour / kHoursPerDay;
    int hh = static_cast<int>(hour % kHoursPerDay);
    if (hh < 0) {
        hh += kHoursPerDay;
        days -= 1;
    }
    int y = 0;
    unsigned m = 0, d = 0;
    civil_from_days(days, y, m, d);
    char buf[24];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00Z", y, m, d, hh);
    return buf;
}

}  // namespace ampsim
