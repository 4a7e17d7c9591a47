#include "hyperfc/timeutil.hpp"

#include <charconv>
#include <cstdio>

#include "hyperfc/error.hpp"

namespace hyperfc {

namespace {

int parse_int_exact(const char* begin, const char* end, const std::string& what,
                    const std::string& input) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw DataError("bad " + what + " in timestamp '" + input + "'");
    return value;
}

} // namespace

int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

CivilTime civil_from_epoch(int64_t epoch_seconds) {
    int64_t z = epoch_seconds / kSecondsPerDay;
    int64_t rem = epoch_seconds % kSecondsPerDay;
    if (rem < 0) {
        rem += kSecondsPerDay;
        z -= 1;
    }
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t y = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : static_cast<unsigned>(-9));
    return CivilTime{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d),
                     static_cast<int>(rem / kSecondsPerHour)};
}

int64_t epoch_from_civil(const CivilTime& ct) {
    return days_from_civil(ct.year, ct.month, ct.day) * kSecondsPerDay +
           static_cast<int64_t>(ct.hour) * kSecondsPerHour;
}

int weekday_from_epoch(int64_t epoch_seconds) {
    int64_t z = epoch_seconds / kSecondsPerDay;
    if (epoch_seconds % kSecondsPerDay < 0) z -= 1;
    // 1970-01-01 was a Thursday (weekday 3 with Monday = 0).
    int wd = static_cast<int>((z + 3) % 7);
    if (wd < 0) wd += 7;
    return wd;
}

int64_t parse_iso_hour(const std::string& s) {
    // YYYY-MM-DDTHH:MM:SSZ
    if (s.size() != 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' ||
        s[16] != ':' || s[19] != 'Z')
        throw DataError("timestamp '" + s + "' is not of the form YYYY-MM-DDTHH:MM:SSZ");
    const char* p = s.data();
    CivilTime ct;
    ct.year = parse_int_exact(p, p + 4, "year", s);
    ct.month = parse_int_exact(p + 5, p + 7, "month", s);
    ct.day = parse_int_exact(p + 8, p + 10, "day", s);
    ct.hour = parse_int_exact(p + 11, p + 13, "hour", s);
    const int minute = parse_int_exact(p + 14, p + 16, "minute", s);
    const int second = parse_int_exact(p + 17, p + 19, "second", s);
    if (ct.month < 1 || ct.month > 12 || ct.day < 1 || ct.day > 31 || ct.hour < 0 ||
        ct.hour > 23)
        throw DataError("timestamp '" + s + "' has out-of-range fields");
    if (minute != 0 || second != 0)
        throw DataError("timestamp '" + s + "' is not aligned to a whole hour");
    return epoch_from_civil(ct);
}

std::string format_iso_hour(int64_t epoch_seconds) {
    CivilTime ct = civil_from_epoch(epoch_seconds);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:00:00Z", ct.year, ct.month, ct.day,
                  ct.hour);
    return buf;
}

int64_t parse_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
        throw DataError("date '" + s + "' is not of the form YYYY-MM-DD");
    const char* p = s.data();
    const int year = parse_int_exact(p, p + 4, "year", s);
    const int month = parse_int_exact(p + 5, p + 7, "month", s);
    const int day = parse_int_exact(p + 8, p + 10, "day", s);
    if (month < 1 || month > 12 || day < 1 || day > 31)
        throw DataError("date '" + s + "' has out-of-range fields");
    return days_from_civil(year, month, day) * kSecondsPerDay;
}

std::string format_iso_date(int64_t epoch_seconds) {
    CivilTime ct = civil_from_epoch(epoch_seconds);
    char buf[12];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", ct.year, ct.month, ct.day);
    return buf;
}

} // namespace hyperfc
