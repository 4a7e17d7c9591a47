#ifndef HYPERFC_TIMEUTIL_HPP
#define HYPERFC_TIMEUTIL_HPP

#include <cstdint>
#include <string>

namespace hyperfc {

// Proleptic Gregorian calendar arithmetic, UTC only. Epoch = 1970-01-01.

struct CivilTime {
    int year;
    int month;  // 1..12
    int day;    // 1..31
    int hour;   // 0..23
};

int64_t days_from_civil(int year, int month, int day);
CivilTime civil_from_epoch(int64_t epoch_seconds);
int64_t epoch_from_civil(const CivilTime& ct);

// 0 = Monday ... 6 = Sunday.
int weekday_from_epoch(int64_t epoch_seconds);

// "YYYY-MM-DDTHH:00:00Z" (minutes/seconds must be zero).
int64_t parse_iso_hour(const std::string& s);
std::string format_iso_hour(int64_t epoch_seconds);

// "YYYY-MM-DD" -> epoch seconds at 00:00 UTC.
int64_t parse_iso_date(const std::string& s);
std::string format_iso_date(int64_t epoch_seconds);

constexpr int64_t kSecondsPerHour = 3600;
constexpr int64_t kSecondsPerDay = 86400;

} // namespace hyperfc

#endif
