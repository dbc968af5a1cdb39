#pragma once
// Calendar helpers over UTC epoch seconds. No timezone handling anywhere;
// inputs are converted to UTC at parse time.

#include <cstdint>

namespace adspoi {

// Days since 1970-01-01 for a proleptic Gregorian civil date.
std::int64_t days_from_civil(int year, int month, int day);

std::int64_t utc_epoch(int year, int month, int day, int hour, int minute,
                       int second);

// Fractional hour of day in [0, 24).
double hour_of_day(std::int64_t epoch_s);

// 0 = Monday ... 6 = Sunday.
int day_of_week(std::int64_t epoch_s);

bool is_weekend(std::int64_t epoch_s);

}  // namespace adspoi
