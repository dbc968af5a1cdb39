#include "adspoi/timeutil.hpp"

namespace adspoi {

std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::int64_t utc_epoch(int year, int month, int day, int hour, int minute,
                       int second) {
  return days_from_civil(year, month, day) * 86400 + hour * 3600 +
         minute * 60 + second;
}

namespace {
std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if (a % b != 0 && (a < 0) != (b < 0)) --q;
  return q;
}
}  // namespace

double hour_of_day(std::int64_t t) {
  std::int64_t sod = t - floor_div(t, 86400) * 86400;
  return static_cast<double>(sod) / 3600.0;
}

int day_of_week(std::int64_t t) {
  // 1970-01-01 was a Thursday; shift so Monday = 0.
  std::int64_t days = floor_div(t, 86400);
  return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

bool is_weekend(std::int64_t t) { return day_of_week(t) >= 5; }

}  // namespace adspoi
