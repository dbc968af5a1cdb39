#include "adspoi/geo.hpp"

#include <algorithm>
#include <cmath>

namespace adspoi {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  if (lat1 == lat2 && lon1 == lon2) return 0.0;
  double phi1 = lat1 * kDegToRad;
  double phi2 = lat2 * kDegToRad;
  double dphi = (lat2 - lat1) * kDegToRad;
  double dlam = (lon2 - lon1) * kDegToRad;
  double sp = std::sin(dphi / 2.0);
  double sl = std::sin(dlam / 2.0);
  double a = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
  // clamp guards antipodal rounding (a can exceed 1 by a few ulps)
  a = std::clamp(a, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(a));
}

bool valid_lat(double lat) { return lat >= -90.0 && lat <= 90.0; }
bool valid_lon(double lon) { return lon >= -180.0 && lon <= 180.0; }

}  // namespace adspoi
