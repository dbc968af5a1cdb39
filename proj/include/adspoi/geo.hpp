#pragma once

namespace adspoi {

inline constexpr double kEarthRadiusKm = 6371.0;

// Great-circle distance in kilometers (haversine on a 6371 km sphere).
double haversine_km(double lat1, double lon1, double lat2, double lon2);

bool valid_lat(double lat);
bool valid_lon(double lon);

}  // namespace adspoi
