#pragma once
// Raw check-in file parsers and the preprocessing pipeline.

#include <string>
#include <vector>

#include "adspoi/dataset.hpp"

namespace adspoi {

struct ParseResult {
  std::vector<CheckIn> checkins;
  std::size_t skipped = 0;  // malformed or out-of-range lines
};

// Tab-separated: user, venue, category id, category name, lat, lon,
// timezone offset (minutes, ignored — the time string is already UTC),
// "%a %b %d %H:%M:%S +0000 %Y". Non-integer venue ids get deterministic
// first-appearance integer ids. Unreadable file throws.
ParseResult parse_foursquare(const std::string& path);

// Tab-separated: user, ISO-8601 UTC time, lat, lon, location id.
ParseResult parse_gowalla(const std::string& path);

// In order: drop invalid records (bad coordinates, non-positive or duplicate
// timestamps per user), then iterate {consecutive-duplicate removal, user
// filter (>= min_user check-ins), POI support filter (>= min_poi check-ins)}
// to a fixed point. Output is sorted by (user, timestamp).
std::vector<CheckIn> preprocess(const std::vector<CheckIn>& checkins,
                                int min_user = 10, int min_poi = 10);

struct PreprocessSummary {
  std::size_t users_before = 0, users_after = 0;
  std::size_t pois_before = 0, pois_after = 0;
  std::size_t checkins_before = 0, checkins_after = 0;
};

PreprocessSummary summarize(const std::vector<CheckIn>& before,
                            const std::vector<CheckIn>& after);

}  // namespace adspoi
