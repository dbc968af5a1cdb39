#pragma once
// Check-in records, preprocessed trajectories with precomputed gaps, the POI
// catalog, the leave-one-out split, and the binary dataset container.

#include <cstdint>
#include <string>
#include <vector>

namespace adspoi {

struct CheckIn {
  std::int64_t user_id = 0;
  std::int64_t poi_id = 0;
  std::int64_t timestamp = 0;  // UTC epoch seconds
  double lat = 0.0;
  double lon = 0.0;

  bool valid() const;
};

struct Gap {
  double dt_s = 0.0;   // seconds since previous event
  double dd_km = 0.0;  // great-circle km from previous event
};

struct Event {
  std::int32_t poi = 0;  // contiguous catalog index
  std::int64_t ts = 0;
  double lat = 0.0;
  double lon = 0.0;
};

struct PoiInfo {
  std::int64_t orig_id = 0;
  double lat = 0.0;  // coordinates of first occurrence
  double lon = 0.0;
};

struct UserTrajectory {
  std::int64_t orig_user = 0;
  std::vector<Event> events;  // strictly increasing timestamps
  std::vector<Gap> gaps;      // gaps[0] == {0,0}
};

struct Dataset {
  std::vector<PoiInfo> catalog;       // index = model POI id
  std::vector<UserTrajectory> users;  // sorted by orig_user

  std::size_t n_pois() const { return catalog.size(); }
  std::size_t n_checkins() const;

  // Remaps ids to contiguous indices (sorted by original id), orders events
  // per user by timestamp and fills gaps. Input is expected preprocessed.
  static Dataset from_checkins(const std::vector<CheckIn>& checkins);
};

// Leave-one-out views. For a user with n >= 3 events: train = events[0..n-3],
// val target = event n-2, test target = event n-1; contexts are everything
// strictly before the target. Users with exactly 2 events train only; users
// with fewer contribute nothing.
struct DatasetSplit {
  const Dataset* data = nullptr;
  std::vector<int> train_users;  // >= 2 events
  std::vector<int> eval_users;   // >= 3 events (have val and test targets)

  // number of events in the training view of user u
  int train_len(int u) const;
};

DatasetSplit split_leave_one_out(const Dataset& data);

void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

// FNV-1a over the file bytes; used as the dataset fingerprint in reports.
std::uint64_t file_fingerprint(const std::string& path);

}  // namespace adspoi
