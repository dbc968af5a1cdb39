#include "adspoi/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "adspoi/config.hpp"
#include "adspoi/geo.hpp"

namespace adspoi {

std::size_t Dataset::n_checkins() const {
  std::size_t n = 0;
  for (const auto& u : users) n += u.events.size();
  return n;
}

Dataset Dataset::from_checkins(const std::vector<CheckIn>& checkins) {
  Dataset d;
  std::map<std::int64_t, PoiInfo> catalog;  // sorted by original id
  for (const auto& c : checkins) {
    auto [it, inserted] = catalog.try_emplace(c.poi_id);
    if (inserted) {
      it->second.orig_id = c.poi_id;
      it->second.lat = c.lat;
      it->second.lon = c.lon;
    }
  }
  std::map<std::int64_t, std::int32_t> poi_index;
  for (const auto& [id, info] : catalog) {
    poi_index[id] = static_cast<std::int32_t>(d.catalog.size());
    d.catalog.push_back(info);
  }

  std::map<std::int64_t, std::vector<Event>> per_user;
  for (const auto& c : checkins) {
    Event e;
    e.poi = poi_index.at(c.poi_id);
    e.ts = c.timestamp;
    e.lat = c.lat;
    e.lon = c.lon;
    per_user[c.user_id].push_back(e);
  }
  for (auto& [uid, events] : per_user) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.ts < b.ts; });
    UserTrajectory t;
    t.orig_user = uid;
    t.events = std::move(events);
    t.gaps.resize(t.events.size());
    for (std::size_t i = 1; i < t.events.size(); ++i) {
      const Event& prev = t.events[i - 1];
      const Event& cur = t.events[i];
      t.gaps[i].dt_s = static_cast<double>(cur.ts - prev.ts);
      t.gaps[i].dd_km = haversine_km(prev.lat, prev.lon, cur.lat, cur.lon);
    }
    d.users.push_back(std::move(t));
  }
  return d;
}

int DatasetSplit::train_len(int u) const {
  int n = static_cast<int>(data->users[u].events.size());
  return n >= 3 ? n - 2 : n;
}

DatasetSplit split_leave_one_out(const Dataset& data) {
  DatasetSplit s;
  s.data = &data;
  for (int u = 0; u < static_cast<int>(data.users.size()); ++u) {
    std::size_t n = data.users[u].events.size();
    if (n >= 2) s.train_users.push_back(u);
    if (n >= 3) s.eval_users.push_back(u);
  }
  return s;
}

namespace {

constexpr char kMagic[8] = {'A', 'D', 'S', 'P', 'O', 'I', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("dataset file truncated");
  return v;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& data) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    out.write(kMagic, sizeof(kMagic));
    put(out, kVersion);
    put(out, static_cast<std::uint64_t>(data.catalog.size()));
    put(out, static_cast<std::uint64_t>(data.users.size()));
    for (const auto& p : data.catalog) {
      put(out, p.orig_id);
      put(out, p.lat);
      put(out, p.lon);
    }
    for (const auto& u : data.users) {
      put(out, u.orig_user);
      put(out, static_cast<std::uint64_t>(u.events.size()));
      for (const auto& e : u.events) {
        put(out, e.poi);
        put(out, e.ts);
        put(out, e.lat);
        put(out, e.lon);
      }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a dataset file: " + path);
  auto version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported dataset version");
  auto n_pois = get<std::uint64_t>(in);
  auto n_users = get<std::uint64_t>(in);
  Dataset d;
  d.catalog.resize(n_pois);
  for (auto& p : d.catalog) {
    p.orig_id = get<std::int64_t>(in);
    p.lat = get<double>(in);
    p.lon = get<double>(in);
  }
  d.users.resize(n_users);
  for (auto& u : d.users) {
    u.orig_user = get<std::int64_t>(in);
    auto n = get<std::uint64_t>(in);
    u.events.resize(n);
    for (auto& e : u.events) {
      e.poi = get<std::int32_t>(in);
      e.ts = get<std::int64_t>(in);
      e.lat = get<double>(in);
      e.lon = get<double>(in);
      if (e.poi < 0 || static_cast<std::uint64_t>(e.poi) >= n_pois)
        throw std::runtime_error("dataset file corrupt: poi out of range");
    }
    u.gaps.resize(u.events.size());
    for (std::size_t i = 1; i < u.events.size(); ++i) {
      u.gaps[i].dt_s =
          static_cast<double>(u.events[i].ts - u.events[i - 1].ts);
      u.gaps[i].dd_km =
          haversine_km(u.events[i - 1].lat, u.events[i - 1].lon,
                       u.events[i].lat, u.events[i].lon);
    }
  }
  return d;
}

std::uint64_t file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace adspoi
