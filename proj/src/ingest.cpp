#include "adspoi/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <unordered_map>

#include "adspoi/geo.hpp"
#include "adspoi/timeutil.hpp"

namespace adspoi {

bool CheckIn::valid() const {
  return timestamp > 0 && valid_lat(lat) && valid_lon(lon);
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return out;
}

bool parse_i64(std::string_view s, std::int64_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_f64(std::string_view s, double& out) {
  if (s.empty()) return false;
  char buf[64];
  if (s.size() >= sizeof(buf)) return false;
  std::memcpy(buf, s.data(), s.size());
  buf[s.size()] = '\0';
  char* end = nullptr;
  out = std::strtod(buf, &end);
  return end == buf + s.size();
}

int month_from_abbrev(std::string_view m) {
  static constexpr std::string_view kNames[12] = {
      "Jan", "Feb", "Mar", "Apr", "May", "Jun",
      "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  for (int i = 0; i < 12; ++i)
    if (m == kNames[i]) return i + 1;
  return 0;
}

// "Tue Apr 03 18:00:09 +0000 2012" -> epoch seconds (the string is UTC)
bool parse_foursquare_time(std::string_view s, std::int64_t& out) {
  std::vector<std::string_view> f;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t sp = s.find(' ', pos);
    if (sp == std::string_view::npos) sp = s.size();
    if (sp > pos) f.push_back(s.substr(pos, sp - pos));
    pos = sp + 1;
  }
  if (f.size() != 6) return false;
  int month = month_from_abbrev(f[1]);
  if (month == 0) return false;
  std::int64_t day = 0, year = 0;
  if (!parse_i64(f[2], day) || !parse_i64(f[5], year)) return false;
  std::string_view hms = f[3];
  if (hms.size() != 8 || hms[2] != ':' || hms[5] != ':') return false;
  std::int64_t h = 0, mi = 0, sec = 0;
  if (!parse_i64(hms.substr(0, 2), h) || !parse_i64(hms.substr(3, 2), mi) ||
      !parse_i64(hms.substr(6, 2), sec))
    return false;
  if (h > 23 || mi > 59 || sec > 60 || day < 1 || day > 31) return false;
  out = utc_epoch(static_cast<int>(year), month, static_cast<int>(day),
                  static_cast<int>(h), static_cast<int>(mi),
                  static_cast<int>(sec));
  return true;
}

// "2010-10-19T23:55:27Z"
bool parse_iso8601(std::string_view s, std::int64_t& out) {
  if (s.size() < 19) return false;
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    return false;
  std::int64_t y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!parse_i64(s.substr(0, 4), y) || !parse_i64(s.substr(5, 2), mo) ||
      !parse_i64(s.substr(8, 2), d) || !parse_i64(s.substr(11, 2), h) ||
      !parse_i64(s.substr(14, 2), mi) || !parse_i64(s.substr(17, 2), sec))
    return false;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60)
    return false;
  out = utc_epoch(static_cast<int>(y), static_cast<int>(mo),
                  static_cast<int>(d), static_cast<int>(h),
                  static_cast<int>(mi), static_cast<int>(sec));
  return true;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open input file: " + path);
  return in;
}

}  // namespace

ParseResult parse_foursquare(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  ParseResult res;
  std::unordered_map<std::string, std::int64_t> venue_ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 8) {
      ++res.skipped;
      continue;
    }
    CheckIn c;
    double lat = 0, lon = 0;
    std::int64_t ts = 0;
    if (!parse_i64(f[0], c.user_id) || !parse_f64(f[4], lat) ||
        !parse_f64(f[5], lon) || !parse_foursquare_time(f[7], ts)) {
      ++res.skipped;
      continue;
    }
    // category id/name (f[2], f[3]) ignored; tz offset (f[6]) ignored, the
    // time string is already UTC
    if (!parse_i64(f[1], c.poi_id)) {
      std::string venue(f[1]);
      if (venue.empty()) {
        ++res.skipped;
        continue;
      }
      auto [it, inserted] = venue_ids.try_emplace(
          venue, static_cast<std::int64_t>(venue_ids.size()));
      c.poi_id = it->second;
    }
    c.lat = lat;
    c.lon = lon;
    c.timestamp = ts;
    if (!c.valid()) {
      ++res.skipped;
      continue;
    }
    res.checkins.push_back(c);
  }
  return res;
}

ParseResult parse_gowalla(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  ParseResult res;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 5) {
      ++res.skipped;
      continue;
    }
    CheckIn c;
    double lat = 0, lon = 0;
    std::int64_t ts = 0;
    if (!parse_i64(f[0], c.user_id) || !parse_iso8601(f[1], ts) ||
        !parse_f64(f[2], lat) || !parse_f64(f[3], lon) ||
        !parse_i64(f[4], c.poi_id)) {
      ++res.skipped;
      continue;
    }
    c.lat = lat;
    c.lon = lon;
    c.timestamp = ts;
    if (!c.valid()) {
      ++res.skipped;
      continue;
    }
    res.checkins.push_back(c);
  }
  return res;
}

namespace {

using UserSeqs = std::map<std::int64_t, std::vector<CheckIn>>;

UserSeqs group_sorted(const std::vector<CheckIn>& checkins) {
  UserSeqs seqs;
  for (const auto& c : checkins) seqs[c.user_id].push_back(c);
  for (auto& [_, v] : seqs)
    std::stable_sort(v.begin(), v.end(), [](const CheckIn& a, const CheckIn& b) {
      return a.timestamp < b.timestamp;
    });
  return seqs;
}

void dedup_consecutive(std::vector<CheckIn>& v) {
  std::vector<CheckIn> out;
  out.reserve(v.size());
  for (const auto& c : v) {
    if (!out.empty() && out.back().poi_id == c.poi_id) continue;
    out.push_back(c);
  }
  v = std::move(out);
}

}  // namespace

std::vector<CheckIn> preprocess(const std::vector<CheckIn>& checkins,
                                int min_user, int min_poi) {
  if (min_user < 1 || min_poi < 1)
    throw std::invalid_argument("preprocess: thresholds must be >= 1");

  // drop invalid records; enforce strictly increasing per-user timestamps by
  // keeping the first event of an equal-timestamp run
  UserSeqs seqs = group_sorted(checkins);
  for (auto& [_, v] : seqs) {
    std::vector<CheckIn> keep;
    keep.reserve(v.size());
    for (const auto& c : v) {
      if (!c.valid()) continue;
      if (!keep.empty() && keep.back().timestamp == c.timestamp) continue;
      keep.push_back(c);
    }
    v = std::move(keep);
  }

  // iterate {dedup, user filter, poi filter} to a fixed point; each pass only
  // shrinks, so this terminates
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto& [_, v] : seqs) {
      std::size_t before = v.size();
      dedup_consecutive(v);
      if (v.size() != before) changed = true;
    }
    for (auto it = seqs.begin(); it != seqs.end();) {
      if (static_cast<int>(it->second.size()) < min_user) {
        it = seqs.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
    std::unordered_map<std::int64_t, int> support;
    for (const auto& [_, v] : seqs)
      for (const auto& c : v) ++support[c.poi_id];
    for (auto& [_, v] : seqs) {
      std::vector<CheckIn> keep;
      keep.reserve(v.size());
      for (const auto& c : v)
        if (support[c.poi_id] >= min_poi) keep.push_back(c);
      if (keep.size() != v.size()) changed = true;
      v = std::move(keep);
    }
  }

  std::vector<CheckIn> out;
  for (const auto& [_, v] : seqs)
    out.insert(out.end(), v.begin(), v.end());
  return out;
}

PreprocessSummary summarize(const std::vector<CheckIn>& before,
                            const std::vector<CheckIn>& after) {
  PreprocessSummary s;
  std::set<std::int64_t> ub, ua, pb, pa;
  for (const auto& c : before) {
    ub.insert(c.user_id);
    pb.insert(c.poi_id);
  }
  for (const auto& c : after) {
    ua.insert(c.user_id);
    pa.insert(c.poi_id);
  }
  s.users_before = ub.size();
  s.users_after = ua.size();
  s.pois_before = pb.size();
  s.pois_after = pa.size();
  s.checkins_before = before.size();
  s.checkins_after = after.size();
  return s;
}

}  // namespace adspoi
