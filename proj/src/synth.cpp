#include "adspoi/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "adspoi/geo.hpp"
#include "adspoi/rng.hpp"
#include "adspoi/timeutil.hpp"

namespace adspoi {

namespace {

constexpr double kKmPerDegLat = 111.19492664455873;  // pi * 6371 / 180

bool hour_in_window(double h, double a, double b) {
  if (a == b) return false;
  if (a < b) return h >= a && h < b;
  return h >= a || h < b;  // wraps midnight
}

int regime_at(const SynthConfig& cfg, std::int64_t t) {
  double h = hour_of_day(t);
  for (int r = 0; r < static_cast<int>(cfg.regimes.size()); ++r)
    for (auto [a, b] : cfg.regimes[r].hour_windows)
      if (hour_in_window(h, a, b)) return r;
  return 0;
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.users < 1) throw std::runtime_error("synth.users must be >= 1");
  if (cfg.steps_per_user < 2)
    throw std::runtime_error("synth.steps_per_user must be >= 2");
  if (cfg.regimes.empty())
    throw std::runtime_error("synth.regimes must not be empty");
  if (cfg.step_hours_min <= 0 || cfg.step_hours_max < cfg.step_hours_min)
    throw std::runtime_error("synth.step_hours range invalid");
  for (std::size_t r = 0; r < cfg.regimes.size(); ++r) {
    const auto& reg = cfg.regimes[r];
    if (reg.n_pois < 1)
      throw std::runtime_error("synth.regimes[" + std::to_string(r) +
                               "].n_pois must be >= 1");
    if (reg.hour_windows.empty())
      throw std::runtime_error("synth.regimes[" + std::to_string(r) +
                               "].hour_windows must not be empty");
    for (auto [a, b] : reg.hour_windows)
      if (a < 0 || a >= 24 || b < 0 || b > 24)
        throw std::runtime_error("synth hour windows must lie in [0,24]");
    if (reg.noise < 0 || reg.noise > 1)
      throw std::runtime_error("synth.regimes[" + std::to_string(r) +
                               "].noise must be in [0,1]");
    if (!valid_lat(reg.center_lat) || !valid_lon(reg.center_lon))
      throw std::runtime_error("synth regime center out of range");
  }
  auto offsets = synth_poi_offsets(cfg);
  for (std::size_t i = 0; i < cfg.regimes.size(); ++i)
    for (std::size_t j = i + 1; j < cfg.regimes.size(); ++j) {
      int ai = offsets[i], bi = ai + cfg.regimes[i].n_pois;
      int aj = offsets[j], bj = aj + cfg.regimes[j].n_pois;
      if (ai < bj && aj < bi)
        throw std::runtime_error("synth regime POI id ranges overlap");
    }
}

std::vector<int> synth_poi_offsets(const SynthConfig& cfg) {
  std::vector<int> offsets;
  int next = 0;
  for (const auto& reg : cfg.regimes) {
    int start = reg.poi_start >= 0 ? reg.poi_start : next;
    offsets.push_back(start);
    next = std::max(next, start + reg.n_pois);
  }
  return offsets;
}

std::vector<double> synth_kernel_matrix(const SynthConfig& cfg, int r) {
  const auto& reg = cfg.regimes.at(r);
  int n = reg.n_pois;
  std::vector<double> M(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    double* row = M.data() + static_cast<std::size_t>(i) * n;
    switch (reg.kernel) {
      case SynthKernel::Cycle:
        for (int j = 0; j < n; ++j) row[j] = reg.noise / n;
        row[(i + 1) % n] += 1.0 - reg.noise;
        break;
      case SynthKernel::Uniform:
        for (int j = 0; j < n; ++j) row[j] = 1.0 / n;
        break;
    }
  }
  return M;
}

std::vector<CheckIn> synth_generate(const SynthConfig& cfg,
                                    std::uint64_t seed_override) {
  validate(cfg);
  std::uint64_t seed = seed_override != 0 ? seed_override : cfg.seed;
  auto offsets = synth_poi_offsets(cfg);
  int n_regimes = static_cast<int>(cfg.regimes.size());

  // fixed POI coordinates, drawn before any user data
  int max_poi = 0;
  for (int r = 0; r < n_regimes; ++r)
    max_poi = std::max(max_poi, offsets[r] + cfg.regimes[r].n_pois);
  std::vector<double> poi_lat(max_poi, 0.0), poi_lon(max_poi, 0.0);
  {
    auto rng = make_rng(seed, kStreamSynth, 0);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (int r = 0; r < n_regimes; ++r) {
      const auto& reg = cfg.regimes[r];
      double km_per_deg_lon =
          kKmPerDegLat * std::cos(reg.center_lat * 3.14159265358979323846 / 180.0);
      if (km_per_deg_lon < 1e-6) km_per_deg_lon = 1e-6;
      for (int i = 0; i < reg.n_pois; ++i) {
        double dy = unit(rng) * reg.spread_km;
        double dx = unit(rng) * reg.spread_km;
        int id = offsets[r] + i;
        poi_lat[id] = reg.center_lat + dy / kKmPerDegLat;
        poi_lon[id] = reg.center_lon + dx / km_per_deg_lon;
      }
    }
  }

  std::vector<CheckIn> out;
  out.reserve(static_cast<std::size_t>(cfg.users) * cfg.steps_per_user);
  for (int u = 0; u < cfg.users; ++u) {
    auto rng = make_rng(seed, kStreamSynth, 1000 + static_cast<std::uint64_t>(u));
    std::uniform_real_distribution<double> day(0.0, 86400.0);
    std::uniform_real_distribution<double> gap_h(cfg.step_hours_min,
                                                 cfg.step_hours_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::int64_t t = cfg.start_epoch + static_cast<std::int64_t>(day(rng));
    std::vector<int> ptr(n_regimes);  // per-regime POI pointer (local index)
    for (int r = 0; r < n_regimes; ++r) {
      std::uniform_int_distribution<int> pick(0, cfg.regimes[r].n_pois - 1);
      ptr[r] = pick(rng);
    }

    auto emit = [&](int regime) {
      int id = offsets[regime] + ptr[regime];
      CheckIn c;
      c.user_id = u;
      c.poi_id = id;
      c.timestamp = t;
      c.lat = poi_lat[id];
      c.lon = poi_lon[id];
      out.push_back(c);
    };

    emit(regime_at(cfg, t));
    for (int s = 1; s < cfg.steps_per_user; ++s) {
      std::int64_t dt = static_cast<std::int64_t>(gap_h(rng) * 3600.0);
      t += std::max<std::int64_t>(1, dt);
      int r = regime_at(cfg, t);
      const auto& reg = cfg.regimes[r];
      int next;
      if (reg.kernel == SynthKernel::Uniform || unit(rng) < reg.noise) {
        std::uniform_int_distribution<int> pick(0, reg.n_pois - 1);
        next = pick(rng);
      } else {
        next = (ptr[r] + 1) % reg.n_pois;
      }
      ptr[r] = next;
      emit(r);
    }
  }
  return out;
}

}  // namespace adspoi
