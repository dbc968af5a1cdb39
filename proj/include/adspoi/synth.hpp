#pragma once
// Synthetic multi-regime mobility generator. Each regime owns a POI cluster,
// a set of active hour-of-day windows and a transition kernel; every user
// keeps one POI pointer per regime, so predictions right after a regime
// switch depend on history several steps back.

#include <cstdint>
#include <string>
#include <vector>

#include "adspoi/dataset.hpp"

namespace adspoi {

enum class SynthKernel { Cycle, Uniform };

struct RegimeSpec {
  std::vector<std::pair<double, double>> hour_windows;  // [a,b), b<a wraps
  int n_pois = 0;
  int poi_start = -1;  // -1: packed after the previous regime
  double center_lat = 0.0;
  double center_lon = 0.0;
  double spread_km = 0.5;
  SynthKernel kernel = SynthKernel::Cycle;
  double noise = 0.0;  // probability of a uniform jump instead of the kernel
};

struct SynthConfig {
  int users = 0;
  int steps_per_user = 0;
  std::int64_t start_epoch = 1333411200;  // 2012-04-03T00:00:00Z
  double step_hours_min = 1.0;
  double step_hours_max = 4.0;
  std::vector<RegimeSpec> regimes;
  std::uint64_t seed = 1;
};

// Throws std::runtime_error on inconsistent configs (no users/POIs/steps,
// empty or overlapping POI id ranges, bad hour windows).
void validate(const SynthConfig& cfg);

// Resolved poi_start offsets after packing.
std::vector<int> synth_poi_offsets(const SynthConfig& cfg);

// Row-stochastic transition matrix of regime r (n_pois x n_pois, row-major).
std::vector<double> synth_kernel_matrix(const SynthConfig& cfg, int r);

// Deterministic in cfg.seed; overriding seed != 0 replaces cfg.seed.
std::vector<CheckIn> synth_generate(const SynthConfig& cfg,
                                    std::uint64_t seed = 0);

}  // namespace adspoi
