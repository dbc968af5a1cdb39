#pragma once
// Per-step input construction: temporal sinusoids + slot embedding, spatial
// movement features, POI embedding lookup, and the two alignment projections.

#include <cstdint>
#include <span>

#include "adspoi/params.hpp"

namespace adspoi {

inline constexpr double kOmegaHour = 2.0 * 3.14159265358979323846 / 24.0;
inline constexpr double kOmegaWeek = 2.0 * 3.14159265358979323846 / 7.0;

// hour-of-day + 24 * is_weekend, in {0..47}
int time_slot(std::int64_t ts);

// p = [sin(wh h), cos(wh h), sin(ww w), cos(ww w), e_slot[slot]]
void encode_time(std::int64_t ts, const ModelView& m, std::span<double> p_out,
                 int* slot_out = nullptr);

// index of dd_km under the configured edges; monotone, total on [0, inf)
int distance_bucket(double dd_km, std::span<const double> edges_km);

// Fills the spatial pre-image u = [log1p(dd), e_dist[bucket], dlat, dlon]
// and d = W_d u. For the first step (no predecessor) d = no_prev and u is
// untouched.
void encode_space(bool has_prev, double dd_km, double dlat, double dlon,
                  std::span<const double> edges_km, const ModelView& m,
                  std::span<double> u_out, std::span<double> d_out,
                  int* bucket_out = nullptr);

// x = [e_poi ; p ; d]
void build_input(int poi, std::span<const double> p, std::span<const double> d,
                 const ModelView& m, std::span<double> x_out);

// xhat = W_x x + b_x
void project_input(std::span<const double> x, const ModelView& m,
                   std::span<double> xhat_out);

// hproj = W_h hdec + b_h
void project_decision(std::span<const double> hdec, const ModelView& m,
                      std::span<double> hproj_out);

}  // namespace adspoi
