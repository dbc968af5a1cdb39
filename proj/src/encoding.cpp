#include "adspoi/encoding.hpp"

#include <cmath>
#include <stdexcept>

#include "adspoi/kernels.hpp"
#include "adspoi/timeutil.hpp"

namespace adspoi {

int time_slot(std::int64_t ts) {
  int hour = static_cast<int>(hour_of_day(ts));
  if (hour > 23) hour = 23;
  return hour + (is_weekend(ts) ? 24 : 0);
}

void encode_time(std::int64_t ts, const ModelView& m, std::span<double> p_out,
                 int* slot_out) {
  double h = hour_of_day(ts);
  double w = static_cast<double>(day_of_week(ts));
  p_out[0] = std::sin(kOmegaHour * h);
  p_out[1] = std::cos(kOmegaHour * h);
  p_out[2] = std::sin(kOmegaWeek * w);
  p_out[3] = std::cos(kOmegaWeek * w);
  int slot = time_slot(ts);
  const double* e = m.slot_emb.data() +
                    static_cast<std::size_t>(slot) * m.dims.d_slot;
  for (int i = 0; i < m.dims.d_slot; ++i) p_out[4 + i] = e[i];
  if (slot_out) *slot_out = slot;
}

int distance_bucket(double dd_km, std::span<const double> edges_km) {
  int b = 0;
  for (double e : edges_km) {
    if (dd_km < e) return b;
    ++b;
  }
  return b;  // overflow bucket [last, inf)
}

void encode_space(bool has_prev, double dd_km, double dlat, double dlon,
                  std::span<const double> edges_km, const ModelView& m,
                  std::span<double> u_out, std::span<double> d_out,
                  int* bucket_out) {
  if (!has_prev) {
    for (int i = 0; i < m.dims.d_sp; ++i) d_out[i] = m.no_prev[i];
    if (bucket_out) *bucket_out = -1;
    return;
  }
  int bucket = distance_bucket(dd_km, edges_km);
  u_out[0] = std::log1p(dd_km);
  const double* e = m.dist_emb.data() +
                    static_cast<std::size_t>(bucket) * m.dims.d_dist;
  for (int i = 0; i < m.dims.d_dist; ++i) u_out[1 + i] = e[i];
  u_out[1 + m.dims.d_dist] = dlat;
  u_out[2 + m.dims.d_dist] = dlon;
  kernels::matvec(m.W_d.data(), m.dims.d_sp, m.dims.d_u(), u_out.data(),
                  d_out.data());
  if (bucket_out) *bucket_out = bucket;
}

void build_input(int poi, std::span<const double> p, std::span<const double> d,
                 const ModelView& m, std::span<double> x_out) {
  if (poi < 0 || poi >= m.dims.n_pois)
    throw std::out_of_range("poi id not in catalog: " + std::to_string(poi));
  const double* e = m.poi_emb.data() + static_cast<std::size_t>(poi) * m.dims.d_e;
  int off = 0;
  for (int i = 0; i < m.dims.d_e; ++i) x_out[off++] = e[i];
  for (double v : p) x_out[off++] = v;
  for (double v : d) x_out[off++] = v;
}

void project_input(std::span<const double> x, const ModelView& m,
                   std::span<double> xhat_out) {
  kernels::matvec(m.W_x.data(), m.dims.d_s, m.dims.d_x(), x.data(),
                  xhat_out.data());
  for (int i = 0; i < m.dims.d_s; ++i) xhat_out[i] += m.b_x[i];
}

void project_decision(std::span<const double> hdec, const ModelView& m,
                      std::span<double> hproj_out) {
  kernels::matvec(m.W_h.data(), m.dims.d_e, m.dims.d(), hdec.data(),
                  hproj_out.data());
  for (int i = 0; i < m.dims.d_e; ++i) hproj_out[i] += m.b_h[i];
}

}  // namespace adspoi
