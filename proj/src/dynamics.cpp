#include "adspoi/dynamics.hpp"

#include <cassert>
#include <cmath>
#include <vector>

#include "adspoi/kernels.hpp"

namespace adspoi {

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double decay(int k, double dt_s, double dd_km, const ModelView& m,
             const DynamicsConfig& dyn) {
  double lambda = softplus(m.raw_lambda[k]);
  double mu = softplus(m.raw_mu[k]);
  return std::exp(-lambda * dt_s / dyn.tau_t_s - mu * dd_km / dyn.tau_d_km);
}

void state_update(int k, std::span<const double> s_prev,
                  std::span<const double> xhat, double gamma,
                  const ModelView& m, std::span<double> s_new,
                  std::span<double> z_out, std::span<double> r_out,
                  std::span<double> cand_out) {
  const int n = m.dims.d_s;
  const GruView& g = m.gru[k];

  std::vector<double> z(n), r(n), cand(n), tmp(n), gated(n);

  kernels::matvec(g.W_z.data(), n, n, xhat.data(), z.data());
  kernels::matvec(g.U_z.data(), n, n, s_prev.data(), tmp.data());
  for (int i = 0; i < n; ++i) z[i] = sigmoid(z[i] + tmp[i] + g.b_z[i]);

  kernels::matvec(g.W_r.data(), n, n, xhat.data(), r.data());
  kernels::matvec(g.U_r.data(), n, n, s_prev.data(), tmp.data());
  for (int i = 0; i < n; ++i) r[i] = sigmoid(r[i] + tmp[i] + g.b_r[i]);

  for (int i = 0; i < n; ++i) gated[i] = r[i] * s_prev[i];
  kernels::matvec(g.W_s.data(), n, n, xhat.data(), cand.data());
  kernels::matvec(g.U_s.data(), n, n, gated.data(), tmp.data());
  for (int i = 0; i < n; ++i) cand[i] = std::tanh(cand[i] + tmp[i] + g.b_s[i]);

  for (int i = 0; i < n; ++i)
    s_new[i] = gamma * (1.0 - z[i]) * s_prev[i] + z[i] * cand[i];

  if (!z_out.empty())
    for (int i = 0; i < n; ++i) z_out[i] = z[i];
  if (!r_out.empty())
    for (int i = 0; i < n; ++i) r_out[i] = r[i];
  if (!cand_out.empty())
    for (int i = 0; i < n; ++i) cand_out[i] = cand[i];
}

void step_all(std::span<const double> bank, std::span<const double> xhat,
              double dt_s, double dd_km, const ModelView& m,
              const DynamicsConfig& dyn, std::span<double> new_bank,
              std::span<double> gamma_out, std::span<double> z_out,
              std::span<double> r_out, std::span<double> cand_out) {
  const int K = m.dims.K, n = m.dims.d_s;
  for (int k = 0; k < K; ++k) {
    double gamma = decay(k, dt_s, dd_km, m, dyn);
    auto sub = [&](std::span<double> full) -> std::span<double> {
      if (full.empty()) return {};
      return full.subspan(static_cast<std::size_t>(k) * n, n);
    };
    state_update(k, bank.subspan(static_cast<std::size_t>(k) * n, n), xhat,
                 gamma, m, new_bank.subspan(static_cast<std::size_t>(k) * n, n),
                 sub(z_out), sub(r_out), sub(cand_out));
    if (!gamma_out.empty()) gamma_out[k] = gamma;
  }
}

void softmax_with_temperature(std::span<const double> scores, double tau,
                              std::span<double> out) {
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp((scores[i] - mx) / tau);
    sum += out[i];
  }
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] /= sum;
}

void aggregate_scores(std::span<const double> bank, std::span<const double> c,
                      const ModelView& m, std::span<double> scores_out,
                      std::span<double> ghid_out) {
  const int K = m.dims.K, n = m.dims.d_s, gi = m.dims.g_in();
  std::vector<double> in(gi), hid(n);
  for (int k = 0; k < K; ++k) {
    const double* s = bank.data() + static_cast<std::size_t>(k) * n;
    for (int i = 0; i < n; ++i) in[i] = s[i];
    for (int i = 0; i < m.dims.d_c(); ++i) in[n + i] = c[i];
    kernels::matvec(m.W_g.data(), n, gi, in.data(), hid.data());
    for (int i = 0; i < n; ++i) hid[i] = std::tanh(hid[i] + m.b_g[i]);
    scores_out[k] = kernels::dot(m.v_g.data(), hid.data(), n);
    if (!ghid_out.empty())
      for (int i = 0; i < n; ++i) ghid_out[static_cast<std::size_t>(k) * n + i] = hid[i];
  }
}

void aggregate(std::span<const double> bank, std::span<const double> c,
               const ModelView& m, const DynamicsConfig& dyn, bool uniform,
               std::span<double> alpha_out, std::span<double> hdec_out,
               std::span<double> scores_out, std::span<double> ghid_out) {
  const int K = m.dims.K, n = m.dims.d_s;
  if (uniform) {
    for (int k = 0; k < K; ++k) alpha_out[k] = 1.0 / K;
    assert(alpha_out[0] == 1.0 / K);
  } else {
    std::vector<double> scores(K);
    aggregate_scores(bank, c, m, scores, ghid_out);
    softmax_with_temperature(scores, dyn.temperature, alpha_out);
    if (!scores_out.empty())
      for (int k = 0; k < K; ++k) scores_out[k] = scores[k];
  }
  // each sub-state lands in its own block of the K*d_s decision state
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i)
      hdec_out[static_cast<std::size_t>(k) * n + i] =
          alpha_out[k] * bank[static_cast<std::size_t>(k) * n + i];
}

}  // namespace adspoi
