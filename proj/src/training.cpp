#include "adspoi/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "adspoi/dynamics.hpp"
#include "adspoi/encoding.hpp"
#include "adspoi/evaluation.hpp"
#include "adspoi/geo.hpp"
#include "adspoi/kernels.hpp"
#include "adspoi/parallel.hpp"
#include "adspoi/rng.hpp"

namespace adspoi {

void RolloutCache::resize(const ModelDims& d, int n_steps, bool train_mode,
                          int slate_n, int k_hard, double dropout) {
  dims = d;
  steps = n_steps;
  train = train_mode;
  keep = 1.0 - dropout;
  slate_size = slate_n;
  auto n = [&](int stride) {
    return static_cast<std::size_t>(n_steps) * stride;
  };
  has_prev.assign(n(1), 0);
  dt.assign(n(1), 0.0);
  dd.assign(n(1), 0.0);
  dlat.assign(n(1), 0.0);
  dlon.assign(n(1), 0.0);
  slot.assign(n(1), 0);
  bucket.assign(n(1), -1);
  poi.assign(n(1), 0);
  u.assign(n(d.d_u()), 0.0);
  p.assign(n(d.d_p()), 0.0);
  dsp.assign(n(d.d_sp), 0.0);
  x.assign(n(d.d_x()), 0.0);
  xhat.assign(n(d.d_s), 0.0);
  xdrop.assign(n(d.d_s), 0.0);
  sprev.assign(n(d.d()), 0.0);
  zg.assign(n(d.d()), 0.0);
  rg.assign(n(d.d()), 0.0);
  cand.assign(n(d.d()), 0.0);
  snew.assign(n(d.d()), 0.0);
  gamma.assign(n(d.K), 0.0);
  c.assign(n(d.d_c()), 0.0);
  ghid.assign(n(d.d()), 0.0);
  scores.assign(n(d.K), 0.0);
  alpha.assign(n(d.K), 0.0);
  hdec.assign(n(d.d()), 0.0);
  hdrop.assign(n(d.d()), 0.0);
  hproj.assign(n(d.d_e), 0.0);
  if (train_mode) {
    xmask.assign(n(d.d_s), 1.0);
    hmask.assign(n(d.d()), 1.0);
    slate.assign(n(slate_n), 0);
    logits.assign(n(slate_n), 0.0);
    probs.assign(n(slate_n), 0.0);
    ylab.assign(n(slate_n), 0.0);
    hard.assign(n(k_hard), 0);
    ce.assign(n(1), 0.0);
    bpr.assign(n(1), 0.0);
  } else {
    xmask.clear();
    hmask.clear();
    slate.clear();
    logits.clear();
    probs.clear();
    ylab.clear();
    hard.clear();
    ce.clear();
    bpr.clear();
  }
}

namespace {

// span helper over a struct-of-arrays block
template <typename T>
std::span<T> row(std::vector<T>& v, int step, int stride) {
  return {v.data() + static_cast<std::size_t>(step) * stride,
          static_cast<std::size_t>(stride)};
}
template <typename T>
std::span<const T> row(const std::vector<T>& v, int step, int stride) {
  return {v.data() + static_cast<std::size_t>(step) * stride,
          static_cast<std::size_t>(stride)};
}

}  // namespace

TrajOutcome forward_trajectory(const ModelView& m, const RunConfig& cfg,
                               const UserTrajectory& traj, int begin, int count,
                               std::mt19937_64& rng, bool train_mode,
                               RolloutCache& cache) {
  const ModelDims& d = m.dims;
  const int steps = train_mode ? count - 1 : count;
  if (steps < 1) throw std::runtime_error("trajectory window too short");
  const int slate_size = 1 + cfg.objective.n_neg;
  const int k_hard = std::min(cfg.objective.k_hard, cfg.objective.n_neg);
  const double dropout = train_mode ? cfg.optimizer.dropout : 0.0;
  const bool uniform = cfg.variant() == Variant::UniformAgg;

  cache.resize(d, steps, train_mode, slate_size, k_hard, dropout);

  std::bernoulli_distribution keep_draw(cache.keep);
  std::vector<std::int32_t> negs, scratch;
  std::vector<double> ylab_tmp;

  TrajOutcome out;
  out.steps = steps;
  for (int j = 0; j < steps; ++j) {
    const int gi = begin + j;
    const Event& ev = traj.events[gi];
    cache.poi[j] = ev.poi;
    bool has_prev = gi > 0;
    cache.has_prev[j] = has_prev ? 1 : 0;
    if (has_prev) {
      cache.dt[j] = traj.gaps[gi].dt_s;
      cache.dd[j] = traj.gaps[gi].dd_km;
      cache.dlat[j] = ev.lat - traj.events[gi - 1].lat;
      cache.dlon[j] = ev.lon - traj.events[gi - 1].lon;
    }

    // encode
    auto pj = row(cache.p, j, d.d_p());
    encode_time(ev.ts, m, pj, &cache.slot[j]);
    auto uj = row(cache.u, j, d.d_u());
    auto dj = row(cache.dsp, j, d.d_sp);
    encode_space(has_prev, cache.dd[j], cache.dlat[j], cache.dlon[j],
                 cfg.model.bucket_edges_km, m, uj, dj, &cache.bucket[j]);
    auto xj = row(cache.x, j, d.d_x());
    build_input(ev.poi, pj, dj, m, xj);
    auto xh = row(cache.xhat, j, d.d_s);
    project_input(xj, m, xh);

    // negatives are drawn before the dropout masks so the per-step RNG
    // consumption order is fixed
    int pos = -1;
    if (train_mode) {
      pos = traj.events[gi + 1].poi;
      sample_negatives(rng, d.n_pois, pos, cfg.objective.n_neg, negs, scratch);
    }

    auto xd = row(cache.xdrop, j, d.d_s);
    if (train_mode && dropout > 0.0) {
      auto xm = row(cache.xmask, j, d.d_s);
      for (int i = 0; i < d.d_s; ++i)
        xm[i] = keep_draw(rng) ? 1.0 / cache.keep : 0.0;
      for (int i = 0; i < d.d_s; ++i) xd[i] = xh[i] * xm[i];
    } else {
      std::copy(xh.begin(), xh.end(), xd.begin());
    }

    // recurrence
    auto sp = row(cache.sprev, j, d.d());
    if (j > 0) {
      auto prev = row(cache.snew, j - 1, d.d());
      std::copy(prev.begin(), prev.end(), sp.begin());
    }
    step_all(sp, xd, cache.dt[j], cache.dd[j], m, cfg.dynamics,
             row(cache.snew, j, d.d()), row(cache.gamma, j, d.K),
             row(cache.zg, j, d.d()), row(cache.rg, j, d.d()),
             row(cache.cand, j, d.d()));

    // context + aggregation
    auto cj = row(cache.c, j, d.d_c());
    std::copy(pj.begin(), pj.end(), cj.begin());
    std::copy(dj.begin(), dj.end(), cj.begin() + d.d_p());
    aggregate(row(cache.snew, j, d.d()), cj, m, cfg.dynamics, uniform,
              row(cache.alpha, j, d.K), row(cache.hdec, j, d.d()),
              row(cache.scores, j, d.K), row(cache.ghid, j, d.d()));

    auto hd = row(cache.hdec, j, d.d());
    auto hdr = row(cache.hdrop, j, d.d());
    if (train_mode && dropout > 0.0) {
      auto hm = row(cache.hmask, j, d.d());
      for (int i = 0; i < d.d(); ++i)
        hm[i] = keep_draw(rng) ? 1.0 / cache.keep : 0.0;
      for (int i = 0; i < d.d(); ++i) hdr[i] = hd[i] * hm[i];
    } else {
      std::copy(hd.begin(), hd.end(), hdr.begin());
    }
    auto hp = row(cache.hproj, j, d.d_e);
    project_decision(hdr, m, hp);

    if (!train_mode) continue;

    // slate + losses
    auto sl = row(cache.slate, j, slate_size);
    sl[0] = pos;
    for (int i = 0; i < cfg.objective.n_neg; ++i) sl[1 + i] = negs[i];
    auto lg = row(cache.logits, j, slate_size);
    for (int i = 0; i < slate_size; ++i) lg[i] = score_poi(hp, sl[i], m);
    auto yl = row(cache.ylab, j, slate_size);
    smoothed_labels(cfg.objective.label_smoothing, slate_size, yl);
    auto pr = row(cache.probs, j, slate_size);
    cache.ce[j] = ce_loss(lg, yl, pr);
    std::vector<int> hard_tmp;
    cache.bpr[j] = bpr_hard_loss(lg, k_hard, cfg.objective.margin, hard_tmp);
    auto hj = row(cache.hard, j, k_hard);
    std::copy(hard_tmp.begin(), hard_tmp.end(), hj.begin());

    out.ce += cache.ce[j];
    out.bpr += cache.bpr[j];
  }
  out.loss = out.ce + cfg.objective.bpr_weight * out.bpr;
  return out;
}

void backward_trajectory(const ModelView& m, const RunConfig& cfg,
                         const RolloutCache& cache, double w, GradView& g) {
  const ModelDims& d = m.dims;
  const int K = d.K, n = d.d_s;
  const bool uniform = cfg.variant() == Variant::UniformAgg;
  const int k_hard = std::min(cfg.objective.k_hard, cfg.objective.n_neg);

  std::vector<double> ds_carry(d.d(), 0.0);  // dL/d snew[j] from steps > j
  std::vector<double> ds_total(d.d());
  std::vector<double> dlogits(cache.slate_size);
  std::vector<double> dhproj(d.d_e), dhdrop(d.d()), dhdec(d.d());
  std::vector<double> dalpha(K), da(K);
  std::vector<double> gin(d.g_in()), dgin(d.g_in()), dpre(n);
  std::vector<double> dz(n), dr(n), dcand(n), dgated(n), gated(n);
  std::vector<double> dxdrop(n), dxhat(n), dx(d.d_x()), dc(d.d_c());
  std::vector<double> du(d.d_u());

  for (int j = cache.steps - 1; j >= 0; --j) {
    auto sp = row(cache.sprev, j, d.d());
    auto sn = row(cache.snew, j, d.d());
    auto hp = row(cache.hproj, j, d.d_e);

    // slate backward
    std::fill(dhproj.begin(), dhproj.end(), 0.0);
    auto sl = row(cache.slate, j, cache.slate_size);
    auto lg = row(cache.logits, j, cache.slate_size);
    loss_backward_logits(row(cache.probs, j, cache.slate_size),
                         row(cache.ylab, j, cache.slate_size),
                         row(cache.hard, j, k_hard), lg, cfg.objective.margin,
                         cfg.objective.bpr_weight, w, dlogits);
    for (int i = 0; i < cache.slate_size; ++i) {
      int poi = sl[i];
      const double* e = m.poi_emb.data() + std::size_t(poi) * d.d_e;
      kernels::axpy(dhproj.data(), dlogits[i], e, d.d_e);
      kernels::axpy(g.poi_emb.data() + std::size_t(poi) * d.d_e, dlogits[i],
                    hp.data(), d.d_e);
      g.poi_bias[poi] += dlogits[i];
    }

    // decision projection
    auto hdr = row(cache.hdrop, j, d.d());
    kernels::ger(g.W_h.data(), d.d_e, d.d(), dhproj.data(), hdr.data());
    for (int i = 0; i < d.d_e; ++i) g.b_h[i] += dhproj[i];
    std::fill(dhdrop.begin(), dhdrop.end(), 0.0);
    kernels::matvec_t_add(m.W_h.data(), d.d_e, d.d(), dhproj.data(),
                          dhdrop.data());
    if (cache.train && cache.keep < 1.0) {
      auto hm = row(cache.hmask, j, d.d());
      for (int i = 0; i < d.d(); ++i) dhdec[i] = dhdrop[i] * hm[i];
    } else {
      dhdec = dhdrop;
    }

    // aggregation backward
    std::copy(ds_carry.begin(), ds_carry.end(), ds_total.begin());
    auto alpha = row(cache.alpha, j, d.K);
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < n; ++i)
        ds_total[std::size_t(k) * n + i] +=
            alpha[k] * dhdec[std::size_t(k) * n + i];
    std::fill(dc.begin(), dc.end(), 0.0);
    if (!uniform) {
      auto cj = row(cache.c, j, d.d_c());
      auto ghid = row(cache.ghid, j, d.d());
      for (int k = 0; k < K; ++k)
        dalpha[k] = kernels::dot(sn.data() + std::size_t(k) * n,
                                 dhdec.data() + std::size_t(k) * n, n);
      double inner = 0.0;
      for (int k = 0; k < K; ++k) inner += dalpha[k] * alpha[k];
      for (int k = 0; k < K; ++k)
        da[k] = alpha[k] * (dalpha[k] - inner) / cfg.dynamics.temperature;
      for (int k = 0; k < K; ++k) {
        if (da[k] == 0.0) continue;
        const double* hid = ghid.data() + std::size_t(k) * n;
        kernels::axpy(g.v_g.data(), da[k], hid, n);
        for (int i = 0; i < n; ++i)
          dpre[i] = da[k] * m.v_g[i] * (1.0 - hid[i] * hid[i]);
        for (int i = 0; i < n; ++i) gin[i] = sn[std::size_t(k) * n + i];
        for (int i = 0; i < d.d_c(); ++i) gin[n + i] = cj[i];
        kernels::ger(g.W_g.data(), n, d.g_in(), dpre.data(), gin.data());
        for (int i = 0; i < n; ++i) g.b_g[i] += dpre[i];
        std::fill(dgin.begin(), dgin.end(), 0.0);
        kernels::matvec_t_add(m.W_g.data(), n, d.g_in(), dpre.data(),
                              dgin.data());
        for (int i = 0; i < n; ++i) ds_total[std::size_t(k) * n + i] += dgin[i];
        for (int i = 0; i < d.d_c(); ++i) dc[i] += dgin[n + i];
      }
    }

    // recurrence backward
    auto xd = row(cache.xdrop, j, d.d_s);
    std::fill(dxdrop.begin(), dxdrop.end(), 0.0);
    auto gam = row(cache.gamma, j, d.K);
    for (int k = 0; k < K; ++k) {
      const GruView& gk = m.gru[k];
      GruGrad& gg = g.gru[k];
      const double* ds = ds_total.data() + std::size_t(k) * n;
      const double* s0 = sp.data() + std::size_t(k) * n;
      const double* z = cache.zg.data() + (std::size_t(j) * K + k) * n;
      const double* r = cache.rg.data() + (std::size_t(j) * K + k) * n;
      const double* cd = cache.cand.data() + (std::size_t(j) * K + k) * n;
      double* dsc = ds_carry.data() + std::size_t(k) * n;
      double gamma = gam[k];

      double dgamma = 0.0;
      for (int i = 0; i < n; ++i) {
        dgamma += ds[i] * (1.0 - z[i]) * s0[i];
        dz[i] = ds[i] * (cd[i] - gamma * s0[i]);
        dcand[i] = ds[i] * z[i];
        dsc[i] = ds[i] * gamma * (1.0 - z[i]);
      }

      // candidate path
      for (int i = 0; i < n; ++i) {
        dcand[i] *= 1.0 - cd[i] * cd[i];
        gated[i] = r[i] * s0[i];
      }
      kernels::ger(gg.W_s.data(), n, n, dcand.data(), xd.data());
      kernels::ger(gg.U_s.data(), n, n, dcand.data(), gated.data());
      for (int i = 0; i < n; ++i) gg.b_s[i] += dcand[i];
      kernels::matvec_t_add(gk.W_s.data(), n, n, dcand.data(), dxdrop.data());
      std::fill(dgated.begin(), dgated.end(), 0.0);
      kernels::matvec_t_add(gk.U_s.data(), n, n, dcand.data(), dgated.data());
      for (int i = 0; i < n; ++i) {
        dr[i] = dgated[i] * s0[i];
        dsc[i] += dgated[i] * r[i];
      }

      // gates
      for (int i = 0; i < n; ++i) dz[i] *= z[i] * (1.0 - z[i]);
      kernels::ger(gg.W_z.data(), n, n, dz.data(), xd.data());
      kernels::ger(gg.U_z.data(), n, n, dz.data(), s0);
      for (int i = 0; i < n; ++i) gg.b_z[i] += dz[i];
      kernels::matvec_t_add(gk.W_z.data(), n, n, dz.data(), dxdrop.data());
      kernels::matvec_t_add(gk.U_z.data(), n, n, dz.data(), dsc);

      for (int i = 0; i < n; ++i) dr[i] *= r[i] * (1.0 - r[i]);
      kernels::ger(gg.W_r.data(), n, n, dr.data(), xd.data());
      kernels::ger(gg.U_r.data(), n, n, dr.data(), s0);
      for (int i = 0; i < n; ++i) gg.b_r[i] += dr[i];
      kernels::matvec_t_add(gk.W_r.data(), n, n, dr.data(), dxdrop.data());
      kernels::matvec_t_add(gk.U_r.data(), n, n, dr.data(), dsc);

      // decay path
      if (dgamma != 0.0) {
        g.raw_lambda[k] += dgamma * gamma * (-cache.dt[j] / cfg.dynamics.tau_t_s) *
                           sigmoid(m.raw_lambda[k]);
        g.raw_mu[k] += dgamma * gamma * (-cache.dd[j] / cfg.dynamics.tau_d_km) *
                       sigmoid(m.raw_mu[k]);
      }
    }

    // input projection backward
    if (cache.train && cache.keep < 1.0) {
      auto xm = row(cache.xmask, j, d.d_s);
      for (int i = 0; i < n; ++i) dxhat[i] = dxdrop[i] * xm[i];
    } else {
      dxhat = dxdrop;
    }
    auto xj = row(cache.x, j, d.d_x());
    kernels::ger(g.W_x.data(), d.d_s, d.d_x(), dxhat.data(), xj.data());
    for (int i = 0; i < n; ++i) g.b_x[i] += dxhat[i];
    std::fill(dx.begin(), dx.end(), 0.0);
    kernels::matvec_t_add(m.W_x.data(), d.d_s, d.d_x(), dxhat.data(), dx.data());

    // split the input gradient over [e_poi ; p ; d], folding in the
    // context gradient from the scorer (c = [p ; d])
    kernels::axpy(g.poi_emb.data() + std::size_t(cache.poi[j]) * d.d_e, 1.0,
                  dx.data(), d.d_e);
    const double* dp = dx.data() + d.d_e;
    const double* ddsp = dx.data() + d.d_e + d.d_p();
    // temporal: only the slot embedding is learnable
    {
      double* dst = g.slot_emb.data() + std::size_t(cache.slot[j]) * d.d_slot;
      for (int i = 0; i < d.d_slot; ++i)
        dst[i] += dp[4 + i] + dc[4 + i];
    }
    // spatial
    if (!cache.has_prev[j]) {
      for (int i = 0; i < d.d_sp; ++i)
        g.no_prev[i] += ddsp[i] + dc[d.d_p() + i];
    } else {
      std::vector<double> ddsp_full(d.d_sp);
      for (int i = 0; i < d.d_sp; ++i)
        ddsp_full[i] = ddsp[i] + dc[d.d_p() + i];
      auto uj = row(cache.u, j, d.d_u());
      kernels::ger(g.W_d.data(), d.d_sp, d.d_u(), ddsp_full.data(), uj.data());
      std::fill(du.begin(), du.end(), 0.0);
      kernels::matvec_t_add(m.W_d.data(), d.d_sp, d.d_u(), ddsp_full.data(),
                            du.data());
      double* de = g.dist_emb.data() + std::size_t(cache.bucket[j]) * d.d_dist;
      for (int i = 0; i < d.d_dist; ++i) de[i] += du[1 + i];
    }
  }
}

void eval_forward(const ModelView& m, const RunConfig& cfg,
                  const UserTrajectory& traj, int begin, int count,
                  std::span<double> hproj_out) {
  const ModelDims& d = m.dims;
  if (count < 1) throw std::runtime_error("empty evaluation context");
  const bool uniform = cfg.variant() == Variant::UniformAgg;

  std::vector<double> bank(d.d(), 0.0), bank_next(d.d());
  std::vector<double> p(d.d_p()), u(d.d_u()), dsp(d.d_sp), x(d.d_x()),
      xhat(d.d_s), c(d.d_c());

  for (int j = 0; j < count; ++j) {
    const int gi = begin + j;
    const Event& ev = traj.events[gi];
    bool has_prev = gi > 0;
    double dt = has_prev ? traj.gaps[gi].dt_s : 0.0;
    double dd = has_prev ? traj.gaps[gi].dd_km : 0.0;
    double dlat = has_prev ? ev.lat - traj.events[gi - 1].lat : 0.0;
    double dlon = has_prev ? ev.lon - traj.events[gi - 1].lon : 0.0;
    encode_time(ev.ts, m, p);
    encode_space(has_prev, dd, dlat, dlon, cfg.model.bucket_edges_km, m, u, dsp);
    build_input(ev.poi, p, dsp, m, x);
    project_input(x, m, xhat);
    step_all(bank, xhat, dt, dd, m, cfg.dynamics, bank_next);
    bank.swap(bank_next);
    if (j == count - 1) {
      std::copy(p.begin(), p.end(), c.begin());
      std::copy(dsp.begin(), dsp.end(), c.begin() + d.d_p());
    }
  }
  std::vector<double> alpha(d.K), hdec(d.d());
  aggregate(bank, c, m, cfg.dynamics, uniform, alpha, hdec);
  project_decision(hdec, m, hproj_out);
}

namespace {

void tie_homogeneous_grads(const ModelDims& d, const ParamLayout& layout,
                           std::vector<double>& grad) {
  if (d.K <= 1) return;
  auto span_of = [&](const std::string& name) -> std::span<double> {
    const auto& e = layout.entry(name);
    return {grad.data() + e.offset, e.size()};
  };
  for (const char* w :
       {"W_z", "U_z", "W_r", "U_r", "W_s", "U_s", "b_z", "b_r", "b_s"}) {
    auto b0 = span_of("gru0." + std::string(w));
    for (int k = 1; k < d.K; ++k) {
      auto bk = span_of("gru" + std::to_string(k) + "." + w);
      for (std::size_t i = 0; i < b0.size(); ++i) b0[i] += bk[i];
    }
    for (int k = 1; k < d.K; ++k) {
      auto bk = span_of("gru" + std::to_string(k) + "." + w);
      std::copy(b0.begin(), b0.end(), bk.begin());
    }
  }
  for (const char* w : {"decay.raw_lambda", "decay.raw_mu"}) {
    auto b = span_of(w);
    double sum = 0.0;
    for (double v : b) sum += v;
    for (double& v : b) v = sum;
  }
}

}  // namespace

double compute_gradients(const ParameterSet& params, const RunConfig& cfg,
                         const Dataset& data, std::span<const BatchItem> batch,
                         int epoch, std::uint64_t run_seed,
                         std::vector<double>& grad_out, int threads) {
  const ModelDims dims = model_dims(cfg, static_cast<int>(data.n_pois()));
  const ModelView view = make_view(dims, params);
  const std::size_t P = params.layout.total;

  int workers = std::max(1, std::min<int>(threads, static_cast<int>(batch.size())));
  std::vector<std::vector<double>> wgrad(workers);
  std::vector<double> wloss(workers, 0.0);
  std::vector<long long> wsteps(workers, 0);

  parallel_chunks(static_cast<int>(batch.size()), workers,
                  [&](int w, int b0, int b1) {
    wgrad[w].assign(P, 0.0);
    GradView gv = make_grad_view(dims, params.layout, wgrad[w]);
    RolloutCache cache;
    for (int i = b0; i < b1; ++i) {
      const BatchItem& item = batch[i];
      auto rng = make_rng(stream_seed(run_seed, kStreamTraj,
                                      static_cast<std::uint64_t>(epoch)),
                          static_cast<std::uint64_t>(item.user));
      TrajOutcome o = forward_trajectory(view, cfg, data.users[item.user],
                                         item.begin, item.count, rng,
                                         /*train=*/true, cache);
      backward_trajectory(view, cfg, cache, 1.0, gv);
      wloss[w] += o.loss;
      wsteps[w] += o.steps;
    }
  });

  grad_out.assign(P, 0.0);
  double loss = 0.0;
  long long steps = 0;
  for (int w = 0; w < workers; ++w) {
    if (wgrad[w].empty()) continue;
    kernels::axpy(grad_out.data(), 1.0, wgrad[w].data(), P);
    loss += wloss[w];
    steps += wsteps[w];
  }
  if (steps == 0) throw std::runtime_error("batch produced no training steps");
  double inv = 1.0 / static_cast<double>(steps);
  for (double& v : grad_out) v *= inv;
  if (cfg.variant() == Variant::Homogeneous)
    tie_homogeneous_grads(dims, params.layout, grad_out);
  return loss * inv;
}

void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, const OptimizerConfig& opt,
               std::span<const std::uint8_t> mask) {
  const std::size_t P = params.size();
  if (state.m.size() != P) {
    state.m.assign(P, 0.0);
    state.v.assign(P, 0.0);
  }
  ++state.t;
  const double b1 = opt.beta1, b2 = opt.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < P; ++i) {
    double g = grads[i];
    if (opt.weight_decay != 0.0 && (mask.empty() || mask[i]))
      g += opt.weight_decay * params[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    double mhat = state.m[i] / c1;
    double vhat = state.v[i] / c2;
    params[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
}

namespace {

// Validation MRR; full ranking by default, sampled when the non-protocol
// val_sample_pois knob is set.
double validation_mrr(const ModelView& view, const RunConfig& cfg,
                      const Dataset& data, const DatasetSplit& split,
                      std::uint64_t run_seed, int threads) {
  if (cfg.val_sample_pois <= 0) {
    return evaluate(view, cfg, data, split, SplitKind::Val, threads).mean.mrr;
  }
  const int sample = std::min<int>(cfg.val_sample_pois,
                                   static_cast<int>(data.n_pois()) - 1);
  std::vector<double> rr(split.eval_users.size(), 0.0);
  parallel_chunks(static_cast<int>(split.eval_users.size()), threads,
                  [&](int, int b0, int b1) {
    std::vector<double> hproj(view.dims.d_e);
    std::vector<std::int32_t> negs, scratch;
    for (int i = b0; i < b1; ++i) {
      int u = split.eval_users[i];
      const auto& traj = data.users[u];
      int n = static_cast<int>(traj.events.size());
      int target_idx = n - 2;
      int count = std::min(target_idx, cfg.max_seq_len);
      eval_forward(view, cfg, traj, target_idx - count, count, hproj);
      int target = traj.events[target_idx].poi;
      auto rng = make_rng(stream_seed(run_seed, kStreamTraj, 0xEA11),
                          static_cast<std::uint64_t>(u));
      sample_negatives(rng, view.dims.n_pois, target, sample, negs, scratch);
      double st = score_poi(hproj, target, view);
      int rank = 1;
      for (int id : negs) {
        double s = score_poi(hproj, id, view);
        if (s > st || (s == st && id < target)) ++rank;
      }
      rr[i] = 1.0 / rank;
    }
  });
  double sum = 0.0;
  for (double v : rr) sum += v;
  return rr.empty() ? 0.0 : sum / static_cast<double>(rr.size());
}

}  // namespace

Checkpoint train(const Dataset& data, const DatasetSplit& split,
                 const RunConfig& cfg, std::uint64_t seed,
                 const Checkpoint* resume,
                 const std::function<void(const EpochStat&)>& on_epoch) {
  if (split.train_users.empty())
    throw std::runtime_error("training set is empty");
  if (static_cast<int>(data.n_pois()) <= cfg.objective.n_neg)
    throw std::runtime_error(
        "catalog too small for objective.n_neg negatives");

  const ModelDims dims = model_dims(cfg, static_cast<int>(data.n_pois()));
  const ParamLayout layout = make_layout(dims);
  const int threads = env_threads();

  Checkpoint ck;
  ck.config_canonical = canonical_json(cfg);
  ck.config_hash = config_hash(cfg);
  ck.layout = layout;
  ParameterSet params;
  params.layout = layout;
  AdamState adam;
  int start_epoch = 0;
  if (resume) {
    if (resume->config_hash != ck.config_hash)
      throw std::runtime_error("resume checkpoint config hash mismatch");
    params.flat = resume->cur_params;
    adam = resume->adam;
    ck = *resume;
    start_epoch = resume->next_epoch;
  } else {
    params = init_params(dims, cfg.dynamics, cfg.variant(), seed);
    ck.best_params = params.flat;
  }
  const auto mask = decay_mask(layout);

  // fixed trainable windows; the most recent max_seq_len events are kept
  std::vector<BatchItem> all_items;
  for (int u : split.train_users) {
    int len = split.train_len(u);
    int count = std::min(len, cfg.max_seq_len);
    int begin = len - count;
    if (count >= 2) all_items.push_back({u, begin, count});
  }
  if (all_items.empty())
    throw std::runtime_error("no trainable trajectories (all too short)");

  std::vector<double> grad;
  for (int epoch = start_epoch; epoch < cfg.optimizer.epochs; ++epoch) {
    auto order = all_items;
    {
      auto rng = make_rng(seed, kStreamShuffle, static_cast<std::uint64_t>(epoch));
      std::shuffle(order.begin(), order.end(), rng);
    }
    double loss_sum = 0.0;
    long long step_sum = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.optimizer.batch_size) {
      std::size_t e = std::min(order.size(), b + cfg.optimizer.batch_size);
      std::span<const BatchItem> batch(order.data() + b, e - b);
      double mean_loss =
          compute_gradients(params, cfg, data, batch, epoch, seed, grad, threads);
      long long batch_steps = 0;
      for (const auto& it : batch) batch_steps += it.count - 1;
      loss_sum += mean_loss * static_cast<double>(batch_steps);
      step_sum += batch_steps;
      adam_step(adam, params.flat, grad, cfg.optimizer, mask);
    }

    ModelView view = make_view(dims, params);
    EpochStat stat;
    stat.epoch = epoch;
    stat.train_loss = step_sum > 0 ? loss_sum / static_cast<double>(step_sum) : 0.0;
    stat.val_mrr = split.eval_users.empty()
                       ? 0.0
                       : validation_mrr(view, cfg, data, split, seed, threads);
    ck.history.push_back(stat);
    if (on_epoch) on_epoch(stat);

    if (stat.val_mrr > ck.best_val_mrr) {
      ck.best_val_mrr = stat.val_mrr;
      ck.best_params = params.flat;
      ck.epochs_since_improve = 0;
    } else {
      ++ck.epochs_since_improve;
    }
    ck.next_epoch = epoch + 1;
    if (cfg.optimizer.patience > 0 &&
        ck.epochs_since_improve >= cfg.optimizer.patience)
      break;
  }

  if (split.eval_users.empty()) ck.best_params = params.flat;
  ck.cur_params = params.flat;
  ck.adam = adam;
  return ck;
}

// ---------------------------------------------------------------------------
// checkpoint file format

namespace {

constexpr char kCkMagic[8] = {'A', 'D', 'S', 'P', 'O', 'I', 'C', 'K'};
constexpr std::uint32_t kCkVersion = 1;

template <typename T>
void put(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_str(std::string& buf, const std::string& s) {
  put(buf, static_cast<std::uint64_t>(s.size()));
  buf.append(s);
}

void put_vec(std::string& buf, const std::vector<double>& v) {
  put(buf, static_cast<std::uint64_t>(v.size()));
  buf.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  template <typename T>
  T get() {
    if (pos + sizeof(T) > buf.size())
      throw std::runtime_error("checkpoint file truncated");
    T v{};
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string get_str() {
    auto n = get<std::uint64_t>();
    if (pos + n > buf.size())
      throw std::runtime_error("checkpoint file truncated");
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  std::vector<double> get_vec() {
    auto n = get<std::uint64_t>();
    if (pos + n * sizeof(double) > buf.size())
      throw std::runtime_error("checkpoint file truncated");
    std::vector<double> v(n);
    std::memcpy(v.data(), buf.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
    return v;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::string body;
  put_str(body, c.config_canonical);
  put(body, c.config_hash);
  put(body, c.dataset_fingerprint);
  put(body, static_cast<std::uint64_t>(c.layout.entries.size()));
  for (const auto& e : c.layout.entries) {
    put_str(body, e.name);
    put(body, static_cast<std::uint64_t>(e.rows));
    put(body, static_cast<std::uint64_t>(e.cols));
    put(body, static_cast<std::uint64_t>(e.offset));
  }
  put(body, static_cast<std::uint64_t>(c.layout.total));
  put_vec(body, c.best_params);
  put(body, c.best_val_mrr);
  put_vec(body, c.cur_params);
  put_vec(body, c.adam.m);
  put_vec(body, c.adam.v);
  put(body, c.adam.t);
  put(body, static_cast<std::int32_t>(c.next_epoch));
  put(body, static_cast<std::int32_t>(c.epochs_since_improve));
  put(body, static_cast<std::uint64_t>(c.history.size()));
  for (const auto& h : c.history) {
    put(body, static_cast<std::int32_t>(h.epoch));
    put(body, h.train_loss);
    put(body, h.val_mrr);
  }

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kCkMagic, sizeof(kCkMagic));
    std::uint32_t version = kCkVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    std::uint64_t checksum = fnv1a64(body.data(), body.size());
    out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string all((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (all.size() < sizeof(kCkMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t) ||
      std::memcmp(all.data(), kCkMagic, sizeof(kCkMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  std::uint32_t version;
  std::memcpy(&version, all.data() + sizeof(kCkMagic), sizeof(version));
  if (version != kCkVersion)
    throw std::runtime_error("unsupported checkpoint version");
  std::uint64_t checksum;
  std::memcpy(&checksum, all.data() + sizeof(kCkMagic) + sizeof(version),
              sizeof(checksum));
  std::string body =
      all.substr(sizeof(kCkMagic) + sizeof(version) + sizeof(checksum));
  if (checksum != fnv1a64(body.data(), body.size()))
    throw std::runtime_error("checkpoint checksum mismatch: " + path);

  Reader r{body};
  Checkpoint c;
  c.config_canonical = r.get_str();
  c.config_hash = r.get<std::uint64_t>();
  c.dataset_fingerprint = r.get<std::uint64_t>();
  auto n_entries = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_entries; ++i) {
    ParamEntry e;
    e.name = r.get_str();
    e.rows = r.get<std::uint64_t>();
    e.cols = r.get<std::uint64_t>();
    e.offset = r.get<std::uint64_t>();
    c.layout.entries.push_back(std::move(e));
  }
  c.layout.total = r.get<std::uint64_t>();
  c.best_params = r.get_vec();
  c.best_val_mrr = r.get<double>();
  c.cur_params = r.get_vec();
  c.adam.m = r.get_vec();
  c.adam.v = r.get_vec();
  c.adam.t = r.get<std::uint64_t>();
  c.next_epoch = r.get<std::int32_t>();
  c.epochs_since_improve = r.get<std::int32_t>();
  auto n_hist = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_hist; ++i) {
    EpochStat h;
    h.epoch = r.get<std::int32_t>();
    h.train_loss = r.get<double>();
    h.val_mrr = r.get<double>();
    c.history.push_back(h);
  }
  return c;
}

// ---------------------------------------------------------------------------
// gradient verification

double fd_rel_err(double a, double b) {
  double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / denom;
}

namespace {

Dataset gradcheck_dataset(std::uint64_t seed, int n_pois, int n_traj,
                          int traj_len) {
  Dataset d;
  auto rng = make_rng(seed, 0x47C4ULL);  // gradcheck data stream
  std::uniform_real_distribution<double> dlat(-0.05, 0.05);
  std::uniform_real_distribution<double> dlon(-0.05, 0.05);
  d.catalog.resize(n_pois);
  for (int i = 0; i < n_pois; ++i) {
    d.catalog[i].orig_id = i;
    d.catalog[i].lat = 40.7 + dlat(rng);
    d.catalog[i].lon = -74.0 + dlon(rng);
  }
  std::uniform_int_distribution<int> poi_pick(0, n_pois - 1);
  std::uniform_int_distribution<std::int64_t> gap(600, 2 * 86400);
  for (int u = 0; u < n_traj; ++u) {
    UserTrajectory t;
    t.orig_user = u;
    std::int64_t ts = 1333411200 + u * 977;
    int prev = -1;
    for (int i = 0; i < traj_len; ++i) {
      int poi = poi_pick(rng);
      while (poi == prev) poi = poi_pick(rng);
      prev = poi;
      Event e;
      e.poi = poi;
      e.ts = ts;
      e.lat = d.catalog[poi].lat;
      e.lon = d.catalog[poi].lon;
      t.events.push_back(e);
      ts += gap(rng);
    }
    t.gaps.resize(t.events.size());
    for (std::size_t i = 1; i < t.events.size(); ++i) {
      t.gaps[i].dt_s = double(t.events[i].ts - t.events[i - 1].ts);
      t.gaps[i].dd_km = haversine_km(t.events[i - 1].lat, t.events[i - 1].lon,
                                     t.events[i].lat, t.events[i].lon);
    }
    d.users.push_back(std::move(t));
  }
  return d;
}

double batch_mean_loss(const ParameterSet& params, const RunConfig& cfg,
                       const Dataset& data, std::span<const BatchItem> batch,
                       std::uint64_t run_seed) {
  const ModelDims dims = model_dims(cfg, static_cast<int>(data.n_pois()));
  const ModelView view = make_view(dims, params);
  RolloutCache cache;
  double loss = 0.0;
  long long steps = 0;
  for (const auto& item : batch) {
    auto rng = make_rng(stream_seed(run_seed, kStreamTraj, 0),
                        static_cast<std::uint64_t>(item.user));
    TrajOutcome o = forward_trajectory(view, cfg, data.users[item.user],
                                       item.begin, item.count, rng,
                                       /*train=*/true, cache);
    loss += o.loss;
    steps += o.steps;
  }
  return loss / static_cast<double>(steps);
}

}  // namespace

GradCheckData grad_check_data(const RunConfig& cfg, std::uint64_t seed,
                              double fd_step, int n_pois, int n_traj,
                              int traj_len) {
  GradCheckData out;
  out.fd_step = fd_step;
  Dataset data = gradcheck_dataset(seed, n_pois, n_traj, traj_len);
  const ModelDims dims = model_dims(cfg, n_pois);
  out.params = init_params(dims, cfg.dynamics, cfg.variant(), seed);

  std::vector<BatchItem> batch;
  for (int u = 0; u < n_traj; ++u) batch.push_back({u, 0, traj_len});

  compute_gradients(out.params, cfg, data, batch, /*epoch=*/0, seed,
                    out.analytic, /*threads=*/1);

  const std::size_t P = out.params.layout.total;
  out.coords.resize(P);
  std::iota(out.coords.begin(), out.coords.end(), std::size_t{0});
  if (P > 5000) {
    auto rng = make_rng(seed, 0xC07D5ULL);
    std::shuffle(out.coords.begin(), out.coords.end(), rng);
    out.coords.resize(P / 10);
    std::sort(out.coords.begin(), out.coords.end());
  }

  out.fd.assign(P, 0.0);
  ParameterSet probe = out.params;
  for (std::size_t c : out.coords) {
    double orig = probe.flat[c];
    probe.flat[c] = orig + fd_step;
    double up = batch_mean_loss(probe, cfg, data, batch, seed);
    probe.flat[c] = orig - fd_step;
    double down = batch_mean_loss(probe, cfg, data, batch, seed);
    probe.flat[c] = orig;
    out.fd[c] = (up - down) / (2.0 * fd_step);
  }
  return out;
}

GradCheckReport grad_report(const GradCheckData& data,
                            std::span<const double> analytic_override) {
  std::span<const double> a =
      analytic_override.empty() ? std::span<const double>(data.analytic)
                                : analytic_override;
  GradCheckReport rep;
  rep.fd_step = data.fd_step;
  rep.checked = data.coords.size();
  for (std::size_t c : data.coords) {
    double err = fd_rel_err(a[c], data.fd[c]);
    if (err > rep.max_rel_err) {
      rep.max_rel_err = err;
      rep.worst_coord = c;
    }
  }
  for (const auto& e : data.params.layout.entries) {
    if (rep.worst_coord >= e.offset && rep.worst_coord < e.offset + e.size()) {
      rep.worst_block = e.name;
      break;
    }
  }
  return rep;
}

GradCheckReport grad_check(const RunConfig& cfg, std::uint64_t seed,
                           double fd_step, int n_pois, int n_traj,
                           int traj_len) {
  return grad_report(
      grad_check_data(cfg, seed, fd_step, n_pois, n_traj, traj_len));
}

}  // namespace adspoi
