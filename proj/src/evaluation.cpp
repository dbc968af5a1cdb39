#include "adspoi/evaluation.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "adspoi/geo.hpp"
#include "adspoi/kernels.hpp"
#include "adspoi/parallel.hpp"
#include "adspoi/rng.hpp"
#include "adspoi/stats.hpp"

namespace adspoi {

using nlohmann::json;

int rank_full(const ModelView& m, std::span<const double> hproj, int target,
              std::vector<double>& scratch) {
  const int L = m.dims.n_pois;
  if (target < 0 || target >= L)
    throw std::out_of_range("rank_full: target not in catalog");
  scratch.resize(L);
  kernels::matvec(m.poi_emb.data(), L, m.dims.d_e, hproj.data(),
                  scratch.data());
  for (int i = 0; i < L; ++i) scratch[i] += m.poi_bias[i];
  const double st = scratch[target];
  int rank = 1;
  for (int i = 0; i < L; ++i) {
    if (i == target) continue;
    if (scratch[i] > st || (scratch[i] == st && i < target)) ++rank;
  }
  return rank;
}

double hr_at_k(int rank, int k) { return rank <= k ? 1.0 : 0.0; }

double ndcg_at_k(int rank, int k) {
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

double mrr_point(int rank) { return 1.0 / static_cast<double>(rank); }

SeedEval evaluate(const ModelView& m, const RunConfig& cfg,
                  const Dataset& data, const DatasetSplit& split,
                  SplitKind kind, int threads) {
  SeedEval out;
  const int n = static_cast<int>(split.eval_users.size());
  out.ranks.assign(n, 0);
  out.count = n;
  parallel_chunks(n, threads, [&](int, int b0, int b1) {
    std::vector<double> hproj(m.dims.d_e);
    std::vector<double> scores;
    for (int i = b0; i < b1; ++i) {
      const int u = split.eval_users[i];
      const auto& traj = data.users[u];
      const int nev = static_cast<int>(traj.events.size());
      const int target_idx = kind == SplitKind::Val ? nev - 2 : nev - 1;
      const int count = std::min(target_idx, cfg.max_seq_len);
      eval_forward(m, cfg, traj, target_idx - count, count, hproj);
      out.ranks[i] = rank_full(m, hproj, traj.events[target_idx].poi, scores);
    }
  });
  for (int r : out.ranks) {
    out.mean.hr5 += hr_at_k(r, 5);
    out.mean.hr10 += hr_at_k(r, 10);
    out.mean.ndcg5 += ndcg_at_k(r, 5);
    out.mean.ndcg10 += ndcg_at_k(r, 10);
    out.mean.mrr += mrr_point(r);
  }
  if (n > 0) {
    out.mean.hr5 /= n;
    out.mean.hr10 /= n;
    out.mean.ndcg5 /= n;
    out.mean.ndcg10 /= n;
    out.mean.mrr /= n;
  }
  return out;
}

namespace {

template <typename Get>
void fill_stat(const std::vector<MetricPoint>& per_seed, Get get, double& mean,
               double& stddev) {
  std::vector<double> v;
  v.reserve(per_seed.size());
  for (const auto& p : per_seed) v.push_back(get(p));
  mean = mean_of(v);
  stddev = sample_std(v);
}

}  // namespace

RankingReport aggregate_seeds(const std::vector<std::uint64_t>& seeds,
                              const std::vector<SeedEval>& evals,
                              std::uint64_t config_hash,
                              std::uint64_t fingerprint) {
  if (seeds.size() != evals.size() || seeds.empty())
    throw std::invalid_argument("aggregate_seeds: seed/eval size mismatch");
  RankingReport r;
  r.seeds = seeds;
  r.config_hash = config_hash;
  r.dataset_fingerprint = fingerprint;
  r.single_seed = seeds.size() == 1;
  r.instance_count = evals[0].count;
  for (const auto& e : evals) {
    r.per_seed.push_back(e.mean);
    r.per_seed_ranks.push_back(e.ranks);
  }
  fill_stat(r.per_seed, [](const MetricPoint& p) { return p.hr5; }, r.mean.hr5,
            r.stddev.hr5);
  fill_stat(r.per_seed, [](const MetricPoint& p) { return p.hr10; },
            r.mean.hr10, r.stddev.hr10);
  fill_stat(r.per_seed, [](const MetricPoint& p) { return p.ndcg5; },
            r.mean.ndcg5, r.stddev.ndcg5);
  fill_stat(r.per_seed, [](const MetricPoint& p) { return p.ndcg10; },
            r.mean.ndcg10, r.stddev.ndcg10);
  fill_stat(r.per_seed, [](const MetricPoint& p) { return p.mrr; }, r.mean.mrr,
            r.stddev.mrr);
  return r;
}

RankingReport multi_seed(const Dataset& data, const DatasetSplit& split,
                         const RunConfig& cfg,
                         const std::vector<std::uint64_t>& seeds,
                         SplitKind kind, int threads) {
  if (seeds.empty()) throw std::invalid_argument("multi_seed: no seeds");
  const ModelDims dims = model_dims(cfg, static_cast<int>(data.n_pois()));
  std::vector<SeedEval> evals;
  for (std::uint64_t seed : seeds) {
    Checkpoint ck = train(data, split, cfg, seed);
    ParameterSet params;
    params.layout = ck.layout;
    params.flat = ck.best_params;
    ModelView view = make_view(dims, params);
    evals.push_back(evaluate(view, cfg, data, split, kind, threads));
  }
  RankingReport r = aggregate_seeds(seeds, evals, config_hash(cfg), 0);
  r.variant = cfg.ablation;
  return r;
}

namespace {

json metric_json(const MetricPoint& p) {
  return {{"HR@5", p.hr5},
          {"HR@10", p.hr10},
          {"NDCG@5", p.ndcg5},
          {"NDCG@10", p.ndcg10},
          {"MRR", p.mrr}};
}

MetricPoint metric_from_json(const json& j) {
  MetricPoint p;
  p.hr5 = j.at("HR@5").get<double>();
  p.hr10 = j.at("HR@10").get<double>();
  p.ndcg5 = j.at("NDCG@5").get<double>();
  p.ndcg10 = j.at("NDCG@10").get<double>();
  p.mrr = j.at("MRR").get<double>();
  return p;
}

}  // namespace

std::string report_to_json(const RankingReport& r) {
  json j;
  j["seeds"] = r.seeds;
  j["mean"] = metric_json(r.mean);
  j["std"] = metric_json(r.stddev);
  j["single_seed"] = r.single_seed;
  json per_seed = json::array();
  for (const auto& p : r.per_seed) per_seed.push_back(metric_json(p));
  j["per_seed"] = per_seed;
  j["per_seed_ranks"] = r.per_seed_ranks;
  j["instance_count"] = r.instance_count;
  j["config_hash"] = r.config_hash;
  j["dataset_fingerprint"] = r.dataset_fingerprint;
  j["variant"] = r.variant;
  j["dataset_name"] = r.dataset_name;
  return j.dump(2);
}

RankingReport report_from_json(const std::string& text) {
  json j = json::parse(text);
  RankingReport r;
  r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  r.mean = metric_from_json(j.at("mean"));
  r.stddev = metric_from_json(j.at("std"));
  r.single_seed = j.at("single_seed").get<bool>();
  for (const auto& p : j.at("per_seed")) r.per_seed.push_back(metric_from_json(p));
  r.per_seed_ranks =
      j.at("per_seed_ranks").get<std::vector<std::vector<int>>>();
  r.instance_count = j.at("instance_count").get<int>();
  r.config_hash = j.at("config_hash").get<std::uint64_t>();
  r.dataset_fingerprint = j.at("dataset_fingerprint").get<std::uint64_t>();
  r.variant = j.value("variant", "full");
  r.dataset_name = j.value("dataset_name", "");
  return r;
}

std::string report_to_csv(const RankingReport& r) {
  std::string csv = "seed,metric,value\n";
  auto add = [&](std::uint64_t seed, const char* name, double v) {
    csv += std::to_string(seed);
    csv += ',';
    csv += name;
    csv += ',';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    csv += buf;
    csv += '\n';
  };
  for (std::size_t i = 0; i < r.seeds.size(); ++i) {
    add(r.seeds[i], "HR@5", r.per_seed[i].hr5);
    add(r.seeds[i], "HR@10", r.per_seed[i].hr10);
    add(r.seeds[i], "NDCG@5", r.per_seed[i].ndcg5);
    add(r.seeds[i], "NDCG@10", r.per_seed[i].ndcg10);
    add(r.seeds[i], "MRR", r.per_seed[i].mrr);
  }
  return csv;
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("paired_ttest: need equal lengths >= 2");
  const int n = static_cast<int>(a.size());
  std::vector<double> diff(n);
  for (int i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  double m = mean_of(diff);
  double sd = sample_std(diff);
  TTestResult r;
  r.df = n - 1;
  if (sd == 0.0) {
    r.degenerate = true;
    r.t = 0.0;
    r.p = 1.0;
    return r;
  }
  r.t = m / (sd / std::sqrt(static_cast<double>(n)));
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

FlopEstimate estimate_flops(const ModelDims& d, int steps) {
  FlopEstimate f;
  const double s = steps;
  // 2 * mults of each affine map; elementwise/transcendental ops excluded
  f.rollout = s * d.K *
              (12.0 * d.d_s * d.d_s              // six gate matvecs
               + 2.0 * d.d_s * d.g_in()          // scorer hidden
               + 2.0 * d.d_s                     // scorer output
               + 2.0 * d.d_e * d.d_s);           // this state's share of W_h
  f.encode = s * (2.0 * d.d_sp * d.d_u() + 2.0 * d.d_s * d.d_x());
  f.scoring = 2.0 * double(d.n_pois) * d.d_e;
  f.total = f.rollout + f.encode + f.scoring;
  return f;
}

namespace {

UserTrajectory bench_trajectory(int n_pois, int seq_len, std::uint64_t seed) {
  UserTrajectory t;
  auto rng = make_rng(seed, 0xBE9CULL);
  std::uniform_int_distribution<int> poi(0, n_pois - 1);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  std::uniform_int_distribution<std::int64_t> gap(1800, 6 * 3600);
  std::int64_t ts = 1333411200;
  int prev = -1;
  for (int i = 0; i < seq_len; ++i) {
    int id = poi(rng);
    while (id == prev && n_pois > 1) id = poi(rng);
    prev = id;
    Event e;
    e.poi = id;
    e.ts = ts;
    e.lat = 40.7 + jitter(rng);
    e.lon = -74.0 + jitter(rng);
    t.events.push_back(e);
    ts += gap(rng);
  }
  t.gaps.resize(t.events.size());
  for (std::size_t i = 1; i < t.events.size(); ++i) {
    t.gaps[i].dt_s = double(t.events[i].ts - t.events[i - 1].ts);
    t.gaps[i].dd_km = haversine_km(t.events[i - 1].lat, t.events[i - 1].lon,
                                   t.events[i].lat, t.events[i].lon);
  }
  return t;
}

double peak_rss_mb() {
  struct rusage ru;
  getrusage(RUSAGE_SELF, &ru);
  return static_cast<double>(ru.ru_maxrss) / 1024.0;  // Linux: KB
}

}  // namespace

BenchResult bench(const ModelView& m, const RunConfig& cfg, int seq_len,
                  int reps, std::uint64_t seed) {
  if (reps < 1) throw std::invalid_argument("bench: reps must be >= 1");
  BenchResult out;
  out.seq_len = seq_len;
  out.catalog = m.dims.n_pois;
  out.reps = reps;

  UserTrajectory traj = bench_trajectory(m.dims.n_pois, seq_len, seed);
  std::vector<double> hproj(m.dims.d_e);
  std::vector<double> scores;
  int target = traj.events.back().poi;

  auto run_once = [&]() {
    eval_forward(m, cfg, traj, 0, seq_len, hproj);
    return rank_full(m, hproj, target, scores);
  };

  for (int i = 0; i < 10; ++i) (void)run_once();  // warmup, excluded

  std::vector<double> lat_ms(reps);
  auto t_total0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    (void)run_once();
    auto t1 = std::chrono::steady_clock::now();
    lat_ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  auto t_total1 = std::chrono::steady_clock::now();
  double total_s = std::chrono::duration<double>(t_total1 - t_total0).count();

  std::sort(lat_ms.begin(), lat_ms.end());
  out.latency_ms_median = lat_ms[lat_ms.size() / 2];
  out.throughput_qps = total_s > 0 ? reps / total_s : 0.0;
  out.peak_memory_mb = peak_rss_mb();
  out.flops = estimate_flops(m.dims, seq_len);
  return out;
}

std::string bench_to_json(const BenchResult& b) {
  json j;
  j["latency_ms"] = b.latency_ms_median;
  j["throughput_qps"] = b.throughput_qps;
  j["memory_mb"] = b.peak_memory_mb;
  j["flops"] = b.flops.total;
  j["flops_breakdown"] = {{"rollout", b.flops.rollout},
                          {"encode", b.flops.encode},
                          {"scoring", b.flops.scoring}};
  j["seq_len"] = b.seq_len;
  j["catalog"] = b.catalog;
  j["reps"] = b.reps;
  return j.dump(2);
}

double time_rollout_s(const ModelView& m, const RunConfig& cfg, int n,
                      int reps, std::uint64_t seed) {
  UserTrajectory traj = bench_trajectory(m.dims.n_pois, n, seed);
  std::vector<double> hproj(m.dims.d_e);
  for (int i = 0; i < 3; ++i) eval_forward(m, cfg, traj, 0, n, hproj);
  std::vector<double> times(reps);
  for (int i = 0; i < reps; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    eval_forward(m, cfg, traj, 0, n, hproj);
    auto t1 = std::chrono::steady_clock::now();
    times[i] = std::chrono::duration<double>(t1 - t0).count();
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

}  // namespace adspoi
