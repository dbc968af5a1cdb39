#pragma once
// Full-ranking inference, HR@k / NDCG@k / MRR, multi-seed aggregation,
// paired t-test and the efficiency micro-benchmark.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adspoi/dataset.hpp"
#include "adspoi/training.hpp"

namespace adspoi {

// 1-based rank of target under full-catalog scoring; ties broken toward
// smaller ids ranking ahead. scratch holds the |L| scores between calls.
int rank_full(const ModelView& m, std::span<const double> hproj, int target,
              std::vector<double>& scratch);

double hr_at_k(int rank, int k);
double ndcg_at_k(int rank, int k);
double mrr_point(int rank);

enum class SplitKind { Val, Test };

struct MetricPoint {
  double hr5 = 0, hr10 = 0, ndcg5 = 0, ndcg10 = 0, mrr = 0;
};

struct SeedEval {
  std::vector<int> ranks;  // per instance, in split.eval_users order
  MetricPoint mean;
  int count = 0;
};

SeedEval evaluate(const ModelView& m, const RunConfig& cfg,
                  const Dataset& data, const DatasetSplit& split,
                  SplitKind kind, int threads);

struct RankingReport {
  std::vector<std::uint64_t> seeds;
  std::vector<MetricPoint> per_seed;
  MetricPoint mean, stddev;  // sample std (n-1); zero + flag for one seed
  bool single_seed = false;
  int instance_count = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t dataset_fingerprint = 0;
  std::string variant = "full";
  std::string dataset_name;
  std::vector<std::vector<int>> per_seed_ranks;
};

RankingReport aggregate_seeds(const std::vector<std::uint64_t>& seeds,
                              const std::vector<SeedEval>& evals,
                              std::uint64_t config_hash,
                              std::uint64_t fingerprint);

// Trains one model per seed and evaluates the requested split.
RankingReport multi_seed(const Dataset& data, const DatasetSplit& split,
                         const RunConfig& cfg,
                         const std::vector<std::uint64_t>& seeds,
                         SplitKind kind, int threads);

std::string report_to_json(const RankingReport& r);
RankingReport report_from_json(const std::string& text);
std::string report_to_csv(const RankingReport& r);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  int df = 0;
  bool degenerate = false;
};

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

struct FlopEstimate {
  double rollout = 0;   // K-proportional per-trajectory work
  double encode = 0;    // K-independent encoding/projection work
  double scoring = 0;   // full-catalog scoring
  double total = 0;
};

FlopEstimate estimate_flops(const ModelDims& dims, int steps);

struct BenchResult {
  double latency_ms_median = 0;
  double throughput_qps = 0;
  double peak_memory_mb = 0;
  FlopEstimate flops;
  int seq_len = 0, catalog = 0, reps = 0;
};

// Single-query end-to-end inference (rollout + full scoring), single thread,
// 10 warmup runs excluded.
BenchResult bench(const ModelView& m, const RunConfig& cfg, int seq_len,
                  int reps, std::uint64_t seed);

std::string bench_to_json(const BenchResult& b);

// Median seconds for one eval-mode rollout of a synthetic trajectory of
// n events (no scoring); used by the complexity checks.
double time_rollout_s(const ModelView& m, const RunConfig& cfg, int n,
                      int reps, std::uint64_t seed);

}  // namespace adspoi
