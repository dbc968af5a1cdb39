#pragma once
// Run configuration: JSON on disk, validated, canonicalized and hashed.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adspoi/synth.hpp"

namespace adspoi {

struct ModelConfig {
  int d_e = 128;
  int K = 4;
  int d_s = 32;
  int d_slot = 8;
  int d_dist = 8;
  int d_spatial = 16;
  int n_slot = 48;
  // interior bucket edges in km; buckets are [0,e0), [e0,e1), ..., [last,inf)
  std::vector<double> bucket_edges_km = {0.1, 0.5, 1, 2, 5, 10, 20, 50, 100};
};

struct DynamicsConfig {
  double tau_t_s = 86400.0;
  double tau_d_km = 10.0;
  double temperature = 1.0;
  double decay_init = 0.5;     // softplus(raw) at k = 0
  double decay_stagger = 0.25; // added per k to break symmetry
};

struct ObjectiveConfig {
  int n_neg = 100;
  double label_smoothing = 0.1;
  int k_hard = 10;
  double margin = 0.5;
  double bpr_weight = 0.1;
  std::string sampler = "uniform";  // "popularity" is a declared stub
};

struct OptimizerConfig {
  double lr = 1e-3;
  int batch_size = 256;
  double dropout = 0.2;
  double weight_decay = 1e-5;
  int epochs = 100;
  int patience = 10;  // 0 disables early stopping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

enum class Variant { Full, Monolithic, SingleSmall, UniformAgg, Homogeneous };

const char* variant_name(Variant v);
std::optional<Variant> parse_variant(const std::string& s);

struct RunConfig {
  std::string dataset_path;
  ModelConfig model;
  DynamicsConfig dynamics;
  ObjectiveConfig objective;
  OptimizerConfig optimizer;
  std::uint64_t seed = 42;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string ablation = "full";
  bool deterministic = false;
  int max_seq_len = 200;
  int val_sample_pois = 0;  // non-protocol sampled validation; 0 = full ranking
  std::optional<SynthConfig> synth;

  Variant variant() const;
};

// Throws std::runtime_error with a field-level message on invalid values.
void validate(const RunConfig& cfg);

RunConfig load_config(const std::string& path);
RunConfig config_from_json_text(const std::string& text);

// Defaults filled in, keys sorted, compact dump.
std::string canonical_json(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

std::uint64_t fnv1a64(const void* data, std::size_t len);

// Model shape table derived from config + catalog size, with the ablation
// variant already applied (K/d_s overrides).
struct ModelDims {
  int n_pois = 0;
  int d_e = 0, K = 0, d_s = 0;
  int d_slot = 0, d_dist = 0, d_sp = 0, n_slot = 0, n_bucket = 0;

  int d_p() const { return 4 + d_slot; }
  int d_c() const { return d_p() + d_sp; }
  int d_x() const { return d_e + d_p() + d_sp; }
  int d() const { return K * d_s; }
  int d_u() const { return 3 + d_dist; }
  int g_in() const { return d_s + d_c(); }
};

ModelDims model_dims(const RunConfig& cfg, int n_pois);

}  // namespace adspoi
