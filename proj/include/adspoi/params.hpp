#pragma once
// Learnable parameters: one flat vector with a named shape table on top.
// Named spans alias the flat storage directly.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adspoi/config.hpp"

namespace adspoi {

struct ParamEntry {
  std::string name;
  std::size_t rows = 0, cols = 0, offset = 0;
  std::size_t size() const { return rows * cols; }
};

struct ParamLayout {
  std::vector<ParamEntry> entries;
  std::size_t total = 0;

  const ParamEntry& entry(const std::string& name) const;
  bool has(const std::string& name) const;
};

// Block order: poi_emb, poi_bias, slot_emb, dist_emb, W_d, no_prev, W_x, b_x,
// gru{k}.{W_z,U_z,W_r,U_r,W_s,U_s,b_z,b_r,b_s}, decay.raw_lambda,
// decay.raw_mu, agg.W_g, agg.b_g, agg.v_g, W_h, b_h.
ParamLayout make_layout(const ModelDims& dims);

struct ParameterSet {
  ParamLayout layout;
  std::vector<double> flat;

  std::span<double> block(const std::string& name);
  std::span<const double> block(const std::string& name) const;
};

ParameterSet init_params(const ModelDims& dims, const DynamicsConfig& dyn,
                         Variant variant, std::uint64_t seed);

// Read-only structured view used by all forward/backward code.
struct GruView {
  std::span<const double> W_z, U_z, W_r, U_r, W_s, U_s, b_z, b_r, b_s;
};

struct ModelView {
  ModelDims dims;
  std::span<const double> poi_emb, poi_bias, slot_emb, dist_emb;
  std::span<const double> W_d, no_prev, W_x, b_x, W_h, b_h;
  std::vector<GruView> gru;
  std::span<const double> raw_lambda, raw_mu;
  std::span<const double> W_g, b_g, v_g;
};

struct GruGrad {
  std::span<double> W_z, U_z, W_r, U_r, W_s, U_s, b_z, b_r, b_s;
};

struct GradView {
  ModelDims dims;
  std::span<double> poi_emb, poi_bias, slot_emb, dist_emb;
  std::span<double> W_d, no_prev, W_x, b_x, W_h, b_h;
  std::vector<GruGrad> gru;
  std::span<double> raw_lambda, raw_mu;
  std::span<double> W_g, b_g, v_g;
};

ModelView make_view(const ModelDims& dims, const ParameterSet& params);
GradView make_grad_view(const ModelDims& dims, const ParamLayout& layout,
                        std::vector<double>& grad);

// Per-coordinate weight decay mask: 1 for weight matrices and embeddings,
// 0 for every bias (b_x, b_h, gate biases, agg.b_g, poi_bias).
std::vector<std::uint8_t> decay_mask(const ParamLayout& layout);

}  // namespace adspoi
