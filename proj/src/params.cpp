#include "adspoi/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "adspoi/rng.hpp"

namespace adspoi {

const ParamEntry& ParamLayout::entry(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw std::out_of_range("no parameter block named " + name);
}

bool ParamLayout::has(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return true;
  return false;
}

ParamLayout make_layout(const ModelDims& d) {
  ParamLayout l;
  auto add = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    ParamEntry e;
    e.name = name;
    e.rows = rows;
    e.cols = cols;
    e.offset = l.total;
    l.total += rows * cols;
    l.entries.push_back(std::move(e));
  };
  add("poi_emb", d.n_pois, d.d_e);
  add("poi_bias", d.n_pois, 1);
  add("slot_emb", d.n_slot, d.d_slot);
  add("dist_emb", d.n_bucket, d.d_dist);
  add("W_d", d.d_sp, d.d_u());
  add("no_prev", d.d_sp, 1);
  add("W_x", d.d_s, d.d_x());
  add("b_x", d.d_s, 1);
  for (int k = 0; k < d.K; ++k) {
    std::string p = "gru" + std::to_string(k) + ".";
    add(p + "W_z", d.d_s, d.d_s);
    add(p + "U_z", d.d_s, d.d_s);
    add(p + "W_r", d.d_s, d.d_s);
    add(p + "U_r", d.d_s, d.d_s);
    add(p + "W_s", d.d_s, d.d_s);
    add(p + "U_s", d.d_s, d.d_s);
    add(p + "b_z", d.d_s, 1);
    add(p + "b_r", d.d_s, 1);
    add(p + "b_s", d.d_s, 1);
  }
  add("decay.raw_lambda", d.K, 1);
  add("decay.raw_mu", d.K, 1);
  add("agg.W_g", d.d_s, d.g_in());
  add("agg.b_g", d.d_s, 1);
  add("agg.v_g", d.d_s, 1);
  add("W_h", d.d_e, d.d());
  add("b_h", d.d_e, 1);
  return l;
}

std::span<double> ParameterSet::block(const std::string& name) {
  const auto& e = layout.entry(name);
  return {flat.data() + e.offset, e.size()};
}

std::span<const double> ParameterSet::block(const std::string& name) const {
  const auto& e = layout.entry(name);
  return {flat.data() + e.offset, e.size()};
}

namespace {

// inverse softplus: softplus(x) = target
double softplus_inverse(double target) {
  return std::log(std::expm1(target));
}

void fill_uniform(std::span<double> w, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& x : w) x = dist(rng);
}

}  // namespace

ParameterSet init_params(const ModelDims& dims, const DynamicsConfig& dyn,
                         Variant variant, std::uint64_t seed) {
  ParameterSet ps;
  ps.layout = make_layout(dims);
  ps.flat.assign(ps.layout.total, 0.0);

  auto rng = make_rng(seed, kStreamInit);
  std::normal_distribution<double> emb(0.0, 0.02);

  for (double& x : ps.block("poi_emb")) x = emb(rng);
  for (double& x : ps.block("slot_emb")) x = emb(rng);
  for (double& x : ps.block("dist_emb")) x = emb(rng);
  // poi_bias stays 0

  fill_uniform(ps.block("W_d"), 1.0 / std::sqrt(double(dims.d_u())), rng);
  for (double& x : ps.block("no_prev")) x = emb(rng);
  fill_uniform(ps.block("W_x"), 1.0 / std::sqrt(double(dims.d_x())), rng);

  double gate_bound = 1.0 / std::sqrt(double(dims.d_s));
  for (int k = 0; k < dims.K; ++k) {
    std::string p = "gru" + std::to_string(k) + ".";
    for (const char* w : {"W_z", "U_z", "W_r", "U_r", "W_s", "U_s"})
      fill_uniform(ps.block(p + w), gate_bound, rng);
  }

  auto raw_lambda = ps.block("decay.raw_lambda");
  auto raw_mu = ps.block("decay.raw_mu");
  for (int k = 0; k < dims.K; ++k) {
    // staggered so the K dynamics start asymmetric; tied variants start equal
    double stagger =
        variant == Variant::Homogeneous ? 0.0 : dyn.decay_stagger * k;
    raw_lambda[k] = softplus_inverse(dyn.decay_init + stagger);
    raw_mu[k] = softplus_inverse(dyn.decay_init + stagger);
  }

  fill_uniform(ps.block("agg.W_g"), 1.0 / std::sqrt(double(dims.g_in())), rng);
  fill_uniform(ps.block("agg.v_g"), 1.0 / std::sqrt(double(dims.d_s)), rng);
  fill_uniform(ps.block("W_h"), 1.0 / std::sqrt(double(dims.d())), rng);

  if (variant == Variant::Homogeneous && dims.K > 1) {
    // tie all transition blocks to block 0
    for (int k = 1; k < dims.K; ++k) {
      std::string p0 = "gru0.";
      std::string pk = "gru" + std::to_string(k) + ".";
      for (const char* w :
           {"W_z", "U_z", "W_r", "U_r", "W_s", "U_s", "b_z", "b_r", "b_s"}) {
        auto src = ps.block(p0 + w);
        auto dst = ps.block(pk + w);
        std::copy(src.begin(), src.end(), dst.begin());
      }
    }
  }
  return ps;
}

ModelView make_view(const ModelDims& dims, const ParameterSet& params) {
  ModelView v;
  v.dims = dims;
  v.poi_emb = params.block("poi_emb");
  v.poi_bias = params.block("poi_bias");
  v.slot_emb = params.block("slot_emb");
  v.dist_emb = params.block("dist_emb");
  v.W_d = params.block("W_d");
  v.no_prev = params.block("no_prev");
  v.W_x = params.block("W_x");
  v.b_x = params.block("b_x");
  v.W_h = params.block("W_h");
  v.b_h = params.block("b_h");
  v.gru.resize(dims.K);
  for (int k = 0; k < dims.K; ++k) {
    std::string p = "gru" + std::to_string(k) + ".";
    GruView g;
    g.W_z = params.block(p + "W_z");
    g.U_z = params.block(p + "U_z");
    g.W_r = params.block(p + "W_r");
    g.U_r = params.block(p + "U_r");
    g.W_s = params.block(p + "W_s");
    g.U_s = params.block(p + "U_s");
    g.b_z = params.block(p + "b_z");
    g.b_r = params.block(p + "b_r");
    g.b_s = params.block(p + "b_s");
    v.gru[k] = g;
  }
  v.raw_lambda = params.block("decay.raw_lambda");
  v.raw_mu = params.block("decay.raw_mu");
  v.W_g = params.block("agg.W_g");
  v.b_g = params.block("agg.b_g");
  v.v_g = params.block("agg.v_g");
  return v;
}

GradView make_grad_view(const ModelDims& dims, const ParamLayout& layout,
                        std::vector<double>& grad) {
  if (grad.size() != layout.total)
    throw std::invalid_argument("gradient buffer size mismatch");
  auto span_of = [&](const std::string& name) -> std::span<double> {
    const auto& e = layout.entry(name);
    return {grad.data() + e.offset, e.size()};
  };
  GradView v;
  v.dims = dims;
  v.poi_emb = span_of("poi_emb");
  v.poi_bias = span_of("poi_bias");
  v.slot_emb = span_of("slot_emb");
  v.dist_emb = span_of("dist_emb");
  v.W_d = span_of("W_d");
  v.no_prev = span_of("no_prev");
  v.W_x = span_of("W_x");
  v.b_x = span_of("b_x");
  v.W_h = span_of("W_h");
  v.b_h = span_of("b_h");
  v.gru.resize(dims.K);
  for (int k = 0; k < dims.K; ++k) {
    std::string p = "gru" + std::to_string(k) + ".";
    GruGrad g;
    g.W_z = span_of(p + "W_z");
    g.U_z = span_of(p + "U_z");
    g.W_r = span_of(p + "W_r");
    g.U_r = span_of(p + "U_r");
    g.W_s = span_of(p + "W_s");
    g.U_s = span_of(p + "U_s");
    g.b_z = span_of(p + "b_z");
    g.b_r = span_of(p + "b_r");
    g.b_s = span_of(p + "b_s");
    v.gru[k] = g;
  }
  v.raw_lambda = span_of("decay.raw_lambda");
  v.raw_mu = span_of("decay.raw_mu");
  v.W_g = span_of("agg.W_g");
  v.b_g = span_of("agg.b_g");
  v.v_g = span_of("agg.v_g");
  return v;
}

std::vector<std::uint8_t> decay_mask(const ParamLayout& layout) {
  std::vector<std::uint8_t> mask(layout.total, 1);
  for (const auto& e : layout.entries) {
    bool bias = e.name == "poi_bias" || e.name == "b_x" || e.name == "b_h" ||
                e.name == "agg.b_g" || e.name.ends_with(".b_z") ||
                e.name.ends_with(".b_r") || e.name.ends_with(".b_s");
    if (bias)
      std::fill(mask.begin() + e.offset, mask.begin() + e.offset + e.size(),
                std::uint8_t{0});
  }
  return mask;
}

}  // namespace adspoi
