#include "adspoi/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "adspoi/kernels.hpp"

namespace adspoi {

double score_poi(std::span<const double> hproj, int poi, const ModelView& m) {
  if (poi < 0 || poi >= m.dims.n_pois)
    throw std::out_of_range("poi id not in catalog: " + std::to_string(poi));
  const double* e = m.poi_emb.data() + static_cast<std::size_t>(poi) * m.dims.d_e;
  return kernels::dot(hproj.data(), e, m.dims.d_e) + m.poi_bias[poi];
}

void sample_negatives(std::mt19937_64& rng, int n_pois, int exclude, int n_neg,
                      std::vector<std::int32_t>& out,
                      std::vector<std::int32_t>& scratch) {
  if (n_pois - 1 < n_neg)
    throw std::runtime_error(
        "catalog too small for the requested number of negatives");
  // partial Fisher-Yates over the catalog minus the excluded id
  scratch.resize(n_pois - 1);
  std::int32_t v = 0;
  for (auto& s : scratch) {
    if (v == exclude) ++v;
    s = v++;
  }
  out.resize(n_neg);
  int m = n_pois - 1;
  for (int i = 0; i < n_neg; ++i) {
    std::uniform_int_distribution<int> pick(i, m - 1);
    int j = pick(rng);
    std::swap(scratch[i], scratch[j]);
    out[i] = scratch[i];
  }
}

void smoothed_labels(double eps, int slate_size, std::span<double> y_out) {
  if (eps < 0.0 || eps >= 1.0)
    throw std::runtime_error("label smoothing must be in [0, 1)");
  if (slate_size < 2) throw std::runtime_error("slate size must be >= 2");
  double share = eps / slate_size;
  y_out[0] = 1.0 - eps + share;
  for (int j = 1; j < slate_size; ++j) y_out[j] = share;
}

double ce_loss(std::span<const double> logits, std::span<const double> y,
               std::span<double> probs_out) {
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    probs_out[j] = std::exp(logits[j] - mx);
    sum += probs_out[j];
  }
  double log_sum = std::log(sum);
  double loss = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    // log softmax = z - mx - log_sum, kept in shifted form
    loss -= y[j] * (logits[j] - mx - log_sum);
    probs_out[j] /= sum;
  }
  return loss;
}

double bpr_hard_loss(std::span<const double> logits, int k_hard, double margin,
                     std::vector<int>& hard_out) {
  int n_neg = static_cast<int>(logits.size()) - 1;
  hard_out.resize(std::min(k_hard, n_neg));
  std::vector<int> idx(n_neg);
  std::iota(idx.begin(), idx.end(), 1);
  // highest logits first, ties broken toward smaller slate index
  std::partial_sort(idx.begin(), idx.begin() + hard_out.size(), idx.end(),
                    [&](int a, int b) {
                      if (logits[a] != logits[b]) return logits[a] > logits[b];
                      return a < b;
                    });
  double loss = 0.0;
  for (std::size_t i = 0; i < hard_out.size(); ++i) {
    hard_out[i] = idx[i];
    loss += std::max(0.0, margin - (logits[0] - logits[idx[i]]));
  }
  return loss / static_cast<double>(hard_out.size());
}

void loss_backward_logits(std::span<const double> probs,
                          std::span<const double> y,
                          std::span<const int> hard,
                          std::span<const double> logits, double margin,
                          double beta, double w, std::span<double> dlogits) {
  for (std::size_t j = 0; j < probs.size(); ++j)
    dlogits[j] = w * (probs[j] - y[j]);
  if (beta != 0.0 && !hard.empty()) {
    double unit = w * beta / static_cast<double>(hard.size());
    for (int j : hard) {
      if (margin - (logits[0] - logits[j]) > 0.0) {
        dlogits[0] -= unit;
        dlogits[j] += unit;
      }
    }
  }
}

}  // namespace adspoi
