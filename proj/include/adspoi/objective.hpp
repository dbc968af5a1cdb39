#pragma once
// Candidate scoring, negative sampling, sampled softmax with label smoothing,
// hard-negative margin loss.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "adspoi/params.hpp"

namespace adspoi {

// phi = hproj . e_l + b_l
double score_poi(std::span<const double> hproj, int poi, const ModelView& m);

// n_neg distinct ids uniform over {0..n_pois-1} \ {exclude}. scratch is
// caller-owned working storage (resized as needed).
void sample_negatives(std::mt19937_64& rng, int n_pois, int exclude, int n_neg,
                      std::vector<std::int32_t>& out,
                      std::vector<std::int32_t>& scratch);

// y_0 = 1 - eps + eps/C, y_j = eps/C. Throws on eps outside [0,1) or C < 2.
void smoothed_labels(double eps, int slate_size, std::span<double> y_out);

// Max-shifted softmax cross entropy; probs_out receives softmax(logits).
double ce_loss(std::span<const double> logits, std::span<const double> y,
               std::span<double> probs_out);

// Mean hinge over the k_hard highest-scoring negatives (ties by smaller
// index). hard_out receives the selected slate indices (> 0).
double bpr_hard_loss(std::span<const double> logits, int k_hard, double margin,
                     std::vector<int>& hard_out);

inline double total_loss(double ce, double bpr, double beta) {
  return ce + beta * bpr;
}

// d(total)/d(logits) for one slate, scaled by w (the batch-mean weight).
void loss_backward_logits(std::span<const double> probs,
                          std::span<const double> y,
                          std::span<const int> hard,
                          std::span<const double> logits, double margin,
                          double beta, double w, std::span<double> dlogits);

}  // namespace adspoi
