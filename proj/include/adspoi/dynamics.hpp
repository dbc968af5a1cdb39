#pragma once
// The model core: K gated recurrences with state-specific spatiotemporal
// decay, and context-conditioned aggregation into the decision state.

#include <span>

#include "adspoi/params.hpp"

namespace adspoi {

double softplus(double x);
double sigmoid(double x);

// gamma = exp(-softplus(raw_lambda[k]) dt/tau_t) * exp(-softplus(raw_mu[k]) dd/tau_d)
double decay(int k, double dt_s, double dd_km, const ModelView& m,
             const DynamicsConfig& dyn);

// One decayed GRU step for sub-state k. Gate activations are written out for
// the backward pass; pass empty spans to discard them.
void state_update(int k, std::span<const double> s_prev,
                  std::span<const double> xhat, double gamma,
                  const ModelView& m, std::span<double> s_new,
                  std::span<double> z_out = {}, std::span<double> r_out = {},
                  std::span<double> cand_out = {});

// Applies decay + state_update independently for each k.
// bank: K x d_s row-major, updated in place is not allowed; writes new_bank.
void step_all(std::span<const double> bank, std::span<const double> xhat,
              double dt_s, double dd_km, const ModelView& m,
              const DynamicsConfig& dyn, std::span<double> new_bank,
              std::span<double> gamma_out = {}, std::span<double> z_out = {},
              std::span<double> r_out = {}, std::span<double> cand_out = {});

// Max-shifted softmax of scores/tau.
void softmax_with_temperature(std::span<const double> scores, double tau,
                              std::span<double> out);

// scores[k] = v_g . tanh(W_g [s_k ; c] + b_g), shared scorer across k.
// ghid_out (K x d_s) keeps the tanh activations for the backward pass.
void aggregate_scores(std::span<const double> bank, std::span<const double> c,
                      const ModelView& m, std::span<double> scores_out,
                      std::span<double> ghid_out = {});

// alpha = softmax(scores/tau) (or fixed 1/K for the uniform variant);
// h_dec = concat(alpha_1 s_1, ..., alpha_K s_K) in R^{K d_s}.
void aggregate(std::span<const double> bank, std::span<const double> c,
               const ModelView& m, const DynamicsConfig& dyn, bool uniform,
               std::span<double> alpha_out, std::span<double> hdec_out,
               std::span<double> scores_out = {},
               std::span<double> ghid_out = {});

}  // namespace adspoi
