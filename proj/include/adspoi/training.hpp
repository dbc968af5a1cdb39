#pragma once
// Forward rollout with caching, reverse-mode gradients through the unrolled
// recurrence, Adam, the epoch loop with early stopping, gradient checking and
// checkpointing.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adspoi/config.hpp"
#include "adspoi/dataset.hpp"
#include "adspoi/objective.hpp"
#include "adspoi/params.hpp"

namespace adspoi {

// One rollout window over a user's events: [begin, begin+count).
// Steps before `begin` stay visible through the precomputed gaps, so a capped
// window keeps real time/distance deltas at its first step.
struct BatchItem {
  int user = 0;
  int begin = 0;
  int count = 0;
};

// Struct-of-arrays cache of everything the backward pass needs. All per-step
// fields are stored with a fixed stride; training mode fills slates, masks
// and per-step losses.
struct RolloutCache {
  ModelDims dims;
  int steps = 0;
  bool train = false;
  double keep = 1.0;  // 1 - dropout
  int slate_size = 0;

  std::vector<std::uint8_t> has_prev;
  std::vector<double> dt, dd, dlat, dlon;
  std::vector<int> slot, bucket;
  std::vector<int> poi;                      // consumed event ids
  std::vector<double> u, p, dsp, x, xhat, xdrop;
  std::vector<double> sprev, zg, rg, cand, snew;  // steps x K x d_s
  std::vector<double> gamma;                      // steps x K
  std::vector<double> c, ghid, scores, alpha, hdec, hdrop, hproj;
  std::vector<double> xmask, hmask;
  std::vector<std::int32_t> slate;  // steps x slate_size, index 0 = positive
  std::vector<double> logits, probs, ylab;
  std::vector<int> hard;  // steps x k_hard
  std::vector<double> ce, bpr;

  void resize(const ModelDims& dims, int steps, bool train, int slate_size,
              int k_hard, double dropout);
};

struct TrajOutcome {
  double loss = 0.0, ce = 0.0, bpr = 0.0;
  int steps = 0;
};

// Training-mode forward: consumes events[begin .. begin+count-2], each step
// predicting the next event. rng supplies negative slates and dropout masks.
TrajOutcome forward_trajectory(const ModelView& m, const RunConfig& cfg,
                               const UserTrajectory& traj, int begin, int count,
                               std::mt19937_64& rng, bool train_mode,
                               RolloutCache& cache);

// Reverse pass over a filled cache; every step's loss enters with weight w.
void backward_trajectory(const ModelView& m, const RunConfig& cfg,
                         const RolloutCache& cache, double w, GradView& g);

// Eval-mode forward: consumes all count events, aggregates at the last step
// only, no slates/dropout. Returns the projected decision state.
void eval_forward(const ModelView& m, const RunConfig& cfg,
                  const UserTrajectory& traj, int begin, int count,
                  std::span<double> hproj_out);

// Mean-over-steps batch loss gradient (no weight decay). Deterministic for a
// fixed thread count: per-worker accumulators reduce in worker order; slates
// and masks derive from (run_seed, epoch, user), not the schedule.
double compute_gradients(const ParameterSet& params, const RunConfig& cfg,
                         const Dataset& data, std::span<const BatchItem> batch,
                         int epoch, std::uint64_t run_seed,
                         std::vector<double>& grad_out, int threads);

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t t = 0;
};

// Bias-corrected Adam with coupled L2 added to the gradients where
// decay_mask is set.
void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, const OptimizerConfig& opt,
               std::span<const std::uint8_t> decay_mask);

struct EpochStat {
  int epoch = 0;
  double train_loss = 0.0;
  double val_mrr = 0.0;
};

struct Checkpoint {
  std::string config_canonical;
  std::uint64_t config_hash = 0;
  std::uint64_t dataset_fingerprint = 0;
  ParamLayout layout;
  std::vector<double> best_params;
  double best_val_mrr = -1.0;
  std::vector<double> cur_params;
  AdamState adam;
  int next_epoch = 0;
  int epochs_since_improve = 0;
  std::vector<EpochStat> history;
};

// Shuffled mini-batches; per-epoch full-ranking validation MRR; keeps the
// best-MRR parameters; stops after `patience` epochs without improvement
// (patience 0 disables early stopping).
Checkpoint train(const Dataset& data, const DatasetSplit& split,
                 const RunConfig& cfg, std::uint64_t seed,
                 const Checkpoint* resume = nullptr,
                 const std::function<void(const EpochStat&)>& on_epoch = {});

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

// --- gradient verification ---

struct GradCheckData {
  ParameterSet params;
  std::vector<double> analytic;
  std::vector<double> fd;
  std::vector<std::size_t> coords;  // checked flat coordinates
  double fd_step = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_block;
  std::size_t worst_coord = 0;
  std::size_t checked = 0;
  double fd_step = 0.0;
};

// rel err = |a-b| / max(|a|,|b|,1e-6)
double fd_rel_err(double a, double b);

// Builds a deterministic random mini-dataset (n_traj trajectories of
// traj_len events over n_pois POIs), computes reverse-mode and central-FD
// gradients. Coordinates are subsampled to 10% above 5000 parameters.
GradCheckData grad_check_data(const RunConfig& cfg, std::uint64_t seed,
                              double fd_step, int n_pois = 40, int n_traj = 3,
                              int traj_len = 5);

GradCheckReport grad_report(const GradCheckData& data,
                            std::span<const double> analytic_override = {});

GradCheckReport grad_check(const RunConfig& cfg, std::uint64_t seed,
                           double fd_step = 1e-4, int n_pois = 40,
                           int n_traj = 3, int traj_len = 5);

}  // namespace adspoi
