#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradband/env.hpp"
#include "gradband/policy.hpp"

namespace gradband {

enum class BaselineKind { none, opt, self };

std::string to_string(BaselineKind kind);
BaselineKind parse_baseline(const std::string& text);

/// Batch-mean reward gradient with per-episode diagnostics.
struct GradientEstimate {
  VectorXd mean;                     // parameter-shaped
  VectorXd standard_error;           // per coordinate, sd / sqrt(m)
  double spread = 0.0;               // sd of per-episode contribution norms
  Index batch_size = 0;
  std::vector<double> contribution_norms;

  double norm() const { return mean.norm(); }
};

/// One simulated episode with everything the estimator needs.
struct EpisodeSample {
  ProblemInstance instance;
  RewardTable table;
  Trajectory trajectory;
  std::vector<int> self_arms;  // independent replay on the same table (b^self)
};

/// Tail sum of the chosen baseline from 0-based round t onward.
double baseline_value(BaselineKind kind, Index t, const RewardTable& table, const std::vector<int>& optimal_arms,
                      const std::vector<int>& self_arms);

/// All tail sums b_0..b_{n-1} in one suffix pass.
VectorXd baseline_tail_sums(BaselineKind kind, const RewardTable& table, const std::vector<int>& optimal_arms,
                            const std::vector<int>& self_arms);

/// sum_t score_t (reward-to-go_t - b_t) for one episode.
VectorXd episode_contribution(const Trajectory& trajectory, const VectorXd& baseline_tails);

/// Reduces per-episode contributions in index order.
GradientEstimate summarize_contributions(const std::vector<VectorXd>& contributions);

/// Estimate from stored episodes; self_arms must be filled when kind == self.
GradientEstimate estimate_gradient(const std::vector<EpisodeSample>& batch, BaselineKind kind);

/// Identifies where in the seed space a batch lives. Training batches use
/// Lane::instance, pilot batches Lane::pilot, held-out evaluation
/// Lane::evaluation; the purpose lane is folded into every derived stream.
struct BatchKey {
  std::uint64_t master_seed = 0;
  std::uint64_t iteration = 0;
  Lane lane = Lane::instance;
};

/// Stream for one ingredient (instance, rewards, policy, self_baseline) of
/// episode `index` in the batch.
Engine episode_stream(const BatchKey& key, Lane ingredient, std::uint64_t index);

/// Simulates one episode (instance, rewards, rollout with scores, and the
/// b^self replay when requested) for episode `index` of a batch.
EpisodeSample simulate_episode(const Policy& policy, const VectorXd& params, const InstanceSampler& sampler,
                               Index horizon, const BatchKey& key, std::uint64_t index, bool with_self_run);

/// Per-episode contributions of m simulated episodes, in episode order.
std::vector<VectorXd> sample_contributions(const Policy& policy, const VectorXd& params, const InstanceSampler& sampler,
                                           Index horizon, Index batch_size, BaselineKind kind, const BatchKey& key,
                                           int threads = 0);

/// Simulates m episodes and returns the estimate. Episodes run concurrently;
/// reduction is sequential in episode order, so results are bit-identical
/// for a fixed key regardless of thread count.
GradientEstimate sample_gradient(const Policy& policy, const VectorXd& params, const InstanceSampler& sampler,
                                 Index horizon, Index batch_size, BaselineKind kind, const BatchKey& key,
                                 int threads = 0);

}  // namespace gradband
