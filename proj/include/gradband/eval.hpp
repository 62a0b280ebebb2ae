#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gradband/env.hpp"
#include "gradband/policy.hpp"

namespace gradband {

/// Monte-Carlo Bayes regret of one policy under one prior.
struct EvalReport {
  std::string policy;
  std::string prior;
  Index horizon = 0;
  Index num_instances = 0;
  std::uint64_t seed = 0;
  double regret_mean = 0.0;
  double regret_stderr = 0.0;
  double reward_mean = 0.0;
  double optimal_mean = 0.0;  // mean realized reward of the optimal arms
  VectorXd curve;             // mean cumulative regret after each round
  std::vector<double> regrets;  // per instance, in instance order
};

/// Instances, rewards and policy noise for instance j come from the
/// evaluation lane of `seed`, so two policies evaluated with the same seed
/// face identical instances and reward tables.
EvalReport bayes_regret(const Policy& policy, const VectorXd& params, const InstanceSampler& sampler, Index horizon,
                        Index num_instances, std::uint64_t seed, int threads = 0);

/// Standard normal CDF.
double normal_cdf(double x);

/// Expected n-round reward of explore-then-commit with h explorations per
/// arm on a two-armed unit-variance Gaussian instance. Non-integer h is
/// linearly interpolated between neighbouring integers.
double etc_closed_form_reward(double mu1, double mu2, Index horizon, double h);

/// Rank-r projector W = B B^T from PCA of sum_t Y_t^2 x_t x_t^T.
struct MomResult {
  MatrixXd projector;
  VectorXd eigenvalues;  // descending
  Index rank = 0;
};

/// Samples (x_t, Y_t = x_t^T theta + Z_t) with a fresh theta ~ prior per
/// pair. Contexts are whitened with the prior's context mean and covariance
/// before the moment is formed; the recovered basis is mapped back.
MomResult mom_subspace(Index num_samples, const PriorSpec& prior, double sigma, Index rank, Engine& rng);

}  // namespace gradband
