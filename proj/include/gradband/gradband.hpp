#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradband/env.hpp"
#include "gradband/grad_estimator.hpp"
#include "gradband/policy.hpp"

namespace gradband {

enum class AlphaRule { auto_c, fixed };

std::string to_string(AlphaRule rule);
AlphaRule parse_alpha_rule(const std::string& text);

/// What the auto_c percentile is taken over: single-episode contribution
/// norms, or norms of m-episode batch means bootstrapped from the pilot.
enum class PilotStatistic { episode, batch_mean };

std::string to_string(PilotStatistic s);
PilotStatistic parse_pilot_statistic(const std::string& text);

struct TrainConfig {
  Index iterations = 100;   // L
  Index batch_size = 1000;  // m
  Index horizon = 200;
  AlphaRule alpha_rule = AlphaRule::auto_c;
  double alpha = 0.0;  // used when alpha_rule == fixed
  Index pilot_size = 100;
  double pilot_percentile = 0.95;
  PilotStatistic pilot_statistic = PilotStatistic::episode;
  Index pilot_resamples = 1000;
  VectorXd initial_params;  // empty: the policy's defaults
  BaselineKind baseline = BaselineKind::self;
  std::uint64_t master_seed = 1;
  Index eval_every = 0;  // 0: no evaluation during training
  Index eval_instances = 1000;
  std::uint64_t eval_seed = 1000003;
  int threads = 0;

  void validate() const;
};

struct TraceRow {
  static constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

  Index iteration = 0;
  VectorXd params;
  double grad_norm = kMissing;
  double spread = kMissing;
  double eval_regret_mean = kMissing;
  double eval_regret_stderr = kMissing;
};

/// Row l holds the parameters at iteration l and the gradient estimated
/// there; the final row (l = L) has no gradient.
struct TrainTrace {
  std::vector<TraceRow> rows;
};

struct LearningRate {
  double c = 1.0;
  double alpha = 1.0;
};

struct TrainResult {
  VectorXd params;
  TrainTrace trace;
  LearningRate rate;
};

/// Raised when an iteration produces a non-finite gradient.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, Index iteration, VectorXd params)
      : std::runtime_error(what), iteration(iteration), params(std::move(params)) {}
  Index iteration;
  VectorXd params;
};

/// Percentile with linear interpolation between order statistics, q in [0, 1].
double percentile(std::vector<double> values, double q);

/// Norms of `resamples` means of `batch_size` contributions drawn with replacement.
std::vector<double> bootstrap_mean_norms(const std::vector<VectorXd>& contributions, Index batch_size, Index resamples,
                                         Engine& rng);

/// c from the pilot batch at the initial parameters, alpha = 1 / (c sqrt(L)).
LearningRate auto_learning_rate(const Policy& policy, const InstanceSampler& sampler, const TrainConfig& config);

using IterationCallback = std::function<void(const TraceRow&)>;

/// Projected gradient ascent on the Bayes reward.
TrainResult run_gradband(const Policy& policy, const InstanceSampler& sampler, const TrainConfig& config,
                         const IterationCallback& on_iteration = {});

}  // namespace gradband
