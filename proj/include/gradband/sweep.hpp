#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gradband/eval.hpp"
#include "gradband/gradband.hpp"

namespace gradband {

enum class SweepAxis { batch_size, horizon, prior_param };

std::string to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& text);

/// Builds the policy for a given prior and horizon.
using PolicyFactory = std::function<PolicyPtr(const PriorSpec&, Index horizon)>;

struct SweepBase {
  PriorSpec prior;
  PolicyFactory make_policy;
  TrainConfig train;
  Index eval_instances = 1000;
  std::uint64_t eval_seed = 1000003;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::batch_size;
  std::vector<double> grid;
  std::vector<VectorXd> trained;      // one per grid point
  std::vector<EvalReport> reports;    // one per grid point; row-major matrix for prior_param
  MatrixXd regret;                    // |grid| x 1, or |grid| x |grid| (train alpha x eval alpha)
};

/// Beta(alpha, 10 - alpha) prior on every arm of `base`.
PriorSpec beta_prior_for(const PriorSpec& base, double alpha);

/// Trains at every grid point with the base configuration and evaluates on
/// held-out instances. prior_param trains on Beta(a, 10 - a) and evaluates
/// each trained policy on every Beta(a', 10 - a') of the grid.
SweepResult sweep(SweepAxis axis, const std::vector<double>& grid, const SweepBase& base);

}  // namespace gradband
