#include "gradband/policy_mab.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gradband/diagnostics.hpp"

namespace gradband {

namespace {

Trajectory start_trajectory(Index n, Index num_params, bool record_scores) {
  Trajectory traj;
  traj.arms.reserve(static_cast<std::size_t>(n));
  traj.rewards.resize(n);
  if (record_scores) traj.scores = MatrixXd::Zero(num_params, n);
  return traj;
}

double sample_beta(double a, double b, Engine& rng) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

}  // namespace

double clamp_etc_horizon(double h, Index horizon) {
  const double hi = std::max(1.0, std::floor(static_cast<double>(horizon) / 2.0));
  if (h < 1.0 || h > hi || !std::isfinite(h)) {
    std::ostringstream msg;
    msg << "etc: horizon parameter " << h << " clamped into [1, " << hi << "]";
    warn(msg.str());
    return std::isfinite(h) ? std::clamp(h, 1.0, hi) : 1.0;
  }
  return h;
}

int round_etc_horizon(double h, Engine& rng) {
  const double base = std::floor(h);
  const double frac = h - base;
  const bool up = uniform01(rng) < frac;
  return static_cast<int>(base) + (up ? 1 : 0);
}

double etc_rounding_score(double h, int rounded) {
  const double frac = h - std::floor(h);
  if (rounded > static_cast<int>(std::floor(h))) return 1.0 / frac;
  return -1.0 / (1.0 - frac);
}

Index bernoulli_ts_select(const MabStats<double>& stats, Engine& rng) {
  VectorXd draws(stats.num_arms());
  for (Index i = 0; i < draws.size(); ++i) {
    draws(i) = sample_beta(1.0 + stats.successes(i), 1.0 + stats.failures(i), rng);
  }
  return argmax_lowest(draws);
}

// ---------------------------------------------------------------------------

VectorXd Exp3Policy::project(const VectorXd& params, Index) const {
  return params.cwiseMax(1e-3).cwiseMin(1.0);
}

Trajectory Exp3Policy::rollout(const VectorXd& params, const ProblemInstance&, const RewardTable& table, Engine& rng,
                               bool record_scores) const {
  const double w = params(0);
  const Index K = table.num_arms();
  const Index n = table.horizon();
  Trajectory traj = start_trajectory(n, 1, record_scores);
  MabStats<double> stats(K);
  for (Index t = 0; t < n; ++t) {
    const VectorXd pi = exp3_probs(stats, w);
    const Index arm = sample_index(pi, rng);
    if (record_scores) traj.scores(0, t) = exp3_grad_log_probs(stats, w)(arm);
    const double y = table.rewards(arm, t);
    traj.arms.push_back(static_cast<int>(arm));
    traj.rewards(t) = y;
    stats.update(arm, y, pi(arm));
  }
  return traj;
}

VectorXd SoftElimPolicy::project(const VectorXd& params, Index) const { return params.cwiseMax(kMinW); }

Trajectory SoftElimPolicy::rollout(const VectorXd& params, const ProblemInstance&, const RewardTable& table,
                                   Engine& rng, bool record_scores) const {
  const double w = params(0);
  const Index K = table.num_arms();
  const Index n = table.horizon();
  Trajectory traj = start_trajectory(n, 1, record_scores);
  MabStats<double> stats(K);
  for (Index t = 0; t < n; ++t) {
    Index arm;
    if (t < K) {
      arm = t;  // warm-up: deterministic, zero score
    } else {
      const VectorXd scores = softelim_scores(stats);
      const VectorXd pi = softelim_probs_from_scores(scores, w);
      arm = sample_index(pi, rng);
      if (record_scores) traj.scores(0, t) = softelim_grad_log_probs_from_scores(scores, w)(arm);
    }
    const double y = table.rewards(arm, t);
    traj.arms.push_back(static_cast<int>(arm));
    traj.rewards(t) = y;
    stats.update(arm, y);
  }
  return traj;
}

VectorXd EtcPolicy::project(const VectorXd& params, Index horizon) const {
  const double hi = std::max(1.0, std::floor(static_cast<double>(horizon) / 2.0));
  return params.cwiseMax(1.0).cwiseMin(hi);
}

Trajectory EtcPolicy::rollout(const VectorXd& params, const ProblemInstance&, const RewardTable& table, Engine& rng,
                              bool record_scores) const {
  const Index K = table.num_arms();
  const Index n = table.horizon();
  const double h = clamp_etc_horizon(params(0), n);
  const int rounded = round_etc_horizon(h, rng);
  Trajectory traj = start_trajectory(n, 1, record_scores);
  if (record_scores) traj.scores(0, 0) = etc_rounding_score(h, rounded);
  MabStats<double> stats(K);
  for (Index t = 0; t < n; ++t) {
    const Index arm = etc_policy_step(stats, rounded, t + 1);
    const double y = table.rewards(arm, t);
    traj.arms.push_back(static_cast<int>(arm));
    traj.rewards(t) = y;
    if (t < K * rounded) stats.update(arm, y);
  }
  return traj;
}

Trajectory Ucb1Policy::rollout(const VectorXd&, const ProblemInstance&, const RewardTable& table, Engine&,
                               bool) const {
  const Index n = table.horizon();
  Trajectory traj = start_trajectory(n, 0, false);
  MabStats<double> stats(table.num_arms());
  for (Index t = 0; t < n; ++t) {
    const Index arm = ucb1_select(stats, t + 1);
    const double y = table.rewards(arm, t);
    traj.arms.push_back(static_cast<int>(arm));
    traj.rewards(t) = y;
    stats.update(arm, y);
  }
  return traj;
}

Trajectory UcbVPolicy::rollout(const VectorXd&, const ProblemInstance&, const RewardTable& table, Engine&,
                               bool) const {
  const Index n = table.horizon();
  Trajectory traj = start_trajectory(n, 0, false);
  MabStats<double> stats(table.num_arms());
  for (Index t = 0; t < n; ++t) {
    const Index arm = ucbv_select(stats, t + 1);
    const double y = table.rewards(arm, t);
    traj.arms.push_back(static_cast<int>(arm));
    traj.rewards(t) = y;
    stats.update(arm, y);
  }
  return traj;
}

Trajectory BernoulliTsPolicy::rollout(const VectorXd&, const ProblemInstance&, const RewardTable& table, Engine& rng,
                                      bool) const {
  const Index n = table.horizon();
  Trajectory traj = start_trajectory(n, 0, false);
  MabStats<double> stats(table.num_arms());
  for (Index t = 0; t < n; ++t) {
    const Index unpulled = stats.first_unpulled();
    const Index arm = unpulled >= 0 ? unpulled : bernoulli_ts_select(stats, rng);
    const double y = table.rewards(arm, t);
    traj.arms.push_back(static_cast<int>(arm));
    traj.rewards(t) = y;
    stats.update(arm, y);
    const bool success = (y >= 1.0) || (y > 0.0 && uniform01(rng) < y);
    stats.record_binary(arm, success);
  }
  return traj;
}

Trajectory UniformPolicy::rollout(const VectorXd&, const ProblemInstance&, const RewardTable& table, Engine& rng,
                                  bool) const {
  const Index n = table.horizon();
  const Index K = table.num_arms();
  Trajectory traj = start_trajectory(n, 0, false);
  std::uniform_int_distribution<Index> pick(0, K - 1);
  for (Index t = 0; t < n; ++t) {
    const Index arm = pick(rng);
    traj.arms.push_back(static_cast<int>(arm));
    traj.rewards(t) = table.rewards(arm, t);
  }
  return traj;
}

}  // namespace gradband
