#include "gradband/policy_ctx.hpp"

#include <algorithm>
#include <cmath>

#include "gradband/diagnostics.hpp"
#include "gradband/policy_mab.hpp"

namespace gradband {

std::size_t ContextualEtcState::find(long context) const {
  const auto it = std::find(context_ids.begin(), context_ids.end(), context);
  if (it == context_ids.end()) throw InvariantError("contextual etc: unknown context");
  return static_cast<std::size_t>(it - context_ids.begin());
}

std::size_t ContextualEtcState::slot(long context, Engine& rng, bool* created) {
  const auto it = std::find(context_ids.begin(), context_ids.end(), context);
  if (created) *created = it == context_ids.end();
  if (it != context_ids.end()) return static_cast<std::size_t>(it - context_ids.begin());
  context_ids.push_back(context);
  rounded_h.push_back(round_etc_horizon(h, rng));
  observations.push_back(0);
  means.push_back(VectorXd::Zero(num_arms));
  pulls.push_back(VectorXi::Zero(num_arms));
  return context_ids.size() - 1;
}

void ContextualEtcState::update(long context, Index arm, double y) {
  const std::size_t j = find(context);
  if (observations[j]++ >= num_arms * rounded_h[j]) return;  // committed: estimates are frozen
  const int n = ++pulls[j](arm);
  means[j](arm) += (y - means[j](arm)) / n;
}

Index contextual_etc_step(ContextualEtcState& state, long context, Engine& rng, bool* created) {
  const std::size_t j = state.slot(context, rng, created);
  const long s = state.observations[j];
  if (s < state.num_arms * state.rounded_h[j]) return s % state.num_arms;
  return argmax_lowest(state.means[j]);
}

double theory_gamma(double sigma, Index num_arms, Index dim, Index horizon, double lambda, double max_context_norm,
                    double theta_norm) {
  const double kd = static_cast<double>(num_arms * dim);
  const double n = static_cast<double>(horizon);
  const double delta = 1.0 / n;
  const double c1 = sigma * std::sqrt(kd * std::log((1.0 + n * max_context_norm * max_context_norm / (kd * lambda)) / delta)) +
                    std::sqrt(lambda) * theta_norm;
  return 1.0 / (c1 * c1);
}

namespace {

Trajectory start_trajectory(Index n, Index num_params, bool record_scores) {
  Trajectory traj;
  traj.arms.reserve(static_cast<std::size_t>(n));
  traj.rewards.resize(n);
  if (record_scores) traj.scores = MatrixXd::Zero(num_params, n);
  return traj;
}

}  // namespace

Trajectory CoSoftElimPolicy::rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table,
                                     Engine& rng, bool record_scores) const {
  const Index K = table.num_arms();
  const Index n = table.horizon();
  const MatrixXd W = unflatten(params, dim_);
  Trajectory traj = start_trajectory(n, num_params(), record_scores);
  std::vector<LinArmState<double>> states(static_cast<std::size_t>(K), LinArmState<double>(dim_, lambda_));
  std::vector<ArmEstimate<double>> est(static_cast<std::size_t>(K));

  for (Index t = 0; t < n; ++t) {
    const VectorXd x = instance.contexts.row(t).transpose();
    const VectorXd z = W * x;
    for (Index i = 0; i < K; ++i) est[static_cast<std::size_t>(i)] = arm_estimate(states[static_cast<std::size_t>(i)], z);
    const VectorXd S = cosoftelim_scores(est, gamma_, z.squaredNorm() == 0.0);
    const VectorXd pi = softmax((-S).eval());
    const Index arm = sample_index(pi, rng);
    if (record_scores && S.maxCoeff() > 0.0) {
      const MatrixXd g = cosoftelim_grad_log_prob(states, W, x, gamma_, arm);
      traj.scores.col(t) = flatten(g);
    }
    const double y = table.rewards(arm, t);
    traj.arms.push_back(static_cast<int>(arm));
    traj.rewards(t) = y;
    linstate_update(states[static_cast<std::size_t>(arm)], W, x, y);
  }
  return traj;
}

Trajectory ContextualTsPolicy::rollout(const VectorXd& params, const ProblemInstance& instance,
                                       const RewardTable& table, Engine& rng, bool record_scores) const {
  const Index K = table.num_arms();
  const Index n = table.horizon();
  const MatrixXd W = unflatten(params, dim_);
  Trajectory traj = start_trajectory(n, num_params(), record_scores);
  traj.sampled_means.resize(K, n);
  std::vector<LinArmState<double>> states(static_cast<std::size_t>(K), LinArmState<double>(dim_, lambda_));
  long floored = 0;

  for (Index t = 0; t < n; ++t) {
    const VectorXd x = instance.contexts.row(t).transpose();
    const CtsDraw<double> draw = cts_sample(states, W, x, sigma_, rng);
    traj.sampled_means.col(t) = draw.sampled;
    if (record_scores) {
      traj.scores.col(t) = flatten(cts_grad_log_density(states, W, x, sigma_, draw.sampled, &floored));
    }
    const double y = table.rewards(draw.arm, t);
    traj.arms.push_back(static_cast<int>(draw.arm));
    traj.rewards(t) = y;
    linstate_update(states[static_cast<std::size_t>(draw.arm)], W, x, y);
  }
  if (floored > 0) warn("contextual TS: posterior variance floored " + std::to_string(floored) + " times");
  return traj;
}

VectorXd EpsGreedyPolicy::project(const VectorXd& params, Index) const { return params.cwiseMax(0.0).cwiseMin(1.0); }

Trajectory EpsGreedyPolicy::rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table,
                                    Engine& rng, bool record_scores) const {
  const Index K = table.num_arms();
  const Index n = table.horizon();
  const Index d = instance.dim();
  const double eps = params(0);
  const MatrixXd W = MatrixXd::Identity(d, d);
  Trajectory traj = start_trajectory(n, 1, record_scores);
  std::vector<LinArmState<double>> states(static_cast<std::size_t>(K), LinArmState<double>(d, lambda_));

  for (Index t = 0; t < n; ++t) {
    const VectorXd x = instance.contexts.row(t).transpose();
    const EpsGreedyStep<double> step = eps_greedy_probs_and_grad(states, x, eps);
    const Index arm = sample_index(step.probs, rng);
    if (record_scores) traj.scores(0, t) = step.grad_log_prob(arm);
    const double y = table.rewards(arm, t);
    traj.arms.push_back(static_cast<int>(arm));
    traj.rewards(t) = y;
    linstate_update(states[static_cast<std::size_t>(arm)], W, x, y);
  }
  return traj;
}

VectorXd ContextualEtcPolicy::project(const VectorXd& params, Index horizon) const {
  const double hi = std::max(1.0, std::floor(static_cast<double>(horizon) / 2.0));
  return params.cwiseMax(1.0).cwiseMin(hi);
}

Trajectory ContextualEtcPolicy::rollout(const VectorXd& params, const ProblemInstance& instance,
                                        const RewardTable& table, Engine& rng, bool record_scores) const {
  const Index K = table.num_arms();
  const Index n = table.horizon();
  const double h = clamp_etc_horizon(params(0), n);
  Trajectory traj = start_trajectory(n, 1, record_scores);
  ContextualEtcState state(K, h);
  for (Index t = 0; t < n; ++t) {
    const long context = std::lround(instance.contexts(t, 0));
    bool created = false;
    const Index arm = contextual_etc_step(state, context, rng, &created);
    if (record_scores && created) {
      traj.scores(0, t) = etc_rounding_score(h, state.rounded_h[state.find(context)]);
    }
    const double y = table.rewards(arm, t);
    traj.arms.push_back(static_cast<int>(arm));
    traj.rewards(t) = y;
    state.update(context, arm, y);
  }
  return traj;
}

}  // namespace gradband
