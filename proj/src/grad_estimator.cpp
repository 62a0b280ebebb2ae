#include "gradband/grad_estimator.hpp"

#include <cmath>

#include "gradband/parallel.hpp"

namespace gradband {

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::none: return "none";
    case BaselineKind::opt: return "opt";
    case BaselineKind::self: return "self";
  }
  return "?";
}

BaselineKind parse_baseline(const std::string& text) {
  if (text == "none") return BaselineKind::none;
  if (text == "opt") return BaselineKind::opt;
  if (text == "self") return BaselineKind::self;
  throw ConfigError("unknown baseline '" + text + "' (expected none, opt or self)");
}

VectorXd baseline_tail_sums(BaselineKind kind, const RewardTable& table, const std::vector<int>& optimal_arms,
                            const std::vector<int>& self_arms) {
  const Index n = table.horizon();
  VectorXd tails = VectorXd::Zero(n);
  if (kind == BaselineKind::none) return tails;
  const std::vector<int>& arms = kind == BaselineKind::opt ? optimal_arms : self_arms;
  if (static_cast<Index>(arms.size()) != n) {
    throw InvariantError("baseline: arm sequence length differs from horizon");
  }
  double acc = 0.0;
  for (Index t = n - 1; t >= 0; --t) {
    acc += table.rewards(arms[static_cast<std::size_t>(t)], t);
    tails(t) = acc;
  }
  return tails;
}

double baseline_value(BaselineKind kind, Index t, const RewardTable& table, const std::vector<int>& optimal_arms,
                      const std::vector<int>& self_arms) {
  if (kind == BaselineKind::none) return 0.0;
  const std::vector<int>& arms = kind == BaselineKind::opt ? optimal_arms : self_arms;
  double sum = 0.0;
  for (Index s = t; s < table.horizon(); ++s) sum += table.rewards(arms[static_cast<std::size_t>(s)], s);
  return sum;
}

VectorXd episode_contribution(const Trajectory& trajectory, const VectorXd& baseline_tails) {
  const Index n = trajectory.length();
  const Index p = trajectory.scores.rows();
  if (trajectory.scores.cols() != n || baseline_tails.size() != n) {
    throw InvariantError("estimator: per-round score shape mismatch");
  }
  VectorXd g = VectorXd::Zero(p);
  double to_go = 0.0;
  for (Index t = n - 1; t >= 0; --t) {
    to_go += trajectory.rewards(t);
    const double weight = to_go - baseline_tails(t);
    g.noalias() += weight * trajectory.scores.col(t);
  }
  return g;
}

GradientEstimate summarize_contributions(const std::vector<VectorXd>& contributions) {
  GradientEstimate est;
  const Index m = static_cast<Index>(contributions.size());
  est.batch_size = m;
  if (m == 0) return est;
  const Index p = contributions.front().size();
  est.mean = VectorXd::Zero(p);
  VectorXd sq = VectorXd::Zero(p);
  est.contribution_norms.reserve(static_cast<std::size_t>(m));
  for (const VectorXd& g : contributions) {
    if (g.size() != p) throw InvariantError("estimator: contribution shape mismatch");
    est.mean += g;
    sq += g.cwiseAbs2();
    est.contribution_norms.push_back(g.norm());
  }
  est.mean /= static_cast<double>(m);
  if (m > 1) {
    const VectorXd var = ((sq / static_cast<double>(m)) - est.mean.cwiseAbs2()).cwiseMax(0.0) *
                         (static_cast<double>(m) / static_cast<double>(m - 1));
    est.standard_error = (var / static_cast<double>(m)).cwiseSqrt();
    double norm_mean = 0.0;
    for (double v : est.contribution_norms) norm_mean += v;
    norm_mean /= static_cast<double>(m);
    double norm_var = 0.0;
    for (double v : est.contribution_norms) norm_var += (v - norm_mean) * (v - norm_mean);
    est.spread = std::sqrt(norm_var / static_cast<double>(m - 1));
  } else {
    est.standard_error = VectorXd::Zero(p);
  }
  if (!est.mean.allFinite()) throw InputError("estimator: non-finite gradient estimate");
  return est;
}

GradientEstimate estimate_gradient(const std::vector<EpisodeSample>& batch, BaselineKind kind) {
  std::vector<VectorXd> contributions;
  contributions.reserve(batch.size());
  for (const EpisodeSample& ep : batch) {
    const std::vector<int> optimal = kind == BaselineKind::opt ? instance_optimal_arms(ep.table) : std::vector<int>{};
    const VectorXd tails = baseline_tail_sums(kind, ep.table, optimal, ep.self_arms);
    contributions.push_back(episode_contribution(ep.trajectory, tails));
  }
  return summarize_contributions(contributions);
}

Engine episode_stream(const BatchKey& key, Lane ingredient, std::uint64_t index) {
  const std::uint64_t salt = static_cast<std::uint64_t>(key.lane) << 56;
  return make_stream(key.master_seed, ingredient, key.iteration ^ salt, index);
}

EpisodeSample simulate_episode(const Policy& policy, const VectorXd& params, const InstanceSampler& sampler,
                               Index horizon, const BatchKey& key, std::uint64_t index, bool with_self_run) {
  EpisodeSample ep;
  Engine inst_rng = episode_stream(key, Lane::instance, index);
  ep.instance = sampler.sample(horizon, inst_rng);
  ep.instance.master_seed = key.master_seed;
  ep.instance.instance_index = index;
  Engine reward_rng = episode_stream(key, Lane::rewards, index);
  ep.table = realize_rewards(ep.instance, sampler.prior(), reward_rng);
  Engine policy_rng = episode_stream(key, Lane::policy, index);
  ep.trajectory = policy.rollout(params, ep.instance, ep.table, policy_rng, true);
  if (with_self_run) {
    Engine self_rng = episode_stream(key, Lane::self_baseline, index);
    ep.self_arms = policy.rollout(params, ep.instance, ep.table, self_rng, false).arms;
  }
  return ep;
}

std::vector<VectorXd> sample_contributions(const Policy& policy, const VectorXd& params, const InstanceSampler& sampler,
                                           Index horizon, Index batch_size, BaselineKind kind, const BatchKey& key,
                                           int threads) {
  std::vector<VectorXd> contributions(static_cast<std::size_t>(batch_size));
  parallel_for(batch_size, threads, [&](Index j) {
    const EpisodeSample ep = simulate_episode(policy, params, sampler, horizon, key, static_cast<std::uint64_t>(j),
                                              kind == BaselineKind::self);
    const std::vector<int> optimal = kind == BaselineKind::opt ? instance_optimal_arms(ep.table) : std::vector<int>{};
    const VectorXd tails = baseline_tail_sums(kind, ep.table, optimal, ep.self_arms);
    contributions[static_cast<std::size_t>(j)] = episode_contribution(ep.trajectory, tails);
  });
  return contributions;
}

GradientEstimate sample_gradient(const Policy& policy, const VectorXd& params, const InstanceSampler& sampler,
                                 Index horizon, Index batch_size, BaselineKind kind, const BatchKey& key, int threads) {
  return summarize_contributions(
      sample_contributions(policy, params, sampler, horizon, batch_size, kind, key, threads));
}

}  // namespace gradband
