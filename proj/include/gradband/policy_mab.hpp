#pragma once

#include <cmath>
#include <string>

#include "gradband/policy.hpp"

namespace gradband {

/// Sufficient statistics of a non-contextual episode at the start of round t.
template <typename Scalar = double>
struct MabStats {
  Index t = 1;                // current round, 1-based
  VectorXi pulls;             // T_i
  Vec<Scalar> mean;           // empirical means
  Vec<Scalar> sum_sq;         // sum of squared rewards, for UCB-V
  Vec<Scalar> ips;            // inverse-propensity cumulative reward estimates
  VectorXi successes;         // Bernoulli TS posterior counts
  VectorXi failures;

  MabStats() = default;
  explicit MabStats(Index num_arms)
      : pulls(VectorXi::Zero(num_arms)),
        mean(Vec<Scalar>::Zero(num_arms)),
        sum_sq(Vec<Scalar>::Zero(num_arms)),
        ips(Vec<Scalar>::Zero(num_arms)),
        successes(VectorXi::Zero(num_arms)),
        failures(VectorXi::Zero(num_arms)) {}

  Index num_arms() const { return pulls.size(); }

  /// Records reward `y` for `arm`; `prob` is the pull probability recorded at
  /// pull time and feeds the inverse-propensity estimate.
  void update(Index arm, Scalar y, Scalar prob = Scalar(1)) {
    const int n = ++pulls(arm);
    mean(arm) += (y - mean(arm)) / Scalar(n);
    sum_sq(arm) += y * y;
    ips(arm) += y / prob;
    ++t;
  }

  void record_binary(Index arm, bool success) {
    if (success) {
      ++successes(arm);
    } else {
      ++failures(arm);
    }
  }

  /// First arm never pulled, or -1.
  Index first_unpulled() const {
    for (Index i = 0; i < pulls.size(); ++i) {
      if (pulls(i) == 0) return i;
    }
    return -1;
  }
};

// ---------------------------------------------------------------------------
// Exp3 with learning rate eta = w / K.

template <typename Scalar>
Vec<Scalar> exp3_probs(const MabStats<Scalar>& stats, Scalar w) {
  const Index K = stats.num_arms();
  const Vec<Scalar> soft = softmax((w / Scalar(K)) * stats.ips);
  return ((Scalar(1) - w) * soft.array() + w / Scalar(K)).matrix();
}

/// d/dw log pi_i for every arm, in closed form.
template <typename Scalar>
Vec<Scalar> exp3_grad_log_probs(const MabStats<Scalar>& stats, Scalar w) {
  const Index K = stats.num_arms();
  const Scalar k = Scalar(K);
  const Vec<Scalar> v = softmax((w / k) * stats.ips);  // V_i / V
  const Scalar weighted = v.dot(stats.ips) / k;
  const Vec<Scalar> pi = ((Scalar(1) - w) * v.array() + w / k).matrix();
  Vec<Scalar> g(K);
  for (Index i = 0; i < K; ++i) {
    g(i) = (v(i) * ((Scalar(1) - w) * (stats.ips(i) / k - weighted) - Scalar(1)) + Scalar(1) / k) / pi(i);
  }
  return g;
}

template <typename Scalar>
Scalar exp3_grad_log_prob(const MabStats<Scalar>& stats, Scalar w, Index arm) {
  return exp3_grad_log_probs(stats, w)(arm);
}

// ---------------------------------------------------------------------------
// SoftElim.

/// S_i = 2 (max_j mu_j - mu_i)^2 T_i. Requires every arm pulled.
template <typename Scalar>
Vec<Scalar> softelim_scores(const MabStats<Scalar>& stats) {
  if (stats.first_unpulled() >= 0) {
    throw InvariantError("softelim: score requested before every arm was pulled");
  }
  const Scalar best = stats.mean.maxCoeff();
  return (Scalar(2) * (best - stats.mean.array()).square() * stats.pulls.array().template cast<Scalar>()).matrix();
}

template <typename Scalar>
Vec<Scalar> softelim_probs_from_scores(const Vec<Scalar>& scores, Scalar w) {
  return softmax((-scores / (w * w)).eval());
}

template <typename Scalar>
Vec<Scalar> softelim_probs(const MabStats<Scalar>& stats, Scalar w) {
  return softelim_probs_from_scores(softelim_scores(stats), w);
}

template <typename Scalar>
Vec<Scalar> softelim_grad_log_probs_from_scores(const Vec<Scalar>& scores, Scalar w) {
  const Vec<Scalar> pi = softelim_probs_from_scores(scores, w);
  const Scalar avg = pi.dot(scores);
  return ((Scalar(2) / (w * w * w)) * (scores.array() - avg)).matrix();
}

template <typename Scalar>
Scalar softelim_grad_log_prob(const MabStats<Scalar>& stats, Scalar w, Index arm) {
  return softelim_grad_log_probs_from_scores(softelim_scores(stats), w)(arm);
}

// ---------------------------------------------------------------------------
// Randomized explore-then-commit.

/// h clamped into [1, floor(n/2)]; warns when clamping was needed.
double clamp_etc_horizon(double h, Index horizon);

/// floor(h) + Z with Z ~ Ber(h - floor(h)).
int round_etc_horizon(double h, Engine& rng);

/// d/dh log P(rounded | h) for the randomized rounding above.
double etc_rounding_score(double h, int rounded);

/// Explores round-robin for K * rounded_h rounds, then commits to the best
/// empirical mean (ties to the lowest index). `t` is 1-based.
template <typename Scalar>
Index etc_policy_step(const MabStats<Scalar>& stats, int rounded_h, Index t) {
  const Index K = stats.num_arms();
  if (t <= K * rounded_h) return (t - 1) % K;
  return argmax_lowest(stats.mean);
}

// ---------------------------------------------------------------------------
// Classical baselines. Each pulls arms 0..K-1 in order first.

inline constexpr double kUcbvZeta = 1.2;
inline constexpr double kUcbvRewardRange = 1.0;

template <typename Scalar>
Index ucb1_select(const MabStats<Scalar>& stats, Index t) {
  if (const Index u = stats.first_unpulled(); u >= 0) return u;
  const Scalar log_t = std::log(Scalar(t));
  Vec<Scalar> index(stats.num_arms());
  for (Index i = 0; i < index.size(); ++i) {
    index(i) = stats.mean(i) + std::sqrt(Scalar(2) * log_t / Scalar(stats.pulls(i)));
  }
  return argmax_lowest(index);
}

template <typename Scalar>
Index ucbv_select(const MabStats<Scalar>& stats, Index t) {
  if (const Index u = stats.first_unpulled(); u >= 0) return u;
  const Scalar explore = Scalar(kUcbvZeta) * std::log(Scalar(t));
  Vec<Scalar> index(stats.num_arms());
  for (Index i = 0; i < index.size(); ++i) {
    const Scalar T = Scalar(stats.pulls(i));
    const Scalar var = std::max(Scalar(0), stats.sum_sq(i) / T - stats.mean(i) * stats.mean(i));
    index(i) = stats.mean(i) + std::sqrt(Scalar(2) * var * explore / T) + Scalar(3 * kUcbvRewardRange) * explore / T;
  }
  return argmax_lowest(index);
}

/// Samples Beta(1 + s_i, 1 + f_i) per arm and returns the argmax.
Index bernoulli_ts_select(const MabStats<double>& stats, Engine& rng);

// ---------------------------------------------------------------------------
// Policy families over MabStats.

class Exp3Policy final : public Policy {
 public:
  explicit Exp3Policy(double w0 = 1.0) : w0_(w0) {}
  std::string name() const override { return "exp3"; }
  Index num_params() const override { return 1; }
  VectorXd default_params() const override { return VectorXd::Constant(1, w0_); }
  VectorXd project(const VectorXd& params, Index horizon) const override;
  Trajectory rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table, Engine& rng,
                     bool record_scores) const override;

 private:
  double w0_;
};

class SoftElimPolicy final : public Policy {
 public:
  static constexpr double kMinW = 1e-3;
  explicit SoftElimPolicy(double w0 = 1.0) : w0_(w0) {}
  std::string name() const override { return "softelim"; }
  Index num_params() const override { return 1; }
  VectorXd default_params() const override { return VectorXd::Constant(1, w0_); }
  VectorXd project(const VectorXd& params, Index horizon) const override;
  Trajectory rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table, Engine& rng,
                     bool record_scores) const override;

 private:
  double w0_;
};

/// Randomized ETC; the rounding score is attached to round 1, whose
/// reward-to-go is the whole episode.
class EtcPolicy final : public Policy {
 public:
  explicit EtcPolicy(double h0 = 5.5) : h0_(h0) {}
  std::string name() const override { return "etc"; }
  Index num_params() const override { return 1; }
  VectorXd default_params() const override { return VectorXd::Constant(1, h0_); }
  VectorXd project(const VectorXd& params, Index horizon) const override;
  Trajectory rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table, Engine& rng,
                     bool record_scores) const override;

 private:
  double h0_;
};

class Ucb1Policy final : public Policy {
 public:
  std::string name() const override { return "ucb1"; }
  Index num_params() const override { return 0; }
  VectorXd default_params() const override { return {}; }
  Trajectory rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table, Engine& rng,
                     bool record_scores) const override;
};

class UcbVPolicy final : public Policy {
 public:
  std::string name() const override { return "ucbv"; }
  Index num_params() const override { return 0; }
  VectorXd default_params() const override { return {}; }
  Trajectory rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table, Engine& rng,
                     bool record_scores) const override;
};

/// Beta(1,1)-prior Thompson sampling with randomized Bernoulli rounding of
/// rewards in [0, 1].
class BernoulliTsPolicy final : public Policy {
 public:
  std::string name() const override { return "ts"; }
  Index num_params() const override { return 0; }
  VectorXd default_params() const override { return {}; }
  Trajectory rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table, Engine& rng,
                     bool record_scores) const override;
};

/// Pulls arms uniformly at random.
class UniformPolicy final : public Policy {
 public:
  std::string name() const override { return "uniform"; }
  Index num_params() const override { return 0; }
  VectorXd default_params() const override { return {}; }
  Trajectory rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table, Engine& rng,
                     bool record_scores) const override;
};

}  // namespace gradband
