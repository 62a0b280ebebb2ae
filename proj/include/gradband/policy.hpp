#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gradband/core.hpp"
#include "gradband/env.hpp"
#include "gradband/rng.hpp"

namespace gradband {

/// Per-round record of one episode, enough to rebuild the gradient estimate.
struct Trajectory {
  std::vector<int> arms;  // I_1..I_n
  VectorXd rewards;       // Y_{I_t, t}
  /// p x n; column t is grad_w log pi(I_t | H_t), or for Thompson sampling the
  /// sum over arms of the posterior log-density scores. Empty when not recorded.
  MatrixXd scores;
  /// K x n posterior samples (Thompson sampling only).
  MatrixXd sampled_means;

  Index length() const { return static_cast<Index>(arms.size()); }
  double total_reward() const { return rewards.sum(); }
};

/// A parameterized bandit policy family. Classical baselines have zero
/// parameters and never record scores.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;
  virtual Index num_params() const = 0;
  virtual VectorXd default_params() const = 0;
  /// Maps params into the feasible set for a horizon-n problem.
  virtual VectorXd project(const VectorXd& params, Index horizon) const { (void)horizon; return params; }
  virtual bool differentiable() const { return num_params() > 0; }

  /// Simulates one episode against a fixed reward table.
  virtual Trajectory rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table,
                             Engine& rng, bool record_scores) const = 0;
};

using PolicyPtr = std::shared_ptr<const Policy>;

/// Draws an index from a probability vector by inverse CDF.
template <typename Derived>
Index sample_index(const Eigen::DenseBase<Derived>& probs, Engine& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  const Index last = probs.size() - 1;
  for (Index i = 0; i < last; ++i) {
    acc += probs(i);
    if (u < acc) return i;
  }
  return last;
}

/// Numerically stable softmax of `logits`.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace gradband
