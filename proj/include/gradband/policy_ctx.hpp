#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gradband/policy.hpp"

namespace gradband {

/// Carrier for derivatives with respect to the projection W.
///
/// Holds the raw (unprojected) moments of one arm's observations,
///   A = sum_l x_l x_l^T,   u = sum_l x_l y_l,
/// so that G = W A W^T + lambda I and b = W u are explicit in W. Every
/// derivative of the regularized least-squares quantities with respect to
/// the entries of W follows from these two statistics, for the whole history.
template <typename Scalar = double>
struct TangentBundle {
  Mat<Scalar> raw_cov;
  Vec<Scalar> raw_xy;

  TangentBundle() = default;
  explicit TangentBundle(Index d) : raw_cov(Mat<Scalar>::Zero(d, d)), raw_xy(Vec<Scalar>::Zero(d)) {}
};

/// Per-arm regularized least squares in the projected space.
template <typename Scalar = double>
struct LinArmState {
  static constexpr int kRefactorEvery = 64;

  Scalar lambda = Scalar(1);
  Mat<Scalar> G;      // sum (W x)(W x)^T + lambda I
  Mat<Scalar> G_inv;  // maintained by rank-1 updates
  Vec<Scalar> b;      // sum (W x) y
  Vec<Scalar> theta_hat;
  TangentBundle<Scalar> tangent;
  Index count = 0;
  int since_refactor = 0;

  LinArmState() = default;
  LinArmState(Index d, Scalar lambda_)
      : lambda(lambda_),
        G(Mat<Scalar>::Identity(d, d) * lambda_),
        G_inv(Mat<Scalar>::Identity(d, d) / lambda_),
        b(Vec<Scalar>::Zero(d)),
        theta_hat(Vec<Scalar>::Zero(d)),
        tangent(d) {
    if (!(lambda_ > Scalar(0))) throw ConfigError("linear arm state: lambda must be > 0");
  }

  Index dim() const { return b.size(); }

  /// Rebuilds G_inv from G by Cholesky.
  void refactor() {
    G_inv = G.llt().solve(Mat<Scalar>::Identity(dim(), dim()));
    G_inv = (G_inv + G_inv.transpose()) / Scalar(2);
    since_refactor = 0;
  }
};

/// Adds observation (x, y) to `state` under projection W.
template <typename Scalar, typename DerivedW, typename DerivedX>
LinArmState<Scalar>& linstate_update(LinArmState<Scalar>& state, const Eigen::MatrixBase<DerivedW>& W,
                                     const Eigen::MatrixBase<DerivedX>& x, Scalar y) {
  if (!x.allFinite() || !std::isfinite(static_cast<double>(y))) {
    throw InputError("linstate_update: non-finite context or reward");
  }
  const Vec<Scalar> z = W * x;
  state.G.noalias() += z * z.transpose();
  state.b.noalias() += z * y;
  state.tangent.raw_cov.noalias() += x * x.transpose();
  state.tangent.raw_xy.noalias() += x * y;
  ++state.count;
  if (++state.since_refactor >= LinArmState<Scalar>::kRefactorEvery) {
    state.refactor();
  } else {
    const Vec<Scalar> gz = state.G_inv * z;
    state.G_inv.noalias() -= (gz * gz.transpose()) / (Scalar(1) + z.dot(gz));
  }
  state.theta_hat.noalias() = state.G_inv * state.b;
  return state;
}

/// Estimated mean and squared confidence width of one arm at projected context z.
template <typename Scalar = double>
struct ArmEstimate {
  Scalar mean = Scalar(0);   // z^T theta_hat
  Scalar width_sq = Scalar(0);  // z^T G^{-1} z
  Vec<Scalar> q;             // G^{-1} z
};

template <typename Scalar, typename DerivedZ>
ArmEstimate<Scalar> arm_estimate(const LinArmState<Scalar>& state, const Eigen::MatrixBase<DerivedZ>& z) {
  ArmEstimate<Scalar> e;
  e.q.noalias() = state.G_inv * z;
  e.mean = z.dot(state.theta_hat);
  e.width_sq = z.dot(e.q);
  return e;
}

/// d(mean)/dW and d(width_sq)/dW for one arm, at raw context x and projection W.
template <typename Scalar = double>
struct ArmGradients {
  Mat<Scalar> mean;
  Mat<Scalar> width_sq;
};

template <typename Scalar, typename DerivedW, typename DerivedX>
ArmGradients<Scalar> arm_gradients(const LinArmState<Scalar>& state, const ArmEstimate<Scalar>& est,
                                   const Eigen::MatrixBase<DerivedW>& W, const Eigen::MatrixBase<DerivedX>& x) {
  const Mat<Scalar>& A = state.tangent.raw_cov;
  const Vec<Scalar> a_theta = A * (W.transpose() * state.theta_hat);
  const Vec<Scalar> a_q = A * (W.transpose() * est.q);
  ArmGradients<Scalar> g;
  g.mean.noalias() = state.theta_hat * x.transpose();
  g.mean.noalias() += est.q * state.tangent.raw_xy.transpose();
  g.mean.noalias() -= est.q * a_theta.transpose();
  g.mean.noalias() -= state.theta_hat * a_q.transpose();
  g.width_sq.noalias() = Scalar(2) * est.q * (x - a_q).transpose();
  return g;
}

// ---------------------------------------------------------------------------
// CoSoftElim

/// S_i = gamma (mu_max - mu_i)^2 / ||W x||^2_{G_i^{-1}}; all zero when W x = 0.
template <typename Scalar>
Vec<Scalar> cosoftelim_scores(const std::vector<ArmEstimate<Scalar>>& est, Scalar gamma, bool null_direction) {
  const Index K = static_cast<Index>(est.size());
  Vec<Scalar> S = Vec<Scalar>::Zero(K);
  if (null_direction) return S;
  Scalar best = est[0].mean;
  for (const auto& e : est) best = std::max(best, e.mean);
  for (Index i = 0; i < K; ++i) {
    const Scalar gap = best - est[static_cast<std::size_t>(i)].mean;
    S(i) = gamma * gap * gap / est[static_cast<std::size_t>(i)].width_sq;
  }
  return S;
}

template <typename Scalar, typename DerivedW, typename DerivedX>
Vec<Scalar> cosoftelim_probs(const std::vector<LinArmState<Scalar>>& states, const Eigen::MatrixBase<DerivedW>& W,
                             const Eigen::MatrixBase<DerivedX>& x, Scalar gamma) {
  const Vec<Scalar> z = W * x;
  std::vector<ArmEstimate<Scalar>> est;
  est.reserve(states.size());
  for (const auto& s : states) est.push_back(arm_estimate(s, z));
  return softmax((-cosoftelim_scores(est, gamma, z.squaredNorm() == Scalar(0))).eval());
}

/// grad_W log pi_arm, differentiating through theta_hat and G^{-1} over the
/// whole history summarized in each arm's tangent bundle.
template <typename Scalar, typename DerivedW, typename DerivedX>
Mat<Scalar> cosoftelim_grad_log_prob(const std::vector<LinArmState<Scalar>>& states,
                                     const Eigen::MatrixBase<DerivedW>& W, const Eigen::MatrixBase<DerivedX>& x,
                                     Scalar gamma, Index arm) {
  const Index K = static_cast<Index>(states.size());
  const Index d = W.rows();
  const Vec<Scalar> z = W * x;
  Mat<Scalar> grad = Mat<Scalar>::Zero(d, d);
  if (z.squaredNorm() == Scalar(0)) return grad;

  std::vector<ArmEstimate<Scalar>> est;
  est.reserve(states.size());
  for (const auto& s : states) est.push_back(arm_estimate(s, z));
  const Vec<Scalar> S = cosoftelim_scores(est, gamma, false);
  const Vec<Scalar> pi = softmax((-S).eval());

  Index best = 0;
  for (Index i = 1; i < K; ++i) {
    if (est[static_cast<std::size_t>(i)].mean > est[static_cast<std::size_t>(best)].mean) best = i;
  }
  const Mat<Scalar> grad_best = arm_gradients(states[static_cast<std::size_t>(best)],
                                              est[static_cast<std::size_t>(best)], W, x).mean;

  // grad log pi_arm = sum_j pi_j grad S_j - grad S_arm
  for (Index j = 0; j < K; ++j) {
    const auto& e = est[static_cast<std::size_t>(j)];
    const Scalar gap = est[static_cast<std::size_t>(best)].mean - e.mean;
    if (gap == Scalar(0)) continue;
    const ArmGradients<Scalar> g = arm_gradients(states[static_cast<std::size_t>(j)], e, W, x);
    const Scalar coef = (j == arm ? pi(j) - Scalar(1) : pi(j));
    grad += coef * gamma *
            (Scalar(2) * gap / e.width_sq * (grad_best - g.mean) - gap * gap / (e.width_sq * e.width_sq) * g.width_sq);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Contextual Thompson sampling

inline constexpr double kVarianceFloor = 1e-12;

template <typename Scalar = double>
struct CtsDraw {
  Index arm = 0;
  Vec<Scalar> sampled;
};

/// mu~_i ~ N(z^T theta_i, sigma^2 ||z||^2_{G_i^{-1}}); zero variance yields the mean.
template <typename Scalar, typename DerivedW, typename DerivedX>
CtsDraw<Scalar> cts_sample(const std::vector<LinArmState<Scalar>>& states, const Eigen::MatrixBase<DerivedW>& W,
                           const Eigen::MatrixBase<DerivedX>& x, Scalar sigma, Engine& rng) {
  if (!(sigma > Scalar(0))) throw ConfigError("contextual TS: sigma must be > 0");
  const Vec<Scalar> z = W * x;
  std::normal_distribution<double> normal(0.0, 1.0);
  CtsDraw<Scalar> draw;
  draw.sampled.resize(static_cast<Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    const ArmEstimate<Scalar> e = arm_estimate(states[i], z);
    const Scalar sd = sigma * std::sqrt(std::max(e.width_sq, Scalar(0)));
    draw.sampled(static_cast<Index>(i)) = e.mean + sd * Scalar(normal(rng));
  }
  draw.arm = argmax_lowest(draw.sampled);
  return draw;
}

/// sum_i grad_W log N(mu~_i; z^T theta_i, sigma^2 ||z||^2_{G_i^{-1}}).
/// Variances below kVarianceFloor are floored; `floored` counts how often.
template <typename Scalar, typename DerivedW, typename DerivedX, typename DerivedM>
Mat<Scalar> cts_grad_log_density(const std::vector<LinArmState<Scalar>>& states,
                                 const Eigen::MatrixBase<DerivedW>& W, const Eigen::MatrixBase<DerivedX>& x,
                                 Scalar sigma, const Eigen::MatrixBase<DerivedM>& sampled, long* floored = nullptr) {
  const Index d = W.rows();
  const Vec<Scalar> z = W * x;
  Mat<Scalar> grad = Mat<Scalar>::Zero(d, d);
  const Scalar s2 = sigma * sigma;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const ArmEstimate<Scalar> e = arm_estimate(states[i], z);
    Scalar var = s2 * e.width_sq;
    if (var < Scalar(kVarianceFloor)) {
      var = Scalar(kVarianceFloor);
      if (floored) ++*floored;
    }
    const Scalar resid = sampled(static_cast<Index>(i)) - e.mean;
    const Scalar d_mean = resid / var;
    const Scalar d_var = (resid * resid / var - Scalar(1)) / (Scalar(2) * var);
    const ArmGradients<Scalar> g = arm_gradients(states[i], e, W, x);
    grad += d_mean * g.mean + d_var * s2 * g.width_sq;
  }
  return grad;
}

// ---------------------------------------------------------------------------
// epsilon-greedy over the W = I linear model

template <typename Scalar = double>
struct EpsGreedyStep {
  Vec<Scalar> probs;
  Vec<Scalar> grad_log_prob;  // d/d eps log pi_i per arm
  Index greedy_arm = 0;
};

template <typename Scalar, typename DerivedX>
EpsGreedyStep<Scalar> eps_greedy_probs_and_grad(const std::vector<LinArmState<Scalar>>& states,
                                                const Eigen::MatrixBase<DerivedX>& x, Scalar eps) {
  const Index K = static_cast<Index>(states.size());
  Vec<Scalar> means(K);
  for (Index i = 0; i < K; ++i) means(i) = x.dot(states[static_cast<std::size_t>(i)].theta_hat);
  EpsGreedyStep<Scalar> step;
  step.greedy_arm = argmax_lowest(means);
  step.probs = Vec<Scalar>::Constant(K, eps / Scalar(K));
  step.probs(step.greedy_arm) += Scalar(1) - eps;
  step.grad_log_prob.resize(K);
  for (Index i = 0; i < K; ++i) {
    const Scalar indicator = i == step.greedy_arm ? Scalar(1) : Scalar(0);
    step.grad_log_prob(i) = (Scalar(1) / Scalar(K) - indicator) / step.probs(i);
  }
  return step;
}

// ---------------------------------------------------------------------------
// Randomized contextual explore-then-commit over discrete contexts.

/// Per-context statistics; contexts are created on first sight, each with
/// its own randomized rounding of the shared h.
struct ContextualEtcState {
  Index num_arms = 2;
  double h = 1.0;
  std::vector<long> context_ids;
  std::vector<int> rounded_h;
  std::vector<long> observations;
  std::vector<VectorXd> means;
  std::vector<VectorXi> pulls;

  ContextualEtcState(Index num_arms_, double h_) : num_arms(num_arms_), h(h_) {}

  /// Slot of `context`; a new slot draws its rounded h from `rng`, and
  /// `created` reports whether that happened.
  std::size_t slot(long context, Engine& rng, bool* created = nullptr);
  std::size_t find(long context) const;
  void update(long context, Index arm, double y);
};

/// Within context j with s past observations: explore arm s mod K while
/// s < K * rounded_h, then commit to the best empirical mean of context j.
Index contextual_etc_step(ContextualEtcState& state, long context, Engine& rng, bool* created = nullptr);

// ---------------------------------------------------------------------------
// Policy families

/// Flattens W column-major into the optimizer's parameter vector.
inline VectorXd flatten(const MatrixXd& W) { return Eigen::Map<const VectorXd>(W.data(), W.size()); }
inline MatrixXd unflatten(const VectorXd& p, Index d) { return Eigen::Map<const MatrixXd>(p.data(), d, d); }

class CoSoftElimPolicy final : public Policy {
 public:
  CoSoftElimPolicy(Index dim, double gamma, double lambda = 1.0)
      : dim_(dim), gamma_(gamma), lambda_(lambda) {}
  std::string name() const override { return "cosoftelim"; }
  Index num_params() const override { return dim_ * dim_; }
  VectorXd default_params() const override { return flatten(MatrixXd::Identity(dim_, dim_)); }
  Trajectory rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table, Engine& rng,
                     bool record_scores) const override;

  double gamma() const { return gamma_; }
  double lambda() const { return lambda_; }

 private:
  Index dim_;
  double gamma_;
  double lambda_;
};

class ContextualTsPolicy final : public Policy {
 public:
  ContextualTsPolicy(Index dim, double sigma, double lambda = 1.0) : dim_(dim), sigma_(sigma), lambda_(lambda) {}
  std::string name() const override { return "cts"; }
  Index num_params() const override { return dim_ * dim_; }
  VectorXd default_params() const override { return flatten(MatrixXd::Identity(dim_, dim_)); }
  Trajectory rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table, Engine& rng,
                     bool record_scores) const override;

 private:
  Index dim_;
  double sigma_;
  double lambda_;
};

class EpsGreedyPolicy final : public Policy {
 public:
  explicit EpsGreedyPolicy(double eps0 = 0.2, double lambda = 1.0) : eps0_(eps0), lambda_(lambda) {}
  std::string name() const override { return "eps_greedy"; }
  Index num_params() const override { return 1; }
  VectorXd default_params() const override { return VectorXd::Constant(1, eps0_); }
  VectorXd project(const VectorXd& params, Index horizon) const override;
  Trajectory rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table, Engine& rng,
                     bool record_scores) const override;

 private:
  double eps0_;
  double lambda_;
};

/// Context id of round t is the integer value of the first context feature.
class ContextualEtcPolicy final : public Policy {
 public:
  explicit ContextualEtcPolicy(double h0 = 5.5) : h0_(h0) {}
  std::string name() const override { return "contextual_etc"; }
  Index num_params() const override { return 1; }
  VectorXd default_params() const override { return VectorXd::Constant(1, h0_); }
  VectorXd project(const VectorXd& params, Index horizon) const override;
  Trajectory rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table, Engine& rng,
                     bool record_scores) const override;

 private:
  double h0_;
};

/// gamma = c1^{-2} with c1 from the linear-bandit concentration bound at
/// delta = 1/n: c1 = sigma sqrt(K d log((1 + n L^2 / (K d lambda)) / delta)) + sqrt(lambda) L_*.
double theory_gamma(double sigma, Index num_arms, Index dim, Index horizon, double lambda, double max_context_norm,
                    double theta_norm);

}  // namespace gradband
