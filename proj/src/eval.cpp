#include "gradband/eval.hpp"

#include <algorithm>
#include <cmath>

#include "gradband/diagnostics.hpp"
#include "gradband/grad_estimator.hpp"
#include "gradband/parallel.hpp"

namespace gradband {

namespace {

constexpr Index kChunk = 32;

struct ChunkTotals {
  VectorXd curve;
  double reward = 0.0;
  double optimal = 0.0;
};

}  // namespace

EvalReport bayes_regret(const Policy& policy, const VectorXd& params, const InstanceSampler& sampler, Index horizon,
                        Index num_instances, std::uint64_t seed, int threads) {
  if (num_instances < 2) throw ConfigError("bayes_regret: need at least two instances");
  if (horizon < 1) throw ConfigError("bayes_regret: horizon must be positive");
  EvalReport report;
  report.policy = policy.name();
  report.prior = to_string(sampler.prior().family);
  report.horizon = horizon;
  report.num_instances = num_instances;
  report.seed = seed;
  report.regrets.assign(static_cast<std::size_t>(num_instances), 0.0);

  const BatchKey key{seed, 0, Lane::evaluation};
  const Index chunks = (num_instances + kChunk - 1) / kChunk;
  std::vector<ChunkTotals> totals(static_cast<std::size_t>(chunks));

  parallel_for(chunks, threads, [&](Index c) {
    ChunkTotals& acc = totals[static_cast<std::size_t>(c)];
    acc.curve = VectorXd::Zero(horizon);
    const Index end = std::min(num_instances, (c + 1) * kChunk);
    for (Index j = c * kChunk; j < end; ++j) {
      const auto idx = static_cast<std::uint64_t>(j);
      Engine inst_rng = episode_stream(key, Lane::instance, idx);
      const ProblemInstance inst = sampler.sample(horizon, inst_rng);
      Engine reward_rng = episode_stream(key, Lane::rewards, idx);
      const RewardTable table = realize_rewards(inst, sampler.prior(), reward_rng);
      Engine policy_rng = episode_stream(key, Lane::policy, idx);
      const Trajectory traj = policy.rollout(params, inst, table, policy_rng, false);
      const std::vector<int> opt = instance_optimal_arms(table);
      double cum = 0.0, reward = 0.0, optimal = 0.0;
      for (Index t = 0; t < horizon; ++t) {
        const double best = table.rewards(opt[static_cast<std::size_t>(t)], t);
        const double got = traj.rewards(t);
        optimal += best;
        reward += got;
        cum += best - got;
        acc.curve(t) += cum;
      }
      acc.reward += reward;
      acc.optimal += optimal;
      report.regrets[static_cast<std::size_t>(j)] = cum;
    }
  });

  report.curve = VectorXd::Zero(horizon);
  double reward = 0.0, optimal = 0.0;
  for (const ChunkTotals& acc : totals) {
    report.curve += acc.curve;
    reward += acc.reward;
    optimal += acc.optimal;
  }
  const double m = static_cast<double>(num_instances);
  report.curve /= m;
  report.reward_mean = reward / m;
  report.optimal_mean = optimal / m;
  double mean = 0.0;
  for (double r : report.regrets) mean += r;
  mean /= m;
  report.regret_mean = mean;
  report.curve(horizon - 1) = mean;
  if (num_instances > 1) {
    double ss = 0.0;
    for (double r : report.regrets) ss += (r - mean) * (r - mean);
    report.regret_stderr = std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
  }
  return report;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

double etc_reward_integer(double mu1, double mu2, double n, double h) {
  const double gap = mu1 - mu2;
  return mu1 * n - gap * (h + normal_cdf(-gap * std::sqrt(h / 2.0)) * (n - 2.0 * h));
}

}  // namespace

double etc_closed_form_reward(double mu1, double mu2, Index horizon, double h) {
  if (mu1 < mu2) std::swap(mu1, mu2);
  const double hi = std::floor(static_cast<double>(horizon) / 2.0);
  if (!(h >= 1.0 && h <= hi)) throw DomainError("etc_closed_form_reward: h outside [1, floor(n/2)]");
  const double n = static_cast<double>(horizon);
  const double lo = std::floor(h);
  const double frac = h - lo;
  const double r_lo = etc_reward_integer(mu1, mu2, n, lo);
  if (frac == 0.0) return r_lo;
  return (1.0 - frac) * r_lo + frac * etc_reward_integer(mu1, mu2, n, lo + 1.0);
}

MomResult mom_subspace(Index num_samples, const PriorSpec& prior, double sigma, Index rank, Engine& rng) {
  if (prior.family != PriorFamily::gaussian_linear) throw ConfigError("mom_subspace: needs a gaussian_linear prior");
  const Index d = prior.dim;
  if (rank < 1 || rank > d) throw ConfigError("mom_subspace: rank must lie in [1, d]");
  if (num_samples < d) throw ConfigError("mom_subspace: need at least d samples");

  const MatrixXd theta_factor = psd_factor(prior.theta_cov, "theta_cov");
  const MatrixXd ctx_factor = psd_factor(prior.context_cov, "context_cov");
  const Eigen::LLT<MatrixXd> ctx_llt(prior.context_cov);
  if (ctx_llt.info() != Eigen::Success) throw ConfigError("mom_subspace: context covariance must be positive definite");

  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd moment = MatrixXd::Zero(d, d);
  VectorXd e(d), theta(d), x(d);
  for (Index t = 0; t < num_samples; ++t) {
    for (Index k = 0; k < d; ++k) e(k) = normal(rng);
    theta = prior.theta_mean + theta_factor * e;
    for (Index k = 0; k < d; ++k) e(k) = normal(rng);
    x = prior.context_mean + ctx_factor * e;
    const double y = x.dot(theta) + sigma * normal(rng);
    // e holds the whitened context
    moment.selfadjointView<Eigen::Lower>().rankUpdate(e, y * y);
  }
  moment = moment.selfadjointView<Eigen::Lower>();

  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(moment);
  MomResult out;
  out.eigenvalues = eig.eigenvalues().reverse();
  const double scale = std::max(1.0, std::abs(out.eigenvalues(0)));
  Index usable = 0;
  while (usable < rank && out.eigenvalues(usable) > 1e-12 * scale) ++usable;
  if (usable < rank) warn("mom_subspace: moment matrix has rank " + std::to_string(usable) + " < requested " +
                          std::to_string(rank));
  out.rank = usable;
  // Whitened basis -> original coordinates: directions theta with Sigma_x^{1/2} theta in span(B).
  const MatrixXd basis_white = eig.eigenvectors().rightCols(usable).rowwise().reverse();
  MatrixXd basis = ctx_llt.matrixU().solve(ctx_llt.matrixL().solve(ctx_factor * basis_white));
  const Eigen::HouseholderQR<MatrixXd> qr(basis);
  basis = qr.householderQ() * MatrixXd::Identity(d, usable);
  out.projector = basis * basis.transpose();
  return out;
}

}  // namespace gradband
