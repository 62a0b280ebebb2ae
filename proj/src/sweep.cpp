#include "gradband/sweep.hpp"

#include <cmath>

namespace gradband {

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::batch_size: return "batch_size";
    case SweepAxis::horizon: return "horizon";
    case SweepAxis::prior_param: return "prior_param";
  }
  return "?";
}

SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "batch_size") return SweepAxis::batch_size;
  if (text == "horizon") return SweepAxis::horizon;
  if (text == "prior_param") return SweepAxis::prior_param;
  throw ConfigError("unknown sweep axis '" + text + "'");
}

PriorSpec beta_prior_for(const PriorSpec& base, double alpha) {
  if (!(alpha > 0.0 && alpha < 10.0)) throw ConfigError("prior_param sweep: alpha must lie in (0, 10)");
  return PriorSpec::independent_beta(base.num_arms, alpha, 10.0 - alpha, base.reward_model);
}

namespace {

Index to_count(double v, const char* what) {
  const double r = std::round(v);
  if (r < 1.0 || std::abs(r - v) > 1e-9) throw ConfigError(std::string("sweep: ") + what + " grid needs positive integers");
  return static_cast<Index>(r);
}

}  // namespace

SweepResult sweep(SweepAxis axis, const std::vector<double>& grid, const SweepBase& base) {
  if (grid.empty()) throw ConfigError("sweep: grid must be nonempty");
  SweepResult out;
  out.axis = axis;
  out.grid = grid;
  const auto g = static_cast<Index>(grid.size());

  if (axis != SweepAxis::prior_param) {
    out.regret.resize(g, 1);
    const InstanceSampler sampler(base.prior);
    for (Index k = 0; k < g; ++k) {
      TrainConfig cfg = base.train;
      const double v = grid[static_cast<std::size_t>(k)];
      if (axis == SweepAxis::batch_size) cfg.batch_size = to_count(v, "batch_size");
      if (axis == SweepAxis::horizon) cfg.horizon = to_count(v, "horizon");
      const PolicyPtr policy = base.make_policy(base.prior, cfg.horizon);
      const TrainResult trained = run_gradband(*policy, sampler, cfg);
      EvalReport rep = bayes_regret(*policy, trained.params, sampler, cfg.horizon, base.eval_instances, base.eval_seed,
                                    cfg.threads);
      out.regret(k, 0) = rep.regret_mean;
      out.trained.push_back(trained.params);
      out.reports.push_back(std::move(rep));
    }
    return out;
  }

  out.regret.resize(g, g);
  std::vector<InstanceSampler> samplers;
  for (double a : grid) samplers.emplace_back(beta_prior_for(base.prior, a));
  for (Index i = 0; i < g; ++i) {
    const PriorSpec& train_prior = samplers[static_cast<std::size_t>(i)].prior();
    const PolicyPtr policy = base.make_policy(train_prior, base.train.horizon);
    const TrainResult trained = run_gradband(*policy, samplers[static_cast<std::size_t>(i)], base.train);
    out.trained.push_back(trained.params);
    for (Index j = 0; j < g; ++j) {
      EvalReport rep = bayes_regret(*policy, trained.params, samplers[static_cast<std::size_t>(j)], base.train.horizon,
                                    base.eval_instances, base.eval_seed, base.train.threads);
      out.regret(i, j) = rep.regret_mean;
      out.reports.push_back(std::move(rep));
    }
  }
  return out;
}

}  // namespace gradband
