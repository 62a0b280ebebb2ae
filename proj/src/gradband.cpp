#include "gradband/gradband.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gradband/diagnostics.hpp"
#include "gradband/eval.hpp"

namespace gradband {

std::string to_string(AlphaRule rule) { return rule == AlphaRule::auto_c ? "auto_c" : "fixed"; }

AlphaRule parse_alpha_rule(const std::string& text) {
  if (text == "auto_c" || text == "auto") return AlphaRule::auto_c;
  if (text == "fixed") return AlphaRule::fixed;
  throw ConfigError("unknown alpha rule '" + text + "' (expected auto_c or fixed)");
}

std::string to_string(PilotStatistic s) { return s == PilotStatistic::episode ? "episode" : "batch_mean"; }

PilotStatistic parse_pilot_statistic(const std::string& text) {
  if (text == "episode") return PilotStatistic::episode;
  if (text == "batch_mean") return PilotStatistic::batch_mean;
  throw ConfigError("unknown pilot statistic '" + text + "' (expected episode or batch_mean)");
}

void TrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("train: iterations must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (horizon < 1) throw ConfigError("train: horizon must be >= 1");
  if (alpha_rule == AlphaRule::fixed && !(alpha > 0.0)) throw ConfigError("train: fixed alpha must be > 0");
  if (alpha_rule == AlphaRule::auto_c && pilot_size < 30) throw ConfigError("train: pilot_size must be >= 30");
  if (!(pilot_percentile > 0.0 && pilot_percentile <= 1.0)) throw ConfigError("train: pilot_percentile in (0, 1]");
  if (pilot_resamples < 1) throw ConfigError("train: pilot_resamples must be >= 1");
  if (eval_every < 0) throw ConfigError("train: eval_every must be >= 0");
  if (eval_every > 0 && eval_instances < 2) throw ConfigError("train: eval_instances must be >= 2");
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<double> bootstrap_mean_norms(const std::vector<VectorXd>& contributions, Index batch_size, Index resamples,
                                         Engine& rng) {
  if (contributions.empty()) throw DomainError("bootstrap of an empty sample");
  std::uniform_int_distribution<std::size_t> pick(0, contributions.size() - 1);
  std::vector<double> norms;
  norms.reserve(static_cast<std::size_t>(resamples));
  VectorXd acc(contributions.front().size());
  for (Index b = 0; b < resamples; ++b) {
    acc.setZero();
    for (Index k = 0; k < batch_size; ++k) acc += contributions[pick(rng)];
    norms.push_back(acc.norm() / static_cast<double>(batch_size));
  }
  return norms;
}

namespace {

VectorXd initial_params(const Policy& policy, const TrainConfig& config) {
  VectorXd w = config.initial_params.size() > 0 ? config.initial_params : policy.default_params();
  if (w.size() != policy.num_params()) {
    throw ConfigError("train: policy " + policy.name() + " expects " + std::to_string(policy.num_params()) +
                      " parameters, got " + std::to_string(w.size()));
  }
  return policy.project(w, config.horizon);
}

std::string format_params(const VectorXd& w) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Index i = 0; i < w.size(); ++i) os << (i ? ", " : "") << w(i);
  os << "]";
  return os.str();
}

}  // namespace

LearningRate auto_learning_rate(const Policy& policy, const InstanceSampler& sampler, const TrainConfig& config) {
  config.validate();
  const VectorXd w0 = initial_params(policy, config);
  const BatchKey key{config.master_seed, 0, Lane::pilot};
  const std::vector<VectorXd> pilot = sample_contributions(policy, w0, sampler, config.horizon, config.pilot_size,
                                                           config.baseline, key, config.threads);
  std::vector<double> norms;
  if (config.pilot_statistic == PilotStatistic::episode) {
    for (const VectorXd& g : pilot) norms.push_back(g.norm());
  } else {
    Engine rng = make_stream(config.master_seed, Lane::pilot, 1, 0);
    norms = bootstrap_mean_norms(pilot, config.batch_size, config.pilot_resamples, rng);
  }
  LearningRate rate;
  rate.c = percentile(norms, config.pilot_percentile);
  if (!(rate.c >= 1.0)) {
    if (!(rate.c > 0.0)) warn("auto learning rate: pilot gradients vanish, flooring c at 1");
    rate.c = std::max(1.0, std::isfinite(rate.c) ? rate.c : 1.0);
  }
  const double L = static_cast<double>(std::max<Index>(config.iterations, 1));
  rate.alpha = 1.0 / (rate.c * std::sqrt(L));
  return rate;
}

TrainResult run_gradband(const Policy& policy, const InstanceSampler& sampler, const TrainConfig& config,
                         const IterationCallback& on_iteration) {
  config.validate();
  TrainResult result;
  VectorXd w = initial_params(policy, config);
  if (config.iterations > 0) {
    if (config.alpha_rule == AlphaRule::fixed) {
      result.rate.alpha = config.alpha;
      result.rate.c = 1.0 / (config.alpha * std::sqrt(static_cast<double>(config.iterations)));
    } else {
      result.rate = auto_learning_rate(policy, sampler, config);
    }
  }

  auto evaluate = [&](TraceRow& row) {
    const Index l = row.iteration;
    const bool due = config.eval_every > 0 && (l % config.eval_every == 0 || l == config.iterations);
    if (!due) return;
    const EvalReport rep =
        bayes_regret(policy, row.params, sampler, config.horizon, config.eval_instances, config.eval_seed, config.threads);
    row.eval_regret_mean = rep.regret_mean;
    row.eval_regret_stderr = rep.regret_stderr;
  };

  result.trace.rows.reserve(static_cast<std::size_t>(config.iterations + 1));
  for (Index l = 0; l < config.iterations; ++l) {
    TraceRow row;
    row.iteration = l;
    row.params = w;
    GradientEstimate g;
    try {
      g = sample_gradient(policy, w, sampler, config.horizon, config.batch_size, config.baseline,
                          BatchKey{config.master_seed, static_cast<std::uint64_t>(l), Lane::instance}, config.threads);
    } catch (const InputError& e) {
      throw TrainingAborted("iteration " + std::to_string(l) + ": " + e.what() + "; params " + format_params(w), l, w);
    }
    row.grad_norm = g.norm();
    row.spread = g.spread;
    evaluate(row);
    if (on_iteration) on_iteration(row);
    result.trace.rows.push_back(std::move(row));
    w = policy.project(w + result.rate.alpha * g.mean, config.horizon);
  }
  TraceRow last;
  last.iteration = config.iterations;
  last.params = w;
  evaluate(last);
  if (on_iteration) on_iteration(last);
  result.trace.rows.push_back(std::move(last));
  result.params = w;
  return result;
}

}  // namespace gradband
