#include "gradband/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gradband {

std::string to_string(PriorFamily f) {
  switch (f) {
    case PriorFamily::mixture_points: return "mixture_points";
    case PriorFamily::independent_beta: return "independent_beta";
    case PriorFamily::gaussian_linear: return "gaussian_linear";
    case PriorFamily::dataset_backed: return "dataset_backed";
  }
  return "?";
}

std::string to_string(RewardModel m) {
  switch (m) {
    case RewardModel::bernoulli: return "bernoulli";
    case RewardModel::beta_scaled: return "beta_scaled";
    case RewardModel::gaussian: return "gaussian";
    case RewardModel::one_hot_label: return "one_hot_label";
  }
  return "?";
}

std::string to_string(ContextModel m) {
  switch (m) {
    case ContextModel::none: return "none";
    case ContextModel::gaussian: return "gaussian";
    case ContextModel::dataset_rows: return "dataset_rows";
  }
  return "?";
}

MatrixXd psd_factor(const MatrixXd& cov, const std::string& what) {
  if (cov.rows() != cov.cols()) throw ConfigError(what + " must be square");
  if (!cov.allFinite()) throw ConfigError(what + " has non-finite entries");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ConfigError(what + " is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  const VectorXd& values = eig.eigenvalues();
  if (values.size() > 0 && values.minCoeff() < -1e-10 * scale) {
    throw ConfigError(what + " is not positive semi-definite");
  }
  return eig.eigenvectors() * values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

void PriorSpec::validate() const {
  if (num_arms < 1) throw ConfigError("prior: arm count must be >= 1");
  if (dim < 1) throw ConfigError("prior: context dimension must be >= 1");

  switch (family) {
    case PriorFamily::mixture_points: {
      if (points.empty() || points.size() != weights.size()) {
        throw ConfigError("prior: mixture needs one weight per point");
      }
      double total = 0.0;
      for (std::size_t k = 0; k < points.size(); ++k) {
        if (points[k].rows() != num_arms || points[k].cols() != dim) {
          throw ConfigError("prior: mixture point has wrong shape");
        }
        if (!(weights[k] >= 0.0)) throw ConfigError("prior: mixture weights must be >= 0");
        total += weights[k];
      }
      if (std::abs(total - 1.0) > 1e-9) throw ConfigError("prior: mixture weights must sum to 1");
      break;
    }
    case PriorFamily::independent_beta:
      if (dim != 1) throw ConfigError("prior: independent_beta is non-contextual (d = 1)");
      if (beta_a.size() != num_arms || beta_b.size() != num_arms) {
        throw ConfigError("prior: independent_beta needs one (alpha, beta) per arm");
      }
      if ((beta_a.array() <= 0.0).any() || (beta_b.array() <= 0.0).any() || !beta_a.allFinite() ||
          !beta_b.allFinite()) {
        throw ConfigError("prior: beta parameters must be > 0");
      }
      break;
    case PriorFamily::gaussian_linear:
      if (theta_mean.size() != dim) throw ConfigError("prior: theta mean must have length d");
      if (theta_cov.rows() != dim) throw ConfigError("prior: theta covariance must be d x d");
      psd_factor(theta_cov, "prior: theta covariance");
      break;
    case PriorFamily::dataset_backed:
      if (!dataset) throw ConfigError("prior: dataset_backed prior without dataset");
      if (dataset->dim() != dim || dataset->num_classes != num_arms) {
        throw ConfigError("prior: dataset shape does not match K and d");
      }
      if (reward_model != RewardModel::one_hot_label || context_model != ContextModel::dataset_rows) {
        throw ConfigError("prior: dataset_backed requires one_hot_label rewards and dataset_rows contexts");
      }
      break;
  }

  if (reward_model == RewardModel::beta_scaled && !(beta_v > 0.0)) {
    throw ConfigError("prior: beta_scaled requires v > 0");
  }
  if (reward_model == RewardModel::gaussian && !(noise_sigma >= 0.0)) {
    throw ConfigError("prior: gaussian reward noise must be >= 0");
  }
  if (reward_model == RewardModel::one_hot_label && family != PriorFamily::dataset_backed) {
    throw ConfigError("prior: one_hot_label rewards require a dataset_backed prior");
  }

  switch (context_model) {
    case ContextModel::none:
      if (dim != 1) throw ConfigError("prior: context model none requires d = 1");
      break;
    case ContextModel::gaussian:
      if (context_mean.size() != dim || context_cov.rows() != dim) {
        throw ConfigError("prior: context mean/covariance must be d-dimensional");
      }
      psd_factor(context_cov, "prior: context covariance");
      break;
    case ContextModel::dataset_rows:
      if (family != PriorFamily::dataset_backed) {
        throw ConfigError("prior: dataset_rows contexts require a dataset_backed prior");
      }
      break;
  }
}

PriorSpec PriorSpec::mixture(std::vector<MatrixXd> points, std::vector<double> weights,
                             RewardModel reward) {
  PriorSpec p;
  p.family = PriorFamily::mixture_points;
  p.num_arms = points.empty() ? 0 : static_cast<int>(points.front().rows());
  p.dim = points.empty() ? 1 : static_cast<int>(points.front().cols());
  p.points = std::move(points);
  p.weights = std::move(weights);
  p.reward_model = reward;
  return p;
}

PriorSpec PriorSpec::point_mass(const VectorXd& means, RewardModel reward) {
  return mixture({MatrixXd(means)}, {1.0}, reward);
}

PriorSpec PriorSpec::independent_beta(int num_arms, double a, double b, RewardModel reward) {
  PriorSpec p;
  p.family = PriorFamily::independent_beta;
  p.num_arms = num_arms;
  p.beta_a = VectorXd::Constant(num_arms, a);
  p.beta_b = VectorXd::Constant(num_arms, b);
  p.reward_model = reward;
  return p;
}

PriorSpec PriorSpec::gaussian_linear(int num_arms, VectorXd theta_mean, MatrixXd theta_cov,
                                     VectorXd context_mean, MatrixXd context_cov, double sigma) {
  PriorSpec p;
  p.family = PriorFamily::gaussian_linear;
  p.num_arms = num_arms;
  p.dim = static_cast<int>(theta_mean.size());
  p.theta_mean = std::move(theta_mean);
  p.theta_cov = std::move(theta_cov);
  p.context_model = ContextModel::gaussian;
  p.context_mean = std::move(context_mean);
  p.context_cov = std::move(context_cov);
  p.reward_model = RewardModel::gaussian;
  p.noise_sigma = sigma;
  return p;
}

PriorSpec PriorSpec::dataset_backed(std::shared_ptr<const Dataset> data) {
  PriorSpec p;
  p.family = PriorFamily::dataset_backed;
  p.num_arms = data->num_classes;
  p.dim = static_cast<int>(data->dim());
  p.dataset = std::move(data);
  p.reward_model = RewardModel::one_hot_label;
  p.context_model = ContextModel::dataset_rows;
  return p;
}

VectorXd ProblemInstance::flat_theta() const {
  VectorXd flat(theta.size());
  for (Index i = 0; i < theta.rows(); ++i) flat.segment(i * theta.cols(), theta.cols()) = theta.row(i).transpose();
  return flat;
}

namespace {

VectorXd standard_normals(Index n, Engine& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd z(n);
  for (Index k = 0; k < n; ++k) z(k) = normal(rng);
  return z;
}

double sample_beta(double a, double b, Engine& rng) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

}  // namespace

InstanceSampler::InstanceSampler(PriorSpec prior) : prior_(std::move(prior)) {
  prior_.validate();
  if (prior_.family == PriorFamily::gaussian_linear) {
    theta_factor_ = psd_factor(prior_.theta_cov, "prior: theta covariance");
  }
  if (prior_.context_model == ContextModel::gaussian) {
    context_factor_ = psd_factor(prior_.context_cov, "prior: context covariance");
  }
  if (prior_.family == PriorFamily::mixture_points) {
    cumulative_weights_.resize(prior_.weights.size());
    std::partial_sum(prior_.weights.begin(), prior_.weights.end(), cumulative_weights_.begin());
  }
}

ProblemInstance InstanceSampler::sample(Index horizon, Engine& rng) const {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  const Index K = prior_.num_arms;
  const Index d = prior_.dim;

  ProblemInstance inst;
  inst.arms = K;

  switch (prior_.family) {
    case PriorFamily::mixture_points: {
      const double u = uniform01(rng) * cumulative_weights_.back();
      std::size_t k = 0;
      while (k + 1 < cumulative_weights_.size() && u >= cumulative_weights_[k]) ++k;
      inst.theta = prior_.points[k];
      break;
    }
    case PriorFamily::independent_beta:
      inst.theta.resize(K, 1);
      for (Index i = 0; i < K; ++i) inst.theta(i, 0) = sample_beta(prior_.beta_a(i), prior_.beta_b(i), rng);
      break;
    case PriorFamily::gaussian_linear:
      inst.theta.resize(K, d);
      for (Index i = 0; i < K; ++i) {
        inst.theta.row(i) = (prior_.theta_mean + theta_factor_ * standard_normals(d, rng)).transpose();
      }
      break;
    case PriorFamily::dataset_backed: {
      const Dataset& data = *prior_.dataset;
      std::vector<Index> order(static_cast<std::size_t>(data.rows()));
      std::iota(order.begin(), order.end(), Index{0});
      std::shuffle(order.begin(), order.end(), rng);
      inst.contexts.resize(horizon, d);
      inst.labels.resize(horizon);
      for (Index t = 0; t < horizon; ++t) {
        const Index row = order[static_cast<std::size_t>(t % data.rows())];
        inst.contexts.row(t) = data.features.row(row);
        inst.labels(t) = data.labels(row);
      }
      return inst;
    }
  }

  switch (prior_.context_model) {
    case ContextModel::none:
      inst.contexts = MatrixXd::Ones(horizon, 1);
      break;
    case ContextModel::gaussian:
      inst.contexts.resize(horizon, d);
      for (Index t = 0; t < horizon; ++t) {
        inst.contexts.row(t) = (prior_.context_mean + context_factor_ * standard_normals(d, rng)).transpose();
      }
      break;
    case ContextModel::dataset_rows:
      break;  // handled above
  }
  return inst;
}

ProblemInstance sample_instance(const PriorSpec& prior, Index horizon, Engine& rng) {
  return InstanceSampler(prior).sample(horizon, rng);
}

MatrixXd mean_rewards(const ProblemInstance& instance) {
  if (instance.labels.size() > 0) {
    MatrixXd means = MatrixXd::Zero(instance.num_arms(), instance.horizon());
    for (Index t = 0; t < instance.horizon(); ++t) means(instance.labels(t), t) = 1.0;
    return means;
  }
  return instance.theta * instance.contexts.transpose();
}

RewardTable realize_rewards(const ProblemInstance& instance, const PriorSpec& prior, Engine& rng) {
  const Index K = instance.num_arms();
  const Index n = instance.horizon();
  if (K != prior.num_arms || instance.dim() != prior.dim) {
    throw ConfigError("realize_rewards: instance dimensions do not match prior");
  }

  RewardTable table;
  table.means = mean_rewards(instance);
  table.rewards.resize(K, n);

  switch (prior.reward_model) {
    case RewardModel::bernoulli:
      if ((table.means.array() < 0.0).any() || (table.means.array() > 1.0).any()) {
        throw DomainError("bernoulli rewards need means in [0, 1]");
      }
      for (Index t = 0; t < n; ++t) {
        for (Index i = 0; i < K; ++i) table.rewards(i, t) = uniform01(rng) < table.means(i, t) ? 1.0 : 0.0;
      }
      break;
    case RewardModel::beta_scaled: {
      if ((table.means.array() <= 0.0).any() || (table.means.array() >= 1.0).any()) {
        throw DomainError("beta_scaled rewards need means strictly inside (0, 1)");
      }
      const double v = prior.beta_v;
      for (Index t = 0; t < n; ++t) {
        for (Index i = 0; i < K; ++i) {
          table.rewards(i, t) = sample_beta(v * table.means(i, t), v * (1.0 - table.means(i, t)), rng);
        }
      }
      break;
    }
    case RewardModel::gaussian: {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Index t = 0; t < n; ++t) {
        for (Index i = 0; i < K; ++i) table.rewards(i, t) = table.means(i, t) + prior.noise_sigma * normal(rng);
      }
      break;
    }
    case RewardModel::one_hot_label:
      table.rewards = table.means;
      break;
  }
  return table;
}

std::vector<int> instance_optimal_arms(const RewardTable& table) {
  std::vector<int> best(static_cast<std::size_t>(table.horizon()));
  for (Index t = 0; t < table.horizon(); ++t) best[static_cast<std::size_t>(t)] = static_cast<int>(argmax_lowest(table.means.col(t)));
  return best;
}

std::vector<int> instance_optimal_arms(const ProblemInstance& instance) {
  const MatrixXd means = mean_rewards(instance);
  std::vector<int> best(static_cast<std::size_t>(means.cols()));
  for (Index t = 0; t < means.cols(); ++t) best[static_cast<std::size_t>(t)] = static_cast<int>(argmax_lowest(means.col(t)));
  return best;
}

}  // namespace gradband
