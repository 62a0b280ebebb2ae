#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gradband/core.hpp"
#include "gradband/dataset.hpp"
#include "gradband/rng.hpp"

namespace gradband {

enum class PriorFamily { mixture_points, independent_beta, gaussian_linear, dataset_backed };
enum class RewardModel { bernoulli, beta_scaled, gaussian, one_hot_label };
enum class ContextModel { none, gaussian, dataset_rows };

std::string to_string(PriorFamily f);
std::string to_string(RewardModel m);
std::string to_string(ContextModel m);

/// Declarative description of the instance distribution.
///
/// Arm parameters are stored as K x d matrices: row i is the parameter
/// vector of arm i, and the mean reward of arm i in context x is
/// row_i . x. Non-contextual problems use d = 1 with the all-ones context,
/// so the mean of arm i is simply theta(i, 0).
struct PriorSpec {
  PriorFamily family = PriorFamily::mixture_points;
  int num_arms = 2;
  int dim = 1;

  // mixture_points
  std::vector<MatrixXd> points;
  std::vector<double> weights;

  // independent_beta, one (alpha, beta) pair per arm
  VectorXd beta_a;
  VectorXd beta_b;

  // gaussian_linear: each arm vector drawn i.i.d. from N(theta_mean, theta_cov)
  VectorXd theta_mean;
  MatrixXd theta_cov;

  // dataset_backed
  std::shared_ptr<const Dataset> dataset;

  RewardModel reward_model = RewardModel::bernoulli;
  double beta_v = 4.0;       // beta_scaled concentration
  double noise_sigma = 0.0;  // gaussian reward noise

  ContextModel context_model = ContextModel::none;
  VectorXd context_mean;
  MatrixXd context_cov;

  /// Throws ConfigError when any invariant fails.
  void validate() const;

  static PriorSpec mixture(std::vector<MatrixXd> points, std::vector<double> weights,
                           RewardModel reward = RewardModel::bernoulli);
  static PriorSpec point_mass(const VectorXd& means, RewardModel reward = RewardModel::bernoulli);
  static PriorSpec independent_beta(int num_arms, double a, double b,
                                    RewardModel reward = RewardModel::bernoulli);
  static PriorSpec gaussian_linear(int num_arms, VectorXd theta_mean, MatrixXd theta_cov,
                                   VectorXd context_mean, MatrixXd context_cov, double sigma);
  static PriorSpec dataset_backed(std::shared_ptr<const Dataset> data);
};

/// One draw theta* together with its realized context sequence.
struct ProblemInstance {
  Index arms = 0;
  MatrixXd theta;     // K x d arm parameters (empty for dataset-backed)
  MatrixXd contexts;  // n x d
  VectorXi labels;    // n, dataset-backed only
  std::uint64_t master_seed = 0;
  std::uint64_t instance_index = 0;

  Index num_arms() const { return arms; }
  Index horizon() const { return contexts.rows(); }
  Index dim() const { return contexts.cols(); }
  /// Stacked theta_1 (+) ... (+) theta_K.
  VectorXd flat_theta() const;
};

/// Realized rewards for every arm and round plus their means.
struct RewardTable {
  MatrixXd rewards;  // K x n
  MatrixXd means;    // K x n, f_i(x_t, theta*)

  Index num_arms() const { return rewards.rows(); }
  Index horizon() const { return rewards.cols(); }
};

/// Validates a prior once and caches the covariance square roots.
class InstanceSampler {
 public:
  explicit InstanceSampler(PriorSpec prior);

  ProblemInstance sample(Index horizon, Engine& rng) const;
  const PriorSpec& prior() const { return prior_; }

 private:
  PriorSpec prior_;
  MatrixXd theta_factor_;
  MatrixXd context_factor_;
  std::vector<double> cumulative_weights_;
};

ProblemInstance sample_instance(const PriorSpec& prior, Index horizon, Engine& rng);

/// Mean rewards f_i(x_t, theta*) as a K x n matrix.
MatrixXd mean_rewards(const ProblemInstance& instance);

RewardTable realize_rewards(const ProblemInstance& instance, const PriorSpec& prior, Engine& rng);

/// Optimal arm per round; ties go to the lowest index.
std::vector<int> instance_optimal_arms(const ProblemInstance& instance);
std::vector<int> instance_optimal_arms(const RewardTable& table);

/// Matrix square root F with F F^T = cov; throws ConfigError unless cov is symmetric PSD.
MatrixXd psd_factor(const MatrixXd& cov, const std::string& what);

}  // namespace gradband
