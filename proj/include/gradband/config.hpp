#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "gradband/env.hpp"
#include "gradband/gradband.hpp"
#include "gradband/policy.hpp"

namespace gradband {

/// Where a dataset-backed prior gets its rows.
struct DatasetSource {
  std::string path;  // CSV path, resolved against the config file directory
  bool standardize = true;
  bool append_bias = false;
  // Synthetic clusters instead of a file when path is empty.
  int classes = 3;
  int dim = 4;
  int rows = 300;
  double spread = 1.0;
  std::uint64_t seed = 7;
};

struct PolicySpec {
  std::string family = "softelim";
  /// "default", "identity" (W = I), "values", "file" or "mom".
  std::string initial_kind = "default";
  std::vector<double> initial_values;  // scalar families, or column-major W
  std::string initial_file;            // params.json to load
  Index mom_rank = 0;
  Index mom_samples = 100000;
  double gamma = std::numeric_limits<double>::quiet_NaN();  // NaN: 1 / sigma^2
  double lambda = 1.0;
  double sigma = std::numeric_limits<double>::quiet_NaN();  // NaN: prior noise sigma
  std::string gittins_cache;  // optional index cache for family gittins
};

struct EvalSpec {
  Index instances = 1000;
  std::uint64_t seed = 1000003;
  Index horizon = 0;  // 0: the training horizon
  std::vector<std::string> compare;  // extra parameter-free policies to report
};

struct SweepSpec {
  std::string axis;  // batch_size, horizon or prior_param
  std::vector<double> grid;
};

struct ExperimentSpec {
  std::string name;
  PriorSpec prior;
  DatasetSource dataset;  // meaningful for dataset_backed priors
  PolicySpec policy;
  TrainConfig train;
  EvalSpec eval;
  SweepSpec sweep;
  std::string output_dir = "results";
  std::string base_dir;  // directory of the source file, for relative paths

  Index eval_horizon() const { return eval.horizon > 0 ? eval.horizon : train.horizon; }
};

/// Parses YAML text; errors carry `origin:line:column`.
ExperimentSpec parse_experiment(const std::string& text, const std::string& origin = "<config>",
                                const std::string& base_dir = ".");
ExperimentSpec load_experiment(const std::string& path);
std::string serialize_experiment(const ExperimentSpec& spec);

/// Path of a bundled experiment by registry name.
std::string registry_path(const std::string& name);
std::vector<std::string> registry_names();

/// Builds the policy object for a prior.
PolicyPtr make_policy(const PolicySpec& spec, const PriorSpec& prior, Index horizon, int threads = 0);

/// Initial parameters, or empty for the policy defaults.
VectorXd resolve_initial_params(const PolicySpec& spec, const PriorSpec& prior, const Policy& policy,
                                const std::string& base_dir, std::uint64_t seed);

/// Materializes dataset-backed priors (loads or synthesizes rows).
void attach_dataset(ExperimentSpec& spec);

/// Hex digest of the serialized config, for run manifests.
std::string config_hash(const ExperimentSpec& spec);

}  // namespace gradband
