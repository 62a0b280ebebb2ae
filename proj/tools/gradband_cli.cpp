#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gradband/config.hpp"
#include "gradband/diagnostics.hpp"
#include "gradband/eval.hpp"
#include "gradband/gittins.hpp"
#include "gradband/gradband.hpp"
#include "gradband/parallel.hpp"
#include "gradband/report.hpp"
#include "gradband/sweep.hpp"

namespace fs = std::filesystem;
using namespace gradband;

namespace {

constexpr const char* kVersion = "1.0.0";

enum Exit { kOk = 0, kConfig = 2, kRuntime = 3, kCache = 4 };

struct CommonOptions {
  std::string config;
  std::string experiment;
  std::string out = "";
  long long seed = -1;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config, "Experiment YAML file");
  cmd->add_option("--experiment", opt.experiment, "Bundled experiment name");
  cmd->add_option("--seed", opt.seed, "Override the master seed");
  cmd->add_option("--out", opt.out, "Output root directory");
  cmd->add_option("--threads", opt.threads, "Worker threads (default: GRADBAND_THREADS or all cores)");
}

ExperimentSpec load_spec(const CommonOptions& opt) {
  if (opt.config.empty() == opt.experiment.empty()) throw ConfigError("give exactly one of --config or --experiment");
  ExperimentSpec spec = load_experiment(opt.config.empty() ? registry_path(opt.experiment) : opt.config);
  if (opt.seed >= 0) spec.train.master_seed = static_cast<std::uint64_t>(opt.seed);
  spec.train.threads = resolve_threads(opt.threads);
  if (!opt.out.empty()) spec.output_dir = opt.out;
  attach_dataset(spec);
  return spec;
}

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

fs::path run_directory(const ExperimentSpec& spec) {
  fs::path dir = fs::path(spec.output_dir) / spec.name / timestamp();
  for (int k = 1; fs::exists(dir); ++k) dir = fs::path(spec.output_dir) / spec.name / (timestamp() + "-" + std::to_string(k));
  fs::create_directories(dir);
  return dir;
}

void write_manifest(const fs::path& dir, const ExperimentSpec& spec, const std::string& command) {
  nlohmann::json m;
  m["command"] = command;
  m["experiment"] = spec.name;
  m["config_hash"] = config_hash(spec);
  m["master_seed"] = spec.train.master_seed;
  m["eval_seed"] = spec.eval.seed;
  m["threads"] = spec.train.threads;
  m["version"] = kVersion;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  m["compiler"] = __VERSION__;
  m["warnings"] = warning_count();
  m["config"] = serialize_experiment(spec);
  write_text_file((dir / "manifest.json").string(), m.dump(2) + "\n");
}

std::vector<EvalReport> evaluate_all(const ExperimentSpec& spec, const Policy& policy, const VectorXd& params) {
  const InstanceSampler sampler(spec.prior);
  const Index n = spec.eval_horizon();
  std::vector<EvalReport> reports;
  reports.push_back(bayes_regret(policy, params, sampler, n, spec.eval.instances, spec.eval.seed, spec.train.threads));
  for (const std::string& name : spec.eval.compare) {
    PolicySpec other;
    other.family = name;
    const PolicyPtr p = make_policy(other, spec.prior, n, spec.train.threads);
    reports.push_back(bayes_regret(*p, p->default_params(), sampler, n, spec.eval.instances, spec.eval.seed,
                                   spec.train.threads));
  }
  return reports;
}

void write_eval_outputs(const fs::path& dir, const std::vector<EvalReport>& reports) {
  std::ostringstream csv;
  write_eval_csv(csv, reports);
  write_text_file((dir / "eval.csv").string(), csv.str());
  nlohmann::json doc = nlohmann::json::array();
  for (const EvalReport& r : reports) doc.push_back(to_json(r));
  write_text_file((dir / "eval.json").string(), doc.dump(2) + "\n");
  for (const EvalReport& r : reports) {
    std::printf("%-16s n=%-5lld regret %.4f +- %.4f\n", r.policy.c_str(), static_cast<long long>(r.horizon),
                r.regret_mean, r.regret_stderr);
  }
}

Index param_dim(const Policy& policy) {
  const Index p = policy.num_params();
  if (p <= 1) return 0;
  const auto d = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(p))));
  return d * d == p ? d : 0;
}

int cmd_train(const CommonOptions& opt) {
  ExperimentSpec spec = load_spec(opt);
  const PolicyPtr policy = make_policy(spec.policy, spec.prior, spec.train.horizon, spec.train.threads);
  spec.train.initial_params =
      resolve_initial_params(spec.policy, spec.prior, *policy, spec.base_dir, spec.train.master_seed);
  const InstanceSampler sampler(spec.prior);
  const auto start = std::chrono::steady_clock::now();
  const TrainResult result = run_gradband(*policy, sampler, spec.train, [&](const TraceRow& row) {
    std::fprintf(stderr, "iter %4lld  |g| %-12.6g", static_cast<long long>(row.iteration), row.grad_norm);
    if (!std::isnan(row.eval_regret_mean)) std::fprintf(stderr, "  regret %.4f", row.eval_regret_mean);
    std::fprintf(stderr, "\n");
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path dir = run_directory(spec);
  std::ostringstream trace;
  write_trace_csv(trace, result.trace);
  write_text_file((dir / "trace.csv").string(), trace.str());
  nlohmann::json params = params_to_json(policy->name(), result.params, param_dim(*policy));
  params["alpha"] = result.rate.alpha;
  params["c"] = result.rate.c;
  write_text_file((dir / "params.json").string(), params.dump(2) + "\n");
  write_eval_outputs(dir, evaluate_all(spec, *policy, result.params));
  write_manifest(dir, spec, "train");
  std::printf("trained %s in %.1f s; outputs in %s\n", policy->name().c_str(), secs, dir.string().c_str());
  return kOk;
}

int cmd_eval(const CommonOptions& opt) {
  ExperimentSpec spec = load_spec(opt);
  const PolicyPtr policy = make_policy(spec.policy, spec.prior, spec.eval_horizon(), spec.train.threads);
  VectorXd params = resolve_initial_params(spec.policy, spec.prior, *policy, spec.base_dir, spec.train.master_seed);
  if (params.size() == 0) params = policy->default_params();
  params = policy->project(params, spec.eval_horizon());
  const fs::path dir = run_directory(spec);
  write_eval_outputs(dir, evaluate_all(spec, *policy, params));
  write_manifest(dir, spec, "eval");
  std::printf("outputs in %s\n", dir.string().c_str());
  return kOk;
}

int cmd_sweep(const CommonOptions& opt) {
  ExperimentSpec spec = load_spec(opt);
  if (spec.sweep.axis.empty()) throw ConfigError(spec.name + ": no 'sweep' section");
  SweepBase base;
  base.prior = spec.prior;
  base.train = spec.train;
  base.eval_instances = spec.eval.instances;
  base.eval_seed = spec.eval.seed;
  const PolicySpec policy_spec = spec.policy;
  const int threads = spec.train.threads;
  base.make_policy = [policy_spec, threads](const PriorSpec& prior, Index n) {
    return make_policy(policy_spec, prior, n, threads);
  };
  {
    const PolicyPtr probe = make_policy(spec.policy, spec.prior, spec.train.horizon, threads);
    base.train.initial_params =
        resolve_initial_params(spec.policy, spec.prior, *probe, spec.base_dir, spec.train.master_seed);
  }
  const SweepAxis axis = parse_sweep_axis(spec.sweep.axis);
  const SweepResult result = sweep(axis, spec.sweep.grid, base);

  const fs::path dir = run_directory(spec);
  std::vector<std::string> labels;
  for (double v : spec.sweep.grid) labels.push_back(format_number(v));
  std::ostringstream matrix;
  if (axis == SweepAxis::prior_param) {
    write_matrix_csv(matrix, labels, labels, result.regret);
  } else {
    write_matrix_csv(matrix, labels, {"regret_mean"}, result.regret);
  }
  write_text_file((dir / "sweep.csv").string(), matrix.str());
  write_eval_outputs(dir, result.reports);
  write_manifest(dir, spec, "sweep");
  std::printf("outputs in %s\n", dir.string().c_str());
  return kOk;
}

int cmd_gittins(int n, const std::string& cache, int threads) {
  if (n < 1) throw ConfigError("gittins: n must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  const GittinsTable table = GittinsTable::build(n, kGittinsTolerance, resolve_threads(threads));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::size_t valid = 0;
  for (double v : table.values()) valid += std::isnan(v) ? 0 : 1;
  try {
    table.save(cache);
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kCache;
  }
  std::printf("n=%d lattice entries %zu (valid %zu) built in %.2f s; cache %s\n", n, table.size(), valid, secs,
              cache.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy-gradient tuning of bandit algorithms"};
  app.require_subcommand(1);
  CommonOptions train_opt, eval_opt, sweep_opt;
  add_common(app.add_subcommand("train", "Optimize policy parameters"), train_opt);
  add_common(app.add_subcommand("eval", "Estimate Bayes regret"), eval_opt);
  add_common(app.add_subcommand("sweep", "Robustness sweep"), sweep_opt);
  auto* gittins = app.add_subcommand("gittins", "Build a Gittins index cache");
  int gittins_n = 50;
  std::string gittins_cache = "gittins.bin";
  int gittins_threads = 0;
  gittins->add_option("--n", gittins_n, "Horizon")->required();
  gittins->add_option("--cache", gittins_cache, "Cache path");
  gittins->add_option("--threads", gittins_threads, "Worker threads");
  app.add_subcommand("list", "List bundled experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (app.got_subcommand("train")) return cmd_train(train_opt);
    if (app.got_subcommand("eval")) return cmd_eval(eval_opt);
    if (app.got_subcommand("sweep")) return cmd_sweep(sweep_opt);
    if (app.got_subcommand("gittins")) return cmd_gittins(gittins_n, gittins_cache, gittins_threads);
    if (app.got_subcommand("list")) {
      for (const std::string& name : registry_names()) std::printf("%s\n", name.c_str());
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const TrainingAborted& e) {
    std::fprintf(stderr, "training aborted: %s\n", e.what());
    return kRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kOk;
}
