#include "gradband/config.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "gradband/eval.hpp"
#include "gradband/gittins.hpp"
#include "gradband/policy_ctx.hpp"
#include "gradband/policy_mab.hpp"
#include "gradband/report.hpp"

namespace gradband {

namespace fs = std::filesystem;

namespace {

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& msg) const {
    const YAML::Mark m = node.Mark();
    if (m.is_null()) throw ConfigError(origin_ + ": " + msg);
    throw ConfigError(origin_ + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": " + msg);
  }

  void require_map(const YAML::Node& node, const std::string& what) const {
    if (!node.IsMap()) fail(node, what + " must be a mapping");
  }

  void check_keys(const YAML::Node& node, const std::vector<std::string>& allowed, const std::string& what) const {
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      bool ok = false;
      for (const std::string& a : allowed) ok = ok || a == key;
      if (!ok) fail(kv.first, "unknown key '" + key + "' in " + what);
    }
  }

  template <typename T>
  T scalar(const YAML::Node& node, const std::string& what) const {
    if (!node.IsScalar()) fail(node, what + " must be a scalar");
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, "cannot read " + what + " from '" + node.Scalar() + "'");
    }
  }

  double number(const YAML::Node& node, const std::string& what) const {
    const auto v = scalar<double>(node, what);
    if (!std::isfinite(v)) fail(node, what + " must be finite");
    return v;
  }

  Index count(const YAML::Node& node, const std::string& what, Index min_value) const {
    const auto v = scalar<long long>(node, what);
    if (v < min_value) fail(node, what + " must be >= " + std::to_string(min_value));
    return static_cast<Index>(v);
  }

  std::vector<double> numbers(const YAML::Node& node, const std::string& what) const {
    if (!node.IsSequence()) fail(node, what + " must be a list of numbers");
    std::vector<double> out;
    for (const auto& v : node) out.push_back(number(v, what + " entry"));
    return out;
  }

  VectorXd vector(const YAML::Node& node, Index size, const std::string& what) const {
    if (node.IsScalar()) return VectorXd::Constant(size, number(node, what));
    const std::vector<double> v = numbers(node, what);
    if (static_cast<Index>(v.size()) != size) fail(node, what + " must have " + std::to_string(size) + " entries");
    return Eigen::Map<const VectorXd>(v.data(), size);
  }

  /// Nested rows, a scalar s (s I), "identity", or {diag: [...]}.
  MatrixXd matrix(const YAML::Node& node, Index rows, Index cols, const std::string& what) const {
    if (node.IsScalar()) {
      if (node.Scalar() == "identity") return MatrixXd::Identity(rows, cols);
      return number(node, what) * MatrixXd::Identity(rows, cols);
    }
    if (node.IsMap()) {
      check_keys(node, {"diag"}, what);
      if (!node["diag"]) fail(node, what + " mapping needs 'diag'");
      const VectorXd d = vector(node["diag"], std::min(rows, cols), what + ".diag");
      MatrixXd m = MatrixXd::Zero(rows, cols);
      m.diagonal() = d;
      return m;
    }
    if (!node.IsSequence() || static_cast<Index>(node.size()) != rows) {
      fail(node, what + " must have " + std::to_string(rows) + " rows");
    }
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      const YAML::Node row = node[static_cast<std::size_t>(i)];
      if (cols == 1 && row.IsScalar()) {
        m(i, 0) = number(row, what);
        continue;
      }
      m.row(i) = vector(row, cols, what + " row").transpose();
    }
    return m;
  }

  bool flag(const YAML::Node& node, const std::string& what) const { return scalar<bool>(node, what); }

 private:
  std::string origin_;
};

template <typename E>
E parse_enum(const Reader& r, const YAML::Node& node, const std::string& what,
             const std::vector<std::pair<std::string, E>>& options) {
  const auto text = r.scalar<std::string>(node, what);
  for (const auto& [name, value] : options) {
    if (name == text) return value;
  }
  std::string allowed;
  for (const auto& o : options) allowed += (allowed.empty() ? "" : ", ") + o.first;
  r.fail(node, "unknown " + what + " '" + text + "' (expected " + allowed + ")");
}

const std::vector<std::pair<std::string, PriorFamily>> kFamilies = {
    {"mixture_points", PriorFamily::mixture_points},
    {"independent_beta", PriorFamily::independent_beta},
    {"gaussian_linear", PriorFamily::gaussian_linear},
    {"dataset_backed", PriorFamily::dataset_backed}};
const std::vector<std::pair<std::string, RewardModel>> kRewards = {{"bernoulli", RewardModel::bernoulli},
                                                                   {"beta_scaled", RewardModel::beta_scaled},
                                                                   {"gaussian", RewardModel::gaussian},
                                                                   {"one_hot_label", RewardModel::one_hot_label}};
const std::vector<std::pair<std::string, ContextModel>> kContexts = {
    {"none", ContextModel::none}, {"gaussian", ContextModel::gaussian}, {"dataset_rows", ContextModel::dataset_rows}};

const std::vector<std::string> kPolicyFamilies = {"exp3", "softelim", "etc", "ucb1", "ucbv", "ts",
                                                  "uniform", "gittins", "cosoftelim", "cts", "eps_greedy",
                                                  "contextual_etc"};

void parse_prior(const Reader& r, const YAML::Node& node, ExperimentSpec& spec) {
  r.require_map(node, "prior");
  r.check_keys(node,
               {"family", "num_arms", "dim", "points", "weights", "alpha", "beta", "theta_mean", "theta_cov",
                "reward_model", "beta_v", "noise_sigma", "context_model", "context_mean", "context_cov", "dataset"},
               "prior");
  PriorSpec& p = spec.prior;
  if (!node["family"]) r.fail(node, "prior needs 'family'");
  p.family = parse_enum(r, node["family"], "prior family", kFamilies);
  if (node["num_arms"]) p.num_arms = static_cast<int>(r.count(node["num_arms"], "num_arms", 1));
  if (node["dim"]) p.dim = static_cast<int>(r.count(node["dim"], "dim", 1));

  switch (p.family) {
    case PriorFamily::mixture_points: {
      p.reward_model = RewardModel::bernoulli;
      p.context_model = ContextModel::none;
      if (!node["points"] || !node["points"].IsSequence()) r.fail(node, "mixture prior needs a 'points' list");
      p.points.clear();
      for (const auto& pt : node["points"]) p.points.push_back(r.matrix(pt, p.num_arms, p.dim, "mixture point"));
      if (node["weights"]) {
        p.weights = r.numbers(node["weights"], "weights");
      } else {
        p.weights.assign(p.points.size(), 1.0 / static_cast<double>(p.points.size()));
      }
      break;
    }
    case PriorFamily::independent_beta:
      p.reward_model = RewardModel::bernoulli;
      p.context_model = ContextModel::none;
      if (!node["alpha"] || !node["beta"]) r.fail(node, "independent_beta prior needs 'alpha' and 'beta'");
      p.beta_a = r.vector(node["alpha"], p.num_arms, "alpha");
      p.beta_b = r.vector(node["beta"], p.num_arms, "beta");
      break;
    case PriorFamily::gaussian_linear:
      p.reward_model = RewardModel::gaussian;
      p.context_model = ContextModel::gaussian;
      p.theta_mean = node["theta_mean"] ? r.vector(node["theta_mean"], p.dim, "theta_mean") : VectorXd::Zero(p.dim);
      if (!node["theta_cov"]) r.fail(node, "gaussian_linear prior needs 'theta_cov'");
      p.theta_cov = r.matrix(node["theta_cov"], p.dim, p.dim, "theta_cov");
      p.context_mean =
          node["context_mean"] ? r.vector(node["context_mean"], p.dim, "context_mean") : VectorXd::Ones(p.dim);
      p.context_cov = node["context_cov"] ? r.matrix(node["context_cov"], p.dim, p.dim, "context_cov")
                                          : MatrixXd::Identity(p.dim, p.dim);
      break;
    case PriorFamily::dataset_backed: {
      p.reward_model = RewardModel::one_hot_label;
      p.context_model = ContextModel::dataset_rows;
      const YAML::Node d = node["dataset"];
      if (!d) r.fail(node, "dataset_backed prior needs a 'dataset' section");
      r.require_map(d, "dataset");
      r.check_keys(d, {"path", "standardize", "append_bias", "classes", "dim", "rows", "spread", "seed"}, "dataset");
      DatasetSource& s = spec.dataset;
      if (d["path"]) s.path = r.scalar<std::string>(d["path"], "dataset path");
      if (d["standardize"]) s.standardize = r.flag(d["standardize"], "standardize");
      if (d["append_bias"]) s.append_bias = r.flag(d["append_bias"], "append_bias");
      if (d["classes"]) s.classes = static_cast<int>(r.count(d["classes"], "classes", 2));
      if (d["dim"]) s.dim = static_cast<int>(r.count(d["dim"], "dataset dim", 1));
      if (d["rows"]) s.rows = static_cast<int>(r.count(d["rows"], "rows", 1));
      if (d["spread"]) s.spread = r.number(d["spread"], "spread");
      if (d["seed"]) s.seed = static_cast<std::uint64_t>(r.count(d["seed"], "dataset seed", 0));
      if (!s.path.empty() && !fs::exists(fs::path(spec.base_dir) / s.path)) {
        r.fail(d["path"], "dataset file '" + s.path + "' not found");
      }
      break;
    }
  }
  if (node["reward_model"]) p.reward_model = parse_enum(r, node["reward_model"], "reward model", kRewards);
  if (node["context_model"]) p.context_model = parse_enum(r, node["context_model"], "context model", kContexts);
  if (node["beta_v"]) p.beta_v = r.number(node["beta_v"], "beta_v");
  if (node["noise_sigma"]) p.noise_sigma = r.number(node["noise_sigma"], "noise_sigma");
  if (p.family != PriorFamily::dataset_backed) {
    try {
      p.validate();
    } catch (const ConfigError& e) {
      r.fail(node, e.what());
    }
  }
}

void parse_policy(const Reader& r, const YAML::Node& node, PolicySpec& p) {
  r.require_map(node, "policy");
  r.check_keys(node, {"family", "initial", "gamma", "lambda", "sigma", "gittins_cache"}, "policy");
  if (!node["family"]) r.fail(node, "policy needs 'family'");
  p.family = r.scalar<std::string>(node["family"], "policy family");
  bool known = false;
  for (const std::string& f : kPolicyFamilies) known = known || f == p.family;
  if (!known) r.fail(node["family"], "unknown policy family '" + p.family + "'");
  if (node["gamma"]) {
    p.gamma = r.number(node["gamma"], "gamma");
    if (!(p.gamma > 0.0)) r.fail(node["gamma"], "gamma must be > 0");
  }
  if (node["lambda"]) {
    p.lambda = r.number(node["lambda"], "lambda");
    if (!(p.lambda > 0.0)) r.fail(node["lambda"], "lambda must be > 0");
  }
  if (node["sigma"]) p.sigma = r.number(node["sigma"], "sigma");
  if (node["gittins_cache"]) p.gittins_cache = r.scalar<std::string>(node["gittins_cache"], "gittins_cache");
  if (const YAML::Node init = node["initial"]) {
    if (init.IsScalar()) {
      const std::string text = init.Scalar();
      if (text == "default" || text == "identity") {
        p.initial_kind = text;
      } else {
        p.initial_kind = "values";
        p.initial_values = {r.number(init, "initial")};
      }
    } else if (init.IsSequence()) {
      p.initial_kind = "values";
      p.initial_values.clear();
      for (const auto& v : init) {
        if (v.IsSequence()) {
          r.fail(v, "matrix initial values must be given as a flat column-major list");
        }
        p.initial_values.push_back(r.number(v, "initial entry"));
      }
    } else if (init.IsMap()) {
      r.check_keys(init, {"file", "mom_rank", "mom_samples"}, "policy.initial");
      if (init["file"]) {
        p.initial_kind = "file";
        p.initial_file = r.scalar<std::string>(init["file"], "initial file");
      } else if (init["mom_rank"]) {
        p.initial_kind = "mom";
        p.mom_rank = r.count(init["mom_rank"], "mom_rank", 1);
        if (init["mom_samples"]) p.mom_samples = r.count(init["mom_samples"], "mom_samples", 1);
      } else {
        r.fail(init, "policy.initial mapping needs 'file' or 'mom_rank'");
      }
    }
  }
}

void parse_train(const Reader& r, const YAML::Node& node, TrainConfig& t) {
  r.require_map(node, "train");
  r.check_keys(node,
               {"iterations", "batch_size", "horizon", "alpha_rule", "alpha", "pilot_size", "pilot_percentile",
                "pilot_statistic", "pilot_resamples",
                "baseline", "seed", "eval_every", "eval_instances", "eval_seed"},
               "train");
  if (node["iterations"]) t.iterations = r.count(node["iterations"], "iterations", 0);
  if (node["batch_size"]) t.batch_size = r.count(node["batch_size"], "batch_size", 1);
  if (node["horizon"]) t.horizon = r.count(node["horizon"], "horizon", 1);
  if (node["alpha_rule"]) {
    t.alpha_rule = parse_enum<AlphaRule>(r, node["alpha_rule"], "alpha rule",
                                         {{"auto_c", AlphaRule::auto_c}, {"fixed", AlphaRule::fixed}});
  }
  if (node["alpha"]) t.alpha = r.number(node["alpha"], "alpha");
  if (node["pilot_size"]) t.pilot_size = r.count(node["pilot_size"], "pilot_size", 30);
  if (node["pilot_percentile"]) t.pilot_percentile = r.number(node["pilot_percentile"], "pilot_percentile");
  if (node["pilot_statistic"]) {
    t.pilot_statistic = parse_enum<PilotStatistic>(
        r, node["pilot_statistic"], "pilot statistic",
        {{"episode", PilotStatistic::episode}, {"batch_mean", PilotStatistic::batch_mean}});
  }
  if (node["pilot_resamples"]) t.pilot_resamples = r.count(node["pilot_resamples"], "pilot_resamples", 1);
  if (node["baseline"]) {
    t.baseline = parse_enum<BaselineKind>(
        r, node["baseline"], "baseline",
        {{"none", BaselineKind::none}, {"opt", BaselineKind::opt}, {"self", BaselineKind::self}});
  }
  if (node["seed"]) t.master_seed = static_cast<std::uint64_t>(r.count(node["seed"], "seed", 0));
  if (node["eval_every"]) t.eval_every = r.count(node["eval_every"], "eval_every", 0);
  if (node["eval_instances"]) t.eval_instances = r.count(node["eval_instances"], "eval_instances", 2);
  if (node["eval_seed"]) t.eval_seed = static_cast<std::uint64_t>(r.count(node["eval_seed"], "eval_seed", 0));
  try {
    t.validate();
  } catch (const ConfigError& e) {
    r.fail(node, e.what());
  }
}

void parse_eval(const Reader& r, const YAML::Node& node, EvalSpec& e) {
  r.require_map(node, "eval");
  r.check_keys(node, {"instances", "seed", "horizon", "compare"}, "eval");
  if (node["instances"]) e.instances = r.count(node["instances"], "instances", 2);
  if (node["seed"]) e.seed = static_cast<std::uint64_t>(r.count(node["seed"], "eval seed", 0));
  if (node["horizon"]) e.horizon = r.count(node["horizon"], "eval horizon", 1);
  if (const YAML::Node c = node["compare"]) {
    if (!c.IsSequence()) r.fail(c, "compare must be a list of policy families");
    e.compare.clear();
    for (const auto& v : c) {
      const auto name = r.scalar<std::string>(v, "compare entry");
      bool known = false;
      for (const std::string& f : kPolicyFamilies) known = known || f == name;
      if (!known) r.fail(v, "unknown policy family '" + name + "'");
      e.compare.push_back(name);
    }
  }
}

void parse_sweep(const Reader& r, const YAML::Node& node, SweepSpec& s) {
  r.require_map(node, "sweep");
  r.check_keys(node, {"axis", "grid"}, "sweep");
  if (!node["axis"] || !node["grid"]) r.fail(node, "sweep needs 'axis' and 'grid'");
  s.axis = r.scalar<std::string>(node["axis"], "sweep axis");
  if (s.axis != "batch_size" && s.axis != "horizon" && s.axis != "prior_param") {
    r.fail(node["axis"], "sweep axis must be batch_size, horizon or prior_param");
  }
  s.grid = r.numbers(node["grid"], "sweep grid");
  if (s.grid.empty()) r.fail(node["grid"], "sweep grid must be nonempty");
  if (s.axis == "prior_param") {
    for (double a : s.grid) {
      if (!(a > 0.0 && a < 10.0)) r.fail(node["grid"], "prior_param grid values must lie in (0, 10)");
    }
  }
}

std::string parent_dir(const std::string& path) {
  const fs::path p = fs::path(path).parent_path();
  return p.empty() ? std::string(".") : p.string();
}

// ---------------------------------------------------------------------------
// Serialization

void emit_number(YAML::Emitter& out, double v) { out << format_number(v); }

void emit_vector(YAML::Emitter& out, const VectorXd& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Index i = 0; i < v.size(); ++i) emit_number(out, v(i));
  out << YAML::EndSeq;
}

void emit_matrix(YAML::Emitter& out, const MatrixXd& m) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Index i = 0; i < m.rows(); ++i) emit_vector(out, m.row(i).transpose());
  out << YAML::EndSeq;
}

}  // namespace

ExperimentSpec parse_experiment(const std::string& text, const std::string& origin, const std::string& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(origin + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": " + e.msg);
  }
  const Reader r(origin);
  ExperimentSpec spec;
  spec.base_dir = base_dir;
  if (!root.IsMap()) r.fail(root, "experiment file must be a mapping");
  r.check_keys(root, {"name", "prior", "policy", "train", "eval", "sweep", "output"}, "experiment");
  if (!root["name"]) r.fail(root, "experiment needs a 'name'");
  spec.name = r.scalar<std::string>(root["name"], "name");
  if (!root["prior"]) r.fail(root, "experiment needs a 'prior' section");
  parse_prior(r, root["prior"], spec);
  if (!root["policy"]) r.fail(root, "experiment needs a 'policy' section");
  parse_policy(r, root["policy"], spec.policy);
  if (root["train"]) parse_train(r, root["train"], spec.train);
  if (root["eval"]) parse_eval(r, root["eval"], spec.eval);
  if (root["sweep"]) parse_sweep(r, root["sweep"], spec.sweep);
  if (root["output"]) spec.output_dir = r.scalar<std::string>(root["output"], "output");
  return spec;
}

ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_experiment(ss.str(), path, parent_dir(path));
}

std::string serialize_experiment(const ExperimentSpec& spec) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << spec.name;

  const PriorSpec& p = spec.prior;
  out << YAML::Key << "prior" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "family" << YAML::Value << to_string(p.family);
  out << YAML::Key << "num_arms" << YAML::Value << p.num_arms;
  out << YAML::Key << "dim" << YAML::Value << p.dim;
  switch (p.family) {
    case PriorFamily::mixture_points:
      out << YAML::Key << "points" << YAML::Value << YAML::BeginSeq;
      for (const MatrixXd& pt : p.points) emit_matrix(out, pt);
      out << YAML::EndSeq;
      out << YAML::Key << "weights" << YAML::Value;
      emit_vector(out, Eigen::Map<const VectorXd>(p.weights.data(), static_cast<Index>(p.weights.size())));
      break;
    case PriorFamily::independent_beta:
      out << YAML::Key << "alpha" << YAML::Value;
      emit_vector(out, p.beta_a);
      out << YAML::Key << "beta" << YAML::Value;
      emit_vector(out, p.beta_b);
      break;
    case PriorFamily::gaussian_linear:
      out << YAML::Key << "theta_mean" << YAML::Value;
      emit_vector(out, p.theta_mean);
      out << YAML::Key << "theta_cov" << YAML::Value;
      emit_matrix(out, p.theta_cov);
      out << YAML::Key << "context_mean" << YAML::Value;
      emit_vector(out, p.context_mean);
      out << YAML::Key << "context_cov" << YAML::Value;
      emit_matrix(out, p.context_cov);
      break;
    case PriorFamily::dataset_backed: {
      const DatasetSource& s = spec.dataset;
      out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
      if (!s.path.empty()) out << YAML::Key << "path" << YAML::Value << s.path;
      out << YAML::Key << "standardize" << YAML::Value << s.standardize;
      out << YAML::Key << "append_bias" << YAML::Value << s.append_bias;
      out << YAML::Key << "classes" << YAML::Value << s.classes;
      out << YAML::Key << "dim" << YAML::Value << s.dim;
      out << YAML::Key << "rows" << YAML::Value << s.rows;
      out << YAML::Key << "spread" << YAML::Value << format_number(s.spread);
      out << YAML::Key << "seed" << YAML::Value << s.seed;
      out << YAML::EndMap;
      break;
    }
  }
  out << YAML::Key << "reward_model" << YAML::Value << to_string(p.reward_model);
  out << YAML::Key << "context_model" << YAML::Value << to_string(p.context_model);
  out << YAML::Key << "beta_v" << YAML::Value << format_number(p.beta_v);
  out << YAML::Key << "noise_sigma" << YAML::Value << format_number(p.noise_sigma);
  out << YAML::EndMap;

  const PolicySpec& q = spec.policy;
  out << YAML::Key << "policy" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "family" << YAML::Value << q.family;
  out << YAML::Key << "initial" << YAML::Value;
  if (q.initial_kind == "values") {
    emit_vector(out, Eigen::Map<const VectorXd>(q.initial_values.data(), static_cast<Index>(q.initial_values.size())));
  } else if (q.initial_kind == "file") {
    out << YAML::BeginMap << YAML::Key << "file" << YAML::Value << q.initial_file << YAML::EndMap;
  } else if (q.initial_kind == "mom") {
    out << YAML::BeginMap << YAML::Key << "mom_rank" << YAML::Value << q.mom_rank << YAML::Key << "mom_samples"
        << YAML::Value << q.mom_samples << YAML::EndMap;
  } else {
    out << q.initial_kind;
  }
  if (!std::isnan(q.gamma)) out << YAML::Key << "gamma" << YAML::Value << format_number(q.gamma);
  out << YAML::Key << "lambda" << YAML::Value << format_number(q.lambda);
  if (!std::isnan(q.sigma)) out << YAML::Key << "sigma" << YAML::Value << format_number(q.sigma);
  if (!q.gittins_cache.empty()) out << YAML::Key << "gittins_cache" << YAML::Value << q.gittins_cache;
  out << YAML::EndMap;

  const TrainConfig& t = spec.train;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "iterations" << YAML::Value << t.iterations;
  out << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  out << YAML::Key << "horizon" << YAML::Value << t.horizon;
  out << YAML::Key << "alpha_rule" << YAML::Value << to_string(t.alpha_rule);
  if (t.alpha_rule == AlphaRule::fixed) out << YAML::Key << "alpha" << YAML::Value << format_number(t.alpha);
  out << YAML::Key << "pilot_size" << YAML::Value << t.pilot_size;
  out << YAML::Key << "pilot_percentile" << YAML::Value << format_number(t.pilot_percentile);
  out << YAML::Key << "pilot_statistic" << YAML::Value << to_string(t.pilot_statistic);
  out << YAML::Key << "pilot_resamples" << YAML::Value << t.pilot_resamples;
  out << YAML::Key << "baseline" << YAML::Value << to_string(t.baseline);
  out << YAML::Key << "seed" << YAML::Value << t.master_seed;
  out << YAML::Key << "eval_every" << YAML::Value << t.eval_every;
  out << YAML::Key << "eval_instances" << YAML::Value << t.eval_instances;
  out << YAML::Key << "eval_seed" << YAML::Value << t.eval_seed;
  out << YAML::EndMap;

  const EvalSpec& e = spec.eval;
  out << YAML::Key << "eval" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "instances" << YAML::Value << e.instances;
  out << YAML::Key << "seed" << YAML::Value << e.seed;
  if (e.horizon > 0) out << YAML::Key << "horizon" << YAML::Value << e.horizon;
  if (!e.compare.empty()) out << YAML::Key << "compare" << YAML::Value << YAML::Flow << e.compare;
  out << YAML::EndMap;

  if (!spec.sweep.axis.empty()) {
    out << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "axis" << YAML::Value << spec.sweep.axis;
    out << YAML::Key << "grid" << YAML::Value;
    emit_vector(out,
                Eigen::Map<const VectorXd>(spec.sweep.grid.data(), static_cast<Index>(spec.sweep.grid.size())));
    out << YAML::EndMap;
  }
  out << YAML::Key << "output" << YAML::Value << spec.output_dir;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string registry_path(const std::string& name) {
  const char* override_dir = std::getenv("GRADBAND_EXPERIMENTS");
  const fs::path dir = override_dir ? fs::path(override_dir) : fs::path(GRADBAND_EXPERIMENTS_DIR);
  const fs::path path = dir / (name + ".yaml");
  if (!fs::exists(path)) throw ConfigError("unknown experiment '" + name + "' (no " + path.string() + ")");
  return path.string();
}

std::vector<std::string> registry_names() {
  const char* override_dir = std::getenv("GRADBAND_EXPERIMENTS");
  const fs::path dir = override_dir ? fs::path(override_dir) : fs::path(GRADBAND_EXPERIMENTS_DIR);
  std::vector<std::string> names;
  if (!fs::exists(dir)) return names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".yaml") names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

void attach_dataset(ExperimentSpec& spec) {
  if (spec.prior.family != PriorFamily::dataset_backed) return;
  const DatasetSource& s = spec.dataset;
  Dataset data;
  if (!s.path.empty()) {
    data = load_dataset_csv((fs::path(spec.base_dir) / s.path).string(), DatasetOptions{s.standardize, s.append_bias});
  } else {
    data = synthetic_multiclass(s.classes, s.dim, s.rows, s.spread, s.seed);
    if (s.append_bias) {
      MatrixXd f(data.rows(), data.dim() + 1);
      f << data.features, VectorXd::Ones(data.rows());
      data.features = f;
    }
  }
  const auto shared = std::make_shared<const Dataset>(std::move(data));
  PriorSpec prior = PriorSpec::dataset_backed(shared);
  spec.prior = prior;
  spec.prior.validate();
}

PolicyPtr make_policy(const PolicySpec& spec, const PriorSpec& prior, Index horizon, int threads) {
  const std::string& f = spec.family;
  const double sigma = std::isnan(spec.sigma) ? prior.noise_sigma : spec.sigma;
  if (f == "exp3") return std::make_shared<Exp3Policy>();
  if (f == "softelim") return std::make_shared<SoftElimPolicy>();
  if (f == "etc") return std::make_shared<EtcPolicy>();
  if (f == "ucb1") return std::make_shared<Ucb1Policy>();
  if (f == "ucbv") return std::make_shared<UcbVPolicy>();
  if (f == "ts") return std::make_shared<BernoulliTsPolicy>();
  if (f == "uniform") return std::make_shared<UniformPolicy>();
  if (f == "eps_greedy") return std::make_shared<EpsGreedyPolicy>(0.2, spec.lambda);
  if (f == "contextual_etc") return std::make_shared<ContextualEtcPolicy>();
  if (f == "cosoftelim") {
    double gamma = spec.gamma;
    if (std::isnan(gamma)) {
      if (!(sigma > 0.0)) throw ConfigError("cosoftelim: set policy.gamma or a positive noise sigma");
      gamma = 1.0 / (sigma * sigma);
    }
    return std::make_shared<CoSoftElimPolicy>(prior.dim, gamma, spec.lambda);
  }
  if (f == "cts") {
    if (!(sigma > 0.0)) throw ConfigError("cts: set policy.sigma or a positive noise sigma");
    return std::make_shared<ContextualTsPolicy>(prior.dim, sigma, spec.lambda);
  }
  if (f == "gittins") {
    const int n = static_cast<int>(horizon);
    if (!spec.gittins_cache.empty() && fs::exists(spec.gittins_cache)) {
      auto cached = std::make_shared<GittinsTable>(GittinsTable::load(spec.gittins_cache));
      if (cached->horizon() >= n) return std::make_shared<GittinsPolicy>(cached);
    }
    auto table = std::make_shared<GittinsTable>(GittinsTable::build(n, kGittinsTolerance, threads));
    if (!spec.gittins_cache.empty()) table->save(spec.gittins_cache);
    return std::make_shared<GittinsPolicy>(table);
  }
  throw ConfigError("unknown policy family '" + f + "'");
}

VectorXd resolve_initial_params(const PolicySpec& spec, const PriorSpec& prior, const Policy& policy,
                                const std::string& base_dir, std::uint64_t seed) {
  VectorXd w;
  if (spec.initial_kind == "default") return w;
  if (spec.initial_kind == "identity") {
    const Index d = prior.dim;
    w = flatten(MatrixXd::Identity(d, d));
  } else if (spec.initial_kind == "values") {
    w = Eigen::Map<const VectorXd>(spec.initial_values.data(), static_cast<Index>(spec.initial_values.size()));
  } else if (spec.initial_kind == "file") {
    const fs::path path = fs::path(base_dir) / spec.initial_file;
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open initial params file '" + path.string() + "'");
    try {
      w = params_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad params file '" + path.string() + "': " + e.what());
    }
  } else if (spec.initial_kind == "mom") {
    const double sigma = std::isnan(spec.sigma) ? prior.noise_sigma : spec.sigma;
    Engine rng = make_stream(seed, Lane::mom, 0, 0);
    w = flatten(mom_subspace(spec.mom_samples, prior, sigma, spec.mom_rank, rng).projector);
  } else {
    throw ConfigError("unknown initial parameter kind '" + spec.initial_kind + "'");
  }
  if (w.size() != policy.num_params()) {
    throw ConfigError("policy " + policy.name() + " expects " + std::to_string(policy.num_params()) +
                      " initial values, got " + std::to_string(w.size()));
  }
  return w;
}

std::string config_hash(const ExperimentSpec& spec) {
  const std::string text = serialize_experiment(spec);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gradband
