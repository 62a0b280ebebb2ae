#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gradband/diagnostics.hpp"
#include "gradband/gradband.hpp"
#include "gradband/policy_ctx.hpp"
#include "gradband/policy_mab.hpp"
#include "gradband/report.hpp"
#include "problems.hpp"

using namespace gradband;

namespace {

/// Always pulls arm 0; the only nonzero score is `score` at round 1.
class FixedScorePolicy final : public Policy {
 public:
  explicit FixedScorePolicy(double score) : score_(score) {}
  std::string name() const override { return "fixed_score"; }
  Index num_params() const override { return 1; }
  VectorXd default_params() const override { return VectorXd::Zero(1); }
  Trajectory rollout(const VectorXd&, const ProblemInstance&, const RewardTable& table, Engine&,
                     bool record_scores) const override {
    const Index n = table.horizon();
    Trajectory tr;
    tr.arms.assign(static_cast<std::size_t>(n), 0);
    tr.rewards = table.rewards.row(0).transpose();
    if (record_scores) {
      tr.scores = MatrixXd::Zero(1, n);
      tr.scores(0, 0) = score_;
    }
    return tr;
  }

 private:
  double score_;
};

}  // namespace

TEST_CASE("percentile") {
  CHECK(percentile({2.5, 2.5, 2.5}, 0.95) == 2.5);
  CHECK(percentile({4, 1, 3, 2}, 0.5) == 2.5);
  CHECK(percentile({1, 2, 3, 4, 5}, 1.0) == 5.0);
  CHECK(percentile({0, 10}, 0.95) == doctest::Approx(9.5));
  CHECK_THROWS_AS(percentile({}, 0.5), DomainError);
}

TEST_CASE("automatic learning rate") {
  TrainConfig cfg;
  cfg.horizon = 20;
  cfg.iterations = 25;
  cfg.baseline = BaselineKind::none;

  // every pilot contribution is 1 * (reward-to-go = 20)
  const InstanceSampler ones(testing::point_mass2(1.0, 0.0));
  const LearningRate equal = auto_learning_rate(FixedScorePolicy(1.0), ones, cfg);
  CHECK(equal.c == doctest::Approx(20.0));
  CHECK(equal.alpha == doctest::Approx(1.0 / (20.0 * 5.0)));

  const long before = warning_count();
  const LearningRate zero = auto_learning_rate(FixedScorePolicy(0.0), ones, cfg);
  CHECK(zero.c == 1.0);
  CHECK(zero.alpha == doctest::Approx(0.2));
  CHECK(warning_count() == before + 1);

  cfg.pilot_size = 10;
  CHECK_THROWS_AS(auto_learning_rate(FixedScorePolicy(1.0), ones, cfg), ConfigError);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.iterations = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.alpha_rule = AlphaRule::fixed;
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(parse_alpha_rule(to_string(AlphaRule::fixed)) == AlphaRule::fixed);
  CHECK_THROWS_AS(parse_alpha_rule("adam"), ConfigError);
}

TEST_CASE("zero iterations return the initial point") {
  const InstanceSampler sampler(testing::mixture2());
  TrainConfig cfg;
  cfg.iterations = 0;
  cfg.initial_params = VectorXd::Constant(1, 0.37);
  const TrainResult r = run_gradband(SoftElimPolicy(), sampler, cfg);
  CHECK(r.params(0) == 0.37);
  REQUIRE(r.trace.rows.size() == 1);
  CHECK(std::isnan(r.trace.rows[0].grad_norm));
  CHECK_THROWS_AS(run_gradband(SoftElimPolicy(), sampler,
                               [] {
                                 TrainConfig c;
                                 c.iterations = 0;
                                 c.initial_params = VectorXd::Zero(2);
                                 return c;
                               }()),
                  ConfigError);
}

TEST_CASE("training is reproducible and thread-count independent") {
  const InstanceSampler sampler(testing::mixture2());
  TrainConfig cfg;
  cfg.iterations = 5;
  cfg.batch_size = 100;
  cfg.horizon = 100;
  cfg.eval_every = 2;
  cfg.eval_instances = 100;
  cfg.threads = 1;
  const TrainResult a = run_gradband(SoftElimPolicy(), sampler, cfg);
  cfg.threads = 4;
  const TrainResult b = run_gradband(SoftElimPolicy(), sampler, cfg);
  std::ostringstream ca, cb;
  write_trace_csv(ca, a.trace);
  write_trace_csv(cb, b.trace);
  CHECK(ca.str() == cb.str());
  CHECK(a.trace.rows.size() == 6);
  // evaluated at 0, 2, 4 and the final row
  for (const TraceRow& row : a.trace.rows) {
    CHECK(std::isnan(row.eval_regret_mean) == !(row.iteration % 2 == 0 || row.iteration == 5));
  }
  CHECK(std::isnan(a.trace.rows.back().grad_norm));

  const std::string csv = ca.str();
  CHECK(csv.rfind("iteration,param_0,grad_norm,spread,eval_regret_mean,eval_regret_stderr\n", 0) == 0);
  CHECK(csv.find("\n1,") != std::string::npos);
  CHECK(csv.find(",,\n") != std::string::npos);  // missing evaluations are empty cells
}

TEST_CASE("parameters stay feasible") {
  set_warnings_silenced(true);
  const InstanceSampler sampler(testing::mixture2());
  TrainConfig cfg;
  cfg.iterations = 10;
  cfg.batch_size = 50;
  cfg.horizon = 50;
  cfg.alpha_rule = AlphaRule::fixed;
  cfg.alpha = 1e3;
  const TrainResult soft = run_gradband(SoftElimPolicy(), sampler, cfg);
  for (const TraceRow& row : soft.trace.rows) CHECK(row.params(0) >= SoftElimPolicy::kMinW);

  const TrainResult etc = run_gradband(EtcPolicy(), sampler, cfg);
  for (const TraceRow& row : etc.trace.rows) {
    CHECK(row.params(0) >= 1.0);
    CHECK(row.params(0) <= 25.0);
  }

  const PriorSpec ctx = PriorSpec::gaussian_linear(3, VectorXd::Zero(2), MatrixXd::Identity(2, 2), VectorXd::Ones(2),
                                                   MatrixXd::Identity(2, 2), 0.5);
  const TrainResult eps = run_gradband(EpsGreedyPolicy(), InstanceSampler(ctx), cfg);
  for (const TraceRow& row : eps.trace.rows) {
    CHECK(row.params(0) >= 0.0);
    CHECK(row.params(0) <= 1.0);
  }
  set_warnings_silenced(false);
}

TEST_CASE("non-finite gradients abort with a snapshot") {
  const InstanceSampler sampler(testing::point_mass2(1.0, 0.0));
  TrainConfig cfg;
  cfg.iterations = 3;
  cfg.batch_size = 10;
  cfg.horizon = 10;
  cfg.alpha_rule = AlphaRule::fixed;
  cfg.alpha = 0.1;
  cfg.initial_params = VectorXd::Constant(1, 0.25);
  try {
    run_gradband(FixedScorePolicy(std::nan("")), sampler, cfg);
    FAIL("expected TrainingAborted");
  } catch (const TrainingAborted& e) {
    CHECK(e.iteration == 0);
    CHECK(e.params(0) == 0.25);
    CHECK(std::string(e.what()).find("iteration 0") != std::string::npos);
  }
}

TEST_CASE("ETC training improves held-out regret without regressions") {
  const InstanceSampler sampler(testing::mixture2());
  TrainConfig cfg;
  cfg.iterations = 40;
  cfg.batch_size = 2000;
  cfg.horizon = 200;
  cfg.alpha_rule = AlphaRule::fixed;
  cfg.alpha = 1.5;
  cfg.initial_params = VectorXd::Constant(1, 5.5);
  cfg.eval_every = 10;
  cfg.eval_instances = 2000;
  const TrainResult r = run_gradband(EtcPolicy(), sampler, cfg);
  std::vector<const TraceRow*> evals;
  for (const TraceRow& row : r.trace.rows) {
    if (!std::isnan(row.eval_regret_mean)) evals.push_back(&row);
  }
  REQUIRE(evals.size() == 5);
  for (std::size_t k = 1; k < evals.size(); ++k) {
    const TraceRow& prev = *evals[k - 1];
    const TraceRow& cur = *evals[k];
    MESSAGE("iteration " << cur.iteration << " h " << cur.params(0) << " regret " << cur.eval_regret_mean);
    CHECK(cur.eval_regret_mean <= prev.eval_regret_mean + 3 * std::hypot(prev.eval_regret_stderr, cur.eval_regret_stderr));
  }
  CHECK(evals.back()->eval_regret_mean < evals.front()->eval_regret_mean);
}
