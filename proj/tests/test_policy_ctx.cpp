#include <doctest.h>

#include <cmath>
#include <random>

#include "gradband/policy_ctx.hpp"
#include "episode_fd.hpp"
#include "gradband/policy_mab.hpp"

using namespace gradband;
using namespace gradband::testing;

TEST_CASE("linear arm state: empty and single observation") {
  LinArmState<double> st(2, 1.0);
  CHECK(st.G.isApprox(MatrixXd::Identity(2, 2)));
  CHECK(st.theta_hat.norm() == 0.0);
  VectorXd x(2);
  x << 1.0, 0.0;
  linstate_update(st, MatrixXd::Identity(2, 2), x, 1.0);
  MatrixXd G(2, 2);
  G << 2.0, 0.0, 0.0, 1.0;
  CHECK((st.G - G).norm() < 1e-15);
  CHECK(st.theta_hat(0) == doctest::Approx(0.5));
  CHECK(st.theta_hat(1) == doctest::Approx(0.0));
  CHECK_THROWS_AS(linstate_update(st, MatrixXd::Identity(2, 2), VectorXd::Constant(2, NAN), 1.0), InputError);
  CHECK_THROWS_AS(LinArmState<double>(2, 0.0), ConfigError);
}

TEST_CASE("incremental inverse tracks a dense solve; G stays SPD and grows") {
  std::mt19937_64 rng(11);
  const Index d = 4;
  const double lambda = 0.5;
  const MatrixXd W = random_matrix(d, d, rng);
  LinArmState<double> st(d, lambda);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const MatrixXd before = st.G;
    linstate_update(st, W, random_matrix(d, 1, rng).col(0), n(rng));
    const Eigen::SelfAdjointEigenSolver<MatrixXd> diff(st.G - before);
    REQUIRE(diff.eigenvalues().minCoeff() >= -1e-9 * st.G.norm());
  }
  const MatrixXd direct = st.G.inverse();
  CHECK((st.G_inv - direct).norm() / direct.norm() < 1e-8);
  CHECK((st.theta_hat - direct * st.b).norm() / std::max(1.0, st.theta_hat.norm()) < 1e-8);
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(st.G);
  CHECK(eig.eigenvalues().minCoeff() >= lambda * (1 - 1e-8));
}

TEST_CASE("cosoftelim scores") {
  std::vector<LinArmState<double>> st(2, LinArmState<double>(1, 1.0));
  const MatrixXd W = MatrixXd::Identity(1, 1);
  const VectorXd x = VectorXd::Ones(1);
  for (int k = 0; k < 5; ++k) linstate_update(st[0], W, x, 0.96);
  for (int k = 0; k < 10; ++k) linstate_update(st[1], W, x, 0.66);
  std::vector<ArmEstimate<double>> est = {arm_estimate(st[0], VectorXd(W * x)), arm_estimate(st[1], VectorXd(W * x))};
  CHECK(est[0].mean == doctest::Approx(0.8));
  CHECK(est[1].mean == doctest::Approx(0.6));
  CHECK(est[1].width_sq == doctest::Approx(1.0 / 11));
  const VectorXd S = cosoftelim_scores(est, 1.0, false);
  CHECK(S(0) == 0.0);
  CHECK(S(1) == doctest::Approx(0.44));

  // scaling gaps by c and squared widths by c^2 leaves S unchanged
  std::vector<ArmEstimate<double>> scaled = est;
  for (auto& e : scaled) {
    e.mean *= 3.0;
    e.width_sq *= 9.0;
  }
  CHECK((cosoftelim_scores(scaled, 1.0, false) - S).norm() < 1e-12);

  // equal means: uniform
  std::vector<ArmEstimate<double>> equal = est;
  equal[1].mean = equal[0].mean;
  CHECK(cosoftelim_scores(equal, 1.0, false).norm() == 0.0);

  // null direction: uniform, zero gradient
  const VectorXd p0 = cosoftelim_probs(st, MatrixXd::Zero(1, 1), x, 1.0);
  CHECK(p0(0) == doctest::Approx(0.5));
  CHECK(cosoftelim_grad_log_prob(st, MatrixXd::Zero(1, 1), x, 1.0, 1).norm() == 0.0);
}

TEST_CASE("cosoftelim gradient is zero before observations") {
  std::mt19937_64 rng(3);
  std::vector<LinArmState<double>> st(3, LinArmState<double>(3, 1.0));
  const MatrixXd W = random_matrix(3, 3, rng);
  const VectorXd x = random_matrix(3, 1, rng).col(0);
  for (Index a = 0; a < 3; ++a) CHECK(cosoftelim_grad_log_prob(st, W, x, 2.0, a).norm() == 0.0);
}

TEST_CASE("cosoftelim gradient matches a hand derivation for d = 1") {
  const double w = 0.7, lambda = 1.0, gamma = 2.0, xa = 1.5, ya = 0.9, x = 1.2;
  std::vector<LinArmState<double>> st(2, LinArmState<double>(1, lambda));
  const MatrixXd W = MatrixXd::Constant(1, 1, w);
  linstate_update(st[0], W, VectorXd::Constant(1, xa), ya);

  const double den = w * w * xa * xa + lambda;
  const double mu = w * w * x * xa * ya / den;
  const double dmu = x * xa * ya * 2 * w * lambda / (den * den);
  const double S = gamma * lambda * mu * mu / (w * w * x * x);
  const double dS = gamma * lambda / (x * x) * (2 * mu * dmu * w * w - mu * mu * 2 * w) / std::pow(w, 4);
  const double pi_a = 1.0 / (1.0 + std::exp(-S));
  const MatrixXd g = cosoftelim_grad_log_prob(st, W, VectorXd::Constant(1, x), gamma, 1);
  CHECK(g(0, 0) == doctest::Approx(-pi_a * dS).epsilon(1e-12));
}

TEST_CASE("cosoftelim score identity at random states") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Index d = 1 + static_cast<Index>(rng() % 3);
    const Index K = 2 + static_cast<Index>(rng() % 3);
    const MatrixXd W = random_matrix(d, d, rng);
    std::vector<LinArmState<double>> st(static_cast<std::size_t>(K), LinArmState<double>(d, 1.0));
    for (int k = 0; k < 15; ++k) {
      linstate_update(st[rng() % static_cast<std::size_t>(K)], W, random_matrix(d, 1, rng).col(0),
                      random_matrix(1, 1, rng)(0, 0));
    }
    const VectorXd x = random_matrix(d, 1, rng).col(0);
    const VectorXd pi = cosoftelim_probs(st, W, x, 1.5);
    REQUIRE(std::abs(pi.sum() - 1.0) < 1e-12);
    MatrixXd acc = MatrixXd::Zero(d, d);
    for (Index a = 0; a < K; ++a) acc += pi(a) * cosoftelim_grad_log_prob(st, W, x, 1.5, a);
    CHECK(acc.norm() < 1e-8);
  }
}

TEST_CASE("cosoftelim episode gradient matches full-episode finite differences") {
  std::mt19937_64 rng(17);
  double worst = 0.0;
  int nonzero = 0;
  for (int trial = 0; trial < 24; ++trial) {
    const Index d = 1 + trial % 3;
    const Index K = 2 + trial % 2;
    const Index n = 10;
    const Episode ep = random_episode(K, d, n, 100 + static_cast<std::uint64_t>(trial));
    const MatrixXd W = MatrixXd::Identity(d, d) + random_matrix(d, d, rng, 0.3);
    const double gamma = 4.0;
    const CoSoftElimPolicy policy(d, gamma, 1.0);
    Engine prng = make_stream(7, Lane::test, static_cast<std::uint64_t>(trial), 0);
    const Trajectory tr = policy.rollout(flatten(W), ep.inst, ep.table, prng, true);
    const MatrixXd analytic = unflatten(tr.scores.rowwise().sum(), d);
    const MatrixXd fd = matrix_fd(
        [&](const Mat<Long>& P) { return cosoftelim_episode_log_prob<Long>(ep.inst, tr, K, P, Long(gamma)); }, W);
    worst = std::max(worst, rel_frobenius(analytic, fd));
    nonzero += analytic.norm() > 0;
  }
  CHECK(nonzero > 20);
  CHECK(worst < 1e-4);
}

TEST_CASE("contextual TS episode gradient matches full-episode finite differences") {
  std::mt19937_64 rng(19);
  double worst = 0.0;
  for (int trial = 0; trial < 24; ++trial) {
    const Index d = 1 + trial % 3;
    const Index K = 1 + trial % 3;
    const Index n = 10;
    const Episode ep = random_episode(K, d, n, 200 + static_cast<std::uint64_t>(trial));
    const MatrixXd W = MatrixXd::Identity(d, d) + random_matrix(d, d, rng, 0.3);
    const double sigma = 0.5;
    const ContextualTsPolicy policy(d, sigma, 1.0);
    Engine prng = make_stream(9, Lane::test, static_cast<std::uint64_t>(trial), 0);
    const Trajectory tr = policy.rollout(flatten(W), ep.inst, ep.table, prng, true);
    REQUIRE(tr.sampled_means.cols() == n);
    const MatrixXd analytic = unflatten(tr.scores.rowwise().sum(), d);
    const MatrixXd fd = matrix_fd(
        [&](const Mat<Long>& P) { return cts_episode_log_density<Long>(ep.inst, tr, K, P, Long(sigma)); }, W);
    worst = std::max(worst, rel_frobenius(analytic, fd));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("contextual TS: symbolic single-arm gradient and mean-score term") {
  const double w = 0.8, lambda = 1.0, sigma = 0.5, xa = 1.1, ya = 0.4, x = 0.9, sample = 0.7;
  std::vector<LinArmState<double>> st(1, LinArmState<double>(1, lambda));
  const MatrixXd W = MatrixXd::Constant(1, 1, w);
  linstate_update(st[0], W, VectorXd::Constant(1, xa), ya);
  const double den = w * w * xa * xa + lambda;
  const double m = w * w * x * xa * ya / den;
  const double dm = x * xa * ya * 2 * w * lambda / (den * den);
  const double v = w * w * x * x / den;
  const double dv = 2 * w * lambda * x * x / (den * den);
  const double s2 = sigma * sigma;
  const double r = sample - m;
  const double expected = -dv / (2 * v) + r * dm / (s2 * v) + r * r * dv / (2 * s2 * v * v);
  const MatrixXd g = cts_grad_log_density(st, W, VectorXd::Constant(1, x), sigma, VectorXd::Constant(1, sample));
  CHECK(g(0, 0) == doctest::Approx(expected).epsilon(1e-12));

  // samples at the means: only the variance score remains
  std::vector<LinArmState<double>> fresh(2, LinArmState<double>(2, 1.0));
  const MatrixXd W2 = MatrixXd::Identity(2, 2);
  const VectorXd x2 = VectorXd::Ones(2);
  const MatrixXd at_mean = cts_grad_log_density(fresh, W2, x2, sigma, VectorXd::Zero(2));
  MatrixXd variance_only = MatrixXd::Zero(2, 2);
  for (const auto& s : fresh) {
    const ArmEstimate<double> e = arm_estimate(s, VectorXd(W2 * x2));
    const double var = s2 * e.width_sq;
    variance_only += -1.0 / (2 * var) * s2 * arm_gradients(s, e, W2, x2).width_sq;
  }
  CHECK((at_mean - variance_only).norm() < 1e-12);
}

TEST_CASE("contextual TS sampling") {
  Engine rng = make_stream(21, Lane::test, 0, 0);
  std::vector<LinArmState<double>> fresh(3, LinArmState<double>(2, 1.0));
  const MatrixXd W = MatrixXd::Identity(2, 2);
  VectorXd counts = VectorXd::Zero(3);
  for (int k = 0; k < 10000; ++k) counts(cts_sample(fresh, W, VectorXd::Ones(2), 0.5, rng).arm) += 1;
  for (Index i = 0; i < 3; ++i) CHECK(std::abs(counts(i) / 10000 - 1.0 / 3) < 0.015);

  // zero width in every arm: deterministic argmax of the means (all zero -> arm 0)
  CHECK(cts_sample(fresh, MatrixXd::Zero(2, 2), VectorXd::Ones(2), 0.5, rng).arm == 0);
  long floored = 0;
  (void)cts_grad_log_density(fresh, MatrixXd::Zero(2, 2), VectorXd::Ones(2), 0.5, VectorXd::Zero(3), &floored);
  CHECK(floored == 3);

  // selection frequencies agree with a direct simulation of the same normals
  std::vector<LinArmState<double>> st(2, LinArmState<double>(1, 1.0));
  const MatrixXd W1 = MatrixXd::Identity(1, 1);
  const VectorXd one = VectorXd::Ones(1);
  for (int k = 0; k < 3; ++k) linstate_update(st[0], W1, one, 0.5);
  linstate_update(st[1], W1, one, 0.2);
  const double m0 = arm_estimate(st[0], one).mean, v0 = 0.25 * arm_estimate(st[0], one).width_sq;
  const double m1 = arm_estimate(st[1], one).mean, v1 = 0.25 * arm_estimate(st[1], one).width_sq;
  const int draws = 100000;
  int picked0 = 0;
  for (int k = 0; k < draws; ++k) picked0 += cts_sample(st, W1, one, 0.5, rng).arm == 0;
  std::mt19937_64 oracle(99);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int oracle_draws = 1000000;
  int oracle0 = 0;
  for (int k = 0; k < oracle_draws; ++k) {
    oracle0 += (m0 + std::sqrt(v0) * nd(oracle)) >= (m1 + std::sqrt(v1) * nd(oracle));
  }
  const double p = oracle0 / double(oracle_draws);
  const double se = std::sqrt(p * (1 - p) / draws + p * (1 - p) / oracle_draws);
  CHECK(std::abs(picked0 / double(draws) - p) < 3 * se);
}

TEST_CASE("epsilon-greedy probabilities and gradient") {
  std::vector<LinArmState<double>> st(2, LinArmState<double>(1, 1.0));
  linstate_update(st[0], MatrixXd::Identity(1, 1), VectorXd::Ones(1), 1.0);
  const VectorXd x = VectorXd::Ones(1);
  const EpsGreedyStep<double> step = eps_greedy_probs_and_grad(st, x, 0.2);
  CHECK(step.greedy_arm == 0);
  CHECK(step.probs(0) == doctest::Approx(0.9));
  CHECK(step.grad_log_prob(0) == doctest::Approx(-0.5 / 0.9));
  CHECK(step.grad_log_prob(0) == doctest::Approx(-0.5556).epsilon(1e-4));
  CHECK(std::abs(step.probs.dot(step.grad_log_prob)) < 1e-12);

  std::vector<LinArmState<double>> four(4, LinArmState<double>(1, 1.0));
  linstate_update(four[2], MatrixXd::Identity(1, 1), x, 1.0);
  const EpsGreedyStep<double> uni = eps_greedy_probs_and_grad(four, x, 1.0);
  for (Index i = 0; i < 4; ++i) CHECK(uni.probs(i) == doctest::Approx(0.25));
  CHECK(uni.grad_log_prob(2) == doctest::Approx(1.0 - 4.0));

  for (double eps : {0.05, 0.3, 0.77}) {
    const EpsGreedyStep<double> s = eps_greedy_probs_and_grad(four, x, eps);
    for (Index i = 0; i < 4; ++i) {
      const double h = 1e-6;
      const double fd = (std::log(eps_greedy_probs_and_grad(four, x, eps + h).probs(i)) -
                         std::log(eps_greedy_probs_and_grad(four, x, eps - h).probs(i))) /
                        (2 * h);
      CHECK(std::abs(fd - s.grad_log_prob(i)) / std::max(1.0, std::abs(fd)) < 1e-6);
    }
  }
}

TEST_CASE("contextual ETC") {
  Engine rng = make_stream(31, Lane::test, 0, 0);
  ContextualEtcState state(2, 3.0);
  for (long s = 0; s < 6; ++s) {
    const Index arm = contextual_etc_step(state, 4, rng);
    CHECK(arm == s % 2);
    state.update(4, arm, arm == 0 ? 0.9 : 0.1);
  }
  for (int k = 0; k < 5; ++k) {
    CHECK(contextual_etc_step(state, 4, rng) == 0);
    state.update(4, 0, -10.0);  // committed: no longer moves the estimates
  }
  bool created = false;
  CHECK(contextual_etc_step(state, 9, rng, &created) == 0);
  CHECK(created);

  // a single context reproduces the non-contextual policy on the same rewards
  VectorXd means(2);
  means << 0.4, 0.6;
  const PriorSpec prior = PriorSpec::point_mass(means);
  Engine env = make_stream(32, Lane::test, 0, 0);
  const ProblemInstance inst = InstanceSampler(prior).sample(60, env);
  const RewardTable table = realize_rewards(inst, prior, env);
  for (double h : {2.0, 3.5, 7.25}) {
    Engine a = make_stream(33, Lane::policy, 0, 0);
    Engine b = make_stream(33, Lane::policy, 0, 0);
    const VectorXd p = VectorXd::Constant(1, h);
    const Trajectory t1 = ContextualEtcPolicy().rollout(p, inst, table, a, true);
    const Trajectory t2 = EtcPolicy().rollout(p, inst, table, b, true);
    CHECK(t1.arms == t2.arms);
    CHECK(t1.scores(0, 0) == t2.scores(0, 0));
  }
}

TEST_CASE("theory gamma is positive and shrinks with the horizon") {
  const double g1 = theory_gamma(0.5, 4, 8, 200, 1.0, 4.0, 2.0);
  const double g2 = theory_gamma(0.5, 4, 8, 2000, 1.0, 4.0, 2.0);
  CHECK(g1 > 0.0);
  CHECK(g2 < g1);
}
