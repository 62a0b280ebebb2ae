#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gradband/policy.hpp"

namespace gradband {

/// Beta posterior of one Bernoulli arm: a = successes + 1, b = failures + 1.
struct BetaState {
  int a = 1;
  int b = 1;
  int remaining = 0;
};

constexpr double kGittinsTolerance = 1e-6;

/// Finite-horizon Gittins index: the per-round retirement reward at which
/// pulling and retiring are indifferent, found by bisection over [0, 1].
/// remaining = 0 returns the posterior mean.
double gittins_index(const BetaState& state, int horizon, double tolerance = kGittinsTolerance);

/// Index values for every (a, b, remaining) in [1..n]^3 with
/// a + b - 2 + remaining <= n; other entries are NaN.
class GittinsTable {
 public:
  static constexpr std::uint32_t kMagic = 0x47495454;  // "GITT"

  GittinsTable() = default;

  /// Computes every valid entry; entries are independent and are filled
  /// concurrently.
  static GittinsTable build(int horizon, double tolerance = kGittinsTolerance, int threads = 0);

  int horizon() const { return n_; }
  double tolerance() const { return tol_; }
  std::size_t size() const { return values_.size(); }
  static bool valid(int a, int b, int remaining, int horizon);

  /// Index lookup; remaining = 0 gives the posterior mean.
  double at(int a, int b, int remaining) const;
  double at(const BetaState& s) const { return at(s.a, s.b, s.remaining); }

  const std::vector<double>& values() const { return values_; }

  /// 16-byte header (uint32 magic, uint32 n, double tolerance), then n^3
  /// little-endian doubles in row-major (a, b, remaining) order.
  void save(const std::string& path) const;
  static GittinsTable load(const std::string& path);

  bool operator==(const GittinsTable& other) const;

 private:
  std::size_t offset(int a, int b, int remaining) const;

  int n_ = 0;
  double tol_ = kGittinsTolerance;
  std::vector<double> values_;
};

/// Argmax of per-arm indices at 1-based round t of n; ties go to the lowest arm.
Index gittins_select(const GittinsTable& table, const std::vector<BetaState>& arms);
Index gittins_select(const GittinsTable& table, const std::vector<BetaState>& arms, Index t, Index horizon);

/// Greedy Gittins policy for Bernoulli arms (rewards rounded to {0, 1} by a
/// Bernoulli draw when fractional). Needs a table built for the episode horizon.
class GittinsPolicy final : public Policy {
 public:
  explicit GittinsPolicy(std::shared_ptr<const GittinsTable> table) : table_(std::move(table)) {}
  std::string name() const override { return "gittins"; }
  Index num_params() const override { return 0; }
  VectorXd default_params() const override { return {}; }
  Trajectory rollout(const VectorXd& params, const ProblemInstance& instance, const RewardTable& table, Engine& rng,
                     bool record_scores) const override;

 private:
  std::shared_ptr<const GittinsTable> table_;
};

}  // namespace gradband
