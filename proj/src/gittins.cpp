#include "gradband/gittins.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "gradband/parallel.hpp"

namespace gradband {

namespace {

/// Value of the optimal stop-or-continue problem at the root, continuing
/// for at least one round, with retirement paying lambda per remaining round.
double continue_value(int a, int b, int remaining, double lambda, std::vector<double>& v) {
  // v[s] holds the value at level k for s successes among k pulls.
  v.assign(static_cast<std::size_t>(remaining) + 1, 0.0);
  for (int k = remaining - 1; k >= 1; --k) {
    const int rem = remaining - k;
    for (int s = 0; s <= k; ++s) {
      const double aa = a + s;
      const double bb = b + (k - s);
      const double p = aa / (aa + bb);
      const double cont = p * (1.0 + v[static_cast<std::size_t>(s) + 1]) + (1.0 - p) * v[static_cast<std::size_t>(s)];
      v[static_cast<std::size_t>(s)] = std::max(lambda * rem, cont);
    }
  }
  const double p = static_cast<double>(a) / (a + b);
  if (remaining == 1) return p;
  return p * (1.0 + v[1]) + (1.0 - p) * v[0];
}

double index_with_buffer(const BetaState& s, double tolerance, std::vector<double>& buffer) {
  const double mean = static_cast<double>(s.a) / (s.a + s.b);
  if (s.remaining <= 1) return mean;
  double lo = mean;  // retiring at the mean is never strictly better
  double hi = 1.0;
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (continue_value(s.a, s.b, s.remaining, mid, buffer) > mid * s.remaining) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(&v, bytes, sizeof(T));
    return v;
  }
}

template <typename T>
void put(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return to_little(v);
}

}  // namespace

double gittins_index(const BetaState& state, int horizon, double tolerance) {
  if (state.a < 1 || state.b < 1 || state.remaining < 0) throw DomainError("gittins_index: invalid Beta state");
  if (state.a + state.b - 2 > horizon) throw DomainError("gittins_index: a + b - 2 exceeds the horizon");
  std::vector<double> buffer;
  return index_with_buffer(state, tolerance, buffer);
}

bool GittinsTable::valid(int a, int b, int remaining, int horizon) {
  return a >= 1 && b >= 1 && remaining >= 1 && a <= horizon && b <= horizon && remaining <= horizon &&
         a + b - 2 + remaining <= horizon;
}

std::size_t GittinsTable::offset(int a, int b, int remaining) const {
  const auto n = static_cast<std::size_t>(n_);
  return (static_cast<std::size_t>(a - 1) * n + static_cast<std::size_t>(b - 1)) * n +
         static_cast<std::size_t>(remaining - 1);
}

GittinsTable GittinsTable::build(int horizon, double tolerance, int threads) {
  if (horizon < 1) throw ConfigError("gittins: horizon must be >= 1");
  GittinsTable table;
  table.n_ = horizon;
  table.tol_ = tolerance;
  const auto n = static_cast<std::size_t>(horizon);
  table.values_.assign(n * n * n, std::numeric_limits<double>::quiet_NaN());

  std::vector<BetaState> states;
  for (int a = 1; a <= horizon; ++a) {
    for (int b = 1; a + b - 2 < horizon; ++b) {
      for (int r = 1; valid(a, b, r, horizon); ++r) states.push_back({a, b, r});
    }
  }
  // Most expensive (largest remaining) first for better load balance.
  std::stable_sort(states.begin(), states.end(),
                   [](const BetaState& x, const BetaState& y) { return x.remaining > y.remaining; });
  parallel_for(static_cast<Index>(states.size()), threads, [&](Index i) {
    thread_local std::vector<double> buffer;
    const BetaState& s = states[static_cast<std::size_t>(i)];
    table.values_[table.offset(s.a, s.b, s.remaining)] = index_with_buffer(s, tolerance, buffer);
  });
  return table;
}

double GittinsTable::at(int a, int b, int remaining) const {
  if (remaining == 0) return static_cast<double>(a) / (a + b);
  if (!valid(a, b, remaining, n_)) {
    throw DomainError("gittins: state (" + std::to_string(a) + ", " + std::to_string(b) + ", " +
                      std::to_string(remaining) + ") outside the table for n = " + std::to_string(n_));
  }
  return values_[offset(a, b, remaining)];
}

void GittinsTable::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("gittins: cannot open cache '" + path + "' for writing");
  put<std::uint32_t>(os, kMagic);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(n_));
  put<double>(os, tol_);
  for (double v : values_) put<double>(os, v);
  os.flush();
  if (!os) throw InputError("gittins: failed writing cache '" + path + "'");
}

GittinsTable GittinsTable::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("gittins: cannot open cache '" + path + "'");
  const auto magic = get<std::uint32_t>(is);
  if (!is || magic != kMagic) throw InputError("gittins: '" + path + "' is not an index cache");
  GittinsTable table;
  table.n_ = static_cast<int>(get<std::uint32_t>(is));
  table.tol_ = get<double>(is);
  if (!is || table.n_ < 1 || table.n_ > 2000) throw InputError("gittins: corrupt cache header in '" + path + "'");
  const auto n = static_cast<std::size_t>(table.n_);
  table.values_.resize(n * n * n);
  for (double& v : table.values_) v = get<double>(is);
  if (!is) throw InputError("gittins: truncated cache '" + path + "'");
  return table;
}

bool GittinsTable::operator==(const GittinsTable& other) const {
  if (n_ != other.n_ || tol_ != other.tol_ || values_.size() != other.values_.size()) return false;
  return std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0;
}

Index gittins_select(const GittinsTable& table, const std::vector<BetaState>& arms) {
  Index best = 0;
  double best_value = -1.0;
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const double v = table.at(arms[i]);
    if (v > best_value) {
      best_value = v;
      best = static_cast<Index>(i);
    }
  }
  return best;
}

Index gittins_select(const GittinsTable& table, const std::vector<BetaState>& arms, Index t, Index horizon) {
  std::vector<BetaState> at_t = arms;
  for (BetaState& s : at_t) s.remaining = static_cast<int>(horizon - t + 1);
  return gittins_select(table, at_t);
}

Trajectory GittinsPolicy::rollout(const VectorXd&, const ProblemInstance&, const RewardTable& table, Engine& rng,
                                  bool) const {
  const Index n = table.horizon();
  if (n > table_->horizon()) {
    throw ConfigError("gittins: table built for n = " + std::to_string(table_->horizon()) +
                      " cannot serve horizon " + std::to_string(n));
  }
  Trajectory traj;
  traj.arms.reserve(static_cast<std::size_t>(n));
  traj.rewards.resize(n);
  std::vector<BetaState> arms(static_cast<std::size_t>(table.num_arms()));
  for (Index t = 1; t <= n; ++t) {
    const Index arm = gittins_select(*table_, arms, t, n);
    const double y = table.rewards(arm, t - 1);
    traj.arms.push_back(static_cast<int>(arm));
    traj.rewards(t - 1) = y;
    const bool success = (y >= 1.0) || (y > 0.0 && uniform01(rng) < y);
    BetaState& s = arms[static_cast<std::size_t>(arm)];
    (success ? s.a : s.b) += 1;
  }
  return traj;
}

}  // namespace gradband
