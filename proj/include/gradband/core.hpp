#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gradband {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;
using VectorXi = Eigen::VectorXi;

/// Invalid configuration: bad prior parameters, malformed experiment files.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Non-finite inputs (contexts, rewards, gradients).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken internal invariant; indicates a bug rather than bad input.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Index of the largest entry, ties resolved toward the lowest index.
template <typename Derived>
Index argmax_lowest(const Eigen::DenseBase<Derived>& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

}  // namespace gradband
