#pragma once

#include <stdexcept>

#include <Eigen/Dense>

namespace sgdlb {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

template <class T>
using CRef = const Eigen::Ref<const T>&;

/// Raised when a numerical routine cannot reach its stated tolerance.
class ToleranceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sgdlb
