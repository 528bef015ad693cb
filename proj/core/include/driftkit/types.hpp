#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace driftkit {

/// Row-major so that one example is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Stored activations stay 32-bit so cache round-trips are bit-exact.
using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorF = Eigen::VectorXf;

using IndexList = std::vector<std::size_t>;
using Labels = std::vector<int>;

}  // namespace driftkit
