#pragma once

#include <Eigen/Core>

namespace scpseg {

/// Dense real matrix, row-major so that row slices are contiguous for the
/// sparse-times-dense kernels.
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using DenseVector = Eigen::VectorXd;

}  // namespace scpseg
