#pragma once

#include <Eigen/Core>

namespace mlfas {

using Vector = Eigen::VectorXd;
/// Weight matrices are stored row-major so that `W[:]` unrolls row by row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Batches of activations: one column per sample.
using BatchMatrix = Eigen::MatrixXd;

}  // namespace mlfas
