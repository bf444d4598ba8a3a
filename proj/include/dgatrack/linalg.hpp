#pragma once

#include <Eigen/Dense>

namespace dgatrack {

/// Eigen-decomposition of a small symmetric matrix.
struct SymmetricEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // column i pairs with values(i); largest-magnitude entry positive
};

/// Cyclic Jacobi rotations; intended for the 4x4 covariance matrices used by
/// the linguistic filter. Only the upper triangle of `a` is read.
SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& a, double tolerance = 1e-15,
                               int max_sweeps = 100);

}  // namespace dgatrack
