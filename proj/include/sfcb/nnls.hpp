#pragma once

#include <Eigen/Core>

namespace sfcb {

struct NnlsResult {
  Eigen::VectorXd x;
  double residual = 0.0;  ///< ||A x - b||_2
  int iterations = 0;
  bool converged = false;
};

/// Lawson-Hanson active-set solver for min ||A x - b|| subject to x >= 0.
///
/// The passive-set normal equations are kept as a Cholesky factor that is
/// extended column by column; it is refactored only when variables leave the
/// passive set.
NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations = 0);

}  // namespace sfcb
