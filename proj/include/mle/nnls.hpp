#pragma once

#include <Eigen/Dense>

namespace mle::spectral {

struct NnlsResult {
  Eigen::VectorXd x;
  Eigen::VectorXd dual;  // w = A^T (b - A x); <= 0 on the active set at optimum
  int iterations = 0;
  bool converged = false;
};

// Lawson-Hanson active-set solver for min ||A x - b||^2 subject to x >= 0.
NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iter = 0, double tol = 0.0);

}  // namespace mle::spectral
