#include "mle/nnls.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include "mle/error.hpp"

namespace mle::spectral {

NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iter, double tol) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  require(b.size() == m, "nnls: right-hand side length does not match the matrix");
  if (max_iter <= 0) max_iter = static_cast<int>(3 * n) + 10;
  if (tol <= 0.0)
    tol = 10.0 * std::numeric_limits<double>::epsilon() * a.cwiseAbs().colwise().sum().maxCoeff() *
          static_cast<double>(std::max(m, n));

  NnlsResult res;
  res.x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  Eigen::VectorXd w = a.transpose() * (b - a * res.x);

  auto solve_passive = [&](Eigen::VectorXd& s) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    Eigen::MatrixXd ap(m, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) ap.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
    const Eigen::VectorXd sp = ap.colPivHouseholderQr().solve(b);
    s.setZero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) s[idx[k]] = sp[static_cast<Eigen::Index>(k)];
  };

  int outer = 0;
  while (outer < max_iter) {
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[static_cast<std::size_t>(j)] && w[j] > best) {
        best = w[j];
        t = j;
      }
    if (t < 0) {
      res.converged = true;
      break;
    }
    ++outer;
    passive[static_cast<std::size_t>(t)] = true;
    Eigen::VectorXd s;
    solve_passive(s);
    int inner = 0;
    while (true) {
      double min_s = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)]) min_s = std::min(min_s, s[j]);
      if (min_s > 0.0 || ++inner > max_iter) break;
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) alpha = std::min(alpha, res.x[j] / (res.x[j] - s[j]));
      res.x += alpha * (s - res.x);
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && res.x[j] <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          res.x[j] = 0.0;
        }
      solve_passive(s);
    }
    res.x = s;
    for (Eigen::Index j = 0; j < n; ++j) res.x[j] = std::max(res.x[j], 0.0);
    w = a.transpose() * (b - a * res.x);
  }
  res.iterations = outer;
  res.dual = a.transpose() * (b - a * res.x);
  return res;
}

}  // namespace mle::spectral
