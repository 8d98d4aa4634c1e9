#include <algorithm>
#include <cmath>

#include "mle/colorsim.hpp"
#include "mle/error.hpp"
#include "mle/parallel.hpp"

namespace mle::colorsim {

namespace {

std::vector<Lab> to_lab(const std::vector<Eigen::VectorXd>& spectra, const Eigen::MatrixXd& weights) {
  std::vector<Lab> out;
  out.reserve(spectra.size());
  for (const auto& s : spectra) {
    if (s.size() != weights.cols()) throw ValidationError("separation: sample length does not match the weights");
    out.push_back(rgb_to_lab(normalize_pixel(weights * s, 0.8)));
  }
  return out;
}

}  // namespace

double separation(const Eigen::MatrixXd& weights, const SampleSet& samples) {
  if (samples.normal.empty() || samples.lesion.empty()) throw ValidationError("separation: empty sample set");
  const auto a = to_lab(samples.normal, weights);
  const auto b = to_lab(samples.lesion, weights);
  std::vector<double> rows(a.size(), 0.0);
  parallel_for(a.size(), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i)
      for (const auto& lb : b) rows[i] += ciede2000(a[i], lb);
  });
  double total = 0.0;
  for (double r : rows) total += r;
  return total / static_cast<double>(a.size() * b.size());
}

SeResult optimize_se(const SampleSet& samples, const Eigen::MatrixXd& init, const SeOptions& opts) {
  require(init.rows() == 3 && init.cols() > 0, "optimize_se: initial weights must be 3 x bands");
  require(opts.iterations >= 0 && opts.learning_rate > 0.0 && opts.fd_step > 0.0 && opts.max_weight > 0.0,
          "optimize_se: invalid options");
  SeResult res;
  res.weights = init.cwiseMax(0.0).cwiseMin(opts.max_weight);
  double f = separation(res.weights, samples);
  res.trace.push_back(f);
  if (!std::isfinite(f)) {
    res.aborted = true;
    res.message = "non-finite objective at the initial weights";
    return res;
  }
  double step = opts.learning_rate;
  const Eigen::Index rows = res.weights.rows();
  const Eigen::Index cols = res.weights.cols();
  for (int it = 0; it < opts.iterations; ++it) {
    Eigen::MatrixXd grad(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        Eigen::MatrixXd hi = res.weights;
        Eigen::MatrixXd lo = res.weights;
        hi(r, c) = std::min(hi(r, c) + opts.fd_step, opts.max_weight);
        lo(r, c) = std::max(lo(r, c) - opts.fd_step, 0.0);
        const double span = hi(r, c) - lo(r, c);
        grad(r, c) = span > 0.0 ? (separation(hi, samples) - separation(lo, samples)) / span : 0.0;
      }
    if (!grad.allFinite()) {
      res.aborted = true;
      res.message = "non-finite gradient at iteration " + std::to_string(it);
      return res;
    }
    const double gmax = grad.cwiseAbs().maxCoeff();
    if (gmax == 0.0) break;
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      const Eigen::MatrixXd trial = (res.weights + (step / gmax) * grad).cwiseMax(0.0).cwiseMin(opts.max_weight);
      const double ft = separation(trial, samples);
      if (!std::isfinite(ft)) {
        res.aborted = true;
        res.message = "non-finite objective at iteration " + std::to_string(it);
        return res;
      }
      if (ft > f) {
        res.weights = trial;
        f = ft;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    res.trace.push_back(f);
    step = std::min(step * 1.5, opts.max_weight);
  }
  return res;
}

}  // namespace mle::colorsim
