#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "mle/error.hpp"
#include "mle/statkit.hpp"

namespace mle::statkit {

namespace {

double poly(std::span<const double> c, double x) {
  double r = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
  return r;
}

}  // namespace

ShapiroWilk shapiro_wilk(std::span<const double> data) {
  const std::size_t n = data.size();
  if (n < 3) throw ValidationError("shapiro_wilk: need at least 3 observations");
  if (n > 5000) throw ValidationError("shapiro_wilk: at most 5000 observations");
  std::vector<double> x(data.begin(), data.end());
  for (double v : x)
    if (!std::isfinite(v)) throw ValidationError("shapiro_wilk: non-finite value");
  std::sort(x.begin(), x.end());
  if (x.back() - x.front() < 1e-19 * std::max(1.0, std::abs(x.front())))
    throw ValidationError("shapiro_wilk: all values are identical");

  static constexpr double g[] = {-2.273, 0.459};
  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};

  const boost::math::normal_distribution<double> norm;
  const std::size_t n2 = n / 2;
  const double an = static_cast<double>(n);
  std::vector<double> a(n2, 0.0);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    std::vector<double> m(n2);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < n2; ++i) {
      m[i] = boost::math::quantile(norm, (static_cast<double>(i + 1) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, rsn) - m[0] / ssumm2;
    std::size_t first;
    double fac;
    if (n > 5) {
      first = 2;
      const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
    } else {
      first = 1;
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first; i < n2; ++i) a[i] = -m[i] / fac;
  }

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= an;
  double ssq = 0.0;
  for (double v : x) ssq += (v - mean) * (v - mean);
  double num = 0.0;
  for (std::size_t i = 0; i < n2; ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  ShapiroWilk res;
  res.w = std::min(1.0, num * num / ssq);

  if (n == 3) {
    const double pi6 = 6.0 / std::numbers::pi;
    const double stqr = std::numbers::pi / 3.0;
    res.p = std::max(0.0, pi6 * (std::asin(std::sqrt(res.w)) - stqr));
    return res;
  }
  double y = std::log(1.0 - res.w);
  double mu;
  double sigma;
  if (n <= 11) {
    const double gamma = poly(g, an);
    if (y >= gamma) {
      res.p = 1e-99;
      return res;
    }
    y = -std::log(gamma - y);
    mu = poly(c3, an);
    sigma = std::exp(poly(c4, an));
  } else {
    const double xx = std::log(an);
    mu = poly(c5, xx);
    sigma = std::exp(poly(c6, xx));
  }
  res.p = boost::math::cdf(boost::math::complement(norm, (y - mu) / sigma));
  return res;
}

}  // namespace mle::statkit
