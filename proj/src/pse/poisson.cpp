#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "mle/error.hpp"
#include "mle/pse.hpp"

namespace mle::pse {

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Divergence of the half-point averaged gradient field with zero flux across
// the border. Its adjoint pairing with the forward difference gives the
// 5-point Neumann Laplacian solved below.
std::vector<double> divergence(const Gradients& g) {
  const int w = g.width;
  const int h = g.height;
  std::vector<double> f(static_cast<std::size_t>(w) * h, 0.0);
  const auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x + 1 < w; ++x) {
      const double flux = 0.5 * (g.p[idx(x, y)] + g.p[idx(x + 1, y)]);
      f[idx(x, y)] += flux;
      f[idx(x + 1, y)] -= flux;
    }
  for (int y = 0; y + 1 < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double flux = 0.5 * (g.q[idx(x, y)] + g.q[idx(x, y + 1)]);
      f[idx(x, y)] += flux;
      f[idx(x, y + 1)] -= flux;
    }
  return f;
}

void remove_mean(std::vector<double>& v) {
  if (v.empty()) return;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  for (double& x : v) x -= m;
}

std::vector<double> solve_dct(const std::vector<double>& f, int w, int h) {
  std::vector<double> buf(f);
  std::vector<double> spec(f.size());
  fftw_plan fwd;
  fftw_plan inv;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd = fftw_plan_r2r_2d(h, w, buf.data(), spec.data(), FFTW_REDFT10, FFTW_REDFT10, FFTW_ESTIMATE);
    inv = fftw_plan_r2r_2d(h, w, spec.data(), buf.data(), FFTW_REDFT01, FFTW_REDFT01, FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  for (int l = 0; l < h; ++l)
    for (int k = 0; k < w; ++k) {
      const std::size_t i = static_cast<std::size_t>(l) * w + k;
      const double lambda = 2.0 * std::cos(std::numbers::pi * k / w) - 2.0 + 2.0 * std::cos(std::numbers::pi * l / h) - 2.0;
      spec[i] = (k == 0 && l == 0) ? 0.0 : spec[i] / lambda;
    }
  fftw_execute(inv);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
  const double scale = 1.0 / (4.0 * w * h);
  for (double& v : buf) v *= scale;
  return buf;
}

// Cell-centred multigrid for the same Neumann operator.
struct Grid {
  int w;
  int h;
  std::size_t at(int x, int y) const { return static_cast<std::size_t>(y) * w + x; }
};

void smooth(const Grid& g, std::vector<double>& u, const std::vector<double>& f, int sweeps) {
  for (int s = 0; s < sweeps; ++s)
    for (int colour = 0; colour < 2; ++colour)
      for (int y = 0; y < g.h; ++y)
        for (int x = (y + colour) % 2; x < g.w; x += 2) {
          double sum = 0.0;
          int cnt = 0;
          if (x > 0) sum += u[g.at(x - 1, y)], ++cnt;
          if (x + 1 < g.w) sum += u[g.at(x + 1, y)], ++cnt;
          if (y > 0) sum += u[g.at(x, y - 1)], ++cnt;
          if (y + 1 < g.h) sum += u[g.at(x, y + 1)], ++cnt;
          if (cnt > 0) u[g.at(x, y)] = (sum - f[g.at(x, y)]) / cnt;
        }
}

std::vector<double> residual(const Grid& g, const std::vector<double>& u, const std::vector<double>& f) {
  std::vector<double> r(f.size());
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      const double c = u[g.at(x, y)];
      double lap = 0.0;
      if (x > 0) lap += u[g.at(x - 1, y)] - c;
      if (x + 1 < g.w) lap += u[g.at(x + 1, y)] - c;
      if (y > 0) lap += u[g.at(x, y - 1)] - c;
      if (y + 1 < g.h) lap += u[g.at(x, y + 1)] - c;
      r[g.at(x, y)] = f[g.at(x, y)] - lap;
    }
  return r;
}

void vcycle(const Grid& g, std::vector<double>& u, const std::vector<double>& f) {
  if (std::min(g.w, g.h) < 4) {
    for (int i = 0; i < 50; ++i) {
      smooth(g, u, f, 20);
      remove_mean(u);
    }
    return;
  }
  smooth(g, u, f, 3);
  const auto r = residual(g, u, f);
  const Grid c{(g.w + 1) / 2, (g.h + 1) / 2};
  std::vector<double> rc(static_cast<std::size_t>(c.w) * c.h, 0.0);
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) rc[c.at(x / 2, y / 2)] += r[g.at(x, y)];
  remove_mean(rc);
  std::vector<double> ec(rc.size(), 0.0);
  vcycle(c, ec, rc);
  for (int y = 0; y < g.h; ++y) {
    const double vy = std::clamp(0.5 * y - 0.25, 0.0, c.h - 1.0);
    const int y0 = std::min(static_cast<int>(vy), c.h - 1);
    const int y1 = std::min(y0 + 1, c.h - 1);
    const double fy = vy - y0;
    for (int x = 0; x < g.w; ++x) {
      const double vx = std::clamp(0.5 * x - 0.25, 0.0, c.w - 1.0);
      const int x0 = std::min(static_cast<int>(vx), c.w - 1);
      const int x1 = std::min(x0 + 1, c.w - 1);
      const double fx = vx - x0;
      u[g.at(x, y)] += (1 - fy) * ((1 - fx) * ec[c.at(x0, y0)] + fx * ec[c.at(x1, y0)]) +
                       fy * ((1 - fx) * ec[c.at(x0, y1)] + fx * ec[c.at(x1, y1)]);
    }
  }
  smooth(g, u, f, 3);
}

std::vector<double> solve_multigrid(const std::vector<double>& f, int w, int h) {
  const Grid g{w, h};
  std::vector<double> u(f.size(), 0.0);
  double fmax = 0.0;
  for (double v : f) fmax = std::max(fmax, std::abs(v));
  const double tol = 1e-13 * std::max(fmax, 1.0);
  for (int cycle = 0; cycle < 500; ++cycle) {
    vcycle(g, u, f);
    remove_mean(u);
    const auto r = residual(g, u, f);
    double rmax = 0.0;
    for (double v : r) rmax = std::max(rmax, std::abs(v));
    if (rmax < tol) break;
  }
  return u;
}

}  // namespace

std::vector<double> solve_poisson(const Gradients& g, PoissonMethod method) {
  require(g.width > 0 && g.height > 0, "solve_poisson: empty gradient field");
  const std::size_t n = static_cast<std::size_t>(g.width) * g.height;
  require(g.p.size() == n && g.q.size() == n, "solve_poisson: gradient size mismatch");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(g.p[i]) || !std::isfinite(g.q[i])) throw ValidationError("solve_poisson: non-finite gradient");
  auto f = divergence(g);
  remove_mean(f);
  auto hmap = method == PoissonMethod::dct ? solve_dct(f, g.width, g.height) : solve_multigrid(f, g.width, g.height);
  remove_mean(hmap);
  return hmap;
}

}  // namespace mle::pse
