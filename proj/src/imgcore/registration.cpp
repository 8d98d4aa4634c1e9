#include <algorithm>
#include <cmath>
#include <limits>

#include "mle/error.hpp"
#include "mle/imgcore.hpp"

namespace mle::imgcore {

namespace {

struct Level {
  int w = 0;
  int h = 0;
  std::vector<double> moving;
  std::vector<double> grad_x;
  std::vector<double> grad_y;
  std::vector<double> fixed;
  std::vector<std::uint8_t> fixed_mask;
  std::vector<std::uint8_t> moving_mask;
};

// Half-resolution copy by 2x2 block averaging after a light blur.
std::vector<double> downsample(const std::vector<double>& src, int w, int h, int& ow, int& oh) {
  const auto blurred = gaussian_blur(src, w, h, 1.0);
  ow = w / 2;
  oh = h / 2;
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const auto at = [&](int xx, int yy) { return blurred[static_cast<std::size_t>(yy) * w + xx]; };
      out[static_cast<std::size_t>(y) * ow + x] =
          0.25 * (at(2 * x, 2 * y) + at(2 * x + 1, 2 * y) + at(2 * x, 2 * y + 1) + at(2 * x + 1, 2 * y + 1));
    }
  return out;
}

std::vector<std::uint8_t> downsample_mask(const std::vector<std::uint8_t>& src, int w, int ow, int oh) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const auto at = [&](int xx, int yy) { return src[static_cast<std::size_t>(yy) * w + xx]; };
      out[static_cast<std::size_t>(y) * ow + x] =
          at(2 * x, 2 * y) && at(2 * x + 1, 2 * y) && at(2 * x, 2 * y + 1) && at(2 * x + 1, 2 * y + 1);
    }
  return out;
}

void compute_gradients(Level& l) {
  l.grad_x.assign(l.moving.size(), 0.0);
  l.grad_y.assign(l.moving.size(), 0.0);
  for (int y = 0; y < l.h; ++y)
    for (int x = 0; x < l.w; ++x) {
      const auto at = [&](int xx, int yy) {
        return l.moving[static_cast<std::size_t>(std::clamp(yy, 0, l.h - 1)) * l.w + std::clamp(xx, 0, l.w - 1)];
      };
      const std::size_t i = static_cast<std::size_t>(y) * l.w + x;
      l.grad_x[i] = 0.5 * (at(x + 1, y) - at(x - 1, y));
      l.grad_y[i] = 0.5 * (at(x, y + 1) - at(x, y - 1));
    }
}

// Parameters of the fixed->moving sampling map, centred on the image centre c:
//   m(q) = (I + D/scale)(q - c) + c + t,  theta = (D00, D01, D10, D11, tx, ty).
// Scaling the linear block by the half-diagonal makes one unit of every
// parameter move edge pixels by roughly one pixel.
using Params = Eigen::Matrix<double, 6, 1>;

struct Eval {
  double mse = std::numeric_limits<double>::infinity();
  Params grad = Params::Zero();
  std::size_t count = 0;
};

Eval evaluate(const Level& l, const Params& p, double scale, double min_overlap, bool want_grad) {
  const double cx = 0.5 * (l.w - 1);
  const double cy = 0.5 * (l.h - 1);
  const double a00 = 1.0 + p[0] / scale, a01 = p[1] / scale;
  const double a10 = p[2] / scale, a11 = 1.0 + p[3] / scale;
  Eval e;
  double sum = 0.0;
  Params g = Params::Zero();
  std::size_t fixed_valid = 0;
  for (int y = 0; y < l.h; ++y) {
    for (int x = 0; x < l.w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * l.w + x;
      if (!l.fixed_mask[i]) continue;
      ++fixed_valid;
      const double dx = x - cx;
      const double dy = y - cy;
      const double mx = a00 * dx + a01 * dy + cx + p[4];
      const double my = a10 * dx + a11 * dy + cy + p[5];
      if (mx < 0.0 || my < 0.0 || mx > l.w - 1 || my > l.h - 1) continue;
      const int ix = std::min(static_cast<int>(mx), l.w - 1);
      const int iy = std::min(static_cast<int>(my), l.h - 1);
      if (!l.moving_mask[static_cast<std::size_t>(iy) * l.w + ix]) continue;
      const double r = sample_bilinear(l.moving, l.w, l.h, mx, my) - l.fixed[i];
      sum += r * r;
      ++e.count;
      if (want_grad) {
        const double gx = sample_bilinear(l.grad_x, l.w, l.h, mx, my);
        const double gy = sample_bilinear(l.grad_y, l.w, l.h, mx, my);
        g[0] += r * gx * dx / scale;
        g[1] += r * gx * dy / scale;
        g[2] += r * gy * dx / scale;
        g[3] += r * gy * dy / scale;
        g[4] += r * gx;
        g[5] += r * gy;
      }
    }
  }
  if (e.count == 0 || static_cast<double>(e.count) < min_overlap * std::max<std::size_t>(fixed_valid, 1)) {
    e.mse = std::numeric_limits<double>::infinity();
    return e;
  }
  e.mse = sum / static_cast<double>(e.count);
  e.grad = g * (2.0 / static_cast<double>(e.count));
  return e;
}

struct LevelResult {
  Params params;
  double mse;
  bool converged;
  int iterations;
};

// Gradient descent with Barzilai-Borwein step lengths and an Armijo
// backtracking safeguard, so every accepted step decreases the MSE.
LevelResult descend(const Level& l, Params p, const RegistrationOptions& opts) {
  const double scale = 0.5 * std::hypot(l.w, l.h);
  Eval cur = evaluate(l, p, scale, opts.min_overlap, true);
  if (!std::isfinite(cur.mse)) return {p, cur.mse, false, 0};
  double gnorm_inf = cur.grad.cwiseAbs().maxCoeff();
  if (gnorm_inf == 0.0) return {p, cur.mse, true, 0};
  double alpha = 0.5 / gnorm_inf;  // first step moves at most half a pixel
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const double gg = cur.grad.squaredNorm();
    if (gg == 0.0) return {p, cur.mse, true, it};
    Params trial;
    Eval next;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      trial = p - alpha * cur.grad;
      next = evaluate(l, trial, scale, opts.min_overlap, true);
      if (std::isfinite(next.mse) && next.mse <= cur.mse - 1e-4 * alpha * gg) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) return {p, cur.mse, true, it};  // no descent direction left at machine precision
    const Params s = trial - p;
    const Params yv = next.grad - cur.grad;
    p = trial;
    cur = next;
    if (s.cwiseAbs().maxCoeff() < opts.tol) return {p, cur.mse, true, it + 1};
    const double sy = s.dot(yv);
    alpha = sy > 0.0 ? s.squaredNorm() / sy : alpha * 2.0;
  }
  return {p, cur.mse, false, it};
}

}  // namespace

RegistrationResult register_affine(const Field& moving, const Field& fixed, const RegistrationOptions& opts) {
  if (moving.width() != fixed.width() || moving.height() != fixed.height())
    throw ValidationError("register_affine: moving and fixed fields differ in size");
  if (moving.channels() != 1 || fixed.channels() != 1)
    throw ValidationError("register_affine: expects single-channel fields (pass luminance)");
  require(opts.max_iter > 0, "register_affine: max_iter must be positive");

  std::vector<Level> pyramid(1);
  pyramid[0].w = moving.width();
  pyramid[0].h = moving.height();
  pyramid[0].moving.assign(moving.data().begin(), moving.data().end());
  pyramid[0].fixed.assign(fixed.data().begin(), fixed.data().end());
  pyramid[0].moving_mask.assign(moving.mask().begin(), moving.mask().end());
  pyramid[0].fixed_mask.assign(fixed.mask().begin(), fixed.mask().end());
  for (int lv = 1; lv < opts.levels; ++lv) {
    const Level& prev = pyramid.back();
    if (std::min(prev.w, prev.h) / 2 < 24) break;
    Level next;
    next.moving = downsample(prev.moving, prev.w, prev.h, next.w, next.h);
    next.fixed = downsample(prev.fixed, prev.w, prev.h, next.w, next.h);
    next.moving_mask = downsample_mask(prev.moving_mask, prev.w, next.w, next.h);
    next.fixed_mask = downsample_mask(prev.fixed_mask, prev.w, next.w, next.h);
    pyramid.push_back(std::move(next));
  }
  for (auto& l : pyramid) compute_gradients(l);

  Params p = Params::Zero();
  LevelResult res{p, 0.0, false, 0};
  int total_iter = 0;
  for (int lv = static_cast<int>(pyramid.size()) - 1; lv >= 0; --lv) {
    const Level& l = pyramid[lv];
    res = descend(l, p, opts);
    total_iter += res.iterations;
    p = res.params;
    if (lv > 0) {
      // linear block is scale-free in these units; translation doubles
      const double s_now = 0.5 * std::hypot(l.w, l.h);
      const double s_next = 0.5 * std::hypot(pyramid[lv - 1].w, pyramid[lv - 1].h);
      p.head<4>() *= s_next / s_now;
      p.tail<2>() *= 2.0;
    }
  }

  const Level& fine = pyramid[0];
  const double scale = 0.5 * std::hypot(fine.w, fine.h);
  const double cx = 0.5 * (fine.w - 1);
  const double cy = 0.5 * (fine.h - 1);
  Eigen::Matrix2d a;
  a << 1.0 + p[0] / scale, p[1] / scale, p[2] / scale, 1.0 + p[3] / scale;
  const Eigen::Vector2d c(cx, cy);
  Eigen::Matrix<double, 2, 3> sample_map;
  sample_map.leftCols<2>() = a;
  sample_map.col(2) = c + Eigen::Vector2d(p[4], p[5]) - a * c;
  const AffineTransform fixed_to_moving(sample_map);

  RegistrationResult out;
  out.transform = fixed_to_moving.inverse();
  out.mse = res.mse;
  out.converged = res.converged && std::isfinite(res.mse);
  out.iterations = total_iter;
  return out;
}

}  // namespace mle::imgcore
