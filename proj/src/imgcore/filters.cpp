#include <algorithm>
#include <cmath>

#include "mle/error.hpp"
#include "mle/imgcore.hpp"
#include "mle/parallel.hpp"

namespace mle::imgcore {

namespace {

constexpr double kBoundsEps = 1e-9;

std::vector<double> convolve_separable(std::span<const double> plane, int w, int h,
                                       const std::vector<double>& k) {
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(plane.size());
  std::vector<double> out(plane.size());
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      const double* row = plane.data() + y * w;
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * row[std::clamp(x + i, 0, w - 1)];
        tmp[y * w + x] = s;
      }
    }
  });
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i)
          s += k[i + r] * tmp[static_cast<std::size_t>(std::clamp(static_cast<int>(y) + i, 0, h - 1)) * w + x];
        out[y * w + x] = s;
      }
    }
  });
  return out;
}

Field filter_channels(const Field& field, const std::vector<double>& k) {
  Field out = field;
  const int nc = field.channels();
  std::vector<double> plane(field.pixel_count());
  for (int c = 0; c < nc; ++c) {
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = field.data()[i * nc + c];
    const auto res = convolve_separable(plane, field.width(), field.height(), k);
    for (std::size_t i = 0; i < plane.size(); ++i) out.data()[i * nc + c] = res[i];
  }
  return out;
}

bool in_bounds(double x, double y, int w, int h) {
  return x >= -kBoundsEps && y >= -kBoundsEps && x <= w - 1 + kBoundsEps && y <= h - 1 + kBoundsEps;
}

}  // namespace

std::vector<double> gaussian_kernel(int size, double sigma) {
  require(size >= 1 && size % 2 == 1, "gaussian_kernel: size must be odd and positive");
  require(sigma > 0.0, "gaussian_kernel: sigma must be positive");
  const int r = size / 2;
  std::vector<double> k(size);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + r];
  }
  for (auto& v : k) v /= sum;
  return k;
}

Field gaussian_smooth(const Field& field, int kernel, double sigma) {
  return filter_channels(field, gaussian_kernel(kernel, sigma));
}

Field gaussian_blur(const Field& field, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  return filter_channels(field, gaussian_kernel(2 * r + 1, sigma));
}

std::vector<double> gaussian_blur(std::span<const double> plane, int width, int height, double sigma) {
  require(plane.size() == static_cast<std::size_t>(width) * height, "gaussian_blur: plane size mismatch");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  return convolve_separable(plane, width, height, gaussian_kernel(2 * r + 1, sigma));
}

double sample_bilinear(std::span<const double> plane, int width, int height, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const int x0 = std::min(static_cast<int>(x), width - 1);
  const int y0 = std::min(static_cast<int>(y), height - 1);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const auto at = [&](int xx, int yy) { return plane[static_cast<std::size_t>(yy) * width + xx]; };
  return (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x1, y0)) + fy * ((1 - fx) * at(x0, y1) + fx * at(x1, y1));
}

namespace {

// Resamples `field` at per-pixel source coordinates given by `source(x, y)`.
template <typename SourceFn>
Field resample(const Field& field, SourceFn source) {
  const int w = field.width();
  const int h = field.height();
  const int nc = field.channels();
  Field out(w, h, nc);
  out.parity = field.parity;
  out.frame_id = field.frame_id;
  out.illum = field.illum;

  std::vector<std::vector<double>> planes(nc, std::vector<double>(field.pixel_count()));
  for (std::size_t i = 0; i < field.pixel_count(); ++i)
    for (int c = 0; c < nc; ++c) planes[c][i] = field.data()[i * nc + c];

  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
      for (int x = 0; x < w; ++x) {
        const auto [sx, sy] = source(x, y);
        if (!std::isfinite(sx) || !std::isfinite(sy) || !in_bounds(sx, sy, w, h)) {
          for (int c = 0; c < nc; ++c) out(x, y, c) = 0.0;
          out.set_valid(x, y, false);
          continue;
        }
        for (int c = 0; c < nc; ++c) out(x, y, c) = sample_bilinear(planes[c], w, h, sx, sy);
        // every contributing source pixel must itself be valid
        const int ix = std::clamp(static_cast<int>(std::floor(sx)), 0, w - 1);
        const int iy = std::clamp(static_cast<int>(std::floor(sy)), 0, h - 1);
        const int jx = std::min(ix + 1, w - 1);
        const int jy = std::min(iy + 1, h - 1);
        const double fx = sx - ix;
        const double fy = sy - iy;
        bool ok = field.valid(ix, iy);
        if (fx > kBoundsEps) ok = ok && field.valid(jx, iy);
        if (fy > kBoundsEps) ok = ok && field.valid(ix, jy);
        if (fx > kBoundsEps && fy > kBoundsEps) ok = ok && field.valid(jx, jy);
        out.set_valid(x, y, ok);
      }
    }
  });
  return out;
}

}  // namespace

Field apply_distortion_map(const Field& field, const RemapField& remap) {
  if (remap.width != field.width() || remap.height != field.height() ||
      remap.src_x.size() != field.pixel_count() || remap.src_y.size() != field.pixel_count())
    throw ValidationError("apply_distortion_map: remap dimensions do not match the field");
  const int w = field.width();
  return resample(field, [&](int x, int y) {
    const std::size_t i = static_cast<std::size_t>(y) * w + x;
    return std::pair{remap.src_x[i], remap.src_y[i]};
  });
}

Field warp(const Field& field, const AffineTransform& t) {
  const AffineTransform inv = t.inverse();  // throws on singular
  return resample(field, [&](int x, int y) {
    const auto p = inv.apply(x, y);
    return std::pair{p.x(), p.y()};
  });
}

Field median_filter(const Field& field, int size) {
  require(size >= 1 && size % 2 == 1, "median_filter: size must be odd");
  const int r = size / 2;
  const int w = field.width();
  const int h = field.height();
  const int nc = field.channels();
  Field out = field;
  std::vector<double> window;
  for (int c = 0; c < nc; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        window.clear();
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int xx = std::clamp(x + dx, 0, w - 1);
            const int yy = std::clamp(y + dy, 0, h - 1);
            if (field.valid(xx, yy)) window.push_back(field(xx, yy, c));
          }
        if (window.empty()) continue;
        auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
        std::nth_element(window.begin(), mid, window.end());
        out(x, y, c) = *mid;
      }
  return out;
}

}  // namespace mle::imgcore
