#include "mle/lsci.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mle/error.hpp"
#include "mle/parallel.hpp"

namespace mle::lsci {

using imgcore::Field;

Field ContrastMap::to_field() const {
  Field f(width, height, 1);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    f.data()[i] = k[i];
    f.mask()[i] = mask[i];
  }
  return f;
}

Field FlowMap::to_field() const {
  Field f(width, height, 1);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    f.data()[i] = mask[i] ? v[i] : 0.0;
    f.mask()[i] = mask[i];
  }
  return f;
}

FlowMap FlowMap::from_field(const Field& f, int frames_averaged) {
  require(f.channels() == 1, "flow map: expects a single-channel field");
  FlowMap m;
  m.width = f.width();
  m.height = f.height();
  m.frames_averaged = frames_averaged;
  m.v.assign(f.data().begin(), f.data().end());
  m.mask.assign(f.mask().begin(), f.mask().end());
  return m;
}

ContrastMap speckle_contrast(const Field& field, int window) {
  if (field.channels() != 1) throw ValidationError("speckle_contrast: expects a single-channel field");
  require(window >= 2 && window % 2 == 1, "speckle_contrast: window must be odd and >= 3");
  const int w = field.width();
  const int h = field.height();
  const int r = window / 2;
  const double n = static_cast<double>(window) * window;
  ContrastMap out;
  out.width = w;
  out.height = h;
  out.window = window;
  out.k.assign(field.pixel_count(), 0.0);
  out.mask.assign(field.pixel_count(), 0);
  auto px = field.data();
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    std::vector<double> vals(static_cast<std::size_t>(window) * window);
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y)
      for (int x = 0; x < w; ++x) {
        // values are shifted by the centre pixel so a flat window gives exactly zero
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double shift = px[i];
        std::size_t k = 0;
        double sum = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const double v =
                px[static_cast<std::size_t>(std::clamp(y + dy, 0, h - 1)) * w + std::clamp(x + dx, 0, w - 1)] - shift;
            vals[k++] = v;
            sum += v;
          }
        const double dmean = sum / n;
        const double mean = shift + dmean;
        if (mean < kMeanFloor || !field.valid(x, y)) continue;
        double ss = 0.0;
        for (double v : vals) ss += (v - dmean) * (v - dmean);
        out.k[i] = std::sqrt(ss / (n - 1.0)) / mean;
        out.mask[i] = 1;
      }
  });
  return out;
}

FlowMap flow_from_contrast(const ContrastMap& k) {
  FlowMap out;
  out.width = k.width;
  out.height = k.height;
  out.frames_averaged = 1;
  out.v.assign(k.pixel_count(), 0.0);
  out.mask = k.mask;
  for (std::size_t i = 0; i < k.pixel_count(); ++i) {
    if (!k.mask[i]) continue;
    const double kk = std::max(k.k[i], kContrastFloor);
    out.v[i] = 1.0 / (kk * kk);
  }
  return out;
}

AverageResult temporal_average(std::span<const FlowMap> flows, std::span<const Field> color_fields,
                               const AverageOptions& opts) {
  require(!flows.empty(), "temporal_average: empty window");
  if (flows.size() != color_fields.size())
    throw ValidationError("temporal_average: flow and colour sequences must have equal length");
  const int w = flows[0].width;
  const int h = flows[0].height;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    require(flows[i].width == w && flows[i].height == h, "temporal_average: flow maps differ in size");
    require(color_fields[i].width() == w && color_fields[i].height() == h,
            "temporal_average: colour fields must match the flow map size");
  }
  const std::size_t centre = flows.size() / 2;
  const Field fixed = imgcore::luminance(color_fields[centre]);

  AverageResult res;
  res.map.width = w;
  res.map.height = h;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> mean(n, 0.0);
  std::vector<std::uint8_t> mask(n, 1);
  int used = 0;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    imgcore::AffineTransform t;
    if (i != centre && opts.register_frames) {
      const auto reg = imgcore::register_affine(imgcore::luminance(color_fields[i]), fixed, opts.registration);
      if (!reg.converged) {
        ++res.dropped;
        continue;
      }
      t = reg.transform;
    }
    res.transforms.push_back(t);
    const Field warped = imgcore::warp(flows[i].to_field(), t);
    ++used;
    // running mean keeps an average of identical maps bit-exact
    for (std::size_t p = 0; p < n; ++p) {
      mean[p] += (warped.data()[p] - mean[p]) / used;
      mask[p] = mask[p] && warped.mask()[p];
    }
  }
  res.map.frames_averaged = std::max(used, 1);
  res.map.v.assign(n, 0.0);
  res.map.mask = mask;
  for (std::size_t p = 0; p < n; ++p)
    if (mask[p] && used > 0) res.map.v[p] = mean[p];
  if (used == 0) std::fill(res.map.mask.begin(), res.map.mask.end(), std::uint8_t{0});
  return res;
}

std::vector<AverageResult> rolling_average(std::span<const FlowMap> flows, std::span<const Field> color_fields,
                                           int window, const AverageOptions& opts) {
  require(window >= 1, "rolling_average: window must be >= 1");
  if (flows.size() != color_fields.size())
    throw ValidationError("rolling_average: flow and colour sequences must have equal length");
  std::vector<AverageResult> out;
  const int n = static_cast<int>(flows.size());
  const int half = window / 2;
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n, lo + window);
    const int start = std::max(0, hi - window);
    out.push_back(temporal_average(flows.subspan(start, hi - start), color_fields.subspan(start, hi - start), opts));
  }
  return out;
}

double rms_contrast(const Field& map, std::span<const std::uint8_t> roi_a, std::span<const std::uint8_t> roi_b) {
  require(map.channels() == 1, "rms_contrast: expects a single-channel map");
  const std::size_t n = map.pixel_count();
  if (roi_a.size() != n || roi_b.size() != n) throw ValidationError("rms_contrast: ROI masks must match the map size");
  std::size_t count_a = 0;
  std::size_t count_b = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (roi_a[i] && roi_b[i]) throw ValidationError("rms_contrast: ROIs must be disjoint");
    if (!map.mask()[i]) continue;
    lo = std::min(lo, map.data()[i]);
    hi = std::max(hi, map.data()[i]);
    count_a += roi_a[i] ? 1 : 0;
    count_b += roi_b[i] ? 1 : 0;
  }
  if (count_a < 25 || count_b < 25)
    throw ValidationError("rms_contrast: each ROI needs at least 25 valid pixels");
  const double span = hi - lo;
  std::vector<double> pooled;
  pooled.reserve(count_a + count_b);
  for (std::size_t i = 0; i < n; ++i)
    if (map.mask()[i] && (roi_a[i] || roi_b[i])) pooled.push_back(span > 0.0 ? (map.data()[i] - lo) / span : 0.0);
  double mean = 0.0;
  for (double v : pooled) mean += v;
  mean /= static_cast<double>(pooled.size());
  double ss = 0.0;
  for (double v : pooled) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(pooled.size()));
}

double rms_contrast(const Field& map, const imgcore::Roi& roi_a, const imgcore::Roi& roi_b) {
  if (roi_a.overlaps(roi_b)) throw ValidationError("rms_contrast: ROIs must be disjoint");
  std::vector<std::uint8_t> a(map.pixel_count(), 0);
  std::vector<std::uint8_t> b(map.pixel_count(), 0);
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * map.width() + x;
      a[i] = roi_a.contains(x, y);
      b[i] = roi_b.contains(x, y);
    }
  return rms_contrast(map, a, b);
}

}  // namespace mle::lsci
