#pragma once

#include <span>
#include <vector>

#include "mle/imgcore.hpp"

namespace mle::lsci {

struct ContrastMap {
  int width = 0;
  int height = 0;
  int window = 5;
  std::vector<double> k;
  std::vector<std::uint8_t> mask;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  imgcore::Field to_field() const;
};

struct FlowMap {
  int width = 0;
  int height = 0;
  int frames_averaged = 1;
  std::vector<double> v;
  std::vector<std::uint8_t> mask;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  imgcore::Field to_field() const;
  static FlowMap from_field(const imgcore::Field& f, int frames_averaged = 1);
};

inline constexpr double kMeanFloor = 1e-4;
inline constexpr double kContrastFloor = 1e-3;

// Local sigma/mean in a window x window neighbourhood (replicate borders).
// Sigma is the Bessel-corrected (n - 1) window standard deviation.
ContrastMap speckle_contrast(const imgcore::Field& field, int window = 5);

// V = 1 / max(K, kContrastFloor)^2.
FlowMap flow_from_contrast(const ContrastMap& k);

struct AverageOptions {
  imgcore::RegistrationOptions registration{};
  bool register_frames = true;
};

struct AverageResult {
  FlowMap map;
  int dropped = 0;  // frames whose registration did not converge
  std::vector<imgcore::AffineTransform> transforms;
};

// Registers every colour field to the centre field of the window, warps the
// paired flow map with that transform and averages the valid pixels.
AverageResult temporal_average(std::span<const FlowMap> flows, std::span<const imgcore::Field> color_fields,
                               const AverageOptions& opts = {});

// Rolling windows of `window` frames centred on each index (truncated at the ends).
std::vector<AverageResult> rolling_average(std::span<const FlowMap> flows, std::span<const imgcore::Field> color_fields,
                                           int window = 15, const AverageOptions& opts = {});

// Pooled standard deviation of the two ROIs after min-max normalization over
// the whole map's valid range.
double rms_contrast(const imgcore::Field& map, std::span<const std::uint8_t> roi_a, std::span<const std::uint8_t> roi_b);
double rms_contrast(const imgcore::Field& map, const imgcore::Roi& roi_a, const imgcore::Roi& roi_b);

}  // namespace mle::lsci
