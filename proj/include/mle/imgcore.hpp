#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace mle::imgcore {

enum class Parity : std::uint8_t { none, odd, even };

enum class IllumMode : std::uint8_t { white, spectral, speckle, directional, dark };

struct IllumTag {
  IllumMode mode = IllumMode::white;
  std::uint16_t diodes = 0;  // bit i set = packet slot i active

  bool operator==(const IllumTag&) const = default;
};

// One image field: interleaved channels, row-major, normalized intensities.
// Every field carries a validity mask (1 = valid) of width*height bytes.
class Field {
 public:
  Field() = default;
  Field(int width, int height, int channels = 1, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return pixel_count() == 0; }

  double& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  double operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool valid(int x, int y) const { return mask_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set_valid(int x, int y, bool v) { mask_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  std::span<std::uint8_t> mask() { return mask_; }
  std::span<const std::uint8_t> mask() const { return mask_; }
  std::size_t valid_count() const;

  bool same_shape(const Field& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  // Single channel copy (metadata and mask preserved).
  Field channel(int c) const;

  Parity parity = Parity::none;
  std::uint64_t frame_id = 0;
  IllumTag illum{};

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
  std::vector<std::uint8_t> mask_;
};

// Registered per-wavelength reflectance planes sharing one validity mask.
struct SpectralCube {
  int width = 0;
  int height = 0;
  std::vector<double> wavelengths_nm;
  std::vector<std::vector<double>> planes;  // planes[k][y*width + x]
  std::vector<std::uint8_t> mask;

  SpectralCube() = default;
  SpectralCube(int w, int h, std::vector<double> wavelengths, double fill = 0.0);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t bands() const { return planes.size(); }
  double& at(std::size_t band, int x, int y) { return planes[band][static_cast<std::size_t>(y) * width + x]; }
  double at(std::size_t band, int x, int y) const {
    return planes[band][static_cast<std::size_t>(y) * width + x];
  }

  // Shape, finiteness and wavelength-ordering checks. With require_unit_range,
  // also checks that masked-true values lie in [0,1].
  void validate(bool require_unit_range = false) const;
};

// The eight multispectral diode wavelengths.
std::vector<double> default_wavelengths();

// Axis-aligned region of interest in pixel units.
struct Roi {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool contains(int px, int py) const { return px >= x && px < x + width && py >= y && py < y + height; }
  bool overlaps(const Roi& o) const {
    return x < o.x + o.width && o.x < x + width && y < o.y + o.height && o.y < y + height;
  }
};

// Maps moving-image pixel coordinates to fixed-image pixel coordinates.
class AffineTransform {
 public:
  AffineTransform() : m_(Eigen::Matrix<double, 2, 3>::Zero()) {
    m_(0, 0) = 1.0;
    m_(1, 1) = 1.0;
  }
  explicit AffineTransform(const Eigen::Matrix<double, 2, 3>& m);

  static AffineTransform identity() { return {}; }
  static AffineTransform translation(double tx, double ty);
  // Rotation by angle_rad (counter-clockwise in x-right/y-down pixel space
  // appears clockwise on screen) about (cx, cy), followed by a shift.
  static AffineTransform rotation(double angle_rad, double cx, double cy, double tx = 0.0, double ty = 0.0);

  const Eigen::Matrix<double, 2, 3>& matrix() const { return m_; }
  double determinant() const { return m_(0, 0) * m_(1, 1) - m_(0, 1) * m_(1, 0); }
  bool singular() const;
  AffineTransform inverse() const;
  // (this ∘ other)(p) = this(other(p))
  AffineTransform compose(const AffineTransform& other) const;
  Eigen::Vector2d apply(double x, double y) const;

 private:
  Eigen::Matrix<double, 2, 3> m_;
};

// Per-pixel source coordinates for a lens-distortion correction.
struct RemapField {
  int width = 0;
  int height = 0;
  std::vector<double> src_x;
  std::vector<double> src_y;

  static RemapField identity(int width, int height);
};

struct RegistrationOptions {
  int max_iter = 400;      // per pyramid level
  double tol = 1e-5;       // step size (pixels) below which a level has converged
  int levels = 3;          // pyramid levels, clipped so the coarsest side stays >= 24 px
  double min_overlap = 0.25;
};

struct RegistrationResult {
  AffineTransform transform;
  double mse = 0.0;
  bool converged = false;
  int iterations = 0;
};

Field subtract_dark(const Field& frame, const Field& dark);

// Splits a full frame into (odd, even) fields and resizes each back to the
// frame height by linear interpolation along rows with replicated edges.
std::pair<Field, Field> deinterlace(const Field& frame);

// Inverse bookkeeping of deinterlace: odd rows from `odd`, even rows from `even`.
Field interleave(const Field& odd, const Field& even);

// Odd-length sampled Gaussian normalized to unit sum.
std::vector<double> gaussian_kernel(int size, double sigma);
Field gaussian_smooth(const Field& field, int kernel = 5, double sigma = 0.5);
// Separable Gaussian with radius ceil(3 sigma), replicate borders.
Field gaussian_blur(const Field& field, double sigma);
std::vector<double> gaussian_blur(std::span<const double> plane, int width, int height, double sigma);

Field apply_distortion_map(const Field& field, const RemapField& remap);
Field warp(const Field& field, const AffineTransform& t);
RegistrationResult register_affine(const Field& moving, const Field& fixed, const RegistrationOptions& opts = {});

// Mean over channels.
Field luminance(const Field& field);
// Display-only median filter.
Field median_filter(const Field& field, int size);

// Bilinear sample with coordinates clamped into the image; callers own bounds checks.
double sample_bilinear(std::span<const double> plane, int width, int height, double x, double y);

}  // namespace mle::imgcore
