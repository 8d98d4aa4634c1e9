#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mle/error.hpp"
#include "mle/imgcore.hpp"

namespace mle::imgcore {

Field::Field(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  require(width > 0 && height > 0, "field: width and height must be positive");
  require(channels == 1 || channels == 3, "field: channels must be 1 or 3");
  data_.assign(pixel_count() * channels_, fill);
  mask_.assign(pixel_count(), 1);
}

std::size_t Field::valid_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

Field Field::channel(int c) const {
  require(c >= 0 && c < channels_, "field: channel index out of range");
  Field out(width_, height_, 1);
  for (std::size_t i = 0; i < pixel_count(); ++i) out.data_[i] = data_[i * channels_ + c];
  out.mask_ = mask_;
  out.parity = parity;
  out.frame_id = frame_id;
  out.illum = illum;
  return out;
}

SpectralCube::SpectralCube(int w, int h, std::vector<double> wavelengths, double fill)
    : width(w), height(h), wavelengths_nm(std::move(wavelengths)) {
  require(w > 0 && h > 0, "cube: width and height must be positive");
  planes.assign(wavelengths_nm.size(), std::vector<double>(pixel_count(), fill));
  mask.assign(pixel_count(), 1);
}

void SpectralCube::validate(bool require_unit_range) const {
  require(width > 0 && height > 0, "cube: empty");
  require(planes.size() == wavelengths_nm.size(), "cube: plane count does not match wavelength list");
  require(mask.size() == pixel_count(), "cube: mask size mismatch");
  for (std::size_t k = 1; k < wavelengths_nm.size(); ++k)
    require(wavelengths_nm[k] > wavelengths_nm[k - 1], "cube: wavelengths must be strictly increasing");
  for (const auto& p : planes) {
    require(p.size() == pixel_count(), "cube: plane size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!mask[i]) continue;
      require(std::isfinite(p[i]), "cube: non-finite value at a valid pixel");
      if (require_unit_range) require(p[i] >= 0.0 && p[i] <= 1.0, "cube: valid reflectance outside [0,1]");
    }
  }
}

std::vector<double> default_wavelengths() { return {406, 446, 468, 522, 543, 562, 635, 657}; }

AffineTransform::AffineTransform(const Eigen::Matrix<double, 2, 3>& m) : m_(m) {}

AffineTransform AffineTransform::translation(double tx, double ty) {
  AffineTransform t;
  t.m_(0, 2) = tx;
  t.m_(1, 2) = ty;
  return t;
}

AffineTransform AffineTransform::rotation(double angle_rad, double cx, double cy, double tx, double ty) {
  const double c = std::cos(angle_rad);
  const double s = std::sin(angle_rad);
  Eigen::Matrix<double, 2, 3> m;
  m << c, -s, cx - c * cx + s * cy + tx, s, c, cy - s * cx - c * cy + ty;
  return AffineTransform(m);
}

bool AffineTransform::singular() const { return std::abs(determinant()) <= 1e-8; }

AffineTransform AffineTransform::inverse() const {
  if (singular()) throw ValidationError("affine: singular transform");
  const Eigen::Matrix2d a = m_.leftCols<2>();
  const Eigen::Matrix2d ai = a.inverse();
  Eigen::Matrix<double, 2, 3> out;
  out.leftCols<2>() = ai;
  out.col(2) = -ai * m_.col(2);
  return AffineTransform(out);
}

AffineTransform AffineTransform::compose(const AffineTransform& other) const {
  Eigen::Matrix<double, 2, 3> out;
  const Eigen::Matrix2d a = m_.leftCols<2>();
  out.leftCols<2>() = a * other.m_.leftCols<2>();
  out.col(2) = a * other.m_.col(2) + m_.col(2);
  return AffineTransform(out);
}

Eigen::Vector2d AffineTransform::apply(double x, double y) const {
  return m_.leftCols<2>() * Eigen::Vector2d(x, y) + m_.col(2);
}

RemapField RemapField::identity(int width, int height) {
  RemapField r;
  r.width = width;
  r.height = height;
  r.src_x.resize(static_cast<std::size_t>(width) * height);
  r.src_y.resize(r.src_x.size());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      r.src_x[static_cast<std::size_t>(y) * width + x] = x;
      r.src_y[static_cast<std::size_t>(y) * width + x] = y;
    }
  return r;
}

Field subtract_dark(const Field& frame, const Field& dark) {
  if (!frame.same_shape(dark))
    throw ValidationError("subtract_dark: frame and dark field dimensions/channels differ");
  Field out = frame;
  auto o = out.data();
  auto d = dark.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(o[i] - d[i], 0.0, 1.0);
  return out;
}

namespace {

// Builds one full-height field from rows first, first+2, ... of `frame`.
Field expand_rows(const Field& frame, int first, Parity parity) {
  const int h = frame.height();
  const int w = frame.width();
  const int nc = frame.channels();
  const int rows = h / 2;
  Field out(w, h, nc);
  out.frame_id = frame.frame_id;
  out.illum = frame.illum;
  out.parity = parity;
  for (int y = 0; y < h; ++y) {
    // position of output row y in the half-height field's row coordinates
    const double s = std::clamp((y - first) / 2.0, 0.0, static_cast<double>(rows - 1));
    const int r0 = static_cast<int>(std::floor(s));
    const int r1 = std::min(r0 + 1, rows - 1);
    const double f = s - r0;
    const int src0 = first + 2 * r0;
    const int src1 = first + 2 * r1;
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) out(x, y, c) = (1.0 - f) * frame(x, src0, c) + f * frame(x, src1, c);
      out.set_valid(x, y, frame.valid(x, src0) && (f == 0.0 || frame.valid(x, src1)));
    }
  }
  return out;
}

}  // namespace

std::pair<Field, Field> deinterlace(const Field& frame) {
  if (frame.height() < 2 || frame.height() % 2 != 0)
    throw ValidationError("deinterlace: frame height must be even and >= 2, got " +
                          std::to_string(frame.height()));
  return {expand_rows(frame, 1, Parity::odd), expand_rows(frame, 0, Parity::even)};
}

Field interleave(const Field& odd, const Field& even) {
  require(odd.same_shape(even), "interleave: field shapes differ");
  Field out(odd.width(), odd.height(), odd.channels());
  out.frame_id = even.frame_id;
  out.illum = even.illum;
  for (int y = 0; y < odd.height(); ++y) {
    const Field& src = (y % 2 == 1) ? odd : even;
    for (int x = 0; x < odd.width(); ++x) {
      for (int c = 0; c < odd.channels(); ++c) out(x, y, c) = src(x, y, c);
      out.set_valid(x, y, src.valid(x, y));
    }
  }
  return out;
}

Field luminance(const Field& field) {
  if (field.channels() == 1) return field;
  Field out(field.width(), field.height(), 1);
  out.parity = field.parity;
  out.frame_id = field.frame_id;
  out.illum = field.illum;
  auto src = field.data();
  auto dst = out.data();
  const int nc = field.channels();
  for (std::size_t i = 0; i < field.pixel_count(); ++i) {
    double s = 0.0;
    for (int c = 0; c < nc; ++c) s += src[i * nc + c];
    dst[i] = s / nc;
  }
  std::copy(field.mask().begin(), field.mask().end(), out.mask().begin());
  return out;
}

}  // namespace mle::imgcore
