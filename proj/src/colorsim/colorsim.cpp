#include <algorithm>
#include <cmath>

#include "mle/colorsim.hpp"
#include "mle/csv.hpp"
#include "mle/error.hpp"
#include "mle/parallel.hpp"

namespace mle::colorsim {

using imgcore::Field;
using imgcore::SpectralCube;

SpectralResponse SpectralResponse::load_csv(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  SpectralResponse r;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    r.wavelengths_nm.push_back(csv.number(i, "wavelength_nm"));
    r.illum.push_back(csv.number(i, "illum"));
    r.bayer[0].push_back(csv.number(i, "bayer_r"));
    r.bayer[1].push_back(csv.number(i, "bayer_g"));
    r.bayer[2].push_back(csv.number(i, "bayer_b"));
  }
  r.validate();
  return r;
}

SpectralResponse SpectralResponse::bundled() {
  const std::filesystem::path dir(MLE_ASSET_DIR);
  SpectralResponse r = load_csv(dir / "response_default.csv");
  r.calibrate_omega(load_csv(dir / "response_full.csv"));
  return r;
}

SpectralResponse SpectralResponse::bundled_nbi() {
  SpectralResponse r = load_csv(std::filesystem::path(MLE_ASSET_DIR) / "response_default.csv");
  // 415 nm and 540 nm narrow bands projected onto the diode wavelengths
  const std::vector<std::pair<double, double>> bands = {{406, 1.0}, {446, 0.3}, {522, 0.3}, {543, 1.0}, {562, 0.3}};
  for (std::size_t i = 0; i < r.bands(); ++i) {
    r.illum[i] = 0.0;
    for (const auto& [wl, v] : bands)
      if (r.wavelengths_nm[i] == wl) r.illum[i] = v;
  }
  return r;
}

void SpectralResponse::validate() const {
  const std::size_t n = wavelengths_nm.size();
  if (n == 0) throw ConfigError("spectral response: empty");
  if (illum.size() != n || bayer[0].size() != n || bayer[1].size() != n || bayer[2].size() != n)
    throw ConfigError("spectral response: column lengths differ");
  for (std::size_t i = 0; i < n; ++i) {
    bool ok = std::isfinite(illum[i]) && illum[i] >= 0.0;
    for (const auto& c : bayer) ok = ok && std::isfinite(c[i]) && c[i] >= 0.0;
    if (!ok) throw ConfigError("spectral response: entries must be finite and non-negative");
  }
  for (int c = 0; c < 3; ++c)
    if (!(omega[c] > 0.0) || !std::isfinite(omega[c])) throw ConfigError("spectral response: omega must be > 0");
}

void SpectralResponse::calibrate_omega(const SpectralResponse& full) {
  full.validate();
  for (int c = 0; c < 3; ++c) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < full.bands(); ++i) num += full.illum[i] * full.bayer[c][i];
    for (std::size_t i = 0; i < bands(); ++i) den += illum[i] * bayer[c][i];
    if (!(num > 0.0) || !(den > 0.0)) throw ConfigError("spectral response: cannot calibrate omega on a zero channel");
    omega[c] = num / den;
  }
}

Eigen::MatrixXd SpectralResponse::weights() const {
  Eigen::MatrixXd w(3, static_cast<Eigen::Index>(bands()));
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < bands(); ++i) w(c, static_cast<Eigen::Index>(i)) = omega[c] * illum[i] * bayer[c][i];
  return w;
}

Field render_weighted(const SpectralCube& cube, const Eigen::MatrixXd& weights) {
  cube.validate();
  if (weights.rows() != 3 || static_cast<std::size_t>(weights.cols()) != cube.bands())
    throw ValidationError("render: weights must be 3 x bands");
  Field out(cube.width, cube.height, 3);
  const std::size_t n = cube.pixel_count();
  parallel_for(n, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      out.mask()[i] = cube.mask[i];
      if (!cube.mask[i]) continue;
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < cube.bands(); ++k) s += weights(c, static_cast<Eigen::Index>(k)) * cube.planes[k][i];
        out.data()[i * 3 + static_cast<std::size_t>(c)] = s;
      }
    }
  });
  return out;
}

Field render_color(const SpectralCube& cube, const SpectralResponse& resp) {
  resp.validate();
  if (resp.wavelengths_nm != cube.wavelengths_nm)
    throw ConfigError("render: response wavelengths do not match the cube");
  return render_weighted(cube, resp.weights());
}

Field render_nbi(const SpectralCube& cube, const SpectralResponse& nbi) {
  Field cam = render_color(cube, nbi);
  Field out(cam.width(), cam.height(), 3);
  for (std::size_t i = 0; i < cam.pixel_count(); ++i) {
    out.mask()[i] = cam.mask()[i];
    out.data()[i * 3 + 0] = cam.data()[i * 3 + 1];
    out.data()[i * 3 + 1] = cam.data()[i * 3 + 2];
    out.data()[i * 3 + 2] = cam.data()[i * 3 + 2];
  }
  return out;
}

Field color_balance(const Field& image, const Field& reference) {
  require(image.channels() == 3 && reference.channels() == 3, "color_balance: expects RGB fields");
  require(image.width() == reference.width() && image.height() == reference.height(),
          "color_balance: image and reference differ in size");
  Field out = image;
  for (int c = 0; c < 3; ++c) {
    double xy = 0.0;
    double xx = 0.0;
    for (std::size_t i = 0; i < image.pixel_count(); ++i) {
      if (!image.mask()[i] || !reference.mask()[i]) continue;
      const double x = image.data()[i * 3 + static_cast<std::size_t>(c)];
      xy += x * reference.data()[i * 3 + static_cast<std::size_t>(c)];
      xx += x * x;
    }
    const double gain = xx > 0.0 ? xy / xx : 1.0;
    for (std::size_t i = 0; i < image.pixel_count(); ++i) out.data()[i * 3 + static_cast<std::size_t>(c)] *= gain;
  }
  return out;
}

SpectralCube rescale_to_dataset(const SpectralCube& cube, const std::vector<double>& dataset_means) {
  cube.validate();
  if (dataset_means.size() != cube.bands()) throw ConfigError("rescale: one dataset mean per wavelength is required");
  SpectralCube out = cube;
  for (std::size_t k = 0; k < cube.bands(); ++k) {
    require(dataset_means[k] > 0.0, "rescale: dataset means must be positive");
    double sum = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < cube.pixel_count(); ++i)
      if (cube.mask[i]) sum += cube.planes[k][i], ++cnt;
    if (cnt == 0 || sum <= 0.0) continue;
    const double gain = dataset_means[k] / (sum / static_cast<double>(cnt));
    for (auto& v : out.planes[k]) v *= gain;
  }
  return out;
}

Eigen::Vector3d normalize_pixel(const Eigen::Vector3d& rgb, double pixel_max) {
  const double m = rgb.maxCoeff();
  if (!(m > 0.0)) return rgb;
  return rgb * (pixel_max / m);
}

DisplayResult normalize_display(const Field& rgb, DisplayMode mode, double target) {
  require(rgb.channels() == 3, "normalize_display: expects an RGB field");
  require(target > 0.0, "normalize_display: target must be positive");
  DisplayResult res{rgb, std::vector<std::uint8_t>(rgb.pixel_count(), 0)};
  auto d = res.image.data();
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i)
    if (std::max({d[i * 3], d[i * 3 + 1], d[i * 3 + 2]}) <= 0.0) res.black[i] = 1;
  if (mode == DisplayMode::pixel_max) {
    for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
      if (res.black[i]) continue;
      const Eigen::Vector3d v = normalize_pixel({d[i * 3], d[i * 3 + 1], d[i * 3 + 2]}, target);
      for (int c = 0; c < 3; ++c) d[i * 3 + static_cast<std::size_t>(c)] = v[c];
    }
    return res;
  }
  double sum = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i)
    if (rgb.mask()[i]) sum += d[i * 3] + d[i * 3 + 1] + d[i * 3 + 2], cnt += 3;
  if (cnt == 0 || sum <= 0.0) return res;
  const double gain = target / (sum / static_cast<double>(cnt));
  for (double& v : d) v *= gain;
  return res;
}

SampleSet sample_pixels(const SpectralCube& cube, const std::vector<std::uint8_t>& normal_roi,
                        const std::vector<std::uint8_t>& lesion_roi, std::size_t count, Rng& rng) {
  cube.validate();
  const std::size_t n = cube.pixel_count();
  if (normal_roi.size() != n || lesion_roi.size() != n) throw ValidationError("sample_pixels: ROI size mismatch");
  const auto draw = [&](const std::vector<std::uint8_t>& roi) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (roi[i] && cube.mask[i]) idx.push_back(i);
    if (idx.empty()) throw ValidationError("sample_pixels: empty ROI");
    const std::size_t take = std::min(count, idx.size());
    for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    std::vector<Eigen::VectorXd> out;
    for (std::size_t i = 0; i < take; ++i) {
      Eigen::VectorXd s(static_cast<Eigen::Index>(cube.bands()));
      for (std::size_t k = 0; k < cube.bands(); ++k) s[static_cast<Eigen::Index>(k)] = cube.planes[k][idx[i]];
      out.push_back(std::move(s));
    }
    return out;
  };
  SampleSet s;
  s.normal = draw(normal_roi);
  s.lesion = draw(lesion_roi);
  return s;
}

}  // namespace mle::colorsim
