#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mle/imgcore.hpp"
#include "mle/rng.hpp"

namespace mle::colorsim {

struct SpectralResponse {
  std::vector<double> wavelengths_nm;
  std::vector<double> illum;
  std::array<std::vector<double>, 3> bayer;  // r, g, b transmission per wavelength
  Eigen::Vector3d omega = Eigen::Vector3d::Ones();

  static SpectralResponse load_csv(const std::filesystem::path& path);
  // Default camera curves with omega calibrated against the bundled 5 nm curves.
  static SpectralResponse bundled();
  // Narrow-band illumination (violet-blue and green bands) on the default camera.
  static SpectralResponse bundled_nbi();

  std::size_t bands() const { return wavelengths_nm.size(); }
  void validate() const;
  // omega_c = sum(full illum * bayer_c) / sum(sampled illum * bayer_c)
  void calibrate_omega(const SpectralResponse& full);
  Eigen::MatrixXd weights() const;  // 3 x bands: omega_c * illum * bayer_c
};

// channel_c = omega_c * sum_lambda illum * R * bayer_c
imgcore::Field render_color(const imgcore::SpectralCube& cube, const SpectralResponse& resp);
// Same sum with a free 3 x bands weight matrix (spectral enhancement).
imgcore::Field render_weighted(const imgcore::SpectralCube& cube, const Eigen::MatrixXd& weights);
// Green response -> R, blue response -> G and B.
imgcore::Field render_nbi(const imgcore::SpectralCube& cube, const SpectralResponse& nbi);
// Per-channel least-squares gain mapping `image` onto `reference`.
imgcore::Field color_balance(const imgcore::Field& image, const imgcore::Field& reference);

// Scales plane k so its masked mean equals dataset_means[k].
imgcore::SpectralCube rescale_to_dataset(const imgcore::SpectralCube& cube, const std::vector<double>& dataset_means);

enum class DisplayMode { pixel_max, image_mean };

struct DisplayResult {
  imgcore::Field image;
  std::vector<std::uint8_t> black;  // pixels left unscaled
};

DisplayResult normalize_display(const imgcore::Field& rgb, DisplayMode mode, double target);
Eigen::Vector3d normalize_pixel(const Eigen::Vector3d& rgb, double pixel_max = 0.8);

struct Lab {
  double l = 0.0;
  double a = 0.0;
  double b = 0.0;
};

// Linear RGB (sRGB primaries, D65 white) -> CIE Lab.
Lab rgb_to_lab(const Eigen::Vector3d& rgb);
double ciede2000(const Lab& x, const Lab& y);

// Reflectance spectra drawn from ROI masks without replacement (all pixels
// when the ROI holds fewer than `count`).
struct SampleSet {
  std::vector<Eigen::VectorXd> normal;
  std::vector<Eigen::VectorXd> lesion;
};

SampleSet sample_pixels(const imgcore::SpectralCube& cube, const std::vector<std::uint8_t>& normal_roi,
                        const std::vector<std::uint8_t>& lesion_roi, std::size_t count, Rng& rng);

// Mean all-pairs CIEDE2000 between rendered, per-pixel normalized sample sets.
double separation(const Eigen::MatrixXd& weights, const SampleSet& samples);

struct SeOptions {
  int iterations = 60;
  double learning_rate = 0.05;  // initial step, weight units per unit of normalized gradient
  double fd_step = 1e-4;
  double max_weight = 1.0;
};

struct SeResult {
  Eigen::MatrixXd weights;
  std::vector<double> trace;
  bool aborted = false;
  std::string message;
};

// Projected gradient ascent with central differences and backtracking;
// weights are kept in [0, max_weight].
SeResult optimize_se(const SampleSet& samples, const Eigen::MatrixXd& init, const SeOptions& opts = {});

}  // namespace mle::colorsim
