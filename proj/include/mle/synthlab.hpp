#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mle/imgcore.hpp"
#include "mle/pse.hpp"
#include "mle/spectral.hpp"

namespace mle::synthlab {

struct SpeckleParams {
  int width = 64;
  int height = 64;
  int frames = 1;
  double velocity_mm_s = 1.0;
  double exposure_ms = 5.0;
  double dt_ms = 0.1;
  double tau_constant = 2.0;  // tau_c [ms] = tau_constant / velocity
  imgcore::Roi channel{16, 0, 32, 64};
  double scale = 0.05;
  std::uint64_t seed = 1;
};

struct SpeckleSequence {
  std::vector<imgcore::Field> frames;
  std::vector<std::uint8_t> channel_mask;
};

// Circular complex Gaussian field evolving as AR(1) with rho = exp(-dt/tau_c)
// inside the channel (exponential field correlation, Lorentzian spectrum);
// the background is static. Intensity is the mean |E|^2 over the exposure.
SpeckleSequence gen_dynamic_speckle(const SpeckleParams& p);

enum class SurfaceKind { plane, gaussian_bump, hemisphere, sinusoid };

struct SurfaceSpec {
  SurfaceKind kind = SurfaceKind::gaussian_bump;
  int width = 64;
  int height = 64;
  double amplitude = 8.0;  // pixels
  double sigma = 8.0;      // bump width
  double radius = 20.0;    // hemisphere
  double period = 16.0;    // sinusoid, pixels
  double tilt_x = 0.0;     // plane gradients
  double tilt_y = 0.0;
};

struct HeightSample {
  double h = 0.0;
  double hx = 0.0;
  double hy = 0.0;
};

HeightSample surface_at(const SurfaceSpec& s, double x, double y);

struct LambertianScene {
  std::vector<imgcore::Field> images;
  pse::SurfaceField truth;  // analytic normals, albedo, normalized height
};

// I = (albedo / pi) max(0, s . n) + Gaussian noise.
LambertianScene gen_lambertian_scene(const SurfaceSpec& spec, const pse::LightRig& rig, double albedo = 0.8,
                                     double noise_sigma = 0.0, std::uint64_t seed = 1);

// Reflectance 10^-(thb (sto2 e_HbO2 + (1 - sto2) e_Hb) / e_ref + offset), with
// optional relative Gaussian noise.
imgcore::SpectralCube gen_spectral_scene(int width, int height, const std::vector<double>& sto2,
                                         const std::vector<double>& thb, const std::vector<double>& offset,
                                         const spectral::ExtinctionTable& table, double noise_rel = 0.0,
                                         std::uint64_t seed = 1);

// Checkerboard of two saturations with tile size `tile`.
std::vector<double> checkerboard(int width, int height, int tile, double a, double b);

// Baseline, occlusion (linear decline to the nadir) and exponential recovery.
std::vector<imgcore::SpectralCube> gen_ischemia_sequence(int frames, int width, int height,
                                                         const spectral::ExtinctionTable& table,
                                                         double baseline = 0.7, double nadir = 0.35);
std::vector<double> ischemia_profile(int frames, double baseline, double nadir);

struct MacbethChart {
  imgcore::SpectralCube cube;
  std::vector<imgcore::Roi> patches;
  std::vector<std::string> names;
};

// 6 x 4 chart; gaps between patches are masked.
MacbethChart gen_macbeth_cube(const std::filesystem::path& spectra_csv, int patch = 16, int gap = 4);

struct VesselParams {
  int width = 96;
  int height = 96;
  int frames = 15;
  double jitter_px = 1.0;
  double vessel_halfwidth = 6.0;
  double exposure_ms = 5.0;
  double vessel_velocity = 2.0;
  double background_velocity = 0.3;
  std::uint64_t seed = 1;
};

struct VesselScene {
  std::vector<imgcore::Field> speckle;
  std::vector<imgcore::Field> color;
  std::vector<imgcore::AffineTransform> shifts;  // frame -> reference translation
  std::vector<std::uint8_t> vessel_roi;          // reference (centre frame) coordinates
  std::vector<std::uint8_t> background_roi;
};

// Soft-palate-style scene: a horizontal vessel with fast decorrelation in
// slowly decorrelating tissue, jittered by per-frame translations shared by
// the speckle and white-light fields. The centre frame is unshifted.
VesselScene gen_vessel_sequence(const VesselParams& p);

enum class PhantomKind { speckle_flow, lambertian_surface, spectral_scene, macbeth };

struct PhantomSpec {
  PhantomKind kind = PhantomKind::lambertian_surface;
  std::uint64_t seed = 1;
  nlohmann::json params = nlohmann::json::object();

  static PhantomSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

PhantomKind parse_kind(const std::string& name);
std::string kind_name(PhantomKind k);

// Writes the phantom's files into `dir` and returns their names.
std::vector<std::string> write_phantom(const PhantomSpec& spec, const std::filesystem::path& dir);

}  // namespace mle::synthlab
