#pragma once

#include <Eigen/Core>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mle/imgcore.hpp"

namespace mle::pse {

struct LightRig {
  std::vector<Eigen::Vector3d> directions;  // unit vectors, camera coordinates
  std::vector<std::string> labels;

  // Three sources around the lens (upper right, upper left, lower left),
  // each tilted 30 degrees off the optical axis.
  static LightRig default_rig();
  static LightRig load_json(const std::filesystem::path& path);
  void save_json(const std::filesystem::path& path) const;

  std::size_t size() const { return directions.size(); }
  void validate() const;
  Eigen::MatrixXd matrix() const;  // N x 3
};

struct SurfaceField {
  int width = 0;
  int height = 0;
  std::vector<double> albedo;
  std::vector<Eigen::Vector3d> normal;
  std::vector<double> height_map;
  bool highpassed = false;
  std::vector<std::uint8_t> mask;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  static SurfaceField flat(int width, int height);
};

struct InpaintResult {
  std::vector<imgcore::Field> images;
  std::vector<std::uint8_t> specular_mask;
};

// Pixels >= threshold in any image are refilled by neighbour diffusion until
// the largest per-sweep change drops below `tol`.
InpaintResult inpaint_speculars(std::span<const imgcore::Field> images, double threshold = 0.98, double tol = 1e-4);

// Per-pixel least squares I = S n, albedo = pi |n|.
SurfaceField solve_normals(std::span<const imgcore::Field> images, const LightRig& rig);

// Subtracts a Gaussian low-pass (replicate borders) from every normal component,
// re-references the residual to the frontoparallel normal, forces z >= 0 and
// renormalizes.
SurfaceField highpass_normals(const SurfaceField& sf, double sigma = 150.0);

struct Gradients {
  int width = 0;
  int height = 0;
  std::vector<double> p;  // dh/dx
  std::vector<double> q;  // dh/dy
  std::vector<std::uint8_t> clamped;
};

inline constexpr double kMinNormalZ = 1e-3;

Gradients normals_to_gradients(const SurfaceField& sf);

enum class PoissonMethod { dct, multigrid };

// Least-squares height from pixel-centred gradients: solves the Neumann
// Poisson problem lap(h) = div(p, q) and returns a zero-mean solution.
std::vector<double> solve_poisson(const Gradients& g, PoissonMethod method = PoissonMethod::dct);

// Zero-mean, max-|h|-normalized height from (ideally high-passed) normals.
std::vector<double> integrate_normals(const SurfaceField& sf, PoissonMethod method = PoissonMethod::dct);

// Zero mean, divide by max |h| (no-op on an all-zero map).
void normalize_height(std::vector<double>& h);

struct PhongParams {
  double ambient = 0.1;
  double diffuse = 0.7;
  double specular = 0.2;
  double shininess = 20.0;
  double relief = 10.0;  // height units -> pixels when deriving normals
};

// Shaded image of a height map under a directional light, viewer along +z.
// With an RGB overlay the output is shade * ((1 - alpha) + alpha * overlay).
imgcore::Field render_relit(std::span<const double> height, int width, int h, const Eigen::Vector3d& light,
                            const PhongParams& phong = {}, const imgcore::Field* overlay = nullptr,
                            double alpha = 0.0);

// Rolling photometric stereo: keeps the latest field per light and re-solves
// once every light has been seen.
class PhotometricStream {
 public:
  explicit PhotometricStream(LightRig rig);
  std::optional<SurfaceField> push(const imgcore::Field& field, std::size_t light_index);

 private:
  LightRig rig_;
  std::vector<std::optional<imgcore::Field>> latest_;
};

}  // namespace mle::pse
