#include "mle/pse.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include "json.hpp"
#include <numbers>

#include "mle/error.hpp"
#include "mle/parallel.hpp"

namespace mle::pse {

using imgcore::Field;

namespace {

Eigen::Vector3d tilted(double azimuth_deg, double polar_deg) {
  const double a = azimuth_deg * std::numbers::pi / 180.0;
  const double t = polar_deg * std::numbers::pi / 180.0;
  // y grows downward in pixel coordinates, so "upper" means negative y
  return {std::sin(t) * std::cos(a), -std::sin(t) * std::sin(a), std::cos(t)};
}

Field mono(const Field& f) { return f.channels() == 1 ? f : imgcore::luminance(f); }

}  // namespace

LightRig LightRig::default_rig() {
  LightRig r;
  r.directions = {tilted(45.0, 30.0), tilted(135.0, 30.0), tilted(225.0, 30.0)};
  r.labels = {"L1 upper right", "L2 upper left", "L3 lower left"};
  return r;
}

LightRig LightRig::load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("light rig: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("light rig: invalid JSON: ") + e.what());
  }
  LightRig r;
  if (!j.contains("directions") || !j["directions"].is_array()) throw ConfigError("light rig: missing 'directions'");
  for (const auto& d : j["directions"]) {
    if (!d.is_array() || d.size() != 3) throw ConfigError("light rig: each direction needs 3 components");
    r.directions.emplace_back(d[0].get<double>(), d[1].get<double>(), d[2].get<double>());
  }
  if (j.contains("labels")) {
    r.labels = j["labels"].get<std::vector<std::string>>();
  } else {
    for (std::size_t i = 0; i < r.directions.size(); ++i) r.labels.push_back("L" + std::to_string(i + 1));
  }
  r.validate();
  return r;
}

void LightRig::save_json(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["directions"] = nlohmann::json::array();
  for (const auto& d : directions) j["directions"].push_back({d.x(), d.y(), d.z()});
  j["labels"] = labels;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("light rig: cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void LightRig::validate() const {
  if (directions.size() < 3) throw ConfigError("light rig: at least 3 light directions are required");
  if (!labels.empty() && labels.size() != directions.size())
    throw ConfigError("light rig: label count does not match direction count");
  for (const auto& d : directions)
    if (std::abs(d.norm() - 1.0) > 1e-9) throw ConfigError("light rig: directions must be unit vectors");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(matrix());
  lu.setThreshold(1e-10);
  if (lu.rank() < 3) throw ConfigError("light rig: direction matrix is rank deficient");
}

Eigen::MatrixXd LightRig::matrix() const {
  Eigen::MatrixXd s(static_cast<Eigen::Index>(directions.size()), 3);
  for (std::size_t i = 0; i < directions.size(); ++i) s.row(static_cast<Eigen::Index>(i)) = directions[i].transpose();
  return s;
}

SurfaceField SurfaceField::flat(int width, int height) {
  SurfaceField sf;
  sf.width = width;
  sf.height = height;
  const std::size_t n = sf.pixel_count();
  sf.albedo.assign(n, 0.0);
  sf.normal.assign(n, Eigen::Vector3d::UnitZ());
  sf.height_map.assign(n, 0.0);
  sf.mask.assign(n, 1);
  return sf;
}

InpaintResult inpaint_speculars(std::span<const Field> images, double threshold, double tol) {
  require(!images.empty(), "inpaint_speculars: no images");
  const int w = images[0].width();
  const int h = images[0].height();
  const std::size_t n = images[0].pixel_count();
  InpaintResult res;
  res.specular_mask.assign(n, 0);
  for (const auto& im : images) {
    require(im.width() == w && im.height() == h, "inpaint_speculars: images differ in size");
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < im.channels(); ++c)
        if (im.data()[i * im.channels() + c] >= threshold) res.specular_mask[i] = 1;
  }
  std::vector<std::size_t> holes;
  for (std::size_t i = 0; i < n; ++i)
    if (res.specular_mask[i]) holes.push_back(i);
  for (const auto& im : images) {
    Field out = im;
    const int nc = im.channels();
    if (holes.size() == n) {
      res.images.push_back(std::move(out));
      continue;
    }
    // initial guess: mean of the unsaturated pixels
    for (int c = 0; c < nc; ++c) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (!res.specular_mask[i]) sum += im.data()[i * nc + c];
      const double mean = sum / static_cast<double>(n - holes.size());
      for (std::size_t i : holes) out.data()[i * nc + c] = mean;
    }
    // Gauss-Seidel sweeps of the discrete Laplace equation over the holes
    for (int sweep = 0; sweep < 100000; ++sweep) {
      double change = 0.0;
      for (std::size_t i : holes) {
        const int x = static_cast<int>(i % w);
        const int y = static_cast<int>(i / w);
        for (int c = 0; c < nc; ++c) {
          double sum = 0.0;
          int cnt = 0;
          if (x > 0) sum += out(x - 1, y, c), ++cnt;
          if (x + 1 < w) sum += out(x + 1, y, c), ++cnt;
          if (y > 0) sum += out(x, y - 1, c), ++cnt;
          if (y + 1 < h) sum += out(x, y + 1, c), ++cnt;
          if (cnt == 0) continue;
          const double v = sum / cnt;
          change = std::max(change, std::abs(v - out(x, y, c)));
          out(x, y, c) = v;
        }
      }
      if (change < tol) break;
    }
    res.images.push_back(std::move(out));
  }
  return res;
}

SurfaceField solve_normals(std::span<const Field> images, const LightRig& rig) {
  rig.validate();
  if (images.size() != rig.size())
    throw ValidationError("solve_normals: image count does not match the number of lights");
  std::vector<Field> mono_images;
  for (const auto& im : images) {
    mono_images.push_back(mono(im));
    require(mono_images.back().width() == images[0].width() && mono_images.back().height() == images[0].height(),
            "solve_normals: images differ in size");
  }
  const Eigen::MatrixXd s = rig.matrix();
  const Eigen::MatrixXd pinv = (s.transpose() * s).inverse() * s.transpose();
  SurfaceField sf = SurfaceField::flat(images[0].width(), images[0].height());
  const std::size_t n = sf.pixel_count();
  const auto k = static_cast<Eigen::Index>(images.size());
  parallel_for(n, [&](std::size_t i0, std::size_t i1) {
    Eigen::VectorXd intens(k);
    for (std::size_t i = i0; i < i1; ++i) {
      bool ok = true;
      for (Eigen::Index j = 0; j < k; ++j) {
        const auto& im = mono_images[static_cast<std::size_t>(j)];
        ok = ok && im.mask()[i];
        intens[j] = im.data()[i];
      }
      const Eigen::Vector3d nv = pinv * intens;
      const double len = nv.norm();
      if (!ok || !(len >= 1e-6)) {
        sf.mask[i] = 0;
        continue;
      }
      sf.normal[i] = nv / len;
      sf.albedo[i] = std::numbers::pi * len;
    }
  });
  return sf;
}

SurfaceField highpass_normals(const SurfaceField& sf, double sigma) {
  require(sigma > 0.0, "highpass_normals: sigma must be positive");
  SurfaceField out = sf;
  const std::size_t n = sf.pixel_count();
  std::vector<double> comp(n);
  std::array<std::vector<double>, 3> low;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) comp[i] = sf.normal[i][c];
    low[static_cast<std::size_t>(c)] = imgcore::gaussian_blur(comp, sf.width, sf.height, sigma);
  }
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector3d v(sf.normal[i][0] - low[0][i], sf.normal[i][1] - low[1][i], sf.normal[i][2] - low[2][i] + 1.0);
    v.z() = std::max(v.z(), 0.0);
    const double len = v.norm();
    out.normal[i] = len > 0.0 ? Eigen::Vector3d(v / len) : Eigen::Vector3d::UnitZ();
  }
  out.highpassed = true;
  return out;
}

Gradients normals_to_gradients(const SurfaceField& sf) {
  Gradients g;
  g.width = sf.width;
  g.height = sf.height;
  const std::size_t n = sf.pixel_count();
  g.p.assign(n, 0.0);
  g.q.assign(n, 0.0);
  g.clamped.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!sf.mask.empty() && !sf.mask[i]) continue;
    const auto& nv = sf.normal[i];
    double nz = nv.z();
    if (nz < kMinNormalZ) {
      nz = kMinNormalZ;
      g.clamped[i] = 1;
    }
    g.p[i] = -nv.x() / nz;
    g.q[i] = -nv.y() / nz;
  }
  return g;
}

void normalize_height(std::vector<double>& h) {
  if (h.empty()) return;
  double mean = 0.0;
  for (double v : h) mean += v;
  mean /= static_cast<double>(h.size());
  double peak = 0.0;
  for (double& v : h) {
    v -= mean;
    peak = std::max(peak, std::abs(v));
  }
  if (peak <= 0.0) return;
  for (double& v : h) v /= peak;
}

std::vector<double> integrate_normals(const SurfaceField& sf, PoissonMethod method) {
  auto h = solve_poisson(normals_to_gradients(sf), method);
  normalize_height(h);
  return h;
}

Field render_relit(std::span<const double> height, int width, int h, const Eigen::Vector3d& light,
                   const PhongParams& phong, const Field* overlay, double alpha) {
  require(width > 0 && h > 0 && height.size() == static_cast<std::size_t>(width) * h,
          "render_relit: height map size mismatch");
  require(light.norm() > 0.0, "render_relit: light direction must be non-zero");
  require(alpha >= 0.0 && alpha <= 1.0, "render_relit: alpha must be in [0, 1]");
  if (overlay)
    require(overlay->width() == width && overlay->height() == h && overlay->channels() == 3,
            "render_relit: overlay must be RGB with the height map's size");
  const Eigen::Vector3d l = light.normalized();
  const Eigen::Vector3d view = Eigen::Vector3d::UnitZ();
  Field out(width, h, overlay ? 3 : 1);
  const auto at = [&](int x, int y) {
    return height[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * width + std::clamp(x, 0, width - 1)];
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < width; ++x) {
      const double hx = 0.5 * (at(x + 1, y) - at(x - 1, y));
      const double hy = 0.5 * (at(x, y + 1) - at(x, y - 1));
      const Eigen::Vector3d nv = Eigen::Vector3d(-phong.relief * hx, -phong.relief * hy, 1.0).normalized();
      const double ndotl = nv.dot(l);
      double shade = phong.ambient + phong.diffuse * std::max(ndotl, 0.0);
      if (ndotl > 0.0) {
        const Eigen::Vector3d r = 2.0 * ndotl * nv - l;
        shade += phong.specular * std::pow(std::max(r.dot(view), 0.0), phong.shininess);
      }
      shade = std::clamp(shade, 0.0, 1.0);
      if (!overlay) {
        out(x, y) = shade;
        continue;
      }
      for (int c = 0; c < 3; ++c)
        out(x, y, c) = std::clamp(shade * ((1.0 - alpha) + alpha * (*overlay)(x, y, c)), 0.0, 1.0);
    }
  return out;
}

PhotometricStream::PhotometricStream(LightRig rig) : rig_(std::move(rig)) {
  rig_.validate();
  latest_.resize(rig_.size());
}

std::optional<SurfaceField> PhotometricStream::push(const Field& field, std::size_t light_index) {
  if (light_index >= latest_.size()) throw ValidationError("photometric stream: light index out of range");
  latest_[light_index] = field;
  std::vector<Field> imgs;
  for (const auto& f : latest_) {
    if (!f) return std::nullopt;
    imgs.push_back(*f);
  }
  return solve_normals(imgs, rig_);
}

}  // namespace mle::pse
