#include "mle/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>

#include "mle/csv.hpp"
#include "mle/cube_io.hpp"
#include "mle/error.hpp"
#include "mle/image_io.hpp"
#include "mle/rng.hpp"

namespace mle::synthlab {

using imgcore::Field;
using imgcore::SpectralCube;
using nlohmann::json;

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

std::complex<double> circular(Rng& rng) {
  const double re = rng.normal() * kInvSqrt2;
  const double im = rng.normal() * kInvSqrt2;
  return {re, im};
}

// rho per pixel for one exposure; 1 means static.
Field expose(const std::vector<double>& rho, std::vector<std::complex<double>>& e, int width, int height, int steps,
             double scale, Rng& rng) {
  Field out(width, height, 1);
  const std::size_t n = e.size();
  std::vector<double> acc(n, 0.0);
  for (int s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      if (s > 0 && rho[i] < 1.0) e[i] = rho[i] * e[i] + std::sqrt(1.0 - rho[i] * rho[i]) * circular(rng);
      acc[i] += std::norm(e[i]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = scale * acc[i] / steps;
  return out;
}

double rho_for(double velocity, double tau_constant, double dt_ms) {
  if (velocity <= 0.0) return 1.0;
  return std::exp(-dt_ms * velocity / tau_constant);
}

}  // namespace

SpeckleSequence gen_dynamic_speckle(const SpeckleParams& p) {
  require(p.width > 0 && p.height > 0 && p.frames > 0, "gen_dynamic_speckle: bad dimensions");
  require(p.velocity_mm_s >= 0.0 && p.exposure_ms > 0.0 && p.dt_ms > 0.0 && p.tau_constant > 0.0,
          "gen_dynamic_speckle: velocity >= 0, exposure, dt and tau constant > 0 required");
  const std::size_t n = static_cast<std::size_t>(p.width) * p.height;
  const int steps = std::max(1, static_cast<int>(std::lround(p.exposure_ms / p.dt_ms)));
  SpeckleSequence seq;
  seq.channel_mask.assign(n, 0);
  std::vector<double> rho(n, 1.0);
  const double r = rho_for(p.velocity_mm_s, p.tau_constant, p.dt_ms);
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x)
      if (p.channel.contains(x, y)) {
        seq.channel_mask[static_cast<std::size_t>(y) * p.width + x] = 1;
        rho[static_cast<std::size_t>(y) * p.width + x] = r;
      }
  Rng rng(p.seed);
  std::vector<std::complex<double>> e(n);
  for (auto& v : e) v = circular(rng);
  for (int f = 0; f < p.frames; ++f) {
    if (f > 0)
      for (std::size_t i = 0; i < n; ++i)
        if (seq.channel_mask[i]) e[i] = circular(rng);  // frames are far apart relative to tau_c
    Field frame = expose(rho, e, p.width, p.height, steps, p.scale, rng);
    frame.frame_id = static_cast<std::uint32_t>(f);
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

HeightSample surface_at(const SurfaceSpec& s, double x, double y) {
  const double dx = x - 0.5 * (s.width - 1);
  const double dy = y - 0.5 * (s.height - 1);
  HeightSample out;
  switch (s.kind) {
    case SurfaceKind::plane:
      out = {s.tilt_x * dx + s.tilt_y * dy, s.tilt_x, s.tilt_y};
      break;
    case SurfaceKind::gaussian_bump: {
      const double h = s.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * s.sigma * s.sigma));
      out = {h, -h * dx / (s.sigma * s.sigma), -h * dy / (s.sigma * s.sigma)};
      break;
    }
    case SurfaceKind::hemisphere: {
      const double r2 = dx * dx + dy * dy;
      if (r2 < s.radius * s.radius) {
        const double h = std::sqrt(s.radius * s.radius - r2);
        out = {h, -dx / h, -dy / h};
      }
      break;
    }
    case SurfaceKind::sinusoid: {
      const double k = 2.0 * std::numbers::pi / s.period;
      out = {s.amplitude * std::sin(k * dx) * std::sin(k * dy), s.amplitude * k * std::cos(k * dx) * std::sin(k * dy),
             s.amplitude * k * std::sin(k * dx) * std::cos(k * dy)};
      break;
    }
  }
  return out;
}

LambertianScene gen_lambertian_scene(const SurfaceSpec& spec, const pse::LightRig& rig, double albedo,
                                     double noise_sigma, std::uint64_t seed) {
  rig.validate();
  require(spec.width > 0 && spec.height > 0, "gen_lambertian_scene: bad dimensions");
  require(albedo >= 0.0 && noise_sigma >= 0.0, "gen_lambertian_scene: albedo and noise must be >= 0");
  LambertianScene scene;
  scene.truth = pse::SurfaceField::flat(spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * spec.width + x;
      const HeightSample s = surface_at(spec, x, y);
      scene.truth.height_map[i] = s.h;
      scene.truth.normal[i] = Eigen::Vector3d(-s.hx, -s.hy, 1.0).normalized();
      scene.truth.albedo[i] = albedo;
    }
  pse::normalize_height(scene.truth.height_map);
  Rng rng(seed);
  for (std::size_t l = 0; l < rig.size(); ++l) {
    Field im(spec.width, spec.height, 1);
    im.frame_id = static_cast<std::uint32_t>(l);
    for (std::size_t i = 0; i < im.pixel_count(); ++i) {
      double v = albedo / std::numbers::pi * std::max(0.0, rig.directions[l].dot(scene.truth.normal[i]));
      if (noise_sigma > 0.0) v += noise_sigma * rng.normal();
      im.data()[i] = v;
    }
    scene.images.push_back(std::move(im));
  }
  return scene;
}

SpectralCube gen_spectral_scene(int width, int height, const std::vector<double>& sto2, const std::vector<double>& thb,
                                const std::vector<double>& offset, const spectral::ExtinctionTable& table,
                                double noise_rel, std::uint64_t seed) {
  table.validate();
  const std::size_t n = static_cast<std::size_t>(width) * height;
  require(width > 0 && height > 0, "gen_spectral_scene: bad dimensions");
  require(sto2.size() == n && thb.size() == n && offset.size() == n, "gen_spectral_scene: map sizes must match");
  require(noise_rel >= 0.0, "gen_spectral_scene: noise must be >= 0");
  const double ref = table.reference();
  SpectralCube cube(width, height, table.wavelengths_nm);
  Rng rng(seed);
  for (std::size_t k = 0; k < cube.bands(); ++k)
    for (std::size_t i = 0; i < n; ++i) {
      require(sto2[i] >= 0.0 && sto2[i] <= 1.0 && thb[i] >= 0.0 && offset[i] >= 0.0,
              "gen_spectral_scene: need sto2 in [0,1], thb >= 0, offset >= 0");
      const double a = thb[i] * (sto2[i] * table.eps_hbo2[k] + (1.0 - sto2[i]) * table.eps_hb[k]) / ref + offset[i];
      double r = std::pow(10.0, -a);
      if (noise_rel > 0.0) r *= 1.0 + noise_rel * rng.normal();
      cube.planes[k][i] = std::clamp(r, 1e-6, 1.0);
    }
  return cube;
}

std::vector<double> checkerboard(int width, int height, int tile, double a, double b) {
  require(tile > 0, "checkerboard: tile must be positive");
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out[static_cast<std::size_t>(y) * width + x] = ((x / tile + y / tile) % 2) ? b : a;
  return out;
}

std::vector<double> ischemia_profile(int frames, double baseline, double nadir) {
  require(frames >= 4, "ischemia_profile: need at least 4 frames");
  std::vector<double> s(static_cast<std::size_t>(frames));
  const int t1 = frames / 4;
  const int t2 = frames / 2;
  const double tau = std::max(1.0, frames / 10.0);
  for (int t = 0; t < frames; ++t) {
    if (t <= t1) s[t] = baseline;
    else if (t <= t2) s[t] = baseline + (nadir - baseline) * (t - t1) / static_cast<double>(t2 - t1);
    else s[t] = nadir + (baseline - nadir) * (1.0 - std::exp(-(t - t2) / tau));
  }
  return s;
}

std::vector<SpectralCube> gen_ischemia_sequence(int frames, int width, int height,
                                                const spectral::ExtinctionTable& table, double baseline,
                                                double nadir) {
  const auto profile = ischemia_profile(frames, baseline, nadir);
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<SpectralCube> out;
  for (double s : profile)
    out.push_back(gen_spectral_scene(width, height, std::vector<double>(n, s), std::vector<double>(n, 0.5),
                                     std::vector<double>(n, 0.1), table));
  return out;
}

MacbethChart gen_macbeth_cube(const std::filesystem::path& spectra_csv, int patch, int gap) {
  require(patch > 0 && gap >= 0, "gen_macbeth_cube: bad geometry");
  const CsvTable csv = read_csv(spectra_csv);
  if (csv.header.size() < 2 || csv.header[0] != "patch") throw ConfigError("macbeth: header must start with 'patch'");
  std::vector<double> wl;
  for (std::size_t c = 1; c < csv.header.size(); ++c) {
    const auto& h = csv.header[c];
    if (h.size() < 2 || h[0] != 'r') throw ConfigError("macbeth: reflectance columns must be named r<nm>");
    wl.push_back(std::stod(h.substr(1)));
  }
  if (csv.rows.size() != 24) throw ConfigError("macbeth: expected 24 patches");
  const int cols = 6;
  const int rows = 4;
  MacbethChart chart;
  chart.cube = SpectralCube(cols * patch + (cols + 1) * gap, rows * patch + (rows + 1) * gap, wl);
  std::fill(chart.cube.mask.begin(), chart.cube.mask.end(), std::uint8_t{0});
  for (std::size_t p = 0; p < 24; ++p) {
    const int px = gap + static_cast<int>(p % cols) * (patch + gap);
    const int py = gap + static_cast<int>(p / cols) * (patch + gap);
    chart.patches.push_back({px, py, patch, patch});
    chart.names.push_back(csv.rows[p][0]);
    for (std::size_t k = 0; k < wl.size(); ++k) {
      const double r = std::stod(csv.rows[p][k + 1]);
      if (!(r > 0.0 && r <= 1.0)) throw ConfigError("macbeth: reflectances must lie in (0, 1]");
      for (int y = py; y < py + patch; ++y)
        for (int x = px; x < px + patch; ++x) {
          chart.cube.at(k, x, y) = r;
          chart.cube.mask[static_cast<std::size_t>(y) * chart.cube.width + x] = 1;
        }
    }
  }
  return chart;
}

VesselScene gen_vessel_sequence(const VesselParams& p) {
  require(p.width > 16 && p.height > 16 && p.frames > 0, "gen_vessel_sequence: bad dimensions");
  const std::size_t n = static_cast<std::size_t>(p.width) * p.height;
  const double cy = 0.5 * (p.height - 1);
  const int centre = p.frames / 2;
  Rng rng(p.seed);
  std::vector<std::pair<double, double>> shift(static_cast<std::size_t>(p.frames));
  for (int f = 0; f < p.frames; ++f) {
    const double tx = (2.0 * rng.uniform() - 1.0) * p.jitter_px;
    const double ty = (2.0 * rng.uniform() - 1.0) * p.jitter_px;
    shift[static_cast<std::size_t>(f)] = f == centre ? std::make_pair(0.0, 0.0) : std::make_pair(tx, ty);
  }
  const auto texture = [&](double x, double y) {
    const double dy = y - cy;
    return 0.5 + 0.1 * std::sin(2.0 * std::numbers::pi * x / 23.0 + 0.3) * std::sin(2.0 * std::numbers::pi * y / 31.0) +
           0.08 * std::cos(2.0 * std::numbers::pi * (x + y) / 17.0) -
           0.25 * std::exp(-dy * dy / (2.0 * p.vessel_halfwidth * p.vessel_halfwidth));
  };
  VesselScene scene;
  const int steps = std::max(1, static_cast<int>(std::lround(p.exposure_ms / 0.1)));
  const double rho_v = rho_for(p.vessel_velocity, 2.0, 0.1);
  const double rho_b = rho_for(p.background_velocity, 2.0, 0.1);
  const Eigen::Vector3d tint(1.0, 0.7, 0.6);
  for (int f = 0; f < p.frames; ++f) {
    const auto [tx, ty] = shift[static_cast<std::size_t>(f)];
    std::vector<double> rho(n);
    Field color(p.width, p.height, 3);
    for (int y = 0; y < p.height; ++y)
      for (int x = 0; x < p.width; ++x) {
        const double rx = x - tx;
        const double ry = y - ty;
        rho[static_cast<std::size_t>(y) * p.width + x] = std::abs(ry - cy) < p.vessel_halfwidth ? rho_v : rho_b;
        const double t = texture(rx, ry);
        for (int c = 0; c < 3; ++c) color(x, y, c) = t * tint[c];
      }
    std::vector<std::complex<double>> e(n);
    for (auto& v : e) v = circular(rng);
    Field speckle = expose(rho, e, p.width, p.height, steps, 0.05, rng);
    speckle.frame_id = static_cast<std::uint32_t>(2 * f);
    speckle.parity = imgcore::Parity::odd;
    color.frame_id = static_cast<std::uint32_t>(2 * f + 1);
    color.parity = imgcore::Parity::even;
    scene.speckle.push_back(std::move(speckle));
    scene.color.push_back(std::move(color));
    scene.shifts.push_back(imgcore::AffineTransform::translation(-tx, -ty));
  }
  scene.vessel_roi.assign(n, 0);
  scene.background_roi.assign(n, 0);
  for (int y = 8; y < p.height - 8; ++y)
    for (int x = 8; x < p.width - 8; ++x) {
      const double dy = std::abs(y - cy);
      const std::size_t i = static_cast<std::size_t>(y) * p.width + x;
      if (dy < p.vessel_halfwidth - 2.0) scene.vessel_roi[i] = 1;
      if (dy > p.vessel_halfwidth + 6.0) scene.background_roi[i] = 1;
    }
  return scene;
}

PhantomKind parse_kind(const std::string& name) {
  if (name == "speckle_flow") return PhantomKind::speckle_flow;
  if (name == "lambertian_surface") return PhantomKind::lambertian_surface;
  if (name == "spectral_scene") return PhantomKind::spectral_scene;
  if (name == "macbeth") return PhantomKind::macbeth;
  throw ConfigError("phantom: unknown kind '" + name + "'");
}

std::string kind_name(PhantomKind k) {
  switch (k) {
    case PhantomKind::speckle_flow: return "speckle_flow";
    case PhantomKind::lambertian_surface: return "lambertian_surface";
    case PhantomKind::spectral_scene: return "spectral_scene";
    case PhantomKind::macbeth: return "macbeth";
  }
  return "";
}

PhantomSpec PhantomSpec::from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("phantom: spec needs a 'kind'");
  PhantomSpec s;
  try {
    s.kind = parse_kind(j.at("kind").get<std::string>());
    s.seed = j.value("seed", s.seed);
    if (j.contains("params")) s.params = j.at("params");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("phantom: ") + e.what());
  }
  if (!s.params.is_object()) throw ConfigError("phantom: 'params' must be an object");
  return s;
}

json PhantomSpec::to_json() const { return {{"kind", kind_name(kind)}, {"seed", seed}, {"params", params}}; }

namespace {

SurfaceKind parse_surface(const std::string& s) {
  if (s == "plane") return SurfaceKind::plane;
  if (s == "gaussian_bump") return SurfaceKind::gaussian_bump;
  if (s == "hemisphere") return SurfaceKind::hemisphere;
  if (s == "sinusoid") return SurfaceKind::sinusoid;
  throw ConfigError("phantom: unknown surface '" + s + "'");
}

Field plane_field(const std::vector<double>& v, int w, int h) {
  Field f(w, h, 1);
  std::copy(v.begin(), v.end(), f.data().begin());
  return f;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::vector<std::string> write_phantom(const PhantomSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  const auto& prm = spec.params;
  const auto emit = [&](const std::string& name) {
    files.push_back(name);
    return dir / name;
  };
  try {
    switch (spec.kind) {
      case PhantomKind::lambertian_surface: {
        SurfaceSpec s;
        s.kind = parse_surface(prm.value("surface", std::string("gaussian_bump")));
        s.width = prm.value("width", s.width);
        s.height = prm.value("height", s.height);
        s.amplitude = prm.value("amplitude", s.amplitude);
        s.sigma = prm.value("sigma", s.sigma);
        s.radius = prm.value("radius", s.radius);
        s.period = prm.value("period", s.period);
        const double highpass = prm.value("highpass_sigma", 150.0);
        const auto rig = pse::LightRig::default_rig();
        const auto scene = gen_lambertian_scene(s, rig, prm.value("albedo", 0.8), prm.value("noise_sigma", 0.0), spec.seed);
        rig.save_json(emit("rig.json"));
        io::write_cube(emit("images.mle"), io::to_cube(std::span<const Field>(scene.images)));
        for (std::size_t l = 0; l < scene.images.size(); ++l)
          io::write_png16(emit("image_" + std::to_string(l) + ".png"), scene.images[l]);
        std::vector<Field> truth;
        truth.push_back(plane_field(scene.truth.height_map, s.width, s.height));
        truth.push_back(plane_field(pse::integrate_normals(pse::highpass_normals(scene.truth, highpass)), s.width, s.height));
        for (int c = 0; c < 3; ++c) {
          std::vector<double> comp(scene.truth.pixel_count());
          for (std::size_t i = 0; i < comp.size(); ++i) comp[i] = scene.truth.normal[i][c];
          truth.push_back(plane_field(comp, s.width, s.height));
        }
        auto cube = io::to_cube(std::span<const Field>(truth));
        cube.metadata = {{"kind", "pse_truth"},
                         {"planes", {"height", "height_highpassed", "nx", "ny", "nz"}},
                         {"highpass_sigma", highpass}};
        io::write_cube(emit("truth.mle"), cube);
        break;
      }
      case PhantomKind::speckle_flow: {
        SpeckleParams p;
        p.width = prm.value("width", p.width);
        p.height = prm.value("height", p.height);
        p.frames = prm.value("frames", p.frames);
        p.velocity_mm_s = prm.value("velocity_mm_s", p.velocity_mm_s);
        p.exposure_ms = prm.value("exposure_ms", p.exposure_ms);
        p.channel = {p.width / 4, 0, p.width / 2, p.height};
        p.seed = spec.seed;
        const auto seq = gen_dynamic_speckle(p);
        io::write_cube(emit("frames.mle"), io::to_cube(std::span<const Field>(seq.frames)));
        Field mask(p.width, p.height, 1);
        for (std::size_t i = 0; i < mask.pixel_count(); ++i) mask.data()[i] = seq.channel_mask[i];
        io::write_png8(emit("channel_mask.png"), mask);
        break;
      }
      case PhantomKind::spectral_scene: {
        const int w = prm.value("width", 64);
        const int h = prm.value("height", 64);
        const auto sto2 = checkerboard(w, h, prm.value("tile", 8), prm.value("sto2_a", 0.3), prm.value("sto2_b", 0.7));
        const std::size_t n = static_cast<std::size_t>(w) * h;
        const auto cube = gen_spectral_scene(w, h, sto2, std::vector<double>(n, prm.value("thb", 0.5)),
                                             std::vector<double>(n, prm.value("offset", 0.1)),
                                             spectral::ExtinctionTable::bundled(), prm.value("noise_rel", 0.0), spec.seed);
        io::write_cube(emit("cube.mle"), io::to_cube(cube));
        io::write_cube(emit("truth_sto2.mle"), io::to_cube(plane_field(sto2, w, h)));
        break;
      }
      case PhantomKind::macbeth: {
        const std::string spectra = prm.value("spectra", (std::filesystem::path(MLE_ASSET_DIR) / "macbeth_spectra.csv").string());
        const auto chart = gen_macbeth_cube(spectra, prm.value("patch", 16), prm.value("gap", 4));
        io::write_cube(emit("cube.mle"), io::to_cube(chart.cube));
        json rois = json::array();
        for (std::size_t i = 0; i < chart.patches.size(); ++i) {
          const auto& r = chart.patches[i];
          rois.push_back({{"name", chart.names[i]}, {"x", r.x}, {"y", r.y}, {"width", r.width}, {"height", r.height}});
        }
        write_text(emit("patches.json"), rois.dump(2) + "\n");
        break;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("phantom params: ") + e.what());
  }
  write_text(emit("phantom.json"), spec.to_json().dump(2) + "\n");
  return files;
}

}  // namespace mle::synthlab
