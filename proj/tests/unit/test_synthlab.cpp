#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

#include "doctest.h"
#include "mle/error.hpp"
#include "mle/lsci.hpp"
#include "mle/spectral.hpp"
#include "mle/synthlab.hpp"

using namespace mle;
using namespace mle::synthlab;
using imgcore::Field;
namespace fs = std::filesystem;

namespace {

double masked_mean_k(const lsci::ContrastMap& k, const std::vector<std::uint8_t>& sel, bool inside) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < k.k.size(); ++i)
    if (k.mask[i] && (sel[i] != 0) == inside) s += k.k[i], ++n;
  return s / static_cast<double>(n);
}

bool same_pixels(const Field& a, const Field& b) {
  return std::equal(a.data().begin(), a.data().end(), b.data().begin(), b.data().end());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("dynamic speckle") {
  SpeckleParams p;
  p.width = p.height = 64;
  p.channel = {16, 0, 32, 64};
  SUBCASE("determinism") {
    const auto a = gen_dynamic_speckle(p), b = gen_dynamic_speckle(p);
    CHECK(same_pixels(a.frames[0], b.frames[0]));
    p.seed = 2;
    CHECK_FALSE(same_pixels(gen_dynamic_speckle(p).frames[0], a.frames[0]));
  }
  SUBCASE("longer exposure lowers channel contrast") {
    p.velocity_mm_s = 1.0;
    p.exposure_ms = 3.0;
    const auto k3 = lsci::speckle_contrast(gen_dynamic_speckle(p).frames[0]);
    p.exposure_ms = 6.0;
    const auto seq = gen_dynamic_speckle(p);
    const auto k6 = lsci::speckle_contrast(seq.frames[0]);
    CHECK(masked_mean_k(k6, seq.channel_mask, true) < masked_mean_k(k3, seq.channel_mask, true));
  }
  SUBCASE("channel and background separate more with velocity") {
    double prev_gap = -1.0;
    for (double v : {0.0, 0.4, 1.0, 2.2}) {
      p.velocity_mm_s = v;
      const auto seq = gen_dynamic_speckle(p);
      const auto k = lsci::speckle_contrast(seq.frames[0]);
      const double gap = masked_mean_k(k, seq.channel_mask, false) - masked_mean_k(k, seq.channel_mask, true);
      if (v == 0.0) CHECK(std::abs(gap) < 0.1);
      CHECK(gap > prev_gap);
      prev_gap = gap;
    }
  }
  SUBCASE("static background is identical across frames") {
    p.frames = 3;
    const auto seq = gen_dynamic_speckle(p);
    for (std::size_t i = 0; i < seq.channel_mask.size(); ++i)
      if (!seq.channel_mask[i]) CHECK(seq.frames[2].data()[i] == seq.frames[0].data()[i]);
  }
  p.exposure_ms = 0.0;
  CHECK_THROWS_AS(gen_dynamic_speckle(p), ValidationError);
}

TEST_CASE("lambertian scene") {
  const auto rig = pse::LightRig::default_rig();
  SUBCASE("plane follows the cosine law") {
    SurfaceSpec s;
    s.kind = SurfaceKind::plane;
    const auto scene = gen_lambertian_scene(s, rig, 0.5);
    for (std::size_t l = 0; l < 3; ++l) {
      const double expect = 0.5 / std::numbers::pi * rig.directions[l].z();
      for (double v : scene.images[l].data()) CHECK(v == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  SUBCASE("hemisphere matches the analytic render") {
    SurfaceSpec s;
    s.kind = SurfaceKind::hemisphere;
    const auto scene = gen_lambertian_scene(s, rig, 0.9);
    for (int y = 0; y < s.height; y += 3)
      for (int x = 0; x < s.width; x += 3) {
        const auto hs = surface_at(s, x, y);
        const Eigen::Vector3d n = Eigen::Vector3d(-hs.hx, -hs.hy, 1.0).normalized();
        for (std::size_t l = 0; l < 3; ++l) {
          const double expect = 0.9 / std::numbers::pi * std::max(0.0, rig.directions[l].dot(n));
          CHECK(std::abs(scene.images[l](x, y) - expect) < 1e-9);
        }
      }
  }
  SUBCASE("noise is seeded") {
    SurfaceSpec s;
    const auto a = gen_lambertian_scene(s, rig, 0.8, 0.01, 4);
    const auto b = gen_lambertian_scene(s, rig, 0.8, 0.01, 4);
    const auto c = gen_lambertian_scene(s, rig, 0.8, 0.01, 5);
    CHECK(same_pixels(a.images[1], b.images[1]));
    CHECK_FALSE(same_pixels(a.images[1], c.images[1]));
  }
  SUBCASE("analytic surface derivatives") {
    for (auto kind : {SurfaceKind::gaussian_bump, SurfaceKind::sinusoid, SurfaceKind::hemisphere}) {
      SurfaceSpec s;
      s.kind = kind;
      const double h = 1e-5;
      for (double x : {20.3, 31.7, 40.1})
        for (double y : {25.2, 33.9}) {
          const auto c = surface_at(s, x, y);
          CHECK(c.hx == doctest::Approx((surface_at(s, x + h, y).h - surface_at(s, x - h, y).h) / (2 * h)).epsilon(1e-5));
          CHECK(c.hy == doctest::Approx((surface_at(s, x, y + h).h - surface_at(s, x, y - h).h) / (2 * h)).epsilon(1e-5));
        }
    }
  }
}

TEST_CASE("spectral scene") {
  const auto t = spectral::ExtinctionTable::bundled();
  const int w = 16, h = 16;
  const std::vector<double> thb(w * h, 0.5), off(w * h, 0.1);
  SUBCASE("fully oxygenated") {
    const auto cube = gen_spectral_scene(w, h, std::vector<double>(w * h, 1.0), thb, off, t);
    const auto m = spectral::unmix(spectral::absorbance(cube), t);
    for (double v : m.sto2) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("checkerboard recovered exactly") {
    const auto truth = checkerboard(w, h, 4, 0.3, 0.7);
    CHECK(truth[0] == 0.3);
    CHECK(truth[4] == 0.7);
    CHECK(truth[4 * w] == 0.7);
    const auto m = spectral::unmix(spectral::absorbance(gen_spectral_scene(w, h, truth, thb, off, t)), t);
    for (std::size_t i = 0; i < truth.size(); ++i) CHECK(std::abs(m.sto2[i] - truth[i]) < 1e-9);
  }
  SUBCASE("one percent noise") {
    const auto truth = checkerboard(64, 64, 8, 0.3, 0.7);
    const std::vector<double> thb2(64 * 64, 0.5), off2(64 * 64, 0.1);
    const auto m = spectral::unmix(spectral::absorbance(gen_spectral_scene(64, 64, truth, thb2, off2, t, 0.01, 3)), t);
    double mae = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) mae += std::abs(m.sto2[i] - truth[i]);
    CHECK(mae / static_cast<double>(truth.size()) < 0.02);
  }
  CHECK_THROWS_AS(gen_spectral_scene(w, h, std::vector<double>(3, 1.0), thb, off, t), ValidationError);
}

TEST_CASE("ischemia profile") {
  const auto p = ischemia_profile(40, 0.7, 0.35);
  CHECK(p.front() == doctest::Approx(0.7));
  CHECK(*std::min_element(p.begin(), p.end()) == doctest::Approx(0.35));
  CHECK(p.back() > 0.6);
}

TEST_CASE("macbeth chart") {
  const auto chart = gen_macbeth_cube(fs::path(MLE_ASSET_DIR) / "macbeth_spectra.csv");
  REQUIRE(chart.patches.size() == 24);
  CHECK(chart.cube.wavelengths_nm == imgcore::default_wavelengths());
  CHECK(chart.cube.mask[0] == 0);
  const auto patch_spectrum = [&](const std::string& name) {
    const auto it = std::find(chart.names.begin(), chart.names.end(), name);
    REQUIRE(it != chart.names.end());
    const auto& r = chart.patches[static_cast<std::size_t>(it - chart.names.begin())];
    std::vector<double> s;
    for (std::size_t k = 0; k < chart.cube.bands(); ++k) s.push_back(chart.cube.at(k, r.x + r.width / 2, r.y + r.height / 2));
    return s;
  };
  const auto gray = patch_spectrum("neutral 5 (.70 D)");
  const auto [lo, hi] = std::minmax_element(gray.begin() + 1, gray.end());
  CHECK(*hi / *lo < 1.1);
  const auto red = patch_spectrum("red");
  for (std::size_t k = 0; k < 4; ++k) CHECK(red[k] < 0.1);
  CHECK(red[6] > 0.5);
  CHECK(red[7] > 0.5);
}

TEST_CASE("vessel scene") {
  VesselParams p;
  p.frames = 5;
  const auto s = gen_vessel_sequence(p);
  CHECK(s.speckle.size() == 5);
  CHECK(s.color.size() == 5);
  CHECK(s.shifts[2].matrix() == imgcore::AffineTransform::identity().matrix());
  std::size_t both = 0, vessel = 0;
  for (std::size_t i = 0; i < s.vessel_roi.size(); ++i) {
    both += s.vessel_roi[i] && s.background_roi[i];
    vessel += s.vessel_roi[i];
  }
  CHECK(both == 0);
  CHECK(vessel >= 25);
  CHECK(same_pixels(gen_vessel_sequence(p).speckle[4], s.speckle[4]));
}

TEST_CASE("phantom files are deterministic") {
  for (const auto kind : {"speckle_flow", "lambertian_surface", "spectral_scene", "macbeth"}) {
    PhantomSpec spec;
    spec.kind = parse_kind(kind);
    spec.seed = 7;
    spec.params = {{"width", 24}, {"height", 24}};
    if (spec.kind == PhantomKind::macbeth) spec.params = {{"patch", 4}, {"gap", 1}};
    CHECK(kind_name(spec.kind) == kind);
    const fs::path a = fs::temp_directory_path() / "mle_synth_a", b = fs::temp_directory_path() / "mle_synth_b";
    fs::remove_all(a);
    fs::remove_all(b);
    const auto files = write_phantom(spec, a);
    CHECK(write_phantom(PhantomSpec::from_json(spec.to_json()), b) == files);
    REQUIRE_FALSE(files.empty());
    for (const auto& f : files) CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK_THROWS_AS(parse_kind("teapot"), ConfigError);
}
