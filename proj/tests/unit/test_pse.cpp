#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "mle/error.hpp"
#include "mle/pse.hpp"
#include "mle/rng.hpp"
#include "mle/synthlab.hpp"

using namespace mle;
using namespace mle::pse;
using imgcore::Field;

namespace {

LightRig four_light_rig() {
  LightRig r = LightRig::default_rig();
  const double t = 30.0 * std::numbers::pi / 180.0;
  const double a = 315.0 * std::numbers::pi / 180.0;
  r.directions.emplace_back(std::sin(t) * std::cos(a), -std::sin(t) * std::sin(a), std::cos(t));
  r.labels.push_back("L4 lower right");
  return r;
}

double mean_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// Analytic pixel-centred gradients of a Gaussian bump.
Gradients bump_gradients(int w, int h, double amp, double sigma, std::vector<double>& height) {
  Gradients g;
  g.width = w;
  g.height = h;
  g.p.resize(static_cast<std::size_t>(w) * h);
  g.q.resize(g.p.size());
  g.clamped.assign(g.p.size(), 0);
  height.resize(g.p.size());
  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double dx = x - cx, dy = y - cy;
      const double e = amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      height[i] = e;
      g.p[i] = -dx / (sigma * sigma) * e;
      g.q[i] = -dy / (sigma * sigma) * e;
    }
  return g;
}

}  // namespace

TEST_CASE("light rig") {
  const auto rig = LightRig::default_rig();
  CHECK(rig.size() == 3);
  for (const auto& d : rig.directions) {
    CHECK(d.norm() == doctest::Approx(1.0));
    CHECK(d.z() == doctest::Approx(std::cos(30.0 * std::numbers::pi / 180.0)));
  }
  CHECK(rig.directions[0].x() > 0);  // upper right
  CHECK(rig.directions[0].y() < 0);
  CHECK(rig.directions[1].x() < 0);  // upper left
  CHECK(rig.directions[2].y() > 0);  // lower left

  const auto path = std::filesystem::temp_directory_path() / "mle_rig.json";
  rig.save_json(path);
  const auto back = LightRig::load_json(path);
  for (std::size_t i = 0; i < 3; ++i) CHECK((back.directions[i] - rig.directions[i]).norm() < 1e-12);

  LightRig bad = rig;
  bad.directions[2] = bad.directions[1];
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = rig;
  bad.directions[0] *= 2.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.directions.resize(2);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  std::ofstream(path) << "{\"directions\": [[0, 0]]}";
  CHECK_THROWS_AS(LightRig::load_json(path), ConfigError);
}

TEST_CASE("solve_normals") {
  const auto rig = LightRig::default_rig();
  SUBCASE("flat plane") {
    synthlab::SurfaceSpec s;
    s.kind = synthlab::SurfaceKind::plane;
    const auto scene = synthlab::gen_lambertian_scene(s, rig, 0.8);
    const auto sf = solve_normals(scene.images, rig);
    for (std::size_t i = 0; i < sf.pixel_count(); ++i) {
      CHECK((sf.normal[i] - Eigen::Vector3d::UnitZ()).norm() < 1e-6);
      CHECK(std::abs(sf.albedo[i] - 0.8) < 1e-6);
    }
  }
  SUBCASE("sphere cap") {
    synthlab::SurfaceSpec s;
    s.kind = synthlab::SurfaceKind::hemisphere;
    s.radius = 20.0;
    const auto scene = synthlab::gen_lambertian_scene(s, rig, 0.8);
    const auto sf = solve_normals(scene.images, rig);
    int checked = 0;
    for (std::size_t i = 0; i < sf.pixel_count(); ++i) {
      const auto& n = scene.truth.normal[i];
      bool lit = true;
      for (const auto& d : rig.directions) lit = lit && d.dot(n) > 0.0;
      if (!lit) continue;
      const double ang = std::acos(std::clamp(sf.normal[i].dot(n), -1.0, 1.0)) * 180.0 / std::numbers::pi;
      CHECK(ang < 1.0);
      ++checked;
    }
    CHECK(checked > 1000);
  }
  SUBCASE("dark pixel masked") {
    std::vector<Field> imgs(3, Field(4, 4, 1, 0.3));
    for (auto& im : imgs) im(1, 2) = 0.0;
    const auto sf = solve_normals(imgs, rig);
    CHECK(sf.mask[2 * 4 + 1] == 0);
    CHECK(sf.mask[0] == 1);
  }
  SUBCASE("scale equivariance") {
    synthlab::SurfaceSpec s;
    const auto scene = synthlab::gen_lambertian_scene(s, rig, 0.6);
    auto scaled = scene.images;
    for (auto& im : scaled)
      for (double& v : im.data()) v *= 2.5;
    const auto a = solve_normals(scene.images, rig);
    const auto b = solve_normals(scaled, rig);
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
      CHECK((a.normal[i] - b.normal[i]).norm() < 1e-9);
      CHECK(b.albedo[i] == doctest::Approx(2.5 * a.albedo[i]));
    }
  }
  SUBCASE("redundant consistent light") {
    const auto rig4 = four_light_rig();
    synthlab::SurfaceSpec s;
    s.amplitude = 3.0;
    const auto s3 = synthlab::gen_lambertian_scene(s, rig, 0.7);
    const auto s4 = synthlab::gen_lambertian_scene(s, rig4, 0.7);
    const auto a = solve_normals(s3.images, rig);
    const auto b = solve_normals(s4.images, rig4);
    for (std::size_t i = 0; i < a.pixel_count(); ++i) CHECK((a.normal[i] - b.normal[i]).norm() < 1e-6);
  }
  CHECK_THROWS_AS(solve_normals(std::vector<Field>(2, Field(4, 4)), rig), ValidationError);
}

TEST_CASE("gradient conversion") {
  SurfaceField sf = SurfaceField::flat(2, 1);
  sf.normal[0] = Eigen::Vector3d(0.3, -0.4, std::sqrt(0.75)).normalized();
  sf.normal[1] = Eigen::Vector3d(1.0, 0.0, 0.0);
  const auto g = normals_to_gradients(sf);
  CHECK(g.p[0] == doctest::Approx(-sf.normal[0].x() / sf.normal[0].z()));
  CHECK(g.q[0] == doctest::Approx(-sf.normal[0].y() / sf.normal[0].z()));
  CHECK(g.clamped[0] == 0);
  CHECK(g.clamped[1] == 1);
  CHECK(std::isfinite(g.p[1]));
}

TEST_CASE("poisson integration") {
  SUBCASE("frontoparallel normals give zero height") {
    const auto h = integrate_normals(SurfaceField::flat(16, 12));
    for (double v : h) CHECK(v == 0.0);
  }
  SUBCASE("bump round trip and solver agreement") {
    std::vector<double> truth;
    const auto g = bump_gradients(64, 64, 8.0, 8.0, truth);
    auto dct = solve_poisson(g, PoissonMethod::dct);
    auto mg = solve_poisson(g, PoissonMethod::multigrid);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < dct.size(); ++i) max_diff = std::max(max_diff, std::abs(dct[i] - mg[i]));
    CHECK(max_diff < 1e-6);
    normalize_height(dct);
    normalize_height(truth);
    CHECK(mean_abs_diff(dct, truth) < 1e-3);
  }
  SUBCASE("non-square grid agreement") {
    std::vector<double> truth;
    const auto g = bump_gradients(45, 30, 3.0, 5.0, truth);
    const auto dct = solve_poisson(g, PoissonMethod::dct);
    const auto mg = solve_poisson(g, PoissonMethod::multigrid);
    for (std::size_t i = 0; i < dct.size(); ++i) CHECK(std::abs(dct[i] - mg[i]) < 1e-6);
  }
  SUBCASE("solution satisfies the discrete Neumann Poisson equation") {
    Rng rng(8);
    Gradients g;
    g.width = 9;
    g.height = 7;
    for (int i = 0; i < 63; ++i) g.p.push_back(rng.normal()), g.q.push_back(rng.normal());
    g.clamped.assign(63, 0);
    const auto h = solve_poisson(g);
    const auto at = [&](const std::vector<double>& v, int x, int y) { return v[static_cast<std::size_t>(y) * 9 + x]; };
    // flux-form divergence and Laplacian with zero boundary flux
    const auto flux = [&](int x0, int y0, int x1, int y1, bool horizontal) {
      const auto& v = horizontal ? g.p : g.q;
      return 0.5 * (at(v, x0, y0) + at(v, x1, y1));
    };
    std::vector<double> f(63), lap(63);
    double fmean = 0.0;
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 9; ++x) {
        double d = 0.0, l = 0.0;
        if (x < 8) d += flux(x, y, x + 1, y, true), l += at(h, x + 1, y) - at(h, x, y);
        if (x > 0) d -= flux(x - 1, y, x, y, true), l -= at(h, x, y) - at(h, x - 1, y);
        if (y < 6) d += flux(x, y, x, y + 1, false), l += at(h, x, y + 1) - at(h, x, y);
        if (y > 0) d -= flux(x, y - 1, x, y, false), l -= at(h, x, y) - at(h, x, y - 1);
        f[static_cast<std::size_t>(y) * 9 + x] = d;
        lap[static_cast<std::size_t>(y) * 9 + x] = l;
        fmean += d / 63.0;
      }
    for (int i = 0; i < 63; ++i) CHECK(lap[i] == doctest::Approx(f[i] - fmean).epsilon(1e-9).scale(1.0));
  }
  Gradients bad;
  bad.width = 3;
  bad.height = 3;
  CHECK_THROWS_AS(solve_poisson(bad), ValidationError);
}

TEST_CASE("highpass_normals") {
  SUBCASE("flat field stays flat") {
    const auto out = highpass_normals(SurfaceField::flat(20, 20), 5.0);
    CHECK(out.highpassed);
    for (const auto& n : out.normal) CHECK((n - Eigen::Vector3d::UnitZ()).norm() < 1e-12);
  }
  SUBCASE("global tilt is removed and outputs are unit") {
    SurfaceField sf = SurfaceField::flat(30, 30);
    for (auto& n : sf.normal) n = Eigen::Vector3d(0.2, 0.1, 1.0).normalized();
    const auto out = highpass_normals(sf, 4.0);
    for (const auto& n : out.normal) {
      CHECK(n.norm() == doctest::Approx(1.0));
      CHECK((n - Eigen::Vector3d::UnitZ()).norm() < 1e-9);
    }
  }
}

TEST_CASE("synthetic end-to-end height recovery") {
  const auto rig = LightRig::default_rig();
  synthlab::SurfaceSpec s;
  const auto scene = synthlab::gen_lambertian_scene(s, rig, 0.8);
  const auto sf = solve_normals(scene.images, rig);
  const auto h = integrate_normals(highpass_normals(sf, 20.0));
  const auto t = integrate_normals(highpass_normals(scene.truth, 20.0));
  CHECK(mean_abs_diff(h, t) < 1e-3);
  const auto raw = integrate_normals(sf);
  CHECK(mean_abs_diff(raw, scene.truth.height_map) < 1e-2);
}

TEST_CASE("inpaint_speculars") {
  std::vector<Field> imgs(3, Field(9, 9, 1, 0.4));
  imgs[1](4, 4) = 1.0;
  imgs[1](5, 4) = 0.99;
  const auto r = inpaint_speculars(imgs);
  CHECK(r.specular_mask[4 * 9 + 4] == 1);
  CHECK(r.specular_mask[4 * 9 + 5] == 1);
  CHECK(r.specular_mask[0] == 0);
  for (const auto& im : r.images) CHECK(im(4, 4) == doctest::Approx(0.4).epsilon(1e-3));
  CHECK(r.images[0](0, 0) == 0.4);
}

TEST_CASE("render_relit") {
  SUBCASE("flat height gives uniform shading") {
    const std::vector<double> h(100, 0.3);
    const auto img = render_relit(h, 10, 10, Eigen::Vector3d(0.3, 0.2, 1.0));
    for (double v : img.data()) CHECK(v == doctest::Approx(img.data()[0]));
  }
  SUBCASE("overhead light on a bump is symmetric") {
    synthlab::SurfaceSpec s;
    s.width = s.height = 33;
    s.kind = synthlab::SurfaceKind::hemisphere;
    s.radius = 10.0;
    std::vector<double> h(33 * 33);
    for (int y = 0; y < 33; ++y)
      for (int x = 0; x < 33; ++x) h[y * 33 + x] = synthlab::surface_at(s, x, y).h / 10.0;
    PhongParams ph;
    ph.relief = 1.0;
    const auto img = render_relit(h, 33, 33, Eigen::Vector3d::UnitZ(), ph);
    for (int y = 0; y < 33; ++y)
      for (int x = 0; x < 33; ++x) {
        CHECK(img(x, y) == doctest::Approx(img(32 - x, y)));
        CHECK(img(x, y) == doctest::Approx(img(x, 32 - y)));
        CHECK(img(x, y) == doctest::Approx(img(y, x)));
      }
    // apex faces the light: ambient + diffuse + specular
    CHECK(img(16, 16) == doctest::Approx(1.0));
  }
  SUBCASE("zero overlay alpha is pure shading") {
    const std::vector<double> h(16, 0.0);
    Field overlay(4, 4, 3, 0.2);
    const auto a = render_relit(h, 4, 4, Eigen::Vector3d(0, 0, 1), {}, &overlay, 0.0);
    const auto b = render_relit(h, 4, 4, Eigen::Vector3d(0, 0, 1));
    for (int c = 0; c < 3; ++c) CHECK(a(1, 1, c) == b(1, 1));
    const auto full = render_relit(h, 4, 4, Eigen::Vector3d(0, 0, 1), {}, &overlay, 1.0);
    CHECK(full(1, 1, 0) == doctest::Approx(0.2 * b(1, 1)));
  }
}

TEST_CASE("photometric stream re-solves once every light has been seen") {
  const auto rig = LightRig::default_rig();
  synthlab::SurfaceSpec s;
  const auto scene = synthlab::gen_lambertian_scene(s, rig, 0.8);
  PhotometricStream stream(rig);
  CHECK_FALSE(stream.push(scene.images[0], 0).has_value());
  CHECK_FALSE(stream.push(scene.images[1], 1).has_value());
  const auto first = stream.push(scene.images[2], 2);
  REQUIRE(first.has_value());
  const auto again = stream.push(scene.images[0], 0);
  REQUIRE(again.has_value());
  CHECK(again->normal[100] == first->normal[100]);
  CHECK_THROWS_AS(stream.push(scene.images[0], 3), ValidationError);
}
