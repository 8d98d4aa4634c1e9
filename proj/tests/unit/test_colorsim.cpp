#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "mle/colorsim.hpp"
#include "mle/csv.hpp"
#include "mle/error.hpp"
#include "mle/synthlab.hpp"

using namespace mle;
using namespace mle::colorsim;
using imgcore::Field;
using imgcore::SpectralCube;

namespace {

SampleSet two_tissue_samples(double sto2_normal, double sto2_lesion, std::uint64_t seed) {
  const auto t = spectral::ExtinctionTable::bundled();
  const int w = 8, h = 8;
  std::vector<double> sto2(w * h), thb(w * h, 1.0), off(w * h, 0.1);
  std::vector<std::uint8_t> normal(w * h, 0), lesion(w * h, 0);
  for (int i = 0; i < w * h; ++i) {
    const bool left = i % w < w / 2;
    sto2[i] = left ? sto2_normal : sto2_lesion;
    (left ? normal : lesion)[i] = 1;
  }
  const auto cube = synthlab::gen_spectral_scene(w, h, sto2, thb, off, t, 0.01, seed);
  Rng rng(seed);
  return sample_pixels(cube, normal, lesion, 10, rng);
}

}  // namespace

TEST_CASE("ciede2000 reference pairs") {
  const auto csv = read_csv(std::filesystem::path(MLE_TEST_DATA_DIR) / "ciede2000_pairs.csv");
  REQUIRE(csv.rows.size() >= 30);
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const Lab x{csv.number(i, "l1"), csv.number(i, "a1"), csv.number(i, "b1")};
    const Lab y{csv.number(i, "l2"), csv.number(i, "a2"), csv.number(i, "b2")};
    CHECK(std::abs(ciede2000(x, y) - csv.number(i, "de00")) < 1e-4);
    CHECK(ciede2000(x, y) == doctest::Approx(ciede2000(y, x)));
    CHECK(ciede2000(x, x) == 0.0);
  }
}

TEST_CASE("linear rgb to lab") {
  // reference values from an independent colour-science conversion (D65, 2 degree)
  const auto near = [](const Lab& v, double l, double a, double b) {
    CHECK(v.l == doctest::Approx(l).epsilon(1e-3));
    CHECK(std::abs(v.a - a) < 2e-2);
    CHECK(std::abs(v.b - b) < 2e-2);
  };
  near(rgb_to_lab({0.2, 0.4, 0.8}), 68.48677027, 0.89095169, -35.68459317);
  near(rgb_to_lab({0.5, 0.1, 0.05}), 49.66909372, 37.72453344, 33.45460059);
  near(rgb_to_lab({0.01, 0.02, 0.005}), 13.70413042, -11.03376571, 13.1462571);
  const Lab white = rgb_to_lab({1, 1, 1});
  CHECK(white.l == doctest::Approx(100.0));
  CHECK(std::abs(white.a) < 1e-3);
  CHECK(std::abs(white.b) < 1e-3);
}

TEST_CASE("normalize_pixel and display modes") {
  const auto v = normalize_pixel({0.1, 0.2, 0.4});
  CHECK(v[0] == doctest::Approx(0.2));
  CHECK(v[1] == doctest::Approx(0.4));
  CHECK(v[2] == doctest::Approx(0.8));
  CHECK(normalize_pixel({0, 0, 0}) == Eigen::Vector3d::Zero());

  Field rgb(2, 1, 3, 0.0);
  rgb(0, 0, 0) = 0.1;
  rgb(0, 0, 1) = 0.3;
  const auto pix = normalize_display(rgb, DisplayMode::pixel_max, 0.8);
  CHECK(pix.black[0] == 0);
  CHECK(pix.black[1] == 1);
  CHECK(pix.image(0, 0, 1) == doctest::Approx(0.8));
  CHECK(pix.image(1, 0, 0) == 0.0);

  const auto mean = normalize_display(rgb, DisplayMode::image_mean, 0.4);
  double s = 0.0;
  for (double x : mean.image.data()) s += x;
  CHECK(s / 6.0 == doctest::Approx(0.4));
  CHECK_THROWS_AS(normalize_display(Field(2, 2), DisplayMode::pixel_max, 0.8), ValidationError);
}

TEST_CASE("rendering") {
  const auto resp = SpectralResponse::bundled();
  const auto wl = imgcore::default_wavelengths();
  SUBCASE("omega calibration") {
    const auto full = SpectralResponse::load_csv(std::filesystem::path(MLE_ASSET_DIR) / "response_full.csv");
    for (int c = 0; c < 3; ++c) {
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < full.bands(); ++i) num += full.illum[i] * full.bayer[c][i];
      for (std::size_t i = 0; i < resp.bands(); ++i) den += resp.illum[i] * resp.bayer[c][i];
      CHECK(resp.omega[c] == doctest::Approx(num / den));
    }
  }
  SUBCASE("single wavelength cube") {
    SpectralCube cube(2, 2, wl, 0.0);
    cube.planes[3].assign(4, 0.5);
    const auto img = render_color(cube, resp);
    for (int c = 0; c < 3; ++c)
      CHECK(img(1, 1, c) == doctest::Approx(resp.omega[c] * resp.illum[3] * resp.bayer[c][3] * 0.5));
  }
  SUBCASE("linearity") {
    Rng rng(6);
    SpectralCube a(3, 3, wl), b(3, 3, wl), sum(3, 3, wl);
    for (std::size_t k = 0; k < wl.size(); ++k)
      for (std::size_t i = 0; i < 9; ++i) {
        a.planes[k][i] = rng.uniform();
        b.planes[k][i] = rng.uniform();
        sum.planes[k][i] = 2.0 * a.planes[k][i] + b.planes[k][i];
      }
    const auto ra = render_color(a, resp), rb = render_color(b, resp), rs = render_color(sum, resp);
    for (std::size_t i = 0; i < rs.data().size(); ++i)
      CHECK(rs.data()[i] == doctest::Approx(2.0 * ra.data()[i] + rb.data()[i]));
  }
  SUBCASE("nbi channel mapping") {
    const auto nbi = SpectralResponse::bundled_nbi();
    SpectralCube cube(1, 1, wl, 0.4);
    const auto cam = render_color(cube, nbi);
    const auto out = render_nbi(cube, nbi);
    CHECK(out(0, 0, 0) == cam(0, 0, 1));
    CHECK(out(0, 0, 1) == cam(0, 0, 2));
    CHECK(out(0, 0, 2) == cam(0, 0, 2));
  }
  SUBCASE("mismatched wavelengths") {
    SpectralCube cube(1, 1, {500, 600}, 0.4);
    CHECK_THROWS_AS(render_color(cube, resp), ConfigError);
    CHECK_THROWS_AS(render_weighted(cube, Eigen::MatrixXd::Ones(3, 3)), ValidationError);
  }
}

TEST_CASE("color_balance and dataset rescale") {
  Field ref(2, 2, 3, 0.6), img(2, 2, 3, 0.2);
  const auto out = color_balance(img, ref);
  for (double v : out.data()) CHECK(v == doctest::Approx(0.6));

  SpectralCube c(2, 1, {500, 600}, 0.2);
  c.planes[1] = {0.1, 0.3};
  const auto r = rescale_to_dataset(c, {0.4, 0.4});
  CHECK(r.planes[0][0] == doctest::Approx(0.4));
  CHECK(r.planes[1][1] == doctest::Approx(0.6));
  CHECK_THROWS_AS(rescale_to_dataset(c, {0.4}), ConfigError);
}

TEST_CASE("separation and spectral enhancement") {
  const auto resp = SpectralResponse::bundled();
  SUBCASE("identical sets give zero and a still optimizer") {
    const auto s = two_tissue_samples(0.7, 0.7, 1);
    SampleSet same{s.normal, s.normal};
    same.normal.resize(1);
    same.lesion.resize(1);
    CHECK(separation(resp.weights(), same) == 0.0);
    const auto r = optimize_se(same, resp.weights());
    CHECK(r.trace.size() == 1);
    CHECK_FALSE(r.aborted);
  }
  SUBCASE("gradient ascent is monotone and stays in bounds") {
    const auto s = two_tissue_samples(0.9, 0.4, 2);
    SeOptions o;
    o.iterations = 8;
    const Eigen::MatrixXd init = resp.weights() / resp.weights().maxCoeff();
    const auto r = optimize_se(s, init, o);
    CHECK_FALSE(r.aborted);
    REQUIRE(r.trace.size() >= 2);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] > r.trace[i - 1]);
    CHECK(r.trace.back() == doctest::Approx(separation(r.weights, s)));
    CHECK(r.weights.minCoeff() >= 0.0);
    CHECK(r.weights.maxCoeff() <= 1.0);
  }
  SUBCASE("sampling without replacement") {
    SpectralCube cube(4, 1, {500, 600}, 0.0);
    for (std::size_t i = 0; i < 4; ++i) cube.planes[0][i] = static_cast<double>(i);
    Rng rng(3);
    const auto s = sample_pixels(cube, {1, 1, 1, 0}, {0, 0, 0, 1}, 10, rng);
    CHECK(s.normal.size() == 3);
    CHECK(s.lesion.size() == 1);
    std::vector<double> seen;
    for (const auto& v : s.normal) seen.push_back(v[0]);
    std::sort(seen.begin(), seen.end());
    CHECK(seen == std::vector<double>{0, 1, 2});
    CHECK_THROWS_AS(sample_pixels(cube, {0, 0, 0, 0}, {0, 0, 0, 1}, 10, rng), ValidationError);
  }
  CHECK_THROWS_AS(optimize_se(SampleSet{}, Eigen::MatrixXd::Ones(2, 3)), ValidationError);
}
