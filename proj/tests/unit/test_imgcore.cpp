#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mle/error.hpp"
#include "mle/imgcore.hpp"
#include "mle/rng.hpp"

using namespace mle;
using namespace mle::imgcore;

namespace {

Field random_field(int w, int h, std::uint64_t seed, int channels = 1) {
  Rng rng(seed);
  Field f(w, h, channels);
  for (double& v : f.data()) v = rng.uniform();
  return f;
}

// Analytic texture of Gaussian blobs sampled at t(x, y), so a transformed copy
// is exact rather than interpolated.
Field texture(int w, int h, std::uint64_t seed, const AffineTransform& t = AffineTransform::identity()) {
  Rng rng(seed);
  struct Blob {
    double x, y, s, a;
  };
  std::vector<Blob> blobs(40);
  for (auto& b : blobs) b = {rng.uniform() * w, rng.uniform() * h, 3.0 + 3.0 * rng.uniform(), rng.uniform() - 0.5};
  Field f(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto p = t.apply(x, y);
      double v = 0.5;
      for (const auto& b : blobs)
        v += b.a * std::exp(-0.5 * ((p.x() - b.x) * (p.x() - b.x) + (p.y() - b.y) * (p.y() - b.y)) / (b.s * b.s));
      f(x, y) = v;
    }
  return f;
}

// Dense 2-D convolution with replicate borders.
double dense_convolve_at(const Field& f, const std::vector<double>& k1, int x, int y) {
  const int r = static_cast<int>(k1.size()) / 2;
  double s = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const int xx = std::clamp(x + dx, 0, f.width() - 1);
      const int yy = std::clamp(y + dy, 0, f.height() - 1);
      s += k1[dx + r] * k1[dy + r] * f(xx, yy);
    }
  return s;
}

}  // namespace

TEST_CASE("subtract_dark") {
  Field frame(4, 3, 1, 0.5);
  Field dark(4, 3, 1, 0.1);
  const Field out = subtract_dark(frame, dark);
  for (double v : out.data()) CHECK(v == doctest::Approx(0.4).epsilon(1e-15));

  const Field same = subtract_dark(frame, frame);
  for (double v : same.data()) CHECK(v == 0.0);

  const Field zero = subtract_dark(frame, Field(4, 3, 1, 0.0));
  for (double v : zero.data()) CHECK(v == 0.5);

  CHECK_THROWS_AS(subtract_dark(frame, Field(4, 4, 1)), ValidationError);
  CHECK_THROWS_AS(subtract_dark(frame, Field(4, 3, 3)), ValidationError);
}

TEST_CASE("subtract_dark clamps at zero and keeps metadata") {
  Field frame(2, 2, 1, 0.1);
  frame.frame_id = 42;
  frame.parity = Parity::odd;
  const Field out = subtract_dark(frame, Field(2, 2, 1, 0.3));
  CHECK(out.frame_id == 42);
  CHECK(out.parity == Parity::odd);
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("deinterlace row selection and replicate-edge resize") {
  Field ramp(3, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 3; ++x) ramp(x, y) = y;
  const auto [odd, even] = deinterlace(ramp);
  CHECK(odd.parity == Parity::odd);
  CHECK(even.parity == Parity::even);
  const double expect_even[] = {0, 1, 2, 2};
  const double expect_odd[] = {1, 1, 2, 3};
  for (int y = 0; y < 4; ++y) {
    CHECK(even(1, y) == doctest::Approx(expect_even[y]));
    CHECK(odd(1, y) == doctest::Approx(expect_odd[y]));
  }
}

TEST_CASE("deinterlace constant frame and odd-height rejection") {
  Field c(5, 6, 3, 0.25);
  const auto [odd, even] = deinterlace(c);
  for (double v : odd.data()) CHECK(v == 0.25);
  for (double v : even.data()) CHECK(v == 0.25);
  CHECK_THROWS_AS(deinterlace(Field(4, 5)), ValidationError);
}

TEST_CASE("interleave restores native-parity rows") {
  const Field f = random_field(7, 8, 3, 3);
  const auto [odd, even] = deinterlace(f);
  const Field back = interleave(odd, even);
  for (std::size_t i = 0; i < f.data().size(); ++i) CHECK(back.data()[i] == f.data()[i]);
}

TEST_CASE("gaussian_smooth") {
  SUBCASE("constant field unchanged") {
    const Field out = gaussian_smooth(Field(9, 9, 1, 0.7));
    for (double v : out.data()) CHECK(v == doctest::Approx(0.7).epsilon(1e-14));
  }
  SUBCASE("impulse gives the sampled kernel") {
    Field f(9, 9);
    f(4, 4) = 1.0;
    const Field out = gaussian_smooth(f);
    const int r = 2;
    double norm = 0.0;
    for (int i = -r; i <= r; ++i) norm += std::exp(-0.5 * i * i / 0.25);
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        const double g = std::exp(-0.5 * (dx * dx + dy * dy) / 0.25) / (norm * norm);
        CHECK(out(4 + dx, 4 + dy) == doctest::Approx(g).epsilon(1e-12));
      }
    double total = 0.0;
    for (double v : out.data()) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("matches dense 2-D convolution") {
    const Field f = random_field(7, 7, 11);
    const Field out = gaussian_smooth(f);
    const auto k = gaussian_kernel(5, 0.5);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 7; ++x) CHECK(std::abs(out(x, y) - dense_convolve_at(f, k, x, y)) < 1e-12);
  }
  SUBCASE("linear") {
    const Field a = random_field(12, 10, 1);
    const Field b = random_field(12, 10, 2);
    Field mix(12, 10);
    for (std::size_t i = 0; i < mix.data().size(); ++i) mix.data()[i] = 0.3 * a.data()[i] - 1.7 * b.data()[i];
    const Field sa = gaussian_smooth(a), sb = gaussian_smooth(b), sm = gaussian_smooth(mix);
    for (std::size_t i = 0; i < mix.data().size(); ++i)
      CHECK(std::abs(sm.data()[i] - (0.3 * sa.data()[i] - 1.7 * sb.data()[i])) < 1e-12);
  }
}

TEST_CASE("apply_distortion_map") {
  const Field f = random_field(3, 3, 5);
  SUBCASE("identity") {
    const Field out = apply_distortion_map(f, RemapField::identity(3, 3));
    for (std::size_t i = 0; i < f.data().size(); ++i) CHECK(out.data()[i] == f.data()[i]);
    CHECK(out.valid_count() == 9);
  }
  SUBCASE("one-pixel horizontal shift masks the last column") {
    RemapField m = RemapField::identity(3, 3);
    for (double& x : m.src_x) x += 1.0;
    const Field out = apply_distortion_map(f, m);
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 2; ++x) {
        CHECK(out(x, y) == doctest::Approx(f(x + 1, y)));
        CHECK(out.valid(x, y));
      }
      CHECK_FALSE(out.valid(2, y));
    }
  }
  SUBCASE("90 degree rotation") {
    Field a(3, 3);
    for (int i = 0; i < 9; ++i) a.data()[i] = i + 1;  // rows 1 2 3 / 4 5 6 / 7 8 9
    RemapField m = RemapField::identity(3, 3);
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) {
        // out(x, y) = in(y, 2 - x)
        m.src_x[y * 3 + x] = y;
        m.src_y[y * 3 + x] = 2 - x;
      }
    const Field out = apply_distortion_map(a, m);
    const double expect[] = {7, 4, 1, 8, 5, 2, 9, 6, 3};
    for (int i = 0; i < 9; ++i) CHECK(out.data()[i] == doctest::Approx(expect[i]));
  }
  CHECK_THROWS_AS(apply_distortion_map(f, RemapField::identity(4, 3)), ValidationError);
}

TEST_CASE("warp") {
  Field f = texture(32, 32, 9);
  double lo = 1e9, hi = -1e9;
  for (double v : f.data()) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double& v : f.data()) v = (v - lo) / (hi - lo);
  SUBCASE("identity") {
    const Field out = warp(f, AffineTransform::identity());
    for (std::size_t i = 0; i < f.data().size(); ++i) CHECK(out.data()[i] == f.data()[i]);
  }
  SUBCASE("integer translation") {
    const Field out = warp(f, AffineTransform::translation(2, -1));
    for (int y = 0; y < 31; ++y)
      for (int x = 2; x < 32; ++x) CHECK(out(x, y) == doctest::Approx(f(x - 2, y + 1)).epsilon(1e-14));
    CHECK_FALSE(out.valid(0, 5));
    CHECK_FALSE(out.valid(5, 31));
  }
  SUBCASE("round trip") {
    const auto t = AffineTransform::rotation(0.05, 16, 16, 0.7, -0.4);
    const Field back = warp(warp(f, t), t.inverse());
    for (int y = 4; y < 28; ++y)
      for (int x = 4; x < 28; ++x) CHECK(std::abs(back(x, y) - f(x, y)) < 2e-2);
  }
  SUBCASE("singular transform rejected") {
    Eigen::Matrix<double, 2, 3> m = Eigen::Matrix<double, 2, 3>::Zero();
    m(0, 0) = 1.0;
    CHECK(AffineTransform(m).singular());
    CHECK_THROWS_AS(warp(f, AffineTransform(m)), ValidationError);
  }
}

TEST_CASE("affine transform algebra") {
  const auto a = AffineTransform::rotation(0.3, 5, 7, 1, 2);
  const auto b = AffineTransform::translation(-3, 4);
  const auto p = a.compose(b).apply(2.5, -1.0);
  const auto b1 = b.apply(2.5, -1.0);
  const auto q = a.apply(b1.x(), b1.y());
  CHECK(p.x() == doctest::Approx(q.x()));
  CHECK(p.y() == doctest::Approx(q.y()));
  const auto id = a.compose(a.inverse()).matrix();
  CHECK((id - AffineTransform::identity().matrix()).norm() < 1e-12);
}

TEST_CASE("register_affine") {
  const Field fixed = texture(96, 96, 21);
  SUBCASE("self registration") {
    const auto r = register_affine(fixed, fixed);
    CHECK((r.transform.matrix() - AffineTransform::identity().matrix()).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(r.mse < 1e-10);
  }
  SUBCASE("three pixel translation") {
    const auto truth = AffineTransform::translation(3.0, -2.0);
    const Field moving = texture(96, 96, 21, truth);
    const auto r = register_affine(moving, fixed);
    CHECK(r.converged);
    CHECK(std::abs(r.transform.matrix()(0, 2) - 3.0) < 0.1);
    CHECK(std::abs(r.transform.matrix()(1, 2) + 2.0) < 0.1);
  }
  SUBCASE("two degree rotation with a one pixel shift") {
    const double ang = 2.0 * std::numbers::pi / 180.0;
    const auto truth = AffineTransform::rotation(ang, 48, 48, 1.0, 0.0);
    const Field moving = texture(96, 96, 21, truth);
    const auto r = register_affine(moving, fixed);
    const auto& m = r.transform.matrix();
    const double est_ang = std::atan2(m(1, 0), m(0, 0));
    CHECK(std::abs(est_ang - ang) / ang < 0.05);
    const auto c = r.transform.apply(48, 48);
    const auto ct = truth.apply(48, 48);
    CHECK(std::abs(c.x() - ct.x()) < 0.05);
    CHECK(std::abs(c.y() - ct.y()) < 0.05);
  }
  CHECK_THROWS_AS(register_affine(fixed, Field(10, 10)), ValidationError);
}

TEST_CASE("spectral cube validation") {
  SpectralCube c(4, 4, default_wavelengths(), 0.5);
  CHECK_NOTHROW(c.validate(true));
  c.at(2, 1, 1) = 1.5;
  CHECK_THROWS_AS(c.validate(true), ValidationError);
  c.mask[1 * 4 + 1] = 0;
  CHECK_NOTHROW(c.validate(true));
  c.wavelengths_nm[3] = c.wavelengths_nm[2];
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("median filter ignores masked pixels") {
  Field f(5, 5, 1, 0.2);
  f(2, 2) = 9.0;
  const Field out = median_filter(f, 3);
  CHECK(out(2, 2) == doctest::Approx(0.2));
  CHECK_THROWS_AS(median_filter(f, 4), ValidationError);
}
