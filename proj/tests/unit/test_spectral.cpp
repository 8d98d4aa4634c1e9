#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"
#include "mle/error.hpp"
#include "mle/nnls.hpp"
#include "mle/rng.hpp"
#include "mle/spectral.hpp"
#include "mle/synthlab.hpp"

using namespace mle;
using namespace mle::spectral;
using imgcore::Field;
using imgcore::SpectralCube;

namespace {

// Forward model at one pixel: A = x1 e1 + x2 e2 + O (reference units).
std::vector<double> forward(const ExtinctionTable& t, double x1, double x2, double o) {
  std::vector<double> a;
  const double ref = t.reference();
  for (std::size_t k = 0; k < t.wavelengths_nm.size(); ++k) a.push_back((x1 * t.eps_hbo2[k] + x2 * t.eps_hb[k]) / ref + o);
  return a;
}

AbsorbanceStack stack_of(const std::vector<std::vector<double>>& spectra, const std::vector<double>& wl) {
  AbsorbanceStack s(static_cast<int>(spectra.size()), 1, wl);
  for (std::size_t i = 0; i < spectra.size(); ++i)
    for (std::size_t k = 0; k < wl.size(); ++k) s.planes[k][i] = spectra[i][k];
  return s;
}

// Exhaustive NNLS: best unconstrained least-squares fit over every support set.
Eigen::VectorXd brute_nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const int n = static_cast<int>(a.cols());
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  double best_r = b.squaredNorm();
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> cols;
    for (int j = 0; j < n; ++j)
      if (mask & (1 << j)) cols.push_back(j);
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = a.col(cols[j]);
    const Eigen::VectorXd xs = sub.colPivHouseholderQr().solve(b);
    if ((xs.array() < 0).any()) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (std::size_t j = 0; j < cols.size(); ++j) x[cols[j]] = xs[static_cast<Eigen::Index>(j)];
    const double r = (a * x - b).squaredNorm();
    if (r < best_r) best_r = r, best = x;
  }
  return best;
}

}  // namespace

TEST_CASE("normalize_reflectance") {
  const std::vector<double> wl = {406, 446};
  std::vector<Field> white = {Field(3, 2, 1, 0.8), Field(3, 2, 1, 0.5)};
  SUBCASE("raw equals white with equal duties") {
    const auto c = normalize_reflectance(white, white, std::vector<double>{5, 5}, std::vector<double>{5, 5}, wl);
    for (const auto& p : c.planes)
      for (double v : p) CHECK(v == doctest::Approx(1.0));
  }
  SUBCASE("scaled raw") {
    std::vector<Field> raw = {Field(3, 2, 1, 0.32), Field(3, 2, 1, 0.2)};
    const auto c = normalize_reflectance(raw, white, std::vector<double>{5, 5}, std::vector<double>{5, 5}, wl);
    for (const auto& p : c.planes)
      for (double v : p) CHECK(v == doctest::Approx(0.4));
  }
  SUBCASE("duty correction") {
    const auto c = normalize_reflectance(white, white, std::vector<double>{7, 7}, std::vector<double>{14, 14}, wl);
    for (const auto& p : c.planes)
      for (double v : p) CHECK(v == doctest::Approx(2.0));
  }
  SUBCASE("saturated and dark-reference pixels are masked") {
    std::vector<Field> raw = {Field(3, 2, 1, 0.3), Field(3, 2, 1, 0.3)};
    raw[1](0, 0) = 1.0;
    white[0](2, 1) = 0.0;
    const auto c = normalize_reflectance(raw, white, std::vector<double>{5, 5}, std::vector<double>{5, 5}, wl);
    CHECK(c.mask[0] == 0);
    CHECK(c.mask[5] == 0);
    CHECK(c.mask[1] == 1);
  }
  CHECK_THROWS_AS(normalize_reflectance(white, white, std::vector<double>{5}, std::vector<double>{5, 5}, wl),
                  ValidationError);
}

TEST_CASE("cube_rescale") {
  SpectralCube c(2, 2, imgcore::default_wavelengths(), 0.3);
  c.at(3, 1, 0) = 0.999;
  const auto r = cube_rescale(c);
  double m = 0.0;
  for (const auto& p : r.planes)
    for (double v : p) m = std::max(m, v);
  CHECK(m == doctest::Approx(0.999 / (0.999 + 1e-3)).epsilon(1e-15));
  CHECK(m < 1.0);

  SpectralCube u(2, 2, imgcore::default_wavelengths(), 0.6);
  for (const auto& p : cube_rescale(u).planes)
    for (double v : p) CHECK(v == doctest::Approx(0.6 / 0.601));

  SpectralCube masked(2, 2, imgcore::default_wavelengths(), 0.5);
  masked.at(0, 0, 0) = 5.0;
  masked.mask[0] = 0;
  CHECK(cube_rescale(masked).at(1, 1, 1) == doctest::Approx(0.5 / 0.501));
}

TEST_CASE("absorbance") {
  SpectralCube c(3, 1, {500, 600}, 1.0);
  c.at(0, 1, 0) = 0.1;
  c.at(0, 2, 0) = 0.5;
  const auto a = absorbance(c);
  CHECK(a.planes[0][0] == 0.0);
  CHECK(a.planes[0][1] == doctest::Approx(1.0));
  CHECK(a.planes[0][2] == doctest::Approx(0.30103).epsilon(1e-5));
  c.at(1, 0, 0) = 0.0;
  CHECK(absorbance(c).mask[0] == 0);
}

TEST_CASE("nnls agrees with exhaustive support search and satisfies KKT") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd a(8, 3);
    Eigen::VectorXd b(8);
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 3; ++j) a(i, j) = rng.normal();
      b[i] = rng.normal();
    }
    const auto r = nnls(a, b);
    CHECK(r.converged);
    const Eigen::VectorXd ref = brute_nnls(a, b);
    CHECK((r.x - ref).cwiseAbs().maxCoeff() < 1e-9);
    const Eigen::VectorXd w = a.transpose() * (b - a * r.x);
    for (int j = 0; j < 3; ++j) {
      CHECK(r.x[j] >= 0.0);
      if (r.x[j] == 0.0) CHECK(w[j] <= 1e-8);
      else CHECK(std::abs(w[j]) <= 1e-8);
    }
  }
}

TEST_CASE("unmix forward-model round trip") {
  const auto t = ExtinctionTable::bundled();
  const auto wl = t.wavelengths_nm;
  SUBCASE("equal concentrations give 0.5") {
    const auto m = unmix(stack_of({forward(t, 0.5, 0.5, 0.0)}, wl), t);
    REQUIRE(m.mask[0] == 1);
    CHECK(std::abs(m.sto2[0] - 0.5) < 1e-9);
    CHECK(std::abs(m.chbo2_l[0] - 0.5) < 1e-9);
  }
  SUBCASE("pure HbO2") {
    const auto m = unmix(stack_of({forward(t, 0.8, 0.0, 0.2)}, wl), t);
    CHECK(m.sto2[0] == doctest::Approx(1.0));
  }
  SUBCASE("random concentrations and offsets") {
    Rng rng(3);
    std::vector<std::vector<double>> spectra;
    std::vector<double> truth;
    for (int i = 0; i < 500; ++i) {
      const double x1 = 2.0 * rng.uniform(), x2 = 2.0 * rng.uniform(), o = rng.uniform() - 0.5;
      spectra.push_back(forward(t, x1, x2, o));
      truth.push_back(x1 / (x1 + x2));
    }
    const auto m = unmix(stack_of(spectra, wl), t);
    for (std::size_t i = 0; i < truth.size(); ++i) CHECK(std::abs(m.sto2[i] - truth[i]) <= 1e-6);
  }
  SUBCASE("uniform reflectance scaling moves only the offset") {
    SpectralCube r(1, 1, wl);
    const auto a = forward(t, 0.4, 0.7, 0.1);
    for (std::size_t k = 0; k < wl.size(); ++k) r.planes[k][0] = std::pow(10.0, -a[k]);
    SpectralCube scaled = r;
    for (auto& p : scaled.planes) p[0] *= 0.37;
    const auto m1 = unmix(absorbance(r), t);
    const auto m2 = unmix(absorbance(scaled), t);
    CHECK(std::abs(m1.sto2[0] - m2.sto2[0]) < 1e-9);
    CHECK(m2.offset[0] - m1.offset[0] == doctest::Approx(-std::log10(0.37)));
  }
  SUBCASE("zero hemoglobin is masked") {
    const auto m = unmix(stack_of({forward(t, 0.0, 0.0, 0.3)}, wl), t);
    CHECK(m.mask[0] == 0);
  }
}

TEST_CASE("extinction table checks") {
  const auto t = ExtinctionTable::bundled();
  CHECK(t.wavelengths_nm == imgcore::default_wavelengths());
  CHECK_THROWS_AS(t.aligned_to(std::vector<double>{406, 999}), ConfigError);
  ExtinctionTable degenerate = t;
  degenerate.eps_hb = degenerate.eps_hbo2;
  CHECK_THROWS_AS(Unmixer{degenerate}, ConfigError);
  // deoxy-hemoglobin dominates in the red
  const auto i635 = static_cast<std::size_t>(std::find(t.wavelengths_nm.begin(), t.wavelengths_nm.end(), 635.0) -
                                            t.wavelengths_nm.begin());
  CHECK(t.eps_hb[i635] > t.eps_hbo2[i635]);
}

TEST_CASE("sto2_timeseries") {
  ChromophoreMaps m;
  m.width = 2;
  m.height = 2;
  m.sto2 = {0.2, 0.6, 0.4, 0.9};
  m.mask = {1, 1, 0, 1};
  const imgcore::Roi roi{0, 0, 2, 1};
  const auto s = sto2_timeseries(std::span<const ChromophoreMaps>(&m, 1), roi);
  CHECK(s[0].count == 2);
  CHECK(s[0].mean == doctest::Approx(0.4));
  CHECK(s[0].stddev == doctest::Approx(std::sqrt(0.08)));

  ChromophoreMaps c = m;
  c.sto2 = {0.5, 0.5, 0.5, 0.5};
  CHECK(sto2_timeseries(std::span<const ChromophoreMaps>(&c, 1), {0, 0, 2, 2})[0].stddev == 0.0);
  CHECK_THROWS_AS(sto2_timeseries(std::span<const ChromophoreMaps>(&c, 1), {1, 1, 2, 2}), ValidationError);
}

TEST_CASE("ischemia sequence drops then recovers") {
  const auto t = ExtinctionTable::bundled();
  const auto cubes = synthlab::gen_ischemia_sequence(30, 8, 8, t);
  std::vector<ChromophoreMaps> maps;
  for (const auto& c : cubes) maps.push_back(unmix(absorbance(c), t));
  const auto s = sto2_timeseries(maps, {0, 0, 8, 8});
  std::size_t nadir = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i].mean < s[nadir].mean) nadir = i;
  CHECK(nadir > 0);
  CHECK(nadir + 1 < s.size());
  for (std::size_t i = 1; i <= nadir; ++i) CHECK(s[i].mean <= s[i - 1].mean + 1e-12);
  for (std::size_t i = nadir + 1; i < s.size(); ++i) CHECK(s[i].mean >= s[i - 1].mean - 1e-12);
  CHECK(s[0].mean == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(s[nadir].mean == doctest::Approx(0.35).epsilon(1e-6));
}
