#include <algorithm>
#include <cmath>
#include <numeric>

#include "mle/error.hpp"
#include "mle/nnls.hpp"
#include "mle/parallel.hpp"
#include "mle/spectral.hpp"

namespace mle::spectral {

using imgcore::Field;
using imgcore::SpectralCube;

imgcore::Field ChromophoreMaps::sto2_field() const {
  Field f(width, height, 1);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    f.data()[i] = mask[i] ? sto2[i] : 0.0;
    f.mask()[i] = mask[i];
  }
  return f;
}

SpectralCube normalize_reflectance(std::span<const Field> raw, std::span<const Field> white,
                                   std::span<const double> raw_pulse_ms, std::span<const double> white_pulse_ms,
                                   std::span<const double> wavelengths_nm, const ReflectanceOptions& opts) {
  const std::size_t bands = wavelengths_nm.size();
  if (raw.size() != bands || white.size() != bands)
    throw ValidationError("normalize_reflectance: raw/white wavelength sets do not match");
  if (raw_pulse_ms.size() != bands || white_pulse_ms.size() != bands)
    throw ValidationError("normalize_reflectance: one pulse width per wavelength is required");
  require(bands > 0, "normalize_reflectance: no wavelengths");
  for (std::size_t k = 0; k < bands; ++k) {
    require(raw_pulse_ms[k] > 0.0 && white_pulse_ms[k] > 0.0, "normalize_reflectance: pulse widths must be > 0");
    require(raw[k].channels() == 1 && white[k].channels() == 1, "normalize_reflectance: expects mono fields");
    require(raw[k].same_shape(raw[0]) && white[k].same_shape(raw[0]),
            "normalize_reflectance: all fields must share dimensions");
  }
  SpectralCube cube(raw[0].width(), raw[0].height(), std::vector<double>(wavelengths_nm.begin(), wavelengths_nm.end()));
  const std::size_t n = cube.pixel_count();
  for (std::size_t k = 0; k < bands; ++k) {
    const double duty_ratio = white_pulse_ms[k] / raw_pulse_ms[k];
    auto r = raw[k].data();
    auto w = white[k].data();
    for (std::size_t i = 0; i < n; ++i) {
      const bool ok = raw[k].mask()[i] && white[k].mask()[i] && w[i] >= opts.white_floor && r[i] < opts.saturation;
      if (!ok) {
        cube.mask[i] = 0;
        continue;
      }
      cube.planes[k][i] = r[i] / w[i] * duty_ratio;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!cube.mask[i])
      for (auto& p : cube.planes) p[i] = 0.0;
  return cube;
}

SpectralCube cube_rescale(const SpectralCube& cube, double delta) {
  cube.validate();
  double vmax = -std::numeric_limits<double>::infinity();
  for (const auto& p : cube.planes)
    for (std::size_t i = 0; i < p.size(); ++i)
      if (cube.mask[i]) vmax = std::max(vmax, p[i]);
  SpectralCube out = cube;
  if (!std::isfinite(vmax)) return out;  // nothing valid
  const double denom = vmax + delta;
  require(denom > 0.0, "cube_rescale: maximum reflectance must be positive");
  for (auto& p : out.planes)
    for (std::size_t i = 0; i < p.size(); ++i)
      if (out.mask[i]) p[i] /= denom;
  return out;
}

AbsorbanceStack absorbance(const SpectralCube& cube) {
  cube.validate();
  AbsorbanceStack a = cube;
  for (std::size_t i = 0; i < cube.pixel_count(); ++i) {
    if (!a.mask[i]) continue;
    bool ok = true;
    for (const auto& p : cube.planes) ok = ok && p[i] > 0.0 && p[i] <= 1.0;
    if (!ok) a.mask[i] = 0;
  }
  for (std::size_t k = 0; k < cube.bands(); ++k)
    for (std::size_t i = 0; i < cube.pixel_count(); ++i)
      a.planes[k][i] = a.mask[i] ? -std::log10(cube.planes[k][i]) : 0.0;
  return a;
}

Unmixer::Unmixer(const ExtinctionTable& table, double total_floor) : table_(table), total_floor_(total_floor) {
  table_.validate();
  const auto m = static_cast<Eigen::Index>(table_.wavelengths_nm.size());
  if (m < 3) throw ConfigError("unmix: at least 3 wavelengths are required");
  const double ref = table_.reference();
  design_.resize(m, 3);
  for (Eigen::Index i = 0; i < m; ++i) {
    design_(i, 0) = table_.eps_hbo2[static_cast<std::size_t>(i)] / ref;
    design_(i, 1) = table_.eps_hb[static_cast<std::size_t>(i)] / ref;
    design_(i, 2) = 1.0;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design_);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw ConfigError("unmix: design matrix [eps_HbO2, eps_Hb, 1] is rank deficient");
  column_means_ = design_.leftCols<2>().colwise().mean();
  centered_ = design_.leftCols<2>().rowwise() - column_means_;
}

Eigen::Vector3d Unmixer::solve(const Eigen::VectorXd& a) const {
  // The free offset is eliminated exactly by centering: O = mean(A - E x).
  const double mean_a = a.mean();
  const Eigen::VectorXd ac = a.array() - mean_a;
  const NnlsResult r = nnls(centered_, ac);
  const double offset = mean_a - column_means_.dot(r.x);
  return {r.x[0], r.x[1], offset};
}

ChromophoreMaps Unmixer::unmix(const AbsorbanceStack& a) const {
  a.validate();
  if (a.wavelengths_nm != table_.wavelengths_nm)
    throw ConfigError("unmix: absorbance wavelengths are not aligned with the extinction table");
  ChromophoreMaps out;
  out.width = a.width;
  out.height = a.height;
  const std::size_t n = a.pixel_count();
  out.chbo2_l.assign(n, 0.0);
  out.chb_l.assign(n, 0.0);
  out.offset.assign(n, 0.0);
  out.sto2.assign(n, 0.0);
  out.mask.assign(n, 0);
  const auto bands = static_cast<Eigen::Index>(a.bands());
  parallel_for(n, [&](std::size_t i0, std::size_t i1) {
    Eigen::VectorXd spec(bands);
    for (std::size_t i = i0; i < i1; ++i) {
      if (!a.mask[i]) continue;
      for (Eigen::Index k = 0; k < bands; ++k) spec[k] = a.planes[static_cast<std::size_t>(k)][i];
      const Eigen::Vector3d x = solve(spec);
      out.chbo2_l[i] = x[0];
      out.chb_l[i] = x[1];
      out.offset[i] = x[2];
      const double total = x[0] + x[1];
      if (total < total_floor_) continue;
      out.sto2[i] = std::clamp(x[0] / total, 0.0, 1.0);
      out.mask[i] = 1;
    }
  });
  return out;
}

ChromophoreMaps unmix(const AbsorbanceStack& a, const ExtinctionTable& table) {
  return Unmixer(table.aligned_to(a.wavelengths_nm)).unmix(a);
}

std::vector<RoiStat> sto2_timeseries(std::span<const ChromophoreMaps> maps, const imgcore::Roi& roi) {
  std::vector<RoiStat> out;
  out.reserve(maps.size());
  for (const auto& m : maps) {
    require(roi.x >= 0 && roi.y >= 0 && roi.x + roi.width <= m.width && roi.y + roi.height <= m.height,
            "sto2_timeseries: ROI exceeds map bounds");
    RoiStat s;
    double sum = 0.0;
    for (int y = roi.y; y < roi.y + roi.height; ++y)
      for (int x = roi.x; x < roi.x + roi.width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * m.width + x;
        if (!m.mask[i]) continue;
        sum += m.sto2[i];
        ++s.count;
      }
    if (s.count > 0) {
      s.mean = sum / static_cast<double>(s.count);
      double ss = 0.0;
      for (int y = roi.y; y < roi.y + roi.height; ++y)
        for (int x = roi.x; x < roi.x + roi.width; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * m.width + x;
          if (m.mask[i]) ss += (m.sto2[i] - s.mean) * (m.sto2[i] - s.mean);
        }
      s.stddev = s.count > 1 ? std::sqrt(ss / static_cast<double>(s.count - 1)) : 0.0;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace mle::spectral
