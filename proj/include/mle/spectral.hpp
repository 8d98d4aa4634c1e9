#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <vector>

#include "mle/imgcore.hpp"

namespace mle::spectral {

// Molar extinction coefficients (cm^-1/M) of oxy- and deoxy-hemoglobin.
struct ExtinctionTable {
  std::vector<double> wavelengths_nm;
  std::vector<double> eps_hbo2;
  std::vector<double> eps_hb;

  static ExtinctionTable load_csv(const std::filesystem::path& path);
  // Bundled table at the eight diode wavelengths.
  static ExtinctionTable bundled();

  void validate() const;
  // Rows matching `wavelengths` exactly, in that order; throws ConfigError on a miss.
  ExtinctionTable aligned_to(std::span<const double> wavelengths) const;
  // Largest coefficient in the table; unmixing works in units of this value.
  double reference() const;
};

struct ChromophoreMaps {
  int width = 0;
  int height = 0;
  // Effective absorbances c*L, in units of the table's reference coefficient.
  std::vector<double> chbo2_l;
  std::vector<double> chb_l;
  std::vector<double> offset;
  std::vector<double> sto2;
  std::vector<std::uint8_t> mask;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  imgcore::Field sto2_field() const;
};

// Per-wavelength absorbance planes with validity mask (same layout as SpectralCube).
using AbsorbanceStack = imgcore::SpectralCube;

struct ReflectanceOptions {
  double white_floor = 1e-3;
  double saturation = 0.995;
};

imgcore::SpectralCube normalize_reflectance(std::span<const imgcore::Field> raw,
                                            std::span<const imgcore::Field> white,
                                            std::span<const double> raw_pulse_ms,
                                            std::span<const double> white_pulse_ms,
                                            std::span<const double> wavelengths_nm,
                                            const ReflectanceOptions& opts = {});

imgcore::SpectralCube cube_rescale(const imgcore::SpectralCube& cube, double delta = 1e-3);

AbsorbanceStack absorbance(const imgcore::SpectralCube& cube);

// Per-pixel fit A = x1*eps_HbO2 + x2*eps_Hb + O with x1, x2 >= 0 and free O.
class Unmixer {
 public:
  explicit Unmixer(const ExtinctionTable& table, double total_floor = 1e-6);

  // Returns (x1, x2, O) for one absorbance spectrum.
  Eigen::Vector3d solve(const Eigen::VectorXd& absorbance) const;
  ChromophoreMaps unmix(const AbsorbanceStack& a) const;

  const ExtinctionTable& table() const { return table_; }
  // Columns [eps_HbO2, eps_Hb, 1] in reference units.
  const Eigen::MatrixXd& design() const { return design_; }

 private:
  ExtinctionTable table_;
  double total_floor_;
  Eigen::MatrixXd design_;
  Eigen::MatrixXd centered_;  // chromophore columns with their mean removed
  Eigen::RowVectorXd column_means_;
};

ChromophoreMaps unmix(const AbsorbanceStack& a, const ExtinctionTable& table);

struct RoiStat {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
  std::size_t count = 0;
};

std::vector<RoiStat> sto2_timeseries(std::span<const ChromophoreMaps> maps, const imgcore::Roi& roi);

}  // namespace mle::spectral
