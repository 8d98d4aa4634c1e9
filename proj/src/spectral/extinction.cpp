#include <algorithm>
#include <cmath>

#include "mle/csv.hpp"
#include "mle/error.hpp"
#include "mle/spectral.hpp"

namespace mle::spectral {

ExtinctionTable ExtinctionTable::load_csv(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  ExtinctionTable t;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    t.wavelengths_nm.push_back(csv.number(r, "wavelength_nm"));
    t.eps_hbo2.push_back(csv.number(r, "eps_hbo2"));
    t.eps_hb.push_back(csv.number(r, "eps_hb"));
  }
  t.validate();
  return t;
}

ExtinctionTable ExtinctionTable::bundled() {
  return load_csv(std::filesystem::path(MLE_ASSET_DIR) / "hemoglobin_extinction.csv");
}

void ExtinctionTable::validate() const {
  if (wavelengths_nm.empty()) throw ConfigError("extinction table: empty");
  if (eps_hbo2.size() != wavelengths_nm.size() || eps_hb.size() != wavelengths_nm.size())
    throw ConfigError("extinction table: column lengths differ");
  for (std::size_t i = 0; i < wavelengths_nm.size(); ++i) {
    if (!(eps_hbo2[i] > 0.0) || !(eps_hb[i] > 0.0) || !std::isfinite(eps_hbo2[i]) || !std::isfinite(eps_hb[i]))
      throw ConfigError("extinction table: coefficients must be finite and strictly positive");
  }
}

ExtinctionTable ExtinctionTable::aligned_to(std::span<const double> wavelengths) const {
  ExtinctionTable out;
  for (double wl : wavelengths) {
    const auto it = std::find(wavelengths_nm.begin(), wavelengths_nm.end(), wl);
    if (it == wavelengths_nm.end())
      throw ConfigError("extinction table: no entry for " + std::to_string(wl) + " nm");
    const auto i = static_cast<std::size_t>(it - wavelengths_nm.begin());
    out.wavelengths_nm.push_back(wl);
    out.eps_hbo2.push_back(eps_hbo2[i]);
    out.eps_hb.push_back(eps_hb[i]);
  }
  return out;
}

double ExtinctionTable::reference() const {
  return std::max(*std::max_element(eps_hbo2.begin(), eps_hbo2.end()),
                  *std::max_element(eps_hb.begin(), eps_hb.end()));
}

}  // namespace mle::spectral
