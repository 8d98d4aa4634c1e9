#include <algorithm>
#include <cmath>

#include "mle/acqsim.hpp"
#include "mle/error.hpp"

namespace mle::acqsim {

ExposureUpdate auto_exposure_update(double intensity, double pulse_ms, const ExposureParams& ep) {
  require(pulse_ms > 0.0 && pulse_ms <= ep.p_max_ms, "auto_exposure: pulse width must be in (0, P_max]");
  require(intensity >= 0.0 && intensity <= ep.i_max, "auto_exposure: intensity must be in [0, I_max]");
  const double num = (ep.i_max - intensity) * pulse_ms * ep.p_max_ms;
  const double den = (ep.i_target - intensity) * pulse_ms + (ep.i_max - ep.i_target) * ep.p_max_ms;
  if (den <= 0.0) return {ep.p_max_ms, true};
  return {std::clamp(num / den, ep.p_min_ms, ep.p_max_ms), false};
}

ExposureChannel select_exposure_channel(std::optional<double> wavelength_nm, const colorsim::SpectralResponse& resp) {
  if (!wavelength_nm) return ExposureChannel::average;
  resp.validate();
  const auto& wl = resp.wavelengths_nm;
  const double w = *wavelength_nm;
  if (w < wl.front() || w > wl.back()) throw ValidationError("select_exposure_channel: wavelength outside the response");
  std::array<double, 3> t{};
  for (std::size_t i = 0; i < wl.size(); ++i) {
    if (wl[i] == w) {
      for (int c = 0; c < 3; ++c) t[c] = resp.bayer[c][i];
      break;
    }
    if (i + 1 < wl.size() && wl[i] < w && w < wl[i + 1]) {
      const double f = (w - wl[i]) / (wl[i + 1] - wl[i]);
      for (int c = 0; c < 3; ++c) t[c] = (1.0 - f) * resp.bayer[c][i] + f * resp.bayer[c][i + 1];
      break;
    }
  }
  int best = 0;
  for (int c = 1; c < 3; ++c)
    if (t[c] > t[best]) best = c;
  return static_cast<ExposureChannel>(best);
}

double channel_intensity(ExposureChannel ch, double r, double g, double b) {
  switch (ch) {
    case ExposureChannel::red: return r;
    case ExposureChannel::green: return g;
    case ExposureChannel::blue: return b;
    case ExposureChannel::average: return (r + g + b) / 3.0;
  }
  return 0.0;
}

double hwp_angle(double pulse_ms, double p_max_ms) {
  require(p_max_ms > 0.0, "hwp_angle: P_max must be positive");
  return std::clamp(45.0 * pulse_ms / p_max_ms, 0.0, 45.0);
}

int measure_sync_delay(std::span<const double> frame_means, double factor, double baseline_floor) {
  double sum = 0.0;
  for (std::size_t k = 0; k < frame_means.size(); ++k) {
    const double baseline = k == 0 ? baseline_floor : std::max(sum / static_cast<double>(k), baseline_floor);
    if (frame_means[k] > factor * baseline) return static_cast<int>(k);
    sum += frame_means[k];
  }
  throw std::runtime_error("measure_sync_delay: no synchronization pulse detected within " +
                           std::to_string(frame_means.size()) + " frames");
}

}  // namespace mle::acqsim
