#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mle/colorsim.hpp"

namespace mle::acqsim {

inline constexpr std::size_t kPulseSlots = 15;
inline constexpr std::size_t kPowerSlots = 3;
inline constexpr std::size_t kPulsePacketSize = 64;
inline constexpr std::size_t kPowerPacketSize = 16;
inline constexpr std::size_t kDiodeCount = 9;  // slots 0..8, remaining slots reserved zero
inline constexpr std::uint16_t kMaxPulseUs = 14000;

// Diode peak wavelengths in packet slot order.
inline constexpr std::array<double, kDiodeCount> kSlotWavelengths = {406, 446, 468, 522, 543, 562, 635, 639, 657};

struct PulseWidthPacket {
  std::uint32_t frame_id = 0;
  std::array<std::uint16_t, kPulseSlots> odd_pw{};
  std::array<std::uint16_t, kPulseSlots> even_pw{};
  bool operator==(const PulseWidthPacket&) const = default;
};

struct PowerReportPacket {
  std::uint32_t frame_id = 0;
  std::array<std::uint16_t, kPowerSlots> odd_power{};
  std::array<std::uint16_t, kPowerSlots> even_power{};
  bool operator==(const PowerReportPacket&) const = default;
};

using Bytes = std::vector<std::uint8_t>;

Bytes encode_pulse_packet(const PulseWidthPacket& p);
PulseWidthPacket decode_pulse_packet(std::span<const std::uint8_t> bytes);
Bytes encode_power_packet(const PowerReportPacket& p);
PowerReportPacket decode_power_packet(std::span<const std::uint8_t> bytes);
// Lowercase hex, space separated, 16 bytes per line.
std::string hex_dump(std::span<const std::uint8_t> bytes);

struct ExposureParams {
  double i_target = 128.0;
  double i_max = 255.0;
  double p_max_ms = 14.0;
  double p_min_ms = 0.010;
};

struct ExposureUpdate {
  double pulse_ms = 0.0;
  bool diverged = false;  // denominator <= 0, pulse forced to p_max
};

ExposureUpdate auto_exposure_update(double intensity, double pulse_ms, const ExposureParams& params = {});

enum class ExposureChannel { red = 0, green = 1, blue = 2, average = 3 };

// Channel with the highest Bayer transmission at the diode wavelength (ties go
// to the lowest index); nullopt selects white-light averaging.
ExposureChannel select_exposure_channel(std::optional<double> wavelength_nm, const colorsim::SpectralResponse& resp);
double channel_intensity(ExposureChannel ch, double r, double g, double b);

double hwp_angle(double pulse_ms, double p_max_ms = 14.0);

// Frames counted from the pulse emission (index 0) until the mean jumps above
// `factor` times the running mean of the preceding frames.
int measure_sync_delay(std::span<const double> frame_means, double factor = 5.0, double baseline_floor = 1.0);

template <typename T>
class BoundedFifo {
 public:
  explicit BoundedFifo(std::size_t capacity) : capacity_(capacity) {}
  bool push(T v) {
    if (items_.size() >= capacity_) return false;
    items_.push_back(std::move(v));
    return true;
  }
  std::optional<T> pop() {
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return items_.size() >= capacity_; }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
};

enum class SceneKind { linear, gamma, constant };

// Mean intensity (0..255) observed for a pulse width.
struct Scene {
  SceneKind kind = SceneKind::linear;
  double gain = 18.0;        // linear: intensity per ms
  double gamma = 0.45;       // gamma: 255 (P / P_max)^gamma
  double level = 255.0;      // constant
  double noise_sigma = 0.0;  // additive Gaussian, seeded
  double evaluate(double pulse_ms, double p_max_ms) const;
};

struct Stall {
  int start = 0;
  int length = 0;
};

struct LoopConfig {
  int frames = 300;
  int buffer_depth = 10;        // host image buffers and controller prefill
  int processor_latency = 13;   // frames between illumination and host arrival
  std::size_t diode_slot = 8;
  double initial_pulse_ms = 2.0;
  std::uint64_t seed = 0;
  Scene scene;
  ExposureParams exposure;
  std::vector<Stall> stalls;

  static LoopConfig from_json(const std::string& text);
  static LoopConfig load(const std::filesystem::path& path);
  std::string to_json() const;
  void validate() const;
};

struct LogRow {
  std::uint32_t frame_id = 0;
  std::size_t diode = 0;
  std::uint32_t pulse_us = 0;
  double mean_intensity = 0.0;
  bool dropped = false;
};

struct LoopResult {
  std::vector<LogRow> log;
  std::vector<std::uint32_t> processed;  // frame ids in host processing order
  int dropped = 0;
  int underruns = 0;
  int diverged_updates = 0;
};

// Field sync ticks at a fixed rate; each tick the controller illuminates one
// frame from its packet FIFO, the video pipeline delivers the frame acquired
// `processor_latency` ticks earlier to the host buffer, and the host (unless
// stalled) processes one buffered frame and queues one updated packet.
LoopResult run_acquisition_loop(const LoopConfig& cfg);
std::string log_csv(const LoopResult& r);

// Frame means seen by the host after a single synchronization pulse is queued
// behind the prefilled controller FIFO.
std::vector<double> simulate_sync_stream(const LoopConfig& cfg, int frames);

}  // namespace mle::acqsim
