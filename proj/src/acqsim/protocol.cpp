#include <cstdio>

#include "mle/acqsim.hpp"
#include "mle/error.hpp"

namespace mle::acqsim {

namespace {

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[at + static_cast<std::size_t>(i)];
  return v;
}

template <typename Err>
void check_widths(const std::array<std::uint16_t, kPulseSlots>& pw) {
  for (std::size_t s = 0; s < kPulseSlots; ++s) {
    if (pw[s] > kMaxPulseUs) throw Err("pulse packet: width exceeds 14000 us in slot " + std::to_string(s));
    if (s >= kDiodeCount && pw[s] != 0) throw Err("pulse packet: reserved slot " + std::to_string(s) + " is not zero");
  }
}

}  // namespace

Bytes encode_pulse_packet(const PulseWidthPacket& p) {
  check_widths<ValidationError>(p.odd_pw);
  check_widths<ValidationError>(p.even_pw);
  Bytes out;
  out.reserve(kPulsePacketSize);
  put_u32(out, p.frame_id);
  for (auto v : p.odd_pw) put_u16(out, v);
  for (auto v : p.even_pw) put_u16(out, v);
  return out;
}

PulseWidthPacket decode_pulse_packet(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kPulsePacketSize)
    throw MalformedPacket("pulse packet: expected 64 bytes, got " + std::to_string(bytes.size()));
  PulseWidthPacket p;
  p.frame_id = get_u32(bytes, 0);
  for (std::size_t s = 0; s < kPulseSlots; ++s) {
    p.odd_pw[s] = get_u16(bytes, 4 + 2 * s);
    p.even_pw[s] = get_u16(bytes, 34 + 2 * s);
  }
  check_widths<MalformedPacket>(p.odd_pw);
  check_widths<MalformedPacket>(p.even_pw);
  return p;
}

Bytes encode_power_packet(const PowerReportPacket& p) {
  Bytes out;
  out.reserve(kPowerPacketSize);
  put_u32(out, p.frame_id);
  for (auto v : p.odd_power) put_u16(out, v);
  for (auto v : p.even_power) put_u16(out, v);
  return out;
}

PowerReportPacket decode_power_packet(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kPowerPacketSize)
    throw MalformedPacket("power packet: expected 16 bytes, got " + std::to_string(bytes.size()));
  PowerReportPacket p;
  p.frame_id = get_u32(bytes, 0);
  for (std::size_t s = 0; s < kPowerSlots; ++s) {
    p.odd_power[s] = get_u16(bytes, 4 + 2 * s);
    p.even_power[s] = get_u16(bytes, 10 + 2 * s);
  }
  return p;
}

std::string hex_dump(std::span<const std::uint8_t> bytes) {
  std::string out;
  char buf[4];
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%02x", bytes[i]);
    out += buf;
    out += (i + 1 == bytes.size()) ? "\n" : ((i + 1) % 16 == 0 ? "\n" : " ");
  }
  return out;
}

}  // namespace mle::acqsim
