#pragma once

#include <filesystem>

#include "mle/imgcore.hpp"

namespace mle::io {

// 16-bit binary PGM (P5, big-endian samples); values clamped to [0,1].
void write_pgm16(const std::filesystem::path& path, const imgcore::Field& mono);
// Reads 8- or 16-bit P5 and normalizes by maxval.
imgcore::Field read_pgm(const std::filesystem::path& path);

// 16-bit grayscale or RGB PNG depending on channel count; values clamped to [0,1].
void write_png16(const std::filesystem::path& path, const imgcore::Field& field);
// 8-bit grayscale or RGB PNG; masked pixels are written black.
void write_png8(const std::filesystem::path& path, const imgcore::Field& field);
// Reads 8/16-bit gray, gray+alpha, RGB or RGBA PNG, normalized by the max code value.
imgcore::Field read_png(const std::filesystem::path& path);

// Jet-style false colour of a mono field over [lo, hi]; masked pixels black.
imgcore::Field false_color(const imgcore::Field& mono, double lo, double hi);

// Normal components packed as bytes via round(127.5 * (c + 1)).
std::uint8_t normal_component_to_byte(double c);

}  // namespace mle::io
