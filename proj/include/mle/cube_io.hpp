#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "mle/imgcore.hpp"

namespace mle::io {

// In-memory form of an MLE cube file. Payload is plane-major, row-major
// binary32; masked pixels are stored as quiet NaN in every plane.
struct CubeFile {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 0;
  std::vector<float> payload;
  nlohmann::json metadata;  // null when the file has no trailer

  float& at(std::uint32_t plane, std::uint32_t x, std::uint32_t y) {
    return payload[(static_cast<std::size_t>(plane) * height + y) * width + x];
  }
  float at(std::uint32_t plane, std::uint32_t x, std::uint32_t y) const {
    return payload[(static_cast<std::size_t>(plane) * height + y) * width + x];
  }
};

inline constexpr std::size_t kCubeHeaderSize = 26;
inline constexpr std::uint16_t kCubeVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;

std::vector<std::uint8_t> encode_cube(const CubeFile& cube);
CubeFile decode_cube(std::span<const std::uint8_t> bytes);
void write_cube(const std::filesystem::path& path, const CubeFile& cube);
CubeFile read_cube(const std::filesystem::path& path);

// Field <-> cube (channels become planes). Parity/frame/illum go to metadata.
CubeFile to_cube(const imgcore::Field& field);
imgcore::Field field_from_cube(const CubeFile& cube);

// A sequence of same-shaped single-channel fields stored one per plane.
CubeFile to_cube(std::span<const imgcore::Field> frames);
std::vector<imgcore::Field> frames_from_cube(const CubeFile& cube);

CubeFile to_cube(const imgcore::SpectralCube& cube);
imgcore::SpectralCube spectral_from_cube(const CubeFile& cube);

}  // namespace mle::io
