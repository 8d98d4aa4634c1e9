#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "mle/cube_io.hpp"
#include "mle/error.hpp"

namespace mle::io {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

const char* parity_name(imgcore::Parity p) {
  switch (p) {
    case imgcore::Parity::odd: return "odd";
    case imgcore::Parity::even: return "even";
    default: return "none";
  }
}

imgcore::Parity parity_from(const std::string& s) {
  if (s == "odd") return imgcore::Parity::odd;
  if (s == "even") return imgcore::Parity::even;
  return imgcore::Parity::none;
}

const char* mode_name(imgcore::IllumMode m) {
  switch (m) {
    case imgcore::IllumMode::white: return "white";
    case imgcore::IllumMode::spectral: return "spectral";
    case imgcore::IllumMode::speckle: return "speckle";
    case imgcore::IllumMode::directional: return "directional";
    case imgcore::IllumMode::dark: return "dark";
  }
  return "white";
}

imgcore::IllumMode mode_from(const std::string& s) {
  if (s == "spectral") return imgcore::IllumMode::spectral;
  if (s == "speckle") return imgcore::IllumMode::speckle;
  if (s == "directional") return imgcore::IllumMode::directional;
  if (s == "dark") return imgcore::IllumMode::dark;
  return imgcore::IllumMode::white;
}

nlohmann::json field_meta(const imgcore::Field& f) {
  return {{"parity", parity_name(f.parity)},
          {"frame_id", f.frame_id},
          {"illum", {{"mode", mode_name(f.illum.mode)}, {"diodes", f.illum.diodes}}}};
}

void apply_field_meta(const nlohmann::json& meta, imgcore::Field& f) {
  if (!meta.is_object()) return;
  if (meta.contains("parity")) f.parity = parity_from(meta["parity"].get<std::string>());
  if (meta.contains("frame_id")) f.frame_id = meta["frame_id"].get<std::uint64_t>();
  if (meta.contains("illum")) {
    const auto& il = meta["illum"];
    if (il.contains("mode")) f.illum.mode = mode_from(il["mode"].get<std::string>());
    if (il.contains("diodes")) f.illum.diodes = il["diodes"].get<std::uint16_t>();
  }
}

constexpr float kMaskedValue = std::numeric_limits<float>::quiet_NaN();

}  // namespace

std::vector<std::uint8_t> encode_cube(const CubeFile& cube) {
  const std::size_t n = static_cast<std::size_t>(cube.width) * cube.height * cube.channels;
  require(cube.payload.size() == n, "cube: payload size does not match width*height*channels");
  std::vector<std::uint8_t> out = {'M', 'L', 'E', 'C'};
  out.reserve(kCubeHeaderSize + 4 * n + 64);
  put_u16(out, kCubeVersion);
  put_u32(out, cube.width);
  put_u32(out, cube.height);
  put_u32(out, cube.channels);
  out.push_back(kDtypeFloat32);
  out.insert(out.end(), 7, 0);
  for (float v : cube.payload) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!cube.metadata.is_null()) {
    const std::string text = cube.metadata.dump();
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
  }
  return out;
}

CubeFile decode_cube(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCubeHeaderSize) throw ValidationError("cube: truncated header");
  if (std::memcmp(bytes.data(), "MLEC", 4) != 0) throw ValidationError("cube: bad magic");
  if (get_u16(bytes, 4) != kCubeVersion) throw ValidationError("cube: unsupported version");
  CubeFile cube;
  cube.width = get_u32(bytes, 6);
  cube.height = get_u32(bytes, 10);
  cube.channels = get_u32(bytes, 14);
  if (bytes[18] != kDtypeFloat32) throw ValidationError("cube: unsupported dtype code");
  for (std::size_t i = 19; i < kCubeHeaderSize; ++i)
    if (bytes[i] != 0) throw ValidationError("cube: reserved header bytes must be zero");
  const std::size_t n = static_cast<std::size_t>(cube.width) * cube.height * cube.channels;
  if (n == 0) throw ValidationError("cube: zero-sized dimensions");
  if ((bytes.size() - kCubeHeaderSize) / 4 < n) throw ValidationError("cube: truncated payload");
  cube.payload.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    cube.payload[i] = std::bit_cast<float>(get_u32(bytes, kCubeHeaderSize + 4 * i));
  std::size_t pos = kCubeHeaderSize + 4 * n;
  if (pos == bytes.size()) return cube;
  if (bytes.size() - pos < 4) throw ValidationError("cube: truncated metadata length");
  const std::uint32_t len = get_u32(bytes, pos);
  pos += 4;
  if (bytes.size() - pos != len) throw ValidationError("cube: metadata length does not match trailer size");
  try {
    cube.metadata = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("cube: metadata is not valid JSON: ") + e.what());
  }
  return cube;
}

void write_cube(const std::filesystem::path& path, const CubeFile& cube) {
  const auto bytes = encode_cube(cube);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cube: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

CubeFile read_cube(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cube: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_cube(bytes);
}

CubeFile to_cube(const imgcore::Field& field) {
  CubeFile cube;
  cube.width = static_cast<std::uint32_t>(field.width());
  cube.height = static_cast<std::uint32_t>(field.height());
  cube.channels = static_cast<std::uint32_t>(field.channels());
  cube.payload.resize(field.pixel_count() * field.channels());
  for (int c = 0; c < field.channels(); ++c)
    for (int y = 0; y < field.height(); ++y)
      for (int x = 0; x < field.width(); ++x)
        cube.at(c, x, y) = field.valid(x, y) ? static_cast<float>(field(x, y, c)) : kMaskedValue;
  cube.metadata = {{"kind", "field"}};
  cube.metadata.update(field_meta(field));
  return cube;
}

imgcore::Field field_from_cube(const CubeFile& cube) {
  if (cube.channels != 1 && cube.channels != 3)
    throw ValidationError("cube: a field needs 1 or 3 planes, file has " + std::to_string(cube.channels));
  imgcore::Field f(static_cast<int>(cube.width), static_cast<int>(cube.height), static_cast<int>(cube.channels));
  for (std::uint32_t y = 0; y < cube.height; ++y)
    for (std::uint32_t x = 0; x < cube.width; ++x) {
      bool ok = true;
      for (std::uint32_t c = 0; c < cube.channels; ++c) {
        const float v = cube.at(c, x, y);
        if (!std::isfinite(v)) {
          ok = false;
          continue;
        }
        f(static_cast<int>(x), static_cast<int>(y), static_cast<int>(c)) = v;
      }
      if (!ok) {
        for (std::uint32_t c = 0; c < cube.channels; ++c)
          f(static_cast<int>(x), static_cast<int>(y), static_cast<int>(c)) = 0.0;
        f.set_valid(static_cast<int>(x), static_cast<int>(y), false);
      }
    }
  apply_field_meta(cube.metadata, f);
  return f;
}

CubeFile to_cube(std::span<const imgcore::Field> frames) {
  require(!frames.empty(), "cube: empty frame sequence");
  const auto& first = frames.front();
  CubeFile cube;
  cube.width = static_cast<std::uint32_t>(first.width());
  cube.height = static_cast<std::uint32_t>(first.height());
  cube.channels = static_cast<std::uint32_t>(frames.size());
  cube.payload.resize(first.pixel_count() * frames.size());
  nlohmann::json per_frame = nlohmann::json::array();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = frames[k];
    require(f.width() == first.width() && f.height() == first.height() && f.channels() == 1,
            "cube: sequence frames must be single-channel and equally sized");
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x)
        cube.at(static_cast<std::uint32_t>(k), x, y) = f.valid(x, y) ? static_cast<float>(f(x, y)) : kMaskedValue;
    per_frame.push_back(field_meta(f));
  }
  cube.metadata = {{"kind", "sequence"}, {"frames", per_frame}};
  return cube;
}

std::vector<imgcore::Field> frames_from_cube(const CubeFile& cube) {
  std::vector<imgcore::Field> out;
  out.reserve(cube.channels);
  for (std::uint32_t k = 0; k < cube.channels; ++k) {
    imgcore::Field f(static_cast<int>(cube.width), static_cast<int>(cube.height), 1);
    for (std::uint32_t y = 0; y < cube.height; ++y)
      for (std::uint32_t x = 0; x < cube.width; ++x) {
        const float v = cube.at(k, x, y);
        if (std::isfinite(v)) {
          f(static_cast<int>(x), static_cast<int>(y)) = v;
        } else {
          f.set_valid(static_cast<int>(x), static_cast<int>(y), false);
        }
      }
    if (cube.metadata.is_object() && cube.metadata.contains("frames") && cube.metadata["frames"].size() > k)
      apply_field_meta(cube.metadata["frames"][k], f);
    out.push_back(std::move(f));
  }
  return out;
}

CubeFile to_cube(const imgcore::SpectralCube& sc) {
  sc.validate();
  CubeFile cube;
  cube.width = static_cast<std::uint32_t>(sc.width);
  cube.height = static_cast<std::uint32_t>(sc.height);
  cube.channels = static_cast<std::uint32_t>(sc.bands());
  cube.payload.resize(sc.pixel_count() * sc.bands());
  for (std::size_t k = 0; k < sc.bands(); ++k)
    for (std::size_t i = 0; i < sc.pixel_count(); ++i)
      cube.payload[k * sc.pixel_count() + i] = sc.mask[i] ? static_cast<float>(sc.planes[k][i]) : kMaskedValue;
  cube.metadata = {{"kind", "spectral"}, {"wavelengths_nm", sc.wavelengths_nm}};
  return cube;
}

imgcore::SpectralCube spectral_from_cube(const CubeFile& cube) {
  std::vector<double> wl;
  if (cube.metadata.is_object() && cube.metadata.contains("wavelengths_nm"))
    wl = cube.metadata["wavelengths_nm"].get<std::vector<double>>();
  else
    throw ValidationError("cube: spectral cube metadata lacks wavelengths_nm");
  if (wl.size() != cube.channels) throw ValidationError("cube: wavelength count does not match plane count");
  imgcore::SpectralCube sc(static_cast<int>(cube.width), static_cast<int>(cube.height), wl);
  const std::size_t n = sc.pixel_count();
  for (std::size_t k = 0; k < sc.bands(); ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const float v = cube.payload[k * n + i];
      if (std::isfinite(v)) {
        sc.planes[k][i] = v;
      } else {
        sc.mask[i] = 0;
      }
    }
  for (std::size_t i = 0; i < n; ++i)
    if (!sc.mask[i])
      for (auto& p : sc.planes) p[i] = 0.0;
  sc.validate();
  return sc;
}

}  // namespace mle::io
