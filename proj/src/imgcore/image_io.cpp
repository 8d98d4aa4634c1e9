#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "mle/error.hpp"
#include "mle/image_io.hpp"

namespace mle::io {

using imgcore::Field;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint16_t to_u16(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void write_png(const std::filesystem::path& path, const Field& field, int bit_depth) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("png: cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png: libpng write error for " + path.string());
  }
  png_init_io(png, fp.get());
  const int color = field.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, static_cast<png_uint_32>(field.width()), static_cast<png_uint_32>(field.height()),
               bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // keep output independent of the build's timestamp/zlib defaults
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  const int nc = field.channels();
  const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
  std::vector<png_byte> row(static_cast<std::size_t>(field.width()) * nc * bytes_per_sample);
  for (int y = 0; y < field.height(); ++y) {
    std::size_t k = 0;
    for (int x = 0; x < field.width(); ++x)
      for (int c = 0; c < nc; ++c) {
        const double v = field.valid(x, y) ? field(x, y, c) : 0.0;
        if (bit_depth == 16) {
          const auto s = to_u16(v);
          row[k++] = static_cast<png_byte>(s >> 8);
          row[k++] = static_cast<png_byte>(s & 0xff);
        } else {
          row[k++] = to_u8(v);
        }
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_pgm16(const std::filesystem::path& path, const Field& mono) {
  require(mono.channels() == 1, "pgm: expects a single-channel field");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pgm: cannot write " + path.string());
  out << "P5\n" << mono.width() << ' ' << mono.height() << "\n65535\n";
  for (int y = 0; y < mono.height(); ++y)
    for (int x = 0; x < mono.width(); ++x) {
      const auto s = to_u16(mono.valid(x, y) ? mono(x, y) : 0.0);
      const char b[2] = {static_cast<char>(s >> 8), static_cast<char>(s & 0xff)};
      out.write(b, 2);
    }
}

Field read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("pgm: cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw ValidationError("pgm: only binary P5 is supported");
  auto next_int = [&in]() {
    int v = 0;
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      break;
    }
    if (!(in >> v)) throw ValidationError("pgm: malformed header");
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  in.get();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw ValidationError("pgm: bad header values");
  Field f(w, h, 1);
  const bool wide = maxval > 255;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int v = 0;
      if (wide) {
        const int hi = in.get();
        const int lo = in.get();
        v = (hi << 8) | lo;
      } else {
        v = in.get();
      }
      if (!in) throw ValidationError("pgm: truncated pixel data");
      f(x, y) = static_cast<double>(v) / maxval;
    }
  return f;
}

void write_png16(const std::filesystem::path& path, const Field& field) { write_png(path, field, 16); }

void write_png8(const std::filesystem::path& path, const Field& field) { write_png(path, field, 8); }

Field read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ValidationError("png: cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("png: decode error for " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto w = png_get_image_width(png, info);
  const auto h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // native little-endian 16-bit samples
  png_read_update_info(png, info);
  const int nc = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  std::vector<png_byte> buf(png_get_rowbytes(png, info) * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + y * png_get_rowbytes(png, info);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const int channels = nc >= 3 ? 3 : 1;
  Field f(static_cast<int>(w), static_cast<int>(h), channels);
  const double maxcode = out_depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 y = 0; y < h; ++y)
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        double v;
        if (out_depth == 16) {
          const auto* p = reinterpret_cast<const std::uint16_t*>(rows[y]);
          v = p[x * nc + c];
        } else {
          v = rows[y][x * nc + c];
        }
        f(static_cast<int>(x), static_cast<int>(y), c) = v / maxcode;
      }
  return f;
}

Field false_color(const Field& mono, double lo, double hi) {
  require(mono.channels() == 1, "false_color: expects a single-channel field");
  Field out(mono.width(), mono.height(), 3);
  const double span = hi > lo ? hi - lo : 1.0;
  for (int y = 0; y < mono.height(); ++y)
    for (int x = 0; x < mono.width(); ++x) {
      if (!mono.valid(x, y)) {
        out.set_valid(x, y, false);
        continue;
      }
      const double t = std::clamp((mono(x, y) - lo) / span, 0.0, 1.0);
      out(x, y, 0) = std::clamp(1.5 - std::abs(4.0 * t - 3.0), 0.0, 1.0);
      out(x, y, 1) = std::clamp(1.5 - std::abs(4.0 * t - 2.0), 0.0, 1.0);
      out(x, y, 2) = std::clamp(1.5 - std::abs(4.0 * t - 1.0), 0.0, 1.0);
    }
  return out;
}

std::uint8_t normal_component_to_byte(double c) {
  return static_cast<std::uint8_t>(std::lround(127.5 * (std::clamp(c, -1.0, 1.0) + 1.0)));
}

}  // namespace mle::io
