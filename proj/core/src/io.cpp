#include "reldepth/io.hpp"

#include <png.h>

#include <bit>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "reldepth/error.hpp"

namespace reldepth {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

[[noreturn]] void fail(const fs::path& path, const std::string& what) {
  throw FormatError(path.string() + ": " + what);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(path, std::string("cannot open (") + std::strerror(errno) + ")");
  return f;
}

std::uint8_t quantize(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

void png_write_rows(const fs::path& path, std::size_t width, std::size_t height, int color_type,
                    const std::vector<std::uint8_t>& pixels, std::size_t row_bytes) {
  if (width == 0 || height == 0) fail(path, "cannot write an empty image");
  auto f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(path, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(path, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "libpng write error");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * row_bytes));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Returns 8-bit pixels expanded to gray or RGB (alpha stripped).
struct RawPng {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;
};

RawPng png_read(const fs::path& path) {
  auto f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) fail(path, "not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(path, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(path, "png_create_info_struct failed");
  }
  RawPng out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "corrupt or truncated PNG");
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.channels = png_get_channels(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  out.pixels.resize(row_bytes * out.height);
  std::vector<png_bytep> rows(out.height);
  for (std::size_t y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (out.channels != 1 && out.channels != 3) fail(path, "unsupported channel layout");
  return out;
}

void write_exact(std::FILE* f, const void* data, std::size_t bytes, const fs::path& path) {
  if (std::fwrite(data, 1, bytes, f) != bytes) fail(path, "write failed");
}

std::vector<char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

void write_png(const fs::path& path, const Image& image) {
  const std::size_t c = image.channels();
  if (c != 1 && c != 3) fail(path, "PNG output needs 1 or 3 channels, got " + std::to_string(c));
  const std::size_t w = image.width();
  const std::size_t h = image.height();
  std::vector<std::uint8_t> px(w * h * c);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k) px[(y * w + x) * c + k] = quantize(image.at(k, y, x));
  png_write_rows(path, w, h, c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, px, w * c);
}

Image read_png(const fs::path& path) {
  const RawPng raw = png_read(path);
  Image img(3, {raw.height, raw.width});
  for (std::size_t y = 0; y < raw.height; ++y)
    for (std::size_t x = 0; x < raw.width; ++x)
      for (std::size_t k = 0; k < 3; ++k) {
        const std::size_t src = raw.channels == 1 ? 0 : k;
        img.at(k, y, x) = raw.pixels[(y * raw.width + x) * raw.channels + src] / 255.0;
      }
  return img;
}

void write_mask_png(const fs::path& path, const Mask& mask, Size2 size) {
  if (mask.size() != size.area()) fail(path, "mask size does not match dimensions");
  std::vector<std::uint8_t> px(size.area());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = mask[i] ? 255 : 0;
  png_write_rows(path, size.width, size.height, PNG_COLOR_TYPE_GRAY, px, size.width);
}

Mask read_mask_png(const fs::path& path, Size2* size) {
  const RawPng raw = png_read(path);
  if (raw.channels != 1) fail(path, "mask PNG must be single-channel");
  Mask m = Mask::filled(raw.height, raw.width, false);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) m.set(i, raw.pixels[i] >= 128);
  if (size) *size = {raw.height, raw.width};
  return m;
}

void write_pfm(const fs::path& path, const DepthMap& map) {
  const auto [h, w] = std::pair{map.size.height, map.size.width};
  if (map.values.size() != h * w) fail(path, "map values do not match dimensions");
  auto f = open_file(path, "wb");
  const std::string header = "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n";
  write_exact(f.get(), header.data(), header.size(), path);
  std::vector<float> row(w);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t y = h - 1 - r;
    for (std::size_t x = 0; x < w; ++x)
      row[x] = map.is_valid(y, x) ? static_cast<float>(map.at(y, x))
                                  : std::numeric_limits<float>::infinity();
    write_exact(f.get(), row.data(), w * sizeof(float), path);
  }
}

DepthMap read_pfm(const fs::path& path) {
  const std::vector<char> bytes = read_all(path);
  // Header: three whitespace-terminated tokens, the last followed by one
  // whitespace byte before the raster.
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) fail(path, "truncated PFM header");
    return std::string(bytes.data() + start, pos - start);
  };
  const std::string magic = token();
  if (magic == "PF") fail(path, "three-channel PFM is not supported; expected 'Pf'");
  if (magic != "Pf") fail(path, "bad PFM magic '" + magic + "'");
  std::size_t w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    scale = std::stod(token());
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception&) {
    fail(path, "malformed PFM header");
  }
  if (w == 0 || h == 0) fail(path, "PFM has zero dimension");
  if (scale == 0.0) fail(path, "PFM scale must be nonzero");
  ++pos;  // single whitespace byte after scale
  const std::size_t need = w * h * sizeof(float);
  if (bytes.size() < pos + need)
    fail(path, "truncated PFM raster: need " + std::to_string(need) + " bytes, have " +
                   std::to_string(bytes.size() > pos ? bytes.size() - pos : 0));
  if (bytes.size() > pos + need) fail(path, "trailing data after PFM raster");
  const bool big = scale > 0.0;
  DepthMap map({h, w}, 0.0, true);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t y = h - 1 - r;
    for (std::size_t x = 0; x < w; ++x) {
      std::uint32_t u;
      std::memcpy(&u, bytes.data() + pos + (r * w + x) * 4, 4);
      if (big) u = __builtin_bswap32(u);
      const float v = std::bit_cast<float>(u);
      map.at(y, x) = v;
      map.valid.set(y * w + x, std::isfinite(v));
    }
  }
  return map;
}

void write_flo(const fs::path& path, const FlowField& flow) {
  const std::size_t w = flow.size.width;
  const std::size_t h = flow.size.height;
  if (flow.dx.size() != w * h || flow.dy.size() != w * h) fail(path, "flow does not match dimensions");
  auto f = open_file(path, "wb");
  const float magic = kFloMagic;
  const std::int32_t dims[2] = {static_cast<std::int32_t>(w), static_cast<std::int32_t>(h)};
  write_exact(f.get(), &magic, 4, path);
  write_exact(f.get(), dims, 8, path);
  std::vector<float> row(2 * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      const bool ok = flow.is_valid(i);
      row[2 * x] = ok ? static_cast<float>(flow.dx[i]) : 1e10f;
      row[2 * x + 1] = ok ? static_cast<float>(flow.dy[i]) : 1e10f;
    }
    write_exact(f.get(), row.data(), row.size() * sizeof(float), path);
  }
}

FlowField read_flo(const fs::path& path) {
  const std::vector<char> bytes = read_all(path);
  if (bytes.size() < 12) fail(path, "truncated .flo header");
  float magic;
  std::int32_t dims[2];
  std::memcpy(&magic, bytes.data(), 4);
  std::memcpy(dims, bytes.data() + 4, 8);
  if (magic != kFloMagic) fail(path, "bad .flo magic (expected 202021.25)");
  if (dims[0] <= 0 || dims[1] <= 0 || dims[0] > (1 << 16) || dims[1] > (1 << 16))
    fail(path, "implausible .flo dimensions " + std::to_string(dims[0]) + "x" + std::to_string(dims[1]));
  const std::size_t w = static_cast<std::size_t>(dims[0]);
  const std::size_t h = static_cast<std::size_t>(dims[1]);
  const std::size_t need = 12 + w * h * 8;
  if (bytes.size() < need) fail(path, "truncated .flo raster");
  if (bytes.size() > need) fail(path, "trailing data after .flo raster");
  FlowField flow({h, w}, 0.0, 0.0, true);
  for (std::size_t i = 0; i < w * h; ++i) {
    float uv[2];
    std::memcpy(uv, bytes.data() + 12 + i * 8, 8);
    const bool ok = std::isfinite(uv[0]) && std::isfinite(uv[1]) && std::fabs(uv[0]) <= 1e9f &&
                    std::fabs(uv[1]) <= 1e9f;
    flow.dx[i] = ok ? uv[0] : 0.0;
    flow.dy[i] = ok ? uv[1] : 0.0;
    flow.valid.set(i, ok);
  }
  return flow;
}

}  // namespace reldepth
