#pragma once

// File formats: 8-bit PNG images and masks, single-channel PFM float maps,
// Middlebury .flo flow. All readers throw FormatError with the offending
// path on malformed input.

#include <filesystem>

#include "reldepth/maps.hpp"

namespace reldepth {

// Values in [0, 1] are quantized to 8 bits (clamped, round to nearest).
// One channel is written as grayscale, three as RGB.
void write_png(const std::filesystem::path& path, const Image& image);
// Always returns three channels in [0, 1]; grayscale is replicated.
Image read_png(const std::filesystem::path& path);

// Single-channel 0/255 PNG.
void write_mask_png(const std::filesystem::path& path, const Mask& mask, Size2 size);
// Pixels >= 128 are set.
Mask read_mask_png(const std::filesystem::path& path, Size2* size = nullptr);

// Little-endian float32, scale -1.0, rows stored bottom to top. Invalid
// pixels are written as +inf and read back invalid; every non-finite value
// reads as invalid.
void write_pfm(const std::filesystem::path& path, const DepthMap& map);
DepthMap read_pfm(const std::filesystem::path& path);

// Invalid vectors are written as (1e10, 1e10); components with magnitude
// above 1e9 read as invalid.
inline constexpr float kFloMagic = 202021.25f;
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path);

}  // namespace reldepth
