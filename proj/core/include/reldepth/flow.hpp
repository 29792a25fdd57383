#pragma once

#include <array>
#include <cstddef>
#include <optional>

#include "reldepth/maps.hpp"

namespace reldepth {

struct MaskConfig {
  // Forward-backward loop closure threshold, pixels. Comparison is strict.
  double epsilon_px = 2.0;
  // Maximum |vertical flow| accepted on a rectified stereo pair, pixels.
  double vertical_gate_px = 2.0;

  void validate() const;
};

// Up to four (index, weight) taps of a bilinear lookup. Taps with zero
// weight are omitted, so integer positions read exactly one pixel.
struct BilinearTaps {
  std::array<std::size_t, 4> index{};
  std::array<double, 4> weight{};
  int count = 0;
};

inline constexpr double kEdgeSlack = 1e-9;

// Taps for a lookup at (x, y), or nullopt when the point lies outside
// [0, W-1] x [0, H-1] by more than kEdgeSlack pixels or is not finite.
std::optional<BilinearTaps> bilinear_taps(Size2 size, double x, double y);

// Bilinear lookup into a depth map; nullopt if any contributing pixel is
// invalid or out of bounds.
std::optional<double> sample_bilinear(const DepthMap& map, double x, double y);

struct WarpedImage {
  Image image;
  Mask valid;
};

// output(p) = target sampled at p + flow(p). Samples are invalid when the
// flow at p is invalid, the position is out of bounds, or a contributing
// target pixel is invalid. Invalid outputs hold 0.
WarpedImage warp(const FlowField& flow, const Image& target, const Mask* target_valid = nullptr);
DepthMap warp(const FlowField& flow, const DepthMap& target);
FlowField warp(const FlowField& flow, const FlowField& target);

// C(p) = 1 iff || f_ab(p) + (f_ab . f_ba)(p) ||_2 < epsilon with a valid
// warped sample.
Mask correspondence_mask(const FlowField& f_ab, const FlowField& f_ba, const MaskConfig& cfg);

// Per-pixel loop-closure residual norm; NaN where the warped sample is invalid.
std::vector<double> loop_residual(const FlowField& f_ab, const FlowField& f_ba);

struct DisparityResult {
  DepthMap disparity;
  // Fraction of pixels rejected by the loop check or the vertical gate.
  double masked_fraction = 0.0;
};

// Disparity magnitude |horizontal flow| on a rectified pair, kept where the
// loop check passes and |vertical flow| < cfg.vertical_gate_px.
DisparityResult disparity_from_rectified_flow(const FlowField& f_lr, const FlowField& f_rl,
                                              const MaskConfig& cfg);

}  // namespace reldepth
