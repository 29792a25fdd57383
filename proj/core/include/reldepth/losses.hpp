#pragma once

// Training objectives for the fast (student) network. Each returns a
// differentiable scalar whose graph reaches only fast-network parameters;
// teacher outputs enter as constants.

#include <array>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "reldepth/clip.hpp"
#include "reldepth/flow.hpp"
#include "reldepth/maps.hpp"
#include "reldepth/model.hpp"
#include "reldepth/tensor.hpp"

namespace reldepth {

using Rng = std::mt19937_64;

// Longest time gap between the two frames of a temporal pair, seconds.
inline constexpr double kMaxPairDt = 0.1;

struct AugmentRanges {
  std::array<double, 2> brightness{0.8, 1.2};
  std::array<double, 2> contrast{0.8, 1.2};
  std::array<double, 2> channel_gain{0.9, 1.1};
  double max_rotation_deg = 15.0;
  std::array<double, 2> scale{0.8, 1.2};
  // Fraction of width / height.
  double max_translation = 0.1;
};

// 2x3 affine mapping source pixel coordinates to destination coordinates.
using Affine2 = std::array<double, 6>;

struct AugmentParams {
  double brightness = 1.0;
  double contrast = 1.0;
  std::array<double, 3> channel_gain{1.0, 1.0, 1.0};
  Affine2 spatial{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

  static AugmentParams identity() { return {}; }
  static AugmentParams sample(Rng& rng, Size2 size, const AugmentRanges& ranges = {});
  // Rotation and isotropic scale about the image centre, then translation.
  static Affine2 similarity(Size2 size, double rotation_rad, double scale, double tx_px, double ty_px);

  // Throws std::invalid_argument when |det| <= 1e-6.
  void validate() const;
};

// Colour jitter: contrast about the mean intensity, then brightness and
// per-channel gains, clamped to [0, 1].
Image apply_color(const Image& image, const AugmentParams& aug, const Mask* valid = nullptr);
// output(p) = input(A^-1 p), bilinear; pixels mapping outside are invalid.
WarpedImage apply_spatial(const Image& image, const Affine2& spatial);
DepthMap apply_spatial(const DepthMap& depth, const Affine2& spatial);

struct FramePair {
  Image frame_a;
  Image frame_b;
  double t_a = 0.0;
  double t_b = 0.0;
  FlowField f_ab;
  FlowField f_ba;
  std::size_t index_a = 0;
  std::size_t index_b = 0;

  double dt() const;
};

// SSIMAE of fast(image) against the ground truth over its valid pixels.
Tensor supervised_loss(const ModelPair& pair, const Image& image, const DepthMap& gt);

struct ConsistencyTarget {
  Image student_input;
  DepthMap target;
};

// Teacher depth for the clean image, moved by the spatial transform; the
// student sees the colour-jittered, spatially transformed image.
ConsistencyTarget augmentation_target(const ModelPair& pair, const Image& image,
                                      const AugmentParams& aug);

// nullopt when the transformed teacher target is degenerate.
std::optional<Tensor> augmentation_consistency_loss(const ModelPair& pair, const Image& image,
                                                    const AugmentParams& aug);

// Teacher depth of frame b warped into frame a by f_ab, valid only where the
// correspondence mask holds. Throws std::invalid_argument if dt > kMaxPairDt.
DepthMap temporal_target(const ModelPair& pair, const FramePair& fp, const MaskConfig& cfg);

// nullopt when the correspondence mask is empty or the target degenerate.
std::optional<Tensor> temporal_consistency_loss(const ModelPair& pair, const FramePair& fp,
                                                const MaskConfig& cfg);

// SSIMAE of fast(input) against a precomputed target.
Tensor loss_against_target(const DepthNet& fast, const Image& input, const DepthMap& target);

// Ordered pairs (i, j), i != j, with |t_j - t_i| <= max_dt.
std::vector<std::pair<std::size_t, std::size_t>> eligible_frame_pairs(const ClipSample& clip,
                                                                      double max_dt = kMaxPairDt);

// Uniform draw over eligible_frame_pairs; throws std::invalid_argument when
// there are none.
FramePair sample_frame_pair(const ClipSample& clip, Rng& rng, double max_dt = kMaxPairDt);
FramePair make_frame_pair(const ClipSample& clip, std::size_t a, std::size_t b);

}  // namespace reldepth
