#pragma once

// Scale-and-shift invariant comparison of depth maps.
//
// The ground truth is normalized by its median and population standard
// deviation over valid pixels. The prediction is then mapped onto it by the
// least-squares affine fit alpha * d + beta, and the mean absolute residual
// over the unmasked pixels is the SSIMAE.

#include <cstddef>

#include "reldepth/maps.hpp"
#include "reldepth/tensor.hpp"

namespace reldepth {

inline constexpr double kStdFloor = 1e-12;
inline constexpr double kRidgeLambda = 1e-9;

struct NormalizedDepth {
  DepthMap map;
  double median = 0.0;
  double std = 1.0;

  // value * std + median at valid pixels.
  DepthMap denormalize() const;
};

// Median of an even count is the mean of the two middle values.
double masked_median(const std::vector<double>& values, const Mask& valid);

// Throws DegenerateError with fewer than 2 valid pixels or std < kStdFloor.
NormalizedDepth normalize_gt(const DepthMap& gt);

struct AffineFit {
  double alpha = 1.0;
  double beta = 0.0;
  std::size_t n_pixels = 0;
  // Prediction had (near) zero variance; a ridge term kRidgeLambda was added
  // to the slope equation.
  bool degenerate = false;

  double apply(double d) const { return alpha * d + beta; }
};

// argmin over (alpha, beta) of sum (alpha*pred + beta - target)^2 over pixels
// valid in pred, target and the optional mask.
AffineFit fit_scale_shift(const DepthMap& pred, const NormalizedDepth& target,
                          const Mask* mask = nullptr);

// Differentiable SSIMAE. pred has H*W elements (any shape); normalization of
// gt uses the jointly unmasked pixels. The fit coefficients are functions of
// pred and carry gradient.
Tensor ssimae(const Tensor& pred, const DepthMap& gt, const Mask* mask = nullptr);

// Value-only SSIMAE over pixels valid in both maps and the optional mask.
double ssimae(const DepthMap& pred, const DepthMap& gt, const Mask* mask = nullptr);

}  // namespace reldepth
