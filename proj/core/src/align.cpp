#include "reldepth/align.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "reldepth/error.hpp"

namespace reldepth {

DepthMap NormalizedDepth::denormalize() const {
  DepthMap out = map;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (out.valid[i]) out.values[i] = out.values[i] * std + median;
  return out;
}

double masked_median(const std::vector<double>& values, const Mask& valid) {
  std::vector<double> v;
  v.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    if (valid[i]) v.push_back(values[i]);
  if (v.empty()) throw DegenerateError("median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

NormalizedDepth normalize_gt(const DepthMap& gt) {
  const std::size_t n = gt.valid.count();
  if (n < 2)
    throw DegenerateError("normalize_gt: need at least 2 valid pixels, have " + std::to_string(n));
  double mean = 0.0;
  for (std::size_t i = 0; i < gt.values.size(); ++i)
    if (gt.valid[i]) mean += gt.values[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < gt.values.size(); ++i)
    if (gt.valid[i]) var += (gt.values[i] - mean) * (gt.values[i] - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  if (!(sd >= kStdFloor)) throw DegenerateError("normalize_gt: ground truth is constant");

  NormalizedDepth out;
  out.median = masked_median(gt.values, gt.valid);
  out.std = sd;
  out.map = DepthMap(gt.size, 0.0, false);
  out.map.valid = gt.valid;
  for (std::size_t i = 0; i < gt.values.size(); ++i)
    if (gt.valid[i]) out.map.values[i] = (gt.values[i] - out.median) / sd;
  return out;
}

namespace {

Mask joint_mask(const Mask& a, const Mask& b, const Mask* extra) {
  Mask m = a & b;
  if (extra) m &= *extra;
  return m;
}

}  // namespace

AffineFit fit_scale_shift(const DepthMap& pred, const NormalizedDepth& target, const Mask* mask) {
  require_same_size(pred.size, target.map.size, "fit_scale_shift");
  const Mask m = joint_mask(pred.valid, target.map.valid, mask);
  const std::size_t n = m.count();
  if (n < 2) throw DegenerateError("fit_scale_shift: need at least 2 jointly valid pixels");

  // Centred normal equations: alpha = S_dt / S_dd, beta = mean_t - alpha mean_d.
  double mean_d = 0.0, mean_t = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    mean_d += pred.values[i];
    mean_t += target.map.values[i];
  }
  mean_d /= static_cast<double>(n);
  mean_t /= static_cast<double>(n);
  double s_dd = 0.0, s_dt = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    const double dc = pred.values[i] - mean_d;
    s_dd += dc * dc;
    s_dt += dc * (target.map.values[i] - mean_t);
  }
  AffineFit fit;
  fit.n_pixels = n;
  fit.degenerate = std::sqrt(s_dd / static_cast<double>(n)) < kStdFloor;
  fit.alpha = s_dt / (s_dd + (fit.degenerate ? kRidgeLambda : 0.0));
  fit.beta = mean_t - fit.alpha * mean_d;
  return fit;
}

Tensor ssimae(const Tensor& pred, const DepthMap& gt, const Mask* mask) {
  if (pred.numel() != gt.size.area())
    throw ShapeError("ssimae: prediction has " + std::to_string(pred.numel()) +
                     " elements, ground truth " + std::to_string(gt.size.area()));
  DepthMap masked_gt = gt;
  if (mask) masked_gt.valid &= *mask;
  const NormalizedDepth target = normalize_gt(masked_gt);
  const Mask& m = target.map.valid;
  const std::size_t n = m.count();

  const Tensor d = reshape(pred, {gt.size.height, gt.size.width});
  const Tensor t = Tensor::from({gt.size.height, gt.size.width}, target.map.values);
  double mean_t = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) mean_t += target.map.values[i];
  mean_t /= static_cast<double>(n);

  const Tensor dc = d - mean(d, &m);
  Tensor s_dd = sum(dc * dc, &m);
  const Tensor s_dt = sum(dc * t, &m);
  if (std::sqrt(s_dd.item() / static_cast<double>(n)) < kStdFloor) s_dd = s_dd + kRidgeLambda;
  const Tensor alpha = s_dt / s_dd;
  // alpha * d + beta with beta = mean_t - alpha * mean_d
  const Tensor fitted = dc * alpha + mean_t;
  return mean(abs(fitted - t), &m);
}

double ssimae(const DepthMap& pred, const DepthMap& gt, const Mask* mask) {
  require_same_size(pred.size, gt.size, "ssimae");
  DepthMap masked_gt = gt;
  masked_gt.valid &= pred.valid;
  if (mask) masked_gt.valid &= *mask;
  const NormalizedDepth target = normalize_gt(masked_gt);
  const AffineFit fit = fit_scale_shift(pred, target);
  double total = 0.0;
  const Mask& m = target.map.valid;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) total += std::abs(fit.apply(pred.values[i]) - target.map.values[i]);
  return total / static_cast<double>(m.count());
}

}  // namespace reldepth
