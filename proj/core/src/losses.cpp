#include "reldepth/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "reldepth/align.hpp"
#include "reldepth/error.hpp"

namespace reldepth {

namespace {

// Small slack so that 25 fps and 10 fps timestamps compare as intended.
constexpr double kDtSlack = 1e-9;

double uniform(Rng& rng, std::array<double, 2> range) {
  return std::uniform_real_distribution<double>(range[0], range[1])(rng);
}

Affine2 invert(const Affine2& a) {
  const double det = a[0] * a[4] - a[1] * a[3];
  if (!(std::abs(det) > 1e-6)) throw std::invalid_argument("spatial transform is not invertible");
  const double i0 = a[4] / det, i1 = -a[1] / det, i3 = -a[3] / det, i4 = a[0] / det;
  return {i0, i1, -(i0 * a[2] + i1 * a[5]), i3, i4, -(i3 * a[2] + i4 * a[5])};
}

template <class Fn>
void for_each_source(Size2 size, const Affine2& spatial, Fn fn) {
  const Affine2 inv = invert(spatial);
  for (std::size_t y = 0; y < size.height; ++y)
    for (std::size_t x = 0; x < size.width; ++x) {
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      fn(y * size.width + x, inv[0] * fx + inv[1] * fy + inv[2], inv[3] * fx + inv[4] * fy + inv[5]);
    }
}

}  // namespace

// ---- augmentation ----------------------------------------------------------

Affine2 AugmentParams::similarity(Size2 size, double rotation_rad, double scale, double tx_px,
                                  double ty_px) {
  const double cx = (static_cast<double>(size.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(size.height) - 1.0) / 2.0;
  const double c = scale * std::cos(rotation_rad), s = scale * std::sin(rotation_rad);
  return {c, -s, cx - c * cx + s * cy + tx_px, s, c, cy - s * cx - c * cy + ty_px};
}

AugmentParams AugmentParams::sample(Rng& rng, Size2 size, const AugmentRanges& r) {
  AugmentParams a;
  a.brightness = uniform(rng, r.brightness);
  a.contrast = uniform(rng, r.contrast);
  for (double& g : a.channel_gain) g = uniform(rng, r.channel_gain);
  const double max_rot = r.max_rotation_deg * std::numbers::pi / 180.0;
  const double rot = uniform(rng, {-max_rot, max_rot});
  const double scale = uniform(rng, r.scale);
  const double tx = uniform(rng, {-r.max_translation, r.max_translation}) * static_cast<double>(size.width);
  const double ty = uniform(rng, {-r.max_translation, r.max_translation}) * static_cast<double>(size.height);
  a.spatial = similarity(size, rot, scale, tx, ty);
  return a;
}

void AugmentParams::validate() const { invert(spatial); }

Image apply_color(const Image& image, const AugmentParams& aug, const Mask* valid) {
  const std::size_t n = image.size().area();
  double mu = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < image.channels(); ++c)
    for (std::size_t i = 0; i < n; ++i) {
      if (valid && !(*valid)[i]) continue;
      mu += image.data()[c * n + i];
      ++count;
    }
  mu = count ? mu / static_cast<double>(count) : 0.0;
  Image out = image;
  for (std::size_t c = 0; c < image.channels(); ++c) {
    const double gain = aug.brightness * aug.channel_gain[std::min<std::size_t>(c, 2)];
    for (std::size_t i = 0; i < n; ++i) {
      double& v = out.data()[c * n + i];
      if (valid && !(*valid)[i]) continue;
      v = std::clamp((v * aug.contrast + mu * (1.0 - aug.contrast)) * gain, 0.0, 1.0);
    }
  }
  return out;
}

WarpedImage apply_spatial(const Image& image, const Affine2& spatial) {
  const Size2 size = image.size();
  const std::size_t n = size.area();
  WarpedImage out{Image(image.channels(), size), Mask::filled(size.height, size.width, false)};
  for_each_source(size, spatial, [&](std::size_t i, double sx, double sy) {
    auto taps = bilinear_taps(size, sx, sy);
    if (!taps) return;
    out.valid.set(i, true);
    for (std::size_t c = 0; c < image.channels(); ++c) {
      double v = 0.0;
      for (int k = 0; k < taps->count; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        v += taps->weight[kk] * image.data()[c * n + taps->index[kk]];
      }
      out.image.data()[c * n + i] = v;
    }
  });
  return out;
}

DepthMap apply_spatial(const DepthMap& depth, const Affine2& spatial) {
  DepthMap out(depth.size, 0.0, false);
  for_each_source(depth.size, spatial, [&](std::size_t i, double sx, double sy) {
    if (auto v = sample_bilinear(depth, sx, sy)) {
      out.values[i] = *v;
      out.valid.set(i, true);
    }
  });
  return out;
}

// ---- losses ----------------------------------------------------------------

double FramePair::dt() const { return std::abs(t_b - t_a); }

Tensor loss_against_target(const DepthNet& fast, const Image& input, const DepthMap& target) {
  return ssimae(fast.forward(input), target);
}

Tensor supervised_loss(const ModelPair& pair, const Image& image, const DepthMap& gt) {
  require_same_size(image.size(), gt.size, "supervised_loss");
  return loss_against_target(pair.fast, image, gt);
}

ConsistencyTarget augmentation_target(const ModelPair& pair, const Image& image,
                                      const AugmentParams& aug) {
  aug.validate();
  const DepthMap teacher = pair.slow.predict(image);
  WarpedImage moved = apply_spatial(image, aug.spatial);
  return {apply_color(moved.image, aug, &moved.valid), apply_spatial(teacher, aug.spatial)};
}

std::optional<Tensor> augmentation_consistency_loss(const ModelPair& pair, const Image& image,
                                                    const AugmentParams& aug) {
  ConsistencyTarget t = augmentation_target(pair, image, aug);
  if (t.target.valid.count() < 2) return std::nullopt;
  try {
    return loss_against_target(pair.fast, t.student_input, t.target);
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
}

DepthMap temporal_target(const ModelPair& pair, const FramePair& fp, const MaskConfig& cfg) {
  if (fp.dt() > kMaxPairDt + kDtSlack)
    throw std::invalid_argument("temporal pair spans " + std::to_string(fp.dt()) +
                                " s, more than the 0.1 s limit");
  require_same_size(fp.frame_a.size(), fp.frame_b.size(), "temporal_target");
  const DepthMap teacher_b = pair.slow.predict(fp.frame_b);
  DepthMap target = warp(fp.f_ab, teacher_b);
  target.valid &= correspondence_mask(fp.f_ab, fp.f_ba, cfg);
  return target;
}

std::optional<Tensor> temporal_consistency_loss(const ModelPair& pair, const FramePair& fp,
                                                const MaskConfig& cfg) {
  const DepthMap target = temporal_target(pair, fp, cfg);
  if (target.valid.count() == 0) return std::nullopt;
  try {
    return loss_against_target(pair.fast, fp.frame_a, target);
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
}

// ---- pair sampling ---------------------------------------------------------

std::vector<std::pair<std::size_t, std::size_t>> eligible_frame_pairs(const ClipSample& clip,
                                                                      double max_dt) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < clip.size(); ++i)
    for (std::size_t j = 0; j < clip.size(); ++j)
      if (i != j && std::abs(clip.timestamps[j] - clip.timestamps[i]) <= max_dt + kDtSlack)
        pairs.emplace_back(i, j);
  return pairs;
}

FramePair make_frame_pair(const ClipSample& clip, std::size_t a, std::size_t b) {
  FramePair fp;
  fp.frame_a = clip.frames.at(a);
  fp.frame_b = clip.frames.at(b);
  fp.t_a = clip.timestamps.at(a);
  fp.t_b = clip.timestamps.at(b);
  fp.f_ab = clip.flow(a, b);
  fp.f_ba = clip.flow(b, a);
  fp.index_a = a;
  fp.index_b = b;
  return fp;
}

FramePair sample_frame_pair(const ClipSample& clip, Rng& rng, double max_dt) {
  const auto pairs = eligible_frame_pairs(clip, max_dt);
  if (pairs.empty())
    throw std::invalid_argument("clip '" + clip.id + "' has no frame pair within " +
                                std::to_string(max_dt) + " s");
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  const auto [a, b] = pairs[pick(rng)];
  return make_frame_pair(clip, a, b);
}

}  // namespace reldepth
