#include <cmath>
#include <map>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "reldepth/align.hpp"
#include "reldepth/error.hpp"
#include "reldepth/gradcheck.hpp"
#include "reldepth/losses.hpp"
#include "reldepth/synth.hpp"

using namespace reldepth;

namespace {

ClipSample small_clip(std::size_t frames, double fps, Size2 size = {10, 10}) {
  RandomClipOptions o;
  o.size = size;
  o.frames = frames;
  o.fps = fps;
  o.focal_px = 12.0;
  return random_clip(21, o);
}

Image gradient_image(Size2 size) {
  Image im(3, size);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < size.height; ++y)
      for (std::size_t x = 0; x < size.width; ++x)
        im.at(c, y, x) = 0.1 + 0.05 * static_cast<double>(x) + 0.02 * static_cast<double>(y) + 0.1 * c;
  return im;
}

}  // namespace

TEST_CASE("sampled augmentations stay within their ranges") {
  Rng rng(1);
  const AugmentRanges r;
  const Size2 size{20, 40};
  for (int i = 0; i < 500; ++i) {
    const AugmentParams a = AugmentParams::sample(rng, size, r);
    CHECK(a.brightness >= 0.8);
    CHECK(a.brightness <= 1.2);
    CHECK(a.contrast >= 0.8);
    CHECK(a.contrast <= 1.2);
    for (double g : a.channel_gain) CHECK(std::abs(g - 1.0) <= 0.1 + 1e-15);
    const double scale = std::hypot(a.spatial[0], a.spatial[3]);
    CHECK(scale >= 0.8 - 1e-12);
    CHECK(scale <= 1.2 + 1e-12);
    CHECK(std::abs(std::atan2(a.spatial[3], a.spatial[0])) <= 15.0 * std::numbers::pi / 180.0 + 1e-12);
  }
}

TEST_CASE("similarity keeps the image centre fixed without translation") {
  const Size2 size{9, 13};
  const Affine2 a = AugmentParams::similarity(size, 0.3, 1.1, 0.0, 0.0);
  const double cx = 6.0, cy = 4.0;
  CHECK(a[0] * cx + a[1] * cy + a[2] == doctest::Approx(cx));
  CHECK(a[3] * cx + a[4] * cy + a[5] == doctest::Approx(cy));
  AugmentParams singular;
  singular.spatial = {0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(singular.validate(), std::invalid_argument);
}

TEST_CASE("colour jitter: contrast about the mean, then brightness and gain, clamped") {
  const Size2 size{4, 5};
  const Image im = gradient_image(size);
  AugmentParams a;
  a.brightness = 1.1;
  a.contrast = 0.7;
  a.channel_gain = {0.9, 1.0, 1.1};
  double mu = 0.0;
  for (double v : im.data()) mu += v;
  mu /= static_cast<double>(im.data().size());
  const Image out = apply_color(im, a);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < size.area(); ++i) {
      const double expect = std::clamp(((im.data()[c * 20 + i] - mu) * 0.7 + mu) * 1.1 * a.channel_gain[c], 0.0, 1.0);
      CHECK(out.data()[c * 20 + i] == doctest::Approx(expect));
    }
  CHECK(apply_color(im, AugmentParams::identity()).data() == im.data());
}

TEST_CASE("spatial transform: identity, integer shift and invalid border") {
  const Size2 size{6, 7};
  const Image im = gradient_image(size);
  const WarpedImage same = apply_spatial(im, AugmentParams::identity().spatial);
  CHECK(same.valid.count() == size.area());
  CHECK(same.image.data() == im.data());

  const WarpedImage moved = apply_spatial(im, AugmentParams::similarity(size, 0.0, 1.0, 2.0, 1.0));
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 7; ++x) {
      const bool inside = x >= 2 && y >= 1;
      CHECK(moved.valid[y * 7 + x] == inside);
      if (inside) CHECK(moved.image.at(1, y, x) == doctest::Approx(im.at(1, y - 1, x - 2)));
    }
  DepthMap d(size);
  for (std::size_t i = 0; i < size.area(); ++i) d.values[i] = static_cast<double>(i);
  const DepthMap dm = apply_spatial(d, AugmentParams::similarity(size, 0.0, 1.0, 2.0, 1.0));
  CHECK(dm.at(3, 4) == d.at(2, 2));
  CHECK_FALSE(dm.is_valid(0, 0));
}

TEST_CASE("augmentation target with identity params is the teacher prediction") {
  const ModelPair pair{gradcheck_network(1), gradcheck_network(2), 0.99};
  const Image im = gradient_image({8, 8});
  const ConsistencyTarget t = augmentation_target(pair, im, AugmentParams::identity());
  CHECK(t.student_input.data() == im.data());
  CHECK(t.target.values == pair.slow.predict(im).values);
  CHECK(t.target.values != pair.fast.predict(im).values);
}

TEST_CASE("temporal target is the warped teacher depth under the correspondence mask") {
  const ClipSample clip = small_clip(3, 30.0);
  const ModelPair pair{gradcheck_network(3), gradcheck_network(4), 0.99};
  const FramePair fp = make_frame_pair(clip, 0, 2);
  const MaskConfig cfg;
  const DepthMap t = temporal_target(pair, fp, cfg);
  const DepthMap teacher_b = pair.slow.predict(fp.frame_b);
  const Mask c = correspondence_mask(fp.f_ab, fp.f_ba, cfg);
  CHECK(t.valid.subset_of(c));
  std::size_t checked = 0;
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    if (!t.valid[i]) continue;
    double ref = 0.0;
    REQUIRE(oracle::bilinear(teacher_b, static_cast<double>(i % 10) + fp.f_ab.dx[i],
                             static_cast<double>(i / 10) + fp.f_ab.dy[i], &ref));
    CHECK(t.values[i] == doctest::Approx(ref));
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("temporal pairs wider than 0.1 s are refused") {
  const ClipSample clip = small_clip(5, 30.0);
  const ModelPair pair = ModelPair::create(1);
  CHECK_THROWS_AS(temporal_target(pair, make_frame_pair(clip, 0, 4), MaskConfig{}), std::invalid_argument);
  CHECK_NOTHROW(temporal_target(pair, make_frame_pair(clip, 0, 3), MaskConfig{}));
}

TEST_CASE("losses with nothing to compare return nullopt") {
  const ClipSample clip = small_clip(2, 30.0);
  const ModelPair pair = ModelPair::create(1);
  FramePair fp = make_frame_pair(clip, 0, 1);
  fp.f_ab = FlowField(fp.f_ab.size, 100.0, 0.0);
  CHECK_FALSE(temporal_consistency_loss(pair, fp, MaskConfig{}));
  AugmentParams far;
  far.spatial = AugmentParams::similarity({10, 10}, 0.0, 1.0, 50.0, 0.0);
  CHECK_FALSE(augmentation_consistency_loss(pair, clip.frames[0], far));
}

TEST_CASE("supervised loss checks sizes") {
  const ModelPair pair = ModelPair::create(1);
  CHECK_THROWS_AS(supervised_loss(pair, gradient_image({6, 6}), DepthMap({5, 6}, 1.0)), ShapeError);
  const ClipSample clip = small_clip(2, 30.0);
  CHECK(std::isfinite(supervised_loss(pair, clip.frames[0], clip.disparity[0]).item()));
}

TEST_CASE("eligible pairs respect the 0.1 s limit at common frame rates") {
  CHECK(eligible_frame_pairs(small_clip(6, 30.0)).size() == 2 * (5 + 4 + 3));
  CHECK(eligible_frame_pairs(small_clip(6, 25.0)).size() == 2 * (5 + 4));
  CHECK(eligible_frame_pairs(small_clip(4, 10.0)).size() == 2 * 3);
  CHECK(eligible_frame_pairs(small_clip(3, 5.0)).empty());
  Rng rng(1);
  CHECK_THROWS_AS(sample_frame_pair(small_clip(3, 5.0), rng), std::invalid_argument);
}

TEST_CASE("frame pair sampling is uniform over eligible pairs") {
  const ClipSample clip = small_clip(6, 30.0, {4, 4});
  const auto pairs = eligible_frame_pairs(clip);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> index;
  for (std::size_t i = 0; i < pairs.size(); ++i) index[pairs[i]] = i;
  std::vector<std::size_t> counts(pairs.size(), 0);
  Rng rng(7);
  for (int i = 0; i < 6000; ++i) {
    const FramePair fp = sample_frame_pair(clip, rng);
    CHECK(fp.dt() <= kMaxPairDt + 1e-9);
    ++counts[index.at({fp.index_a, fp.index_b})];
  }
  CHECK(oracle::chi_square_uniform(counts) < oracle::chi_square_quantile_999(counts.size() - 1));
}
