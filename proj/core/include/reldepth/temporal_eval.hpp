#pragma once

// Temporal inconsistency of a monocular depth model along video clips.
//
// Sections of a clip where most start-frame pixels stay trackable are
// found with the flow loop check. Each tracked pixel yields a depth
// trajectory from the model (affinely fitted once, on the start frame) and
// one from stereo disparity; the metric is the mean over pixels of the
// standard deviation of their difference over time.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "reldepth/align.hpp"
#include "reldepth/clip.hpp"
#include "reldepth/flow.hpp"

namespace reldepth {

struct TrackConfig {
  MaskConfig mask;
  std::size_t min_frames = 10;
  // A section continues while strictly more than this fraction of start
  // pixels remain tracked.
  double min_tracked_fraction = 0.5;

  void validate() const;
};

struct TrackedClip {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  Mask tracked;         // start-frame pixels tracked to every frame
  // flows[k] maps the start frame to frame start + k; flows[0] is zero.
  std::vector<FlowField> flows;

  std::size_t n_frames() const { return end - start + 1; }
};

// Start pixels passing the loop check for every start -> k, k in (start, end].
Mask tracking_mask(const ClipSample& clip, std::size_t start, std::size_t end,
                   const MaskConfig& cfg);

// Greedy scan over start frames; maximal sections of at least
// cfg.min_frames frames. Scanning resumes after each emitted section.
std::vector<TrackedClip> select_tracked_clips(const ClipSample& clip, const TrackConfig& cfg = {});

struct DepthTrajectories {
  std::size_t n_frames = 0;
  std::vector<std::size_t> pixels;  // start-frame linear indices
  // Per pixel, per frame ([p * n_frames + k]).
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> mono;       // alpha * mono + beta
  std::vector<double> disparity;  // disparity normalized by start-frame stats
  AffineFit fit;
  double disparity_median = 0.0;
  double disparity_std = 1.0;

  std::size_t size() const { return pixels.size(); }
};

// mono and disparity are indexed by clip frame. Pixels whose lookup is
// invalid in any frame are dropped. Throws DegenerateError when the
// start-frame fit is degenerate.
DepthTrajectories build_trajectories(const TrackedClip& tc, std::span<const DepthMap> mono,
                                     std::span<const DepthMap> disparity);

// Population std over time of (mono - disparity), one value per pixel.
std::vector<double> pixel_inconsistency(const DepthTrajectories& t);

// Mean of pixel_inconsistency over every pixel of every set.
double temporal_inconsistency(std::span<const DepthTrajectories> sets);

struct ClipInconsistency {
  std::string clip_id;
  std::size_t start = 0;
  std::size_t n_frames = 0;
  std::size_t n_tracked = 0;
  double inconsistency = 0.0;
};

struct TemporalReport {
  std::vector<ClipInconsistency> sections;
  // Pixel-weighted mean over every section; NaN when nothing was tracked.
  double inconsistency = 0.0;
  std::size_t n_tracked = 0;
};

// Prediction for one frame of a clip.
using DepthPredictor = std::function<DepthMap(const ClipSample& clip, std::size_t frame)>;

TemporalReport evaluate_temporal(std::span<const ClipSample> clips, const DepthPredictor& predictor,
                                 const TrackConfig& cfg = {});

}  // namespace reldepth
