#include "reldepth/temporal_eval.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "reldepth/error.hpp"

namespace reldepth {

void TrackConfig::validate() const {
  mask.validate();
  if (min_frames < 2) throw std::invalid_argument("TrackConfig: min_frames must be >= 2");
  if (!(min_tracked_fraction >= 0.0 && min_tracked_fraction < 1.0))
    throw std::invalid_argument("TrackConfig: min_tracked_fraction must lie in [0, 1)");
}

Mask tracking_mask(const ClipSample& clip, std::size_t start, std::size_t end, const MaskConfig& cfg) {
  const Size2 size = clip.frames.at(start).size();
  Mask tracked = Mask::filled(size.height, size.width, true);
  for (std::size_t k = start + 1; k <= end; ++k)
    tracked &= correspondence_mask(clip.flow(start, k), clip.flow(k, start), cfg);
  return tracked;
}

std::vector<TrackedClip> select_tracked_clips(const ClipSample& clip, const TrackConfig& cfg) {
  cfg.validate();
  clip.validate();
  std::vector<TrackedClip> out;
  const std::size_t n = clip.size();
  const Size2 size = clip.frames.front().size();
  std::size_t start = 0;
  while (start + 1 < n) {
    TrackedClip tc;
    tc.start = start;
    tc.end = start;
    tc.tracked = Mask::filled(size.height, size.width, true);
    tc.flows.emplace_back(size, 0.0, 0.0, true);
    for (std::size_t k = start + 1; k < n; ++k) {
      FlowField forward = clip.flow(start, k);
      const Mask next = tc.tracked & correspondence_mask(forward, clip.flow(k, start), cfg.mask);
      if (!(next.fraction() > cfg.min_tracked_fraction)) break;
      tc.tracked = next;
      tc.end = k;
      tc.flows.push_back(std::move(forward));
    }
    if (tc.n_frames() >= cfg.min_frames) {
      start = tc.end + 1;
      out.push_back(std::move(tc));
    } else {
      ++start;
    }
  }
  return out;
}

DepthTrajectories build_trajectories(const TrackedClip& tc, std::span<const DepthMap> mono,
                                     std::span<const DepthMap> disparity) {
  if (mono.size() <= tc.end || disparity.size() <= tc.end)
    throw std::invalid_argument("build_trajectories: depth maps do not cover the tracked range");
  if (tc.flows.size() != tc.n_frames())
    throw std::invalid_argument("build_trajectories: flow count does not match the range");
  const DepthMap& mono0 = mono[tc.start];
  const DepthMap& disp0 = disparity[tc.start];
  require_same_size(mono0.size, disp0.size, "build_trajectories");

  DepthMap fit_gt = disp0;
  fit_gt.valid &= tc.tracked;
  const NormalizedDepth norm = normalize_gt(fit_gt);
  DepthTrajectories out;
  out.fit = fit_scale_shift(mono0, norm);
  if (out.fit.degenerate)
    throw DegenerateError("build_trajectories: start-frame prediction is constant");
  out.disparity_median = norm.median;
  out.disparity_std = norm.std;
  out.n_frames = tc.n_frames();

  const std::size_t width = mono0.size.width;
  std::vector<double> xs(out.n_frames), ys(out.n_frames), ms(out.n_frames), ds(out.n_frames);
  for (std::size_t p = 0; p < tc.tracked.size(); ++p) {
    if (!tc.tracked[p]) continue;
    const double px = static_cast<double>(p % width), py = static_cast<double>(p / width);
    bool ok = true;
    for (std::size_t k = 0; k < out.n_frames && ok; ++k) {
      const FlowField& f = tc.flows[k];
      xs[k] = px + f.dx[p];
      ys[k] = py + f.dy[p];
      const auto m = sample_bilinear(mono[tc.start + k], xs[k], ys[k]);
      const auto d = sample_bilinear(disparity[tc.start + k], xs[k], ys[k]);
      ok = f.valid[p] && m && d;
      if (ok) {
        ms[k] = out.fit.apply(*m);
        ds[k] = (*d - norm.median) / norm.std;
      }
    }
    if (!ok) continue;
    out.pixels.push_back(p);
    out.x.insert(out.x.end(), xs.begin(), xs.end());
    out.y.insert(out.y.end(), ys.begin(), ys.end());
    out.mono.insert(out.mono.end(), ms.begin(), ms.end());
    out.disparity.insert(out.disparity.end(), ds.begin(), ds.end());
  }
  return out;
}

std::vector<double> pixel_inconsistency(const DepthTrajectories& t) {
  if (t.n_frames < 2) throw std::invalid_argument("pixel_inconsistency: need at least 2 frames");
  std::vector<double> out(t.size());
  const auto n = static_cast<double>(t.n_frames);
  for (std::size_t p = 0; p < t.size(); ++p) {
    const std::size_t base = p * t.n_frames;
    double mean = 0.0;
    for (std::size_t k = 0; k < t.n_frames; ++k) mean += t.mono[base + k] - t.disparity[base + k];
    mean /= n;
    double var = 0.0;
    for (std::size_t k = 0; k < t.n_frames; ++k) {
      const double r = t.mono[base + k] - t.disparity[base + k] - mean;
      var += r * r;
    }
    out[p] = std::sqrt(var / n);
  }
  return out;
}

double temporal_inconsistency(std::span<const DepthTrajectories> sets) {
  double total = 0.0;
  std::size_t count = 0;
  for (const DepthTrajectories& t : sets) {
    for (double v : pixel_inconsistency(t)) total += v;
    count += t.size();
  }
  return count ? total / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

TemporalReport evaluate_temporal(std::span<const ClipSample> clips, const DepthPredictor& predictor,
                                 const TrackConfig& cfg) {
  TemporalReport report;
  std::vector<DepthTrajectories> all;
  for (const ClipSample& clip : clips) {
    if (!clip.has_disparity())
      throw std::invalid_argument("evaluate_temporal: clip '" + clip.id + "' has no disparity");
    const auto sections = select_tracked_clips(clip, cfg);
    if (sections.empty()) continue;
    std::vector<DepthMap> mono(clip.size());
    for (const TrackedClip& tc : sections)
      for (std::size_t k = tc.start; k <= tc.end; ++k) mono[k] = predictor(clip, k);
    for (const TrackedClip& tc : sections) {
      DepthTrajectories t = build_trajectories(tc, mono, clip.disparity);
      ClipInconsistency row{clip.id, tc.start, tc.n_frames(), t.size(),
                            temporal_inconsistency(std::span(&t, 1))};
      report.sections.push_back(row);
      report.n_tracked += t.size();
      all.push_back(std::move(t));
    }
  }
  report.inconsistency = temporal_inconsistency(all);
  return report;
}

}  // namespace reldepth
