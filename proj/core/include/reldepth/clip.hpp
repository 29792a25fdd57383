#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "reldepth/maps.hpp"

namespace reldepth {

// Supplies the optical flow between two frames of a clip.
class FlowSource {
 public:
  virtual ~FlowSource() = default;
  virtual FlowField flow(std::size_t from, std::size_t to) const = 0;
};

// Ordered frames with timestamps, optional per-frame disparity ground truth
// and on-demand pairwise flow.
struct ClipSample {
  std::string id;
  std::vector<Image> frames;
  std::vector<double> timestamps;
  std::vector<DepthMap> disparity;
  std::shared_ptr<const FlowSource> flows;

  std::size_t size() const { return frames.size(); }
  bool has_disparity() const { return disparity.size() == frames.size(); }
  FlowField flow(std::size_t from, std::size_t to) const;

  // Throws std::invalid_argument on inconsistent sizes or non-increasing
  // timestamps.
  void validate() const;
};

// Supervised training or validation sample.
struct SupervisedSample {
  Image image;
  DepthMap gt;
};

}  // namespace reldepth
