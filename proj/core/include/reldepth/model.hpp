#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "reldepth/maps.hpp"
#include "reldepth/tensor.hpp"

namespace reldepth {

// Four 3x3 same-padded convolutions, 3 -> 16 -> 16 -> 16 -> 1, with ReLU
// between them. Output is an unconstrained inverse-depth map.
class DepthNet {
 public:
  static constexpr std::size_t kInputChannels = 3;
  static constexpr std::size_t kHidden = 16;
  static constexpr std::size_t kKernel = 3;
  static constexpr std::size_t kLayers = 4;

  // Fan-in scaled uniform init; the last layer is scaled down by
  // final_layer_gain so initial predictions are nearly constant.
  explicit DepthNet(std::uint64_t seed, double final_layer_gain = 0.01);

  // Copies are deep: parameter values are duplicated, graph history is not.
  DepthNet(const DepthNet& other);
  DepthNet& operator=(const DepthNet& other);
  DepthNet(DepthNet&&) noexcept = default;
  DepthNet& operator=(DepthNet&&) noexcept = default;

  // weights0, bias0, weights1, bias1, ...
  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  // {H, W} prediction; records a graph when parameters require grad.
  Tensor forward(const Image& image) const;
  // Untracked prediction, every pixel valid.
  DepthMap predict(const Image& image) const;

  void set_requires_grad(bool value);
  void zero_grad();
  // Deep copy of parameter values.
  DepthNet clone(bool requires_grad) const;
  void zero_final_layer();

  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);

  // Hash of the layer shapes; stored in checkpoints.
  static std::uint64_t architecture_hash();
  static std::vector<Shape> parameter_shapes();

 private:
  DepthNet() = default;
  std::vector<Tensor> params_;
};

// Student (fast) and EMA teacher (slow). The slow net never requires grad.
struct ModelPair {
  DepthNet fast;
  DepthNet slow;
  double ema_decay = 0.999;

  static ModelPair create(std::uint64_t seed, double ema_decay = 0.999);
  // slow <- decay * slow + (1 - decay) * fast, elementwise.
  void ema_update();
  // Makes the teacher an exact copy of the student.
  void sync_slow();
};

// Binary checkpoint: magic, version, architecture hash, set count (1 for a
// single net, 2 for fast + slow), ema decay, parameter count, f64 blob.
void save_checkpoint(const std::filesystem::path& path, const ModelPair& pair);
ModelPair load_checkpoint(const std::filesystem::path& path);

}  // namespace reldepth
