#pragma once

// Per-pixel 2-D containers shared across modules. Pixel (x, y) has its
// centre at integer coordinates; x grows right, y grows down. Storage is
// row-major, planar for multi-channel images.

#include <cstddef>
#include <vector>

#include "reldepth/mask.hpp"
#include "reldepth/tensor.hpp"

namespace reldepth {

struct Size2 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t area() const { return height * width; }
  friend bool operator==(const Size2&, const Size2&) = default;
};

class Image {
 public:
  Image() = default;
  Image(std::size_t channels, Size2 size, double fill = 0.0);

  std::size_t channels() const { return channels_; }
  Size2 size() const { return size_; }
  std::size_t height() const { return size_.height; }
  std::size_t width() const { return size_.width; }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * size_.height + y) * size_.width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * size_.height + y) * size_.width + x];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // {C, H, W} tensor without gradient tracking.
  Tensor to_tensor() const;

 private:
  std::size_t channels_ = 0;
  Size2 size_;
  std::vector<double> data_;
};

// Inverse depth (or disparity) with a validity mask.
struct DepthMap {
  Size2 size;
  std::vector<double> values;
  Mask valid;

  DepthMap() = default;
  DepthMap(Size2 size, double fill = 0.0, bool valid_fill = true);

  double& at(std::size_t y, std::size_t x) { return values[y * size.width + x]; }
  double at(std::size_t y, std::size_t x) const { return values[y * size.width + x]; }
  bool is_valid(std::size_t y, std::size_t x) const { return valid[y * size.width + x]; }

  // {H, W} tensor without gradient tracking. Invalid entries keep their value.
  Tensor to_tensor() const;
  // Takes values from a tensor with H*W elements; every pixel valid.
  static DepthMap from_tensor(const Tensor& t, Size2 size);
};

// Per-pixel displacement in pixels, a -> b.
struct FlowField {
  Size2 size;
  std::vector<double> dx;
  std::vector<double> dy;
  Mask valid;

  FlowField() = default;
  FlowField(Size2 size, double fx = 0.0, double fy = 0.0, bool valid_fill = true);

  bool is_valid(std::size_t i) const { return valid[i]; }
};

void require_same_size(Size2 a, Size2 b, const char* what);

}  // namespace reldepth
