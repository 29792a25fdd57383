#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace reldepth {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);

// Boolean array with a shape. Stored one byte per element so it can be
// handed around as a span without the std::vector<bool> proxy.
class Mask {
 public:
  Mask() = default;
  Mask(Shape shape, bool fill);
  Mask(Shape shape, std::vector<std::uint8_t> bits);

  // 2-D convenience constructor (rows, cols).
  static Mask filled(std::size_t height, std::size_t width, bool fill) {
    return Mask({height, width}, fill);
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }

  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }

  std::size_t count() const;
  double fraction() const;

  // Elementwise logical and; shapes must match.
  Mask operator&(const Mask& other) const;
  Mask& operator&=(const Mask& other);
  Mask operator~() const;

  // True if every set bit here is also set in other.
  bool subset_of(const Mask& other) const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  Shape shape_;
  std::vector<std::uint8_t> bits_;
};

}  // namespace reldepth
