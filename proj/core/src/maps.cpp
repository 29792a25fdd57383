#include "reldepth/maps.hpp"

#include <algorithm>
#include <string>

#include "reldepth/error.hpp"

namespace reldepth {

// ---- Mask ------------------------------------------------------------------

Mask::Mask(Shape shape, bool fill)
    : shape_(std::move(shape)), bits_(shape_numel(shape_), fill ? 1 : 0) {}

Mask::Mask(Shape shape, std::vector<std::uint8_t> bits)
    : shape_(std::move(shape)), bits_(std::move(bits)) {
  if (bits_.size() != shape_numel(shape_)) throw ShapeError("Mask: bit count does not match shape");
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

double Mask::fraction() const {
  return bits_.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(bits_.size());
}

Mask Mask::operator&(const Mask& other) const {
  Mask out = *this;
  out &= other;
  return out;
}

Mask& Mask::operator&=(const Mask& other) {
  if (other.bits_.size() != bits_.size()) throw ShapeError("Mask: size mismatch in &");
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] &= other.bits_[i];
  return *this;
}

Mask Mask::operator~() const {
  Mask out = *this;
  for (auto& b : out.bits_) b ^= 1;
  return out;
}

bool Mask::subset_of(const Mask& other) const {
  if (other.bits_.size() != bits_.size()) throw ShapeError("Mask: size mismatch in subset_of");
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i] && !other.bits_[i]) return false;
  return true;
}

// ---- maps ------------------------------------------------------------------

Image::Image(std::size_t channels, Size2 size, double fill)
    : channels_(channels), size_(size), data_(channels * size.area(), fill) {}

Tensor Image::to_tensor() const {
  return Tensor::from({channels_, size_.height, size_.width}, data_);
}

DepthMap::DepthMap(Size2 s, double fill, bool valid_fill)
    : size(s), values(s.area(), fill), valid(Mask::filled(s.height, s.width, valid_fill)) {}

Tensor DepthMap::to_tensor() const { return Tensor::from({size.height, size.width}, values); }

DepthMap DepthMap::from_tensor(const Tensor& t, Size2 size) {
  if (t.numel() != size.area()) throw ShapeError("DepthMap::from_tensor: element count mismatch");
  DepthMap d(size);
  std::copy(t.data().begin(), t.data().end(), d.values.begin());
  return d;
}

FlowField::FlowField(Size2 s, double fx, double fy, bool valid_fill)
    : size(s), dx(s.area(), fx), dy(s.area(), fy), valid(Mask::filled(s.height, s.width, valid_fill)) {}

void require_same_size(Size2 a, Size2 b, const char* what) {
  if (a != b)
    throw ShapeError(std::string(what) + ": size mismatch " + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
}

}  // namespace reldepth
