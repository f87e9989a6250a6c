#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace xaihealth {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;

/// Dense row-major float32 tensor. Construction validates that the shape
/// matches the data length, every dimension is positive and every value is
/// finite; a constructed Tensor is never in an invalid state.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape);
  static Tensor from_doubles(Shape shape, std::span<const double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::span<const float> data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t ndim() const noexcept { return shape_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float operator[](std::size_t i) const { return data_[i]; }

  std::vector<double> to_doubles() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// XTN1 layout: "XTN1", u32 ndim, u32 dims..., f32 values; all little-endian.
std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

}  // namespace xaihealth
