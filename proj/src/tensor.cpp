#include <algorithm>
#include "xaihealth/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "xaihealth/error.hpp"

namespace xaihealth {
namespace {

constexpr std::uint8_t kMagic[4] = {'X', 'T', 'N', '1'};
constexpr std::size_t kHeaderFixed = 8;  // magic + ndim

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

}  // namespace

std::size_t shape_size(const Shape& shape) noexcept {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty()) throw Error(ErrorCode::InvalidShape, "tensor needs at least one dimension");
  for (auto d : shape_) {
    if (d == 0) throw Error(ErrorCode::InvalidShape, "tensor dimensions must be positive");
    if (d > std::numeric_limits<std::uint32_t>::max())
      throw Error(ErrorCode::InvalidShape, "tensor dimension exceeds 32 bits");
  }
  if (shape_size(shape_) != data_.size())
    throw Error(ErrorCode::ShapeMismatch, "shape implies " + std::to_string(shape_size(shape_)) +
                                              " values, got " + std::to_string(data_.size()));
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i]))
      throw Error(ErrorCode::NonFiniteValue, "value at flat index " + std::to_string(i) + " is not finite");
  }
}

Tensor Tensor::zeros(Shape shape) {
  auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<float>(n, 0.0f));
}

Tensor Tensor::from_doubles(Shape shape, std::span<const double> values) {
  std::vector<float> data(values.begin(), values.end());
  return Tensor(std::move(shape), std::move(data));
}

std::vector<double> Tensor::to_doubles() const { return {data_.begin(), data_.end()}; }

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderFixed + 4 * t.ndim() + 4 * t.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(t.ndim()));
  for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  // A strict prefix of the magic is a truncated file, not a foreign one.
  if (std::memcmp(bytes.data(), kMagic, std::min<std::size_t>(bytes.size(), 4)) != 0)
    throw Error(ErrorCode::BadMagic, "missing XTN1 magic");
  if (bytes.size() < 4) throw Error(ErrorCode::TruncatedData, "shorter than the magic");
  if (bytes.size() < kHeaderFixed) throw Error(ErrorCode::TruncatedData, "header shorter than 8 bytes");
  const std::uint32_t ndim = get_u32(bytes, 4);
  const std::size_t header = kHeaderFixed + 4 * static_cast<std::size_t>(ndim);
  if (bytes.size() < header) throw Error(ErrorCode::TruncatedData, "header truncated");
  Shape shape(ndim);
  std::size_t count = ndim == 0 ? 0 : 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    shape[i] = get_u32(bytes, kHeaderFixed + 4 * i);
    count *= shape[i];
  }
  if (bytes.size() - header != 4 * count)
    throw Error(ErrorCode::TruncatedData, "payload has " + std::to_string(bytes.size() - header) +
                                              " bytes, header implies " + std::to_string(4 * count));
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = std::bit_cast<float>(get_u32(bytes, header + 4 * i));
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace xaihealth
