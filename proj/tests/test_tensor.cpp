#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "support.hpp"
#include "xaihealth/error.hpp"
#include "xaihealth/io.hpp"
#include "xaihealth/tensor.hpp"

using namespace xaihealth;

namespace {

std::vector<std::uint8_t> hex(std::initializer_list<int> v) { return {v.begin(), v.end()}; }

ErrorCode decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_tensor(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("decode did not throw");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("XTN1 encoding of a 2x2 tensor is bit-exact") {
  Tensor t({2, 2}, {1.f, 2.f, 3.f, 4.f});
  const auto expected = hex({0x58, 0x54, 0x4E, 0x31, 0x02, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x00,
                             0x00, 0x00, 0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40, 0x00, 0x00, 0x40, 0x40,
                             0x00, 0x00, 0x80, 0x40});
  CHECK(encode_tensor(t) == expected);

  auto back = decode_tensor(expected);
  CHECK(back.shape() == Shape{2, 2});
  CHECK(back == t);
}

TEST_CASE("XTN1 zero tensor is a 13-byte header plus four zero bytes") {
  auto bytes = encode_tensor(Tensor({1}, {0.f}));
  REQUIRE(bytes.size() == 16);
  CHECK(bytes == hex({0x58, 0x54, 0x4E, 0x31, 0x01, 0, 0, 0, 0x01, 0, 0, 0, 0, 0, 0, 0}));
}

TEST_CASE("decode errors") {
  CHECK(decode_error(hex({0, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0})) == ErrorCode::BadMagic);
  // shape [2,2] but only 12 payload bytes
  auto bytes = encode_tensor(Tensor({2, 2}, {1.f, 2.f, 3.f, 4.f}));
  bytes.resize(bytes.size() - 4);
  CHECK(decode_error(bytes) == ErrorCode::TruncatedData);
  CHECK(decode_error(hex({0x58, 0x54, 0x4E})) == ErrorCode::TruncatedData);

  auto nan_bytes = encode_tensor(Tensor({1}, {0.f}));
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan_bytes.data() + 12, &nan, 4);
  CHECK(decode_error(nan_bytes) == ErrorCode::NonFiniteValue);
}

TEST_CASE("tensor construction validates") {
  CHECK_THROWS_AS(Tensor({}, {}), Error);
  CHECK_THROWS_AS(Tensor({2, 0}, {}), Error);
  CHECK_THROWS_AS(Tensor({3}, {1.f, 2.f}), Error);
  CHECK_THROWS_AS(Tensor({1}, {std::numeric_limits<float>::infinity()}), Error);
}

TEST_CASE("round trip over 1000 random tensors") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> ndim(1, 4), dim(1, 6);
  std::uniform_real_distribution<float> val(-1e6f, 1e6f);
  for (int i = 0; i < 1000; ++i) {
    Shape s(ndim(rng));
    for (auto& d : s) d = dim(rng);
    std::vector<float> v(shape_size(s));
    for (auto& x : v) x = val(rng);
    Tensor t(s, v);
    REQUIRE(decode_tensor(encode_tensor(t)) == t);
  }
}

TEST_CASE("tensor files round trip through io") {
  testing::TempDir dir;
  Tensor t({3, 1}, {0.5f, -2.f, 7.25f});
  io::write_tensor(dir / "t.xtn", t);
  CHECK(io::read_tensor(dir / "t.xtn") == t);
  CHECK_THROWS_AS(io::read_tensor(dir / "missing.xtn"), Error);
}
