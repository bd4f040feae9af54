#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>

#include "dtl/error.hpp"
#include "dtl/rng.hpp"
#include "dtl/tensor.hpp"

using namespace dtl;

TEST_CASE("sample rejects inconsistent shapes") {
  CHECK_THROWS_AS(Sample({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Sample(Shape{}, std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(Sample({0}, std::vector<double>{}), std::invalid_argument);
  CHECK_FALSE(Sample::vector({1.0, std::nan("")}).all_finite());
}

TEST_CASE("DTL1 encoding round-trips random tensors bit-exactly") {
  RngStream rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Shape shape;
    const auto rank = rng.uniform_int(1, 4);
    for (int i = 0; i < rank; ++i) shape.push_back(static_cast<std::size_t>(rng.uniform_int(1, 5)));
    Sample s = rng.normal_like(shape);
    s[0] = trial % 2 ? -0.0 : 1e-310;  // signed zero and subnormals survive
    const auto bytes = encode_dtl(s);
    CHECK(bytes.size() == 8 + 4 * shape.size() + 8 * s.size());
    const Sample back = decode_dtl(bytes);
    CHECK(back.shape == s.shape);
    CHECK(std::memcmp(back.values.data(), s.values.data(), s.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("DTL1 layout is little-endian with the magic prefix") {
  const auto bytes = encode_dtl(Sample::vector({1.0}));
  REQUIRE(bytes.size() == 20);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DTL1");
  CHECK(bytes[4] == 1);  // rank
  CHECK(bytes[8] == 1);  // dim
  // 1.0 = 0x3FF0000000000000
  CHECK(bytes[18] == 0xF0);
  CHECK(bytes[19] == 0x3F);
}

TEST_CASE("DTL1 decoding rejects corrupt input") {
  auto bytes = encode_dtl(Sample::vector({1.0, 2.0}));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_dtl(bad_magic), DataError);
  bytes.pop_back();
  CHECK_THROWS_AS(decode_dtl(bytes), DataError);
}

TEST_CASE("file round trip and atomic write") {
  const auto dir = std::filesystem::temp_directory_path() / "dtl_tensor_test";
  std::filesystem::remove_all(dir);
  const Sample s({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  write_dtl(dir / "a.dtl", s);
  CHECK(read_dtl(dir / "a.dtl") == s);
  CHECK_FALSE(std::filesystem::exists(dir / "a.dtl.tmp"));
  CHECK_THROWS_AS(read_dtl(dir / "missing.dtl"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("stack and unstack are inverse") {
  std::vector<Sample> xs{Sample({2, 2}, 1.0), Sample({2, 2}, 2.0), Sample({2, 2}, 3.0)};
  const Sample b = stack(xs);
  CHECK(b.shape == Shape{3, 2, 2});
  CHECK(unstack(b) == xs);
  CHECK(mean_of(xs) == Sample({2, 2}, 2.0));
}

TEST_CASE("format_double keeps 17 significant digits") {
  for (double v : {0.1, 1.0 / 3.0, 0.30239999999999995, -1e-300})
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
}

TEST_CASE("fnv1a digest matches the reference vector") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}
