// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "test_support.hpp"
#include "tsinpaint/container.hpp"
#include "tsinpaint/error.hpp"

namespace tsi {
namespace {

TensorContainer sample_container() {
  Rng rng(60);
  TensorContainer c;
  c.set_meta("zeta", "last");
  c.set_meta("alpha", "first = with spaces");
  c.put("w", testing::random_tensor(Shape{2, 3, 4, 5}, rng));
  Tensor special(Shape{1, 1, 1, 4});
  special[0] = -0.0;
  special[1] = std::numeric_limits<double>::denorm_min();
  special[2] = std::numeric_limits<double>::infinity();
  special[3] = 1.0 / 3.0;
  c.put("special", special);
  return c;
}

TEST(Container, BytesRoundTripExactly) {
  const TensorContainer c = sample_container();
  const std::string bytes = c.to_bytes();
  const TensorContainer back = TensorContainer::from_bytes(bytes);
  EXPECT_EQ(back.to_bytes(), bytes);
  EXPECT_EQ(back.meta("alpha"), "first = with spaces");
  EXPECT_TRUE(testing::bit_identical(back.get("w"), c.get("w")));
  EXPECT_TRUE(std::signbit(back.get("special")[0]));
  EXPECT_EQ(back.tensors().front().first, "w");
}

TEST(Container, DetectsCorruptionAndTruncation) {
  const std::string bytes = sample_container().to_bytes();
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  EXPECT_THROW(TensorContainer::from_bytes(flipped), IoError);
  EXPECT_THROW(TensorContainer::from_bytes(bytes.substr(0, bytes.size() - 3)), IoError);
  EXPECT_THROW(TensorContainer::from_bytes(bytes.substr(0, 10)), IoError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(TensorContainer::from_bytes(bad_magic), IoError);
  EXPECT_THROW(TensorContainer::from_bytes(""), IoError);
}

TEST(Container, RejectsDuplicateNamesAndMissingEntries) {
  TensorContainer c = sample_container();
  EXPECT_THROW(c.put("w", Tensor(Shape{1, 1, 1, 1})), InputError);
  EXPECT_THROW((void)c.get("nope"), IoError);
  EXPECT_THROW((void)c.meta("nope"), IoError);
}

TEST(Container, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "tsinpaint_container_roundtrip.bin";
  const TensorContainer c = sample_container();
  c.save(path);
  EXPECT_EQ(TensorContainer::load(path).to_bytes(), c.to_bytes());
  std::filesystem::remove(path);
  EXPECT_THROW(TensorContainer::load(path), IoError);
}

}  // namespace
}  // namespace tsi
