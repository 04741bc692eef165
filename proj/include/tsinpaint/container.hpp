// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

// Binary tensor container shared by checkpoints and extractor weight files.
//
// Layout, all integers little-endian:
//
//   offset  size        field
//   0       8           magic "TSICKPT\0"
//   8       4           u32 format version (kContainerVersion)
//   12      4           u32 metadata length M
//   16      M           metadata, UTF-8 "key=value\n" lines sorted by key
//   ...     4           u32 tensor count T
//   T records of:
//           4           u32 name length K
//           K           name, UTF-8
//           16          i32 n, c, h, w
//           8*n*c*h*w   IEEE-754 binary64 values, NCHW row-major
//   end     8           u64 FNV-1a (64-bit) hash of every preceding byte
//
// Values are stored bit-for-bit, so save -> load -> save is byte-identical.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tsinpaint/tensor.hpp"

namespace tsi {

inline constexpr std::uint32_t kContainerVersion = 1;

class TensorContainer {
 public:
  void set_meta(const std::string& key, const std::string& value);
  [[nodiscard]] bool has_meta(const std::string& key) const { return metadata_.count(key) != 0; }
  /// IoError when absent.
  [[nodiscard]] const std::string& meta(const std::string& key) const;
  [[nodiscard]] const std::map<std::string, std::string>& metadata() const { return metadata_; }

  /// Appends a tensor; names must be unique.
  void put(const std::string& name, const Tensor& value);
  [[nodiscard]] bool has(const std::string& name) const;
  /// IoError when absent.
  [[nodiscard]] const Tensor& get(const std::string& name) const;
  [[nodiscard]] const std::vector<std::pair<std::string, Tensor>>& tensors() const { return tensors_; }

  [[nodiscard]] std::string to_bytes() const;
  /// IoError on bad magic, unsupported version, truncation or hash mismatch.
  static TensorContainer from_bytes(const std::string& bytes);

  /// Writes through a temporary file and renames, so readers never see a partial file.
  void save(const std::filesystem::path& path) const;
  static TensorContainer load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> metadata_;
  std::vector<std::pair<std::string, Tensor>> tensors_;
};

}  // namespace tsi
