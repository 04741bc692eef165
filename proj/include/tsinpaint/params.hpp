// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "tsinpaint/autograd.hpp"

namespace tsi {

enum class ParamKind { kTrainable, kBuffer };

struct ParamEntry {
  std::string name;
  Var var;
  ParamKind kind = ParamKind::kTrainable;
};

/// Ordered registry of named tensors owned by one model. Blocks keep Var
/// handles that share nodes with the entries, so updates through either are
/// visible to both. Registration order is the serialization order.
class ParamStore {
 public:
  /// Registers a new tensor; duplicate names are a ConfigError.
  Var add(const std::string& name, Tensor init, ParamKind kind = ParamKind::kTrainable);

  [[nodiscard]] std::span<ParamEntry> entries() { return entries_; }
  [[nodiscard]] std::span<const ParamEntry> entries() const { return entries_; }
  [[nodiscard]] const ParamEntry* find(const std::string& name) const;

  /// Number of scalar values in trainable entries.
  [[nodiscard]] std::size_t trainable_count() const;

  void zero_grad();
  /// Toggles gradient tracking on every trainable entry.
  void set_trainable(bool on);

  /// Deep copy of every value, in registration order.
  [[nodiscard]] std::vector<Tensor> snapshot() const;

 private:
  std::vector<ParamEntry> entries_;
};

}  // namespace tsi
