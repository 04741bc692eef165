// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsinpaint/params.hpp"

#include <algorithm>

#include "tsinpaint/error.hpp"

namespace tsi {

Var ParamStore::add(const std::string& name, Tensor init, ParamKind kind) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name: " + name);
  Var v = Var::leaf(std::move(init), kind == ParamKind::kTrainable);
  entries_.push_back(ParamEntry{name, v, kind});
  return v;
}

const ParamEntry* ParamStore::find(const std::string& name) const {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const ParamEntry& e) { return e.name == name; });
  return it == entries_.end() ? nullptr : &*it;
}

std::size_t ParamStore::trainable_count() const {
  std::size_t total = 0;
  for (const ParamEntry& e : entries_) {
    if (e.kind == ParamKind::kTrainable) total += e.var.value().size();
  }
  return total;
}

void ParamStore::zero_grad() {
  for (ParamEntry& e : entries_) e.var.zero_grad();
}

void ParamStore::set_trainable(bool on) {
  for (ParamEntry& e : entries_) {
    if (e.kind == ParamKind::kTrainable) e.var.set_requires_grad(on);
  }
}

std::vector<Tensor> ParamStore::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const ParamEntry& e : entries_) out.push_back(e.var.value());
  return out;
}

}  // namespace tsi
