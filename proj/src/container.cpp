// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsinpaint/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tsinpaint/error.hpp"

namespace tsi {
namespace {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

constexpr char kMagic[8] = {'T', 'S', 'I', 'C', 'K', 'P', 'T', '\0'};

std::uint64_t fnv1a(const char* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put_raw(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes, std::size_t limit) : bytes_(bytes), limit_(limit) {}

  template <typename T>
  T take() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string take_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void take_doubles(double* dst, std::size_t count) {
    need(count * sizeof(double));
    std::memcpy(dst, bytes_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
  }
  [[nodiscard]] std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (n > limit_ - pos_) throw IoError("container is truncated or corrupt");
  }
  const std::string& bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

}  // namespace

void TensorContainer::set_meta(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
    throw InputError("invalid container metadata entry: " + key);
  }
  metadata_[key] = value;
}

const std::string& TensorContainer::meta(const std::string& key) const {
  auto it = metadata_.find(key);
  if (it == metadata_.end()) throw IoError("container has no metadata key '" + key + "'");
  return it->second;
}

void TensorContainer::put(const std::string& name, const Tensor& value) {
  if (has(name)) throw InputError("duplicate tensor name in container: " + name);
  tensors_.emplace_back(name, value);
}

bool TensorContainer::has(const std::string& name) const {
  return std::any_of(tensors_.begin(), tensors_.end(), [&](const auto& e) { return e.first == name; });
}

const Tensor& TensorContainer::get(const std::string& name) const {
  for (const auto& [n, t] : tensors_) {
    if (n == name) return t;
  }
  throw IoError("container has no tensor '" + name + "'");
}

std::string TensorContainer::to_bytes() const {
  std::string out(kMagic, sizeof(kMagic));
  put_raw<std::uint32_t>(out, kContainerVersion);
  std::string meta;
  for (const auto& [k, v] : metadata_) meta += k + "=" + v + "\n";
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(tensors_.size()));
  for (const auto& [name, t] : tensors_) {
    put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    const Shape s = t.shape();
    for (int d : {s.n, s.c, s.h, s.w}) put_raw<std::int32_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  }
  put_raw<std::uint64_t>(out, fnv1a(out.data(), out.size()));
  return out;
}

TensorContainer TensorContainer::from_bytes(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 + 8) throw IoError("container is truncated or corrupt");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw IoError("not a tsinpaint container (bad magic)");
  const std::size_t body = bytes.size() - 8;
  Reader r(bytes, body);
  r.take_string(sizeof(kMagic));
  const auto version = r.take<std::uint32_t>();
  if (version != kContainerVersion) {
    throw IoError("incompatible container version " + std::to_string(version) + " (this build reads version " +
                  std::to_string(kContainerVersion) + ")");
  }
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (stored != fnv1a(bytes.data(), body)) throw IoError("container is truncated or corrupt (hash mismatch)");

  TensorContainer c;
  std::istringstream meta(r.take_string(r.take<std::uint32_t>()));
  for (std::string line; std::getline(meta, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("malformed container metadata line: " + line);
    c.metadata_[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto count = r.take<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.take_string(r.take<std::uint32_t>());
    Shape s;
    s.n = r.take<std::int32_t>();
    s.c = r.take<std::int32_t>();
    s.h = r.take<std::int32_t>();
    s.w = r.take<std::int32_t>();
    if (!s.valid()) throw IoError("container tensor '" + name + "' has invalid shape " + s.str());
    Tensor t(s);
    r.take_doubles(t.data(), t.size());
    c.tensors_.emplace_back(std::move(name), std::move(t));
  }
  if (r.pos() != body) throw IoError("container has trailing bytes");
  return c;
}

void TensorContainer::save(const std::filesystem::path& path) const {
  const std::string bytes = to_bytes();
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

TensorContainer TensorContainer::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return from_bytes(ss.str());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace tsi
