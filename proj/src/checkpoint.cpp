// Copyright 2026 The fmlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fmlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fmlab/config.hpp"
#include "fmlab/errors.hpp"

namespace fmlab {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    bytes_.insert(bytes_.end(), b, b + sizeof(T));
  }
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    bytes_.insert(bytes_.end(), c, c + n);
  }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& b) : b_(b) {}

  void need(std::size_t n, std::size_t expected_total) const {
    if (pos_ + n > b_.size()) {
      throw FormatError("checkpoint truncated: expected at least " +
                        std::to_string(expected_total) + " bytes, file has " +
                        std::to_string(b_.size()));
    }
  }
  template <typename T>
  T get() {
    need(sizeof(T), pos_ + sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void raw(void* p, std::size_t n, std::size_t expected_total) {
    need(n, expected_total);
    std::memcpy(p, b_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ck) {
  const auto shapes = ck.arch.param_shapes();
  if (ck.online.size() != shapes.size() || ck.ema.size() != shapes.size()) {
    throw ShapeError("checkpoint tensor count does not match the architecture");
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (ck.online[i].shape() != shapes[i] || ck.ema[i].shape() != shapes[i]) {
      throw ShapeError("checkpoint tensor " + std::to_string(i) + " has the wrong shape");
    }
  }
  Writer w;
  w.raw("DECM", 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  for (std::uint64_t v : {ck.arch.dim_x, ck.arch.n_classes, ck.arch.width, ck.arch.depth,
                          ck.arch.n_freq, ck.arch.class_dim}) {
    w.put<std::uint64_t>(v);
  }
  w.put<std::uint32_t>(ck.s_path_frozen ? 1u : 0u);
  w.put<std::uint32_t>(0);
  w.put<std::uint64_t>(ck.step);
  w.put<std::uint64_t>(ck.config_digest);
  w.put<double>(ck.ema_decay);
  w.put<std::uint64_t>(shapes.size());
  for (const auto& s : shapes) {
    w.put<std::uint64_t>(s.size());
    for (std::size_t d : s) w.put<std::uint64_t>(d);
  }
  for (const auto* set : {&ck.online, &ck.ema}) {
    for (const auto& t : *set) w.raw(t.raw(), t.size() * sizeof(double));
  }
  const std::uint64_t sum = fnv1a(w.bytes().data(), w.bytes().size());
  w.put<std::uint64_t>(sum);
  return std::move(w.bytes());
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4, 4);
  if (std::memcmp(magic, "DECM", 4) != 0) {
    throw FormatError("checkpoint: bad magic at offset 0 (expected \"DECM\")");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: file declares format version " + std::to_string(version) +
                      ", this build reads version " + std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  ck.arch.dim_x = r.get<std::uint64_t>();
  ck.arch.n_classes = r.get<std::uint64_t>();
  ck.arch.width = r.get<std::uint64_t>();
  ck.arch.depth = r.get<std::uint64_t>();
  ck.arch.n_freq = r.get<std::uint64_t>();
  ck.arch.class_dim = r.get<std::uint64_t>();
  const auto flags = r.get<std::uint32_t>();
  r.get<std::uint32_t>();
  ck.s_path_frozen = (flags & 1u) != 0;
  ck.step = r.get<std::uint64_t>();
  ck.config_digest = r.get<std::uint64_t>();
  ck.ema_decay = r.get<double>();

  const auto shapes = ck.arch.param_shapes();
  const std::size_t header_at = r.pos();
  const auto count = r.get<std::uint64_t>();
  if (count != shapes.size()) {
    throw FormatError("checkpoint: offset " + std::to_string(header_at) + ": " +
                      std::to_string(count) + " tensors, architecture needs " +
                      std::to_string(shapes.size()));
  }
  std::size_t numel = 0;
  for (const auto& s : shapes) {
    const std::size_t at = r.pos();
    const auto rank = r.get<std::uint64_t>();
    Shape got;
    for (std::uint64_t k = 0; k < rank && k < 8; ++k) got.push_back(r.get<std::uint64_t>());
    if (got != s) {
      throw FormatError("checkpoint: offset " + std::to_string(at) + ": tensor shape " +
                        shape_string(got) + " does not match expected " + shape_string(s));
    }
    numel += shape_numel(s);
  }
  const std::size_t expected_total = r.pos() + 2 * numel * sizeof(double) + sizeof(std::uint64_t);
  for (auto* set : {&ck.online, &ck.ema}) {
    for (const auto& s : shapes) {
      Tensor t(s);
      r.raw(t.raw(), t.size() * sizeof(double), expected_total);
      set->push_back(std::move(t));
    }
  }
  const std::size_t sum_at = r.pos();
  r.need(sizeof(std::uint64_t), expected_total);
  const std::uint64_t computed = fnv1a(bytes.data(), sum_at);
  const auto stored = r.get<std::uint64_t>();
  if (bytes.size() != expected_total) {
    throw FormatError("checkpoint: expected " + std::to_string(expected_total) +
                      " bytes, file has " + std::to_string(bytes.size()));
  }
  if (stored != computed) {
    throw FormatError("checkpoint: checksum mismatch at offset " + std::to_string(sum_at) +
                      ": stored " + hex64(stored) + ", computed " + hex64(computed));
  }
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const auto bytes = encode_checkpoint(ck);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw Error("cannot move checkpoint into place at " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::string checkpoint_digest(const Checkpoint& ck) {
  const auto bytes = encode_checkpoint(ck);
  return hex64(fnv1a(bytes.data(), bytes.size()));
}

}  // namespace fmlab
