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

// Binary checkpoint for online and EMA weights.
//
// Layout, all integers and doubles little-endian:
//   "DECM"  u32 version
//   u64 dim_x, n_classes, width, depth, n_freq, class_dim
//   u32 flags (bit 0: s pathway frozen), u32 reserved
//   u64 step, u64 config digest, f64 ema decay
//   u64 tensor count, then per tensor: u64 rank, rank x u64 dims
//   online payload (f64), EMA payload (f64)
//   u64 FNV-1a checksum of every preceding byte

#ifndef FMLAB_CHECKPOINT_HPP_
#define FMLAB_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "fmlab/tensor.hpp"
#include "fmlab/velocity_net.hpp"

namespace fmlab {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetArch arch;
  bool s_path_frozen = false;
  std::uint64_t step = 0;
  std::uint64_t config_digest = 0;
  double ema_decay = 0.999;
  std::vector<Tensor> online;
  std::vector<Tensor> ema;

  VelocityNet online_net() const { return VelocityNet(arch, online); }
  VelocityNet ema_net() const { return VelocityNet(arch, ema); }
};

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a of the encoded file, as 16 hex digits.
std::string checkpoint_digest(const Checkpoint& ck);

}  // namespace fmlab

#endif  // FMLAB_CHECKPOINT_HPP_
