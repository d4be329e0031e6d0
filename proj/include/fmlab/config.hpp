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

// Flat "key = value" configuration for training runs.

#ifndef FMLAB_CONFIG_HPP_
#define FMLAB_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fmlab/objectives.hpp"
#include "fmlab/schedules.hpp"
#include "fmlab/velocity_net.hpp"

namespace fmlab {

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

// Parses "key = value" lines. Blank lines and '#' comments are skipped;
// duplicate keys and lines without '=' are errors.
std::vector<ConfigEntry> parse_key_values(const std::string& text, const std::string& source);
std::vector<ConfigEntry> read_key_values(const std::string& path);

enum class TrainMode { kDistill, kFromScratch };
enum class RightVelocity { kInterpolant, kMapped };

struct LossFlags {
  bool fm = true;
  bool cd = true;
  bool n2n = true;

  std::string to_string() const;  // e.g. "fm,cd,n2n"
  static LossFlags parse(const std::string& s);
  friend bool operator==(const LossFlags&, const LossFlags&) = default;
};

struct TrainConfig {
  TrainMode mode = TrainMode::kDistill;
  std::string dataset = "two-gaussians";
  bool conditional = false;
  double label_dropout = 0.1;  // from-scratch conditional runs only

  std::size_t width = 64;
  std::size_t depth = 4;
  std::size_t n_freq = 16;
  std::size_t class_dim = 8;

  LossFlags losses;
  double lambda = 1.0;
  double gamma = 1.0;
  GuidanceSpec guidance;
  int freq = 3;
  RightVelocity n2n_right_velocity = RightVelocity::kMapped;

  TimestepSampler timesteps;
  WeightFn weights;
  AdaptiveDistance distance;
  double beta_cos = 1.0;

  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.0;
  double ema_decay = 0.999;
  std::size_t batch_size = 256;
  std::uint64_t total_steps = 10000;
  std::uint64_t seed = 0;

  std::uint64_t checkpoint_every = 0;  // 0: final checkpoint only
  std::uint64_t probe_every = 100;     // instability probe cadence without cd
  int fault_threshold = 50;

  // Throws DomainError on an inconsistent configuration.
  void validate() const;
  NetArch arch(std::size_t dim_x, std::size_t n_classes) const;

  // Canonical text with every key, one per line, in a fixed order.
  std::string to_text() const;
  std::uint64_t digest() const;

  // Overwrites the listed keys, keeping every other field, then validates.
  // Keys in extra_keys are collected into extras instead of rejected.
  void apply(const std::vector<ConfigEntry>& entries, const std::string& source,
             const std::set<std::string>& extra_keys = {},
             std::map<std::string, std::string>* extras = nullptr);
  static TrainConfig from_entries(const std::vector<ConfigEntry>& entries,
                                  const std::string& source,
                                  const std::set<std::string>& extra_keys = {},
                                  std::map<std::string, std::string>* extras = nullptr);
  static TrainConfig from_text(const std::string& text, const std::string& source = "<config>");
  static TrainConfig from_file(const std::string& path);
  static const std::vector<std::string>& keys();
};

std::string to_string(TrainMode m);
std::string to_string(RightVelocity v);

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace fmlab

#endif  // FMLAB_CONFIG_HPP_
