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

#include "fmlab/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "fmlab/errors.hpp"

namespace fmlab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("'" + s + "' is not a number");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("'" + s + "' is not a non-negative integer");
  }
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("'" + s + "' is not an integer");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw FormatError("'" + s + "' is not a boolean");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  const char* name;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define FM_DOUBLE(key, member)                                                   \
  Field {                                                                        \
    key, [](TrainConfig& c, const std::string& v) { c.member = parse_double(v); }, \
        [](const TrainConfig& c) { return fmt_double(c.member); }                \
  }
#define FM_SIZE(key, member)                                                                \
  Field {                                                                                   \
    key, [](TrainConfig& c, const std::string& v) { c.member = parse_u64(v); },             \
        [](const TrainConfig& c) { return std::to_string(c.member); }                       \
  }
#define FM_INT(key, member)                                                      \
  Field {                                                                        \
    key, [](TrainConfig& c, const std::string& v) { c.member = parse_int(v); },  \
        [](const TrainConfig& c) { return std::to_string(c.member); }            \
  }
#define FM_BOOL(key, member)                                                     \
  Field {                                                                        \
    key, [](TrainConfig& c, const std::string& v) { c.member = parse_bool(v); }, \
        [](const TrainConfig& c) { return fmt_bool(c.member); }                  \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"mode",
       [](TrainConfig& c, const std::string& v) {
         if (v == "distill") {
           c.mode = TrainMode::kDistill;
         } else if (v == "from-scratch") {
           c.mode = TrainMode::kFromScratch;
         } else {
           throw FormatError("mode must be distill or from-scratch, got '" + v + "'");
         }
       },
       [](const TrainConfig& c) { return to_string(c.mode); }},
      {"dataset", [](TrainConfig& c, const std::string& v) { c.dataset = v; },
       [](const TrainConfig& c) { return c.dataset; }},
      FM_BOOL("conditional", conditional),
      FM_DOUBLE("label_dropout", label_dropout),
      FM_SIZE("width", width),
      FM_SIZE("depth", depth),
      FM_SIZE("n_freq", n_freq),
      FM_SIZE("class_dim", class_dim),
      {"losses", [](TrainConfig& c, const std::string& v) { c.losses = LossFlags::parse(v); },
       [](const TrainConfig& c) { return c.losses.to_string(); }},
      FM_DOUBLE("lambda", lambda),
      FM_DOUBLE("gamma", gamma),
      FM_DOUBLE("w_cfg", guidance.w_cfg),
      FM_DOUBLE("eta", guidance.eta),
      FM_BOOL("guidance_normalize", guidance.normalize),
      FM_INT("freq", freq),
      {"n2n_right_velocity",
       [](TrainConfig& c, const std::string& v) {
         if (v == "interpolant") {
           c.n2n_right_velocity = RightVelocity::kInterpolant;
         } else if (v == "mapped") {
           c.n2n_right_velocity = RightVelocity::kMapped;
         } else {
           throw FormatError("n2n_right_velocity must be interpolant or mapped, got '" + v + "'");
         }
       },
       [](const TrainConfig& c) { return to_string(c.n2n_right_velocity); }},
      {"timestep",
       [](TrainConfig& c, const std::string& v) { c.timesteps.kind = parse_timestep_kind(v); },
       [](const TrainConfig& c) { return to_string(c.timesteps.kind); }},
      FM_INT("segments", timesteps.segments),
      FM_DOUBLE("timestep_mean", timesteps.mean),
      FM_DOUBLE("timestep_std", timesteps.stddev),
      {"weight", [](TrainConfig& c, const std::string& v) { c.weights.kind = parse_weight_kind(v); },
       [](const TrainConfig& c) {
         return std::string(c.weights.kind == WeightKind::kConstant ? "constant" : "linear");
       }},
      FM_DOUBLE("kappa", weights.kappa),
      FM_DOUBLE("p", distance.p),
      FM_DOUBLE("c", distance.c),
      FM_DOUBLE("beta_cos", beta_cos),
      FM_DOUBLE("lr", lr),
      FM_DOUBLE("beta1", beta1),
      FM_DOUBLE("beta2", beta2),
      FM_DOUBLE("weight_decay", weight_decay),
      FM_DOUBLE("ema_decay", ema_decay),
      FM_SIZE("batch_size", batch_size),
      FM_SIZE("total_steps", total_steps),
      FM_SIZE("seed", seed),
      FM_SIZE("checkpoint_every", checkpoint_every),
      FM_SIZE("probe_every", probe_every),
      FM_INT("fault_threshold", fault_threshold),
  };
  return table;
}

#undef FM_DOUBLE
#undef FM_SIZE
#undef FM_INT
#undef FM_BOOL

}  // namespace

std::vector<ConfigEntry> parse_key_values(const std::string& text, const std::string& source) {
  std::vector<ConfigEntry> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    ConfigEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno};
    if (e.key.empty()) throw FormatError(source + ":" + std::to_string(lineno) + ": empty key");
    for (const auto& prev : out) {
      if (prev.key == e.key) {
        throw FormatError(source + ":" + std::to_string(lineno) + ": duplicate key '" + e.key +
                          "' (first set on line " + std::to_string(prev.line) + ")");
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ConfigEntry> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path);
}

std::string LossFlags::to_string() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += name;
  };
  add(fm, "fm");
  add(cd, "cd");
  add(n2n, "n2n");
  return s;
}

LossFlags LossFlags::parse(const std::string& s) {
  LossFlags f{false, false, false};
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item == "fm") {
      f.fm = true;
    } else if (item == "cd") {
      f.cd = true;
    } else if (item == "n2n") {
      f.n2n = true;
    } else {
      throw FormatError("unknown loss '" + item + "' (expected fm, cd, n2n)");
    }
  }
  if (!f.fm && !f.cd && !f.n2n) throw FormatError("empty loss list");
  return f;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw DomainError("config: " + m); };
  if (!losses.fm && !losses.cd && !losses.n2n) fail("at least one loss must be enabled");
  if (freq < 1) fail("freq must be >= 1");
  if (!(lambda >= 0.0) || !(gamma >= 0.0)) fail("lambda and gamma must be >= 0");
  if (!(guidance.w_cfg >= 1.0)) fail("w_cfg must be >= 1");
  if (!(guidance.eta > 0.0)) fail("eta must be > 0");
  if (timesteps.segments < 1) fail("segments must be >= 1");
  if (!(timesteps.stddev > 0.0)) fail("timestep_std must be > 0");
  if (!(weights.kappa > 0.0)) fail("kappa must be > 0");
  if (!(distance.p >= 0.0 && distance.p <= 1.0)) fail("p must lie in [0,1]");
  if (!(distance.c > 0.0)) fail("c must be > 0");
  if (!(beta_cos >= 0.0)) fail("beta_cos must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas in [0,1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) fail("ema_decay must lie in [0,1]");
  if (!(label_dropout >= 0.0 && label_dropout < 1.0)) fail("label_dropout must lie in [0,1)");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (width < 1 || depth < 1 || n_freq < 2) fail("width, depth >= 1 and n_freq >= 2");
  if (fault_threshold < 1) fail("fault_threshold must be >= 1");
}

NetArch TrainConfig::arch(std::size_t dim_x, std::size_t n_classes) const {
  NetArch a;
  a.dim_x = dim_x;
  a.n_classes = conditional ? n_classes : 0;
  a.width = width;
  a.depth = depth;
  a.n_freq = n_freq;
  a.class_dim = class_dim;
  return a;
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.name) + " = " + f.get(*this) + "\n";
  return out;
}

std::uint64_t TrainConfig::digest() const {
  const std::string text = to_text();
  return fnv1a(text.data(), text.size());
}

void TrainConfig::apply(const std::vector<ConfigEntry>& entries, const std::string& source,
                        const std::set<std::string>& extra_keys,
                        std::map<std::string, std::string>* extras) {
  for (const auto& e : entries) {
    const std::string where = source + ":" + std::to_string(e.line) + ": ";
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (e.key == f.name) field = &f;
    }
    if (field == nullptr) {
      if (extra_keys.count(e.key)) {
        if (extras) (*extras)[e.key] = e.value;
        continue;
      }
      throw FormatError(where + "unknown key '" + e.key + "'");
    }
    try {
      field->set(*this, e.value);
    } catch (const Error& err) {
      throw FormatError(where + e.key + ": " + err.what());
    }
  }
  validate();
}

TrainConfig TrainConfig::from_entries(const std::vector<ConfigEntry>& entries,
                                      const std::string& source,
                                      const std::set<std::string>& extra_keys,
                                      std::map<std::string, std::string>* extras) {
  TrainConfig c;
  c.apply(entries, source, extra_keys, extras);
  return c;
}

TrainConfig TrainConfig::from_text(const std::string& text, const std::string& source) {
  return from_entries(parse_key_values(text, source), source);
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  return from_entries(read_key_values(path), path);
}

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.name);
    return out;
  }();
  return k;
}

std::string to_string(TrainMode m) { return m == TrainMode::kDistill ? "distill" : "from-scratch"; }

std::string to_string(RightVelocity v) {
  return v == RightVelocity::kInterpolant ? "interpolant" : "mapped";
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace fmlab
