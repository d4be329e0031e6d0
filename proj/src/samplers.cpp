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

#include "fmlab/samplers.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fmlab/errors.hpp"
#include "fmlab/schedules.hpp"

namespace fmlab {

namespace {

Conditioning cond_for(const std::vector<int>& labels, double t, double s) {
  Conditioning c;
  c.t.assign(labels.size(), t);
  c.s.assign(labels.size(), s);
  c.labels = labels;
  return c;
}

void check_batch(const Tensor& x0, const std::vector<int>& labels) {
  if (x0.rank() != 2 || x0.rows() != labels.size()) {
    throw ShapeError("sampler: noise " + shape_string(x0.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
}

// Predict-and-renoise over times[0] < ... < times.back() = 1.
Tensor cm_phase(const VelocityNet& net, const std::vector<double>& times, Tensor x,
                const std::vector<int>& labels, Rng& renoise_rng, std::vector<Tensor>* snapshots) {
  Tensor x1;
  if (snapshots) snapshots->push_back(x);
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    x1 = flow_map(net, x, cond_for(labels, times[i], 1.0));
    if (i + 2 < times.size()) {
      const Tensor z = renoise_rng.normal_tensor(x.rows(), x.cols());
      x = interpolate(z, x1, times[i + 1]);
      if (snapshots) snapshots->push_back(x);
    }
  }
  if (snapshots) snapshots->push_back(x1);
  return x1;
}

}  // namespace

SamplerKind parse_sampler_kind(const std::string& s) {
  if (s == "euler") return SamplerKind::kEuler;
  if (s == "cm") return SamplerKind::kCm;
  if (s == "mix") return SamplerKind::kMix;
  throw FormatError("unknown sampler '" + s + "' (expected euler, cm or mix)");
}

std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::kEuler: return "euler";
    case SamplerKind::kCm: return "cm";
    case SamplerKind::kMix: return "mix";
  }
  return "?";
}

TimeGrid make_grid(int nfe, int segments) {
  if (nfe < 1) throw DomainError("nfe must be positive");
  TimeGrid g;
  g.on_training_grid = segments > 0 && segments % nfe == 0;
  g.times.resize(static_cast<std::size_t>(nfe) + 1);
  for (int i = 0; i <= nfe; ++i) {
    if (g.on_training_grid) {
      // Same arithmetic as the training draw i / N.
      g.times[i] = static_cast<double>(i * (segments / nfe)) / segments;
    } else {
      g.times[i] = static_cast<double>(i) / nfe;
    }
  }
  return g;
}

void validate_grid(const std::vector<double>& times) {
  if (times.size() < 2) throw DomainError("time grid needs at least two points");
  if (times.front() != 0.0 || times.back() != 1.0) {
    throw DomainError("time grid must start at exactly 0 and end at exactly 1");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw DomainError("time grid must be strictly increasing");
  }
}

ResolvedSpec resolve(const SamplerSpec& spec) {
  ResolvedSpec r;
  r.spec = spec;
  if (spec.grid.empty()) {
    r.grid = make_grid(spec.nfe, spec.segments);
  } else {
    validate_grid(spec.grid);
    r.grid.times = spec.grid;
    r.grid.on_training_grid = true;
    for (double t : spec.grid) {
      const double scaled = t * spec.segments;
      if (scaled != std::round(scaled)) r.grid.on_training_grid = false;
    }
    if (static_cast<int>(spec.grid.size()) - 1 != spec.nfe) {
      throw DomainError("grid has " + std::to_string(spec.grid.size() - 1) + " steps but nfe is " +
                        std::to_string(spec.nfe));
    }
  }
  if (spec.kind == SamplerKind::kMix) {
    r.mix_k = spec.mix_k > 0 ? spec.mix_k : 1;
    if (r.mix_k >= spec.nfe) {
      throw DomainError("mix split k=" + std::to_string(r.mix_k) + " must be below nfe=" +
                        std::to_string(spec.nfe));
    }
  } else if (spec.mix_k != 0) {
    throw DomainError("mix split k only applies to the mix sampler");
  }
  return r;
}

Tensor euler_from(const VelocityNet& net, const std::vector<double>& grid, const Tensor& x0,
                  const std::vector<int>& labels, std::vector<Tensor>* snapshots) {
  validate_grid(grid);
  check_batch(x0, labels);
  Tensor x = x0;
  if (snapshots) snapshots->push_back(x);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const Tensor v = net.eval(x, cond_for(labels, grid[i], grid[i]));
    axpy(grid[i + 1] - grid[i], v, x);
    if (snapshots) snapshots->push_back(x);
  }
  return x;
}

Tensor cm_from(const VelocityNet& net, const std::vector<double>& grid, const Tensor& x0,
               const std::vector<int>& labels, Rng& renoise_rng, std::vector<Tensor>* snapshots) {
  validate_grid(grid);
  check_batch(x0, labels);
  return cm_phase(net, grid, x0, labels, renoise_rng, snapshots);
}

Tensor mix_from(const VelocityNet& net, const std::vector<double>& grid, int k, MixStep step,
                const Tensor& x0, const std::vector<int>& labels, Rng& renoise_rng,
                std::vector<Tensor>* snapshots) {
  validate_grid(grid);
  check_batch(x0, labels);
  const int steps = static_cast<int>(grid.size()) - 1;
  if (k < 0 || k > steps) throw DomainError("mix split outside [0, nfe]");
  Tensor x = x0;
  for (int i = 0; i < k; ++i) {
    if (snapshots) snapshots->push_back(x);
    const double t = grid[i], s = grid[i + 1];
    if (step == MixStep::kFlowMap) {
      x = flow_map(net, x, cond_for(labels, t, s));
    } else {
      axpy(s - t, net.eval(x, cond_for(labels, t, t)), x);
    }
  }
  if (k == steps) {
    if (snapshots) snapshots->push_back(x);
    return x;
  }
  const std::vector<double> rest(grid.begin() + k, grid.end());
  return cm_phase(net, rest, std::move(x), labels, renoise_rng, snapshots);
}

SampleRun run_sampler(const VelocityNet& net, const SamplerSpec& spec,
                      const std::vector<int>& labels) {
  SampleRun run;
  run.spec = resolve(spec);
  run.labels = labels;
  Rng noise(spec.seed, 1);
  Rng renoise(spec.seed, 2);
  const Tensor x0 = noise.normal_tensor(labels.size(), net.arch().dim_x);
  std::vector<Tensor>* snaps = spec.keep_snapshots ? &run.snapshots : nullptr;
  const auto& grid = run.spec.grid.times;
  switch (spec.kind) {
    case SamplerKind::kEuler: run.samples = euler_from(net, grid, x0, labels, snaps); break;
    case SamplerKind::kCm: run.samples = cm_from(net, grid, x0, labels, renoise, snaps); break;
    case SamplerKind::kMix:
      run.samples = mix_from(net, grid, run.spec.mix_k, spec.mix_step, x0, labels, renoise, snaps);
      break;
  }
  return run;
}

void write_samples_csv(const std::string& path, const SampleRun& run) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  const std::size_t d = run.samples.cols();
  for (std::size_t j = 0; j < d; ++j) out << "dim" << j << ',';
  out << "class\n" << std::setprecision(17);
  for (std::size_t r = 0; r < run.samples.rows(); ++r) {
    for (std::size_t j = 0; j < d; ++j) out << run.samples.at(r, j) << ',';
    out << run.labels[r] << '\n';
  }
  if (!out) throw Error("write failed for " + path);
}

Tensor read_samples_csv(const std::string& path, std::vector<int>* labels) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": missing header");
  std::size_t d = 0;
  {
    std::stringstream hs(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(hs, cell, ',')) cells.push_back(cell);
    if (cells.empty() || cells.back() != "class") {
      throw FormatError(path + ": header must end with 'class'");
    }
    d = cells.size() - 1;
  }
  std::vector<double> values;
  std::vector<int> labs;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        if (count < d) {
          values.push_back(std::stod(cell));
        } else {
          labs.push_back(std::stoi(cell));
        }
      } catch (const std::exception&) {
        throw FormatError(path + ":" + std::to_string(lineno) + ": bad value '" + cell + "'");
      }
      ++count;
    }
    if (count != d + 1) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(d + 1) + " fields, got " + std::to_string(count));
    }
  }
  if (labels) *labels = labs;
  return Tensor({labs.size(), d}, std::move(values));
}

void write_sample_metadata(const std::string& path, const SampleRun& run,
                           const std::string& checkpoint_digest) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  const auto& s = run.spec;
  out << "sampler = " << to_string(s.spec.kind) << '\n'
      << "nfe = " << s.spec.nfe << '\n'
      << "grid =";
  out << std::setprecision(17);
  for (double t : s.grid.times) out << ' ' << t;
  out << '\n'
      << "on_training_grid = " << (s.grid.on_training_grid ? "true" : "false") << '\n';
  if (s.spec.kind == SamplerKind::kMix) {
    out << "mix_k = " << s.mix_k << '\n'
        << "mix_step = " << (s.spec.mix_step == MixStep::kFlowMap ? "flow-map" : "instantaneous")
        << '\n';
  }
  out << "seed = " << s.spec.seed << '\n'
      << "n_samples = " << run.samples.rows() << '\n'
      << "checkpoint_digest = " << checkpoint_digest << '\n';
}

}  // namespace fmlab
