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

#include "fmlab/data_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>

#include "fmlab/errors.hpp"

namespace fmlab {

namespace {

struct Cell {
  double x0, y0;
};

std::vector<Cell> filled_cells(const ToyDataset& ds) {
  std::vector<Cell> cells;
  const double side = 2.0 * ds.extent / ds.grid;
  for (int i = 0; i < ds.grid; ++i) {
    for (int j = 0; j < ds.grid; ++j) {
      if ((i + j) % 2 == 0) cells.push_back({-ds.extent + i * side, -ds.extent + j * side});
    }
  }
  return cells;
}

std::vector<double> stratum_weights(const ToyDataset& ds) {
  switch (ds.kind) {
    case DatasetKind::kGaussianMixture: {
      std::vector<double> w;
      for (const auto& c : ds.components) w.push_back(c.weight);
      return w;
    }
    case DatasetKind::kCheckerboard: {
      const std::size_t n = filled_cells(ds).size();
      return std::vector<double>(n, 1.0 / static_cast<double>(n));
    }
    case DatasetKind::kTwoMoons: return {0.5, 0.5};
  }
  return {};
}

// Writes one draw from stratum k into out.
void draw_from(const ToyDataset& ds, std::size_t k, Rng& rng, std::span<double> out) {
  switch (ds.kind) {
    case DatasetKind::kGaussianMixture: {
      const auto& c = ds.components[k];
      for (std::size_t d = 0; d < ds.dim; ++d) out[d] = c.mean[d] + c.stddev * rng.normal();
      return;
    }
    case DatasetKind::kCheckerboard: {
      static thread_local std::vector<Cell> cache;
      static thread_local int cache_grid = -1;
      static thread_local double cache_extent = 0.0;
      if (cache_grid != ds.grid || cache_extent != ds.extent) {
        cache = filled_cells(ds);
        cache_grid = ds.grid;
        cache_extent = ds.extent;
      }
      const double side = 2.0 * ds.extent / ds.grid;
      out[0] = cache[k].x0 + side * rng.uniform();
      out[1] = cache[k].y0 + side * rng.uniform();
      return;
    }
    case DatasetKind::kTwoMoons: {
      const double a = std::numbers::pi * rng.uniform();
      double x = 0.0, y = 0.0;
      if (k == 0) {
        x = std::cos(a);
        y = std::sin(a);
      } else {
        x = 1.0 - std::cos(a);
        y = 0.5 - std::sin(a);
      }
      // Centre and scale to roughly unit spread.
      out[0] = 1.5 * (x - 0.5) + ds.noise * rng.normal();
      out[1] = 1.5 * (y - 0.25) + ds.noise * rng.normal();
      return;
    }
  }
}

std::size_t pick_stratum(const std::vector<double>& w, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    acc += w[k];
    if (u < acc) return k;
  }
  return w.size() - 1;
}

void check_rows(const ToyDataset& ds, const Tensor& x) {
  if (x.rank() != 2 || x.cols() != ds.dim) {
    throw ShapeError("oracle: x has shape " + shape_string(x.shape()) + ", dataset dim " +
                     std::to_string(ds.dim));
  }
}

void check_label(const ToyDataset& ds, int label) {
  if (label != kNullClass && (label < 0 || static_cast<std::size_t>(label) >= ds.n_classes())) {
    throw DomainError("label " + std::to_string(label) + " outside dataset classes");
  }
}

}  // namespace

std::size_t ToyDataset::n_classes() const { return stratum_weights(*this).size(); }

std::string ToyDataset::name() const {
  switch (kind) {
    case DatasetKind::kGaussianMixture: return components.size() == 2 ? "two-gaussians" : "gaussian-mixture";
    case DatasetKind::kCheckerboard: return "checkerboard";
    case DatasetKind::kTwoMoons: return "two-moons";
  }
  return "?";
}

ToyDataset make_gaussian_mixture(std::vector<GaussianComponent> components) {
  if (components.empty()) throw DomainError("mixture needs at least one component");
  ToyDataset ds;
  ds.kind = DatasetKind::kGaussianMixture;
  ds.dim = components.front().mean.size();
  double total = 0.0;
  for (const auto& c : components) {
    if (c.mean.size() != ds.dim) throw ShapeError("mixture components differ in dimension");
    if (!(c.weight > 0.0) || !(c.stddev >= 0.0)) throw DomainError("invalid mixture component");
    total += c.weight;
  }
  for (auto& c : components) c.weight /= total;
  ds.components = std::move(components);
  return ds;
}

ToyDataset make_two_gaussians() {
  return make_gaussian_mixture({{{-2.0, -1.0}, 0.5, 0.4}, {{2.0, 1.0}, 0.5, 0.6}});
}

ToyDataset make_checkerboard(int grid, double extent) {
  if (grid < 1 || !(extent > 0.0)) throw DomainError("invalid checkerboard");
  ToyDataset ds;
  ds.kind = DatasetKind::kCheckerboard;
  ds.grid = grid;
  ds.extent = extent;
  return ds;
}

ToyDataset make_two_moons(double noise) {
  ToyDataset ds;
  ds.kind = DatasetKind::kTwoMoons;
  ds.noise = noise;
  return ds;
}

ToyDataset make_dataset(const std::string& name) {
  if (name == "two-gaussians") return make_two_gaussians();
  if (name == "checkerboard") return make_checkerboard();
  if (name == "two-moons") return make_two_moons();
  throw FormatError("unknown dataset '" + name + "'");
}

DataBatch sample_data(const ToyDataset& ds, std::size_t n, Rng& rng) {
  DataBatch out{Tensor({n, ds.dim}), std::vector<int>(n, 0)};
  const auto w = stratum_weights(ds);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = pick_stratum(w, rng);
    draw_from(ds, k, rng, out.points.row_span(i));
    out.labels[i] = static_cast<int>(k);
  }
  return out;
}

DataBatch sample_data_stratified(const ToyDataset& ds, std::size_t n, Rng& rng) {
  const auto w = stratum_weights(ds);
  // Largest-remainder rounding of n * w_k.
  std::vector<std::size_t> counts(w.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double exact = static_cast<double>(n) * w[k];
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[k];
    rem.emplace_back(exact - std::floor(exact), k);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[rem[i % rem.size()].second];

  DataBatch out{Tensor({n, ds.dim}), std::vector<int>(n, 0)};
  std::size_t row = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    for (std::size_t i = 0; i < counts[k]; ++i, ++row) {
      draw_from(ds, k, rng, out.points.row_span(row));
      out.labels[row] = static_cast<int>(k);
    }
  }
  return out;
}

Tensor oracle_velocity_closed_form(const ToyDataset& ds, const Tensor& x, double t, int label) {
  if (ds.kind != DatasetKind::kGaussianMixture) {
    throw DomainError("closed-form oracle velocity needs a Gaussian mixture");
  }
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("oracle velocity: t outside [0,1]");
  check_rows(ds, x);
  check_label(ds, label);
  // x_t = x1 and E[x0] = 0.
  if (t == 1.0) return x;
  const std::size_t d = ds.dim;
  const std::size_t nk = ds.components.size();
  Tensor out(x.shape());
  std::vector<double> logr(nk);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row_span(r);
    auto o = out.row_span(r);
    // Degenerate variance at t = 1 with a point-mass component: x_t = x1 and
    // E[x0] = 0, so the velocity is x itself.
    bool degenerate = false;
    for (std::size_t k = 0; k < nk; ++k) {
      const auto& c = ds.components[k];
      const double var = t * t * c.stddev * c.stddev + (1.0 - t) * (1.0 - t);
      if (var < 1e-300) degenerate = true;
      double sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double e = xr[j] - t * c.mean[j];
        sq += e * e;
      }
      const bool active = label == kNullClass || static_cast<std::size_t>(label) == k;
      logr[k] = active ? std::log(c.weight) - 0.5 * static_cast<double>(d) * std::log(var) - 0.5 * sq / var
                       : -std::numeric_limits<double>::infinity();
    }
    if (degenerate) {
      std::copy(xr.begin(), xr.end(), o.begin());
      continue;
    }
    const double mx = *std::max_element(logr.begin(), logr.end());
    double z = 0.0;
    for (double& v : logr) {
      v = std::exp(v - mx);
      z += v;
    }
    std::fill(o.begin(), o.end(), 0.0);
    for (std::size_t k = 0; k < nk; ++k) {
      if (logr[k] == 0.0) continue;
      const auto& c = ds.components[k];
      const double s2 = c.stddev * c.stddev;
      const double var = t * t * s2 + (1.0 - t) * (1.0 - t);
      const double gain = (t * s2 - (1.0 - t)) / var;
      const double resp = logr[k] / z;
      for (std::size_t j = 0; j < d; ++j) {
        o[j] += resp * (c.mean[j] + gain * (xr[j] - t * c.mean[j]));
      }
    }
  }
  return out;
}

McEstimate mc_oracle_velocity(const ToyDataset& ds, const Tensor& x, double t,
                              std::size_t n_samples, Rng& rng, int label) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("oracle velocity: t outside [0,1]");
  check_rows(ds, x);
  check_label(ds, label);
  const std::size_t d = ds.dim;
  McEstimate est{Tensor(x.shape()), Tensor(x.shape())};
  if (t == 1.0) {
    est.mean = x;
    return est;
  }
  DataBatch data = sample_data_stratified(ds, n_samples, rng);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (label == kNullClass || data.labels[i] == label) rows.push_back(i);
  }
  const double sd = 1.0 - t;
  std::vector<double> logw(rows.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row_span(r);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto x1 = data.points.row_span(rows[i]);
      double sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double e = xr[j] - t * x1[j];
        sq += e * e;
      }
      logw[i] = -0.5 * sq / (sd * sd);
    }
    const double mx = *std::max_element(logw.begin(), logw.end());
    double sw = 0.0;
    for (double& v : logw) {
      v = std::exp(v - mx);
      sw += v;
    }
    auto m = est.mean.row_span(r);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto x1 = data.points.row_span(rows[i]);
      for (std::size_t j = 0; j < d; ++j) m[j] += logw[i] * (x1[j] - xr[j]) / sd;
    }
    for (double& v : m) v /= sw;
    // Delta-method standard error of the ratio estimator.
    auto se = est.standard_error.row_span(r);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto x1 = data.points.row_span(rows[i]);
      for (std::size_t j = 0; j < d; ++j) {
        const double dev = (x1[j] - xr[j]) / sd - m[j];
        se[j] += logw[i] * logw[i] * dev * dev;
      }
    }
    for (double& v : se) v = std::sqrt(v) / sw;
  }
  return est;
}

Tensor oracle_velocity(const ToyDataset& ds, const Tensor& x, double t, int label) {
  if (ds.kind == DatasetKind::kGaussianMixture) return oracle_velocity_closed_form(ds, x, t, label);
  // Fixed stream per time so repeated queries agree.
  Rng rng(0x5eed, static_cast<std::uint64_t>(std::llround(t * 1e9)));
  return mc_oracle_velocity(ds, x, t, 100000, rng, label).mean;
}

VelocityField oracle_field(const ToyDataset& ds, int label) {
  return [ds, label](const Tensor& x, double t) { return oracle_velocity(ds, x, t, label); };
}

VelocityField net_field(const VelocityNet& net, int label) {
  return [&net, label](const Tensor& x, double t) { return net.eval(x, t, t, label); };
}

namespace {

Tensor euler_flow(const VelocityField& field, const Tensor& x, double t, double s, int steps) {
  Tensor cur = x;
  const double h = (s - t) / steps;
  for (int i = 0; i < steps; ++i) {
    const double ti = t + (s - t) * i / steps;
    axpy(h, field(cur, ti), cur);
  }
  return cur;
}

double mean_row_distance(const Tensor& a, const Tensor& b) {
  const Tensor diff = a - b;
  const auto sq = row_squared_norms(diff);
  double acc = 0.0;
  for (double v : sq) acc += std::sqrt(v);
  return sq.empty() ? 0.0 : acc / static_cast<double>(sq.size());
}

}  // namespace

FlowResult reference_flow(const VelocityField& field, const Tensor& x, double t, double s,
                          int steps, double tolerance) {
  if (s < t) throw DomainError("reference flow requires s >= t");
  if (steps < 1) throw DomainError("reference flow needs at least one step");
  FlowResult res;
  if (s == t) {
    res.endpoint = x;
    return res;
  }
  res.endpoint = euler_flow(field, x, t, s, steps);
  if (steps >= 2) {
    const Tensor coarse = euler_flow(field, x, t, s, steps / 2);
    res.error_estimate = mean_row_distance(res.endpoint, coarse);
  }
  res.flagged = res.error_estimate > tolerance;
  return res;
}

Tensor rk4_flow(const VelocityField& field, const Tensor& x, double t, double s, int steps) {
  if (s < t) throw DomainError("rk4 flow requires s >= t");
  if (steps < 1) throw DomainError("rk4 flow needs at least one step");
  Tensor cur = x;
  const double h = (s - t) / steps;
  for (int i = 0; i < steps; ++i) {
    const double ti = t + (s - t) * i / steps;
    const Tensor k1 = field(cur, ti);
    Tensor tmp = cur;
    axpy(0.5 * h, k1, tmp);
    const Tensor k2 = field(tmp, ti + 0.5 * h);
    tmp = cur;
    axpy(0.5 * h, k2, tmp);
    const Tensor k3 = field(tmp, ti + 0.5 * h);
    tmp = cur;
    axpy(h, k3, tmp);
    const Tensor k4 = field(tmp, std::min(ti + h, s));
    for (std::size_t k = 0; k < cur.size(); ++k) {
      cur[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
  }
  return cur;
}

}  // namespace fmlab
