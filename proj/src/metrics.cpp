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

#include "fmlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "fmlab/errors.hpp"

namespace fmlab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> as_matrix(
    const Tensor& t) {
  return {t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

void fit_moments(const Tensor& x, VectorXd& mean, MatrixXd& cov) {
  const auto m = as_matrix(x);
  mean = m.colwise().mean().transpose();
  const MatrixXd centred = m.rowwise() - mean.transpose();
  cov = centred.transpose() * centred / static_cast<double>(x.rows() - 1);
}

// Symmetric PSD square root; negative round-off eigenvalues are clipped.
MatrixXd psd_sqrt(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

bool ensure_nonsingular(MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  const double smallest = es.eigenvalues().minCoeff();
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (smallest > 1e-12 * scale) return false;
  cov += 1e-8 * MatrixXd::Identity(cov.rows(), cov.cols());
  return true;
}

void check_clouds(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": clouds " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " are not comparable");
  }
  if (a.rows() == 0 || b.rows() == 0) throw DomainError(std::string(what) + ": empty cloud");
}

double mean_pairwise(const Tensor& a, const Tensor& b) {
  const std::size_t d = a.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* x = a.raw() + i * d;
    double row = 0.0;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* y = b.raw() + j * d;
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) sq += (x[k] - y[k]) * (x[k] - y[k]);
      row += std::sqrt(sq);
    }
    total += row;
  }
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

FrechetResult frechet_gaussian(const Tensor& a, const Tensor& b) {
  check_clouds(a, b, "frechet_gaussian");
  if (a.rows() < a.cols() + 1 || b.rows() < b.cols() + 1) {
    throw DomainError("frechet_gaussian needs at least dim + 1 samples per cloud");
  }
  VectorXd ma, mb;
  MatrixXd sa, sb;
  fit_moments(a, ma, sa);
  fit_moments(b, mb, sb);
  FrechetResult res;
  res.ridge_applied = ensure_nonsingular(sa);
  res.ridge_applied = ensure_nonsingular(sb) || res.ridge_applied;
  // tr((S_a^1/2 S_b S_a^1/2)^1/2) is symmetric in a and b; average both
  // orders so the result is too, to round-off.
  const MatrixXd ra = psd_sqrt(sa), rb = psd_sqrt(sb);
  const double cross = 0.5 * (psd_sqrt(ra * sb * ra).trace() + psd_sqrt(rb * sa * rb).trace());
  res.value = (ma - mb).squaredNorm() + sa.trace() + sb.trace() - 2.0 * cross;
  res.value = std::max(res.value, 0.0);
  return res;
}

double energy_distance(const Tensor& a, const Tensor& b) {
  check_clouds(a, b, "energy_distance");
  const double ab = 0.5 * (mean_pairwise(a, b) + mean_pairwise(b, a));
  const double v = 2.0 * ab - mean_pairwise(a, a) - mean_pairwise(b, b);
  return std::max(v, 0.0);
}

double wasserstein2_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("wasserstein2_1d: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  // Walk the merged quantile breakpoints k/n and l/m with exact integer
  // arithmetic on the common denominator n*m.
  const std::uint64_t n = x.size(), m = y.size();
  std::uint64_t i = 0, j = 0, pos = 0;
  double acc = 0.0;
  while (i < n && j < m) {
    const std::uint64_t next_a = (i + 1) * m, next_b = (j + 1) * n;
    const std::uint64_t next = std::min(next_a, next_b);
    const double diff = x[i] - y[j];
    acc += diff * diff * static_cast<double>(next - pos);
    pos = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return std::sqrt(acc / (static_cast<double>(n) * static_cast<double>(m)));
}

double sliced_w2(const Tensor& a, const Tensor& b, int n_projections, Rng& rng) {
  check_clouds(a, b, "sliced_w2");
  if (n_projections < 1) throw DomainError("sliced_w2 needs at least one projection");
  const std::size_t d = a.cols();
  std::vector<double> dir(d), pa(a.rows()), pb(b.rows());
  double total = 0.0;
  for (int p = 0; p < n_projections; ++p) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : dir) {
        v = rng.normal();
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : dir) v /= norm;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += a.raw()[i * d + k] * dir[k];
      pa[i] = s;
    }
    for (std::size_t i = 0; i < b.rows(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += b.raw()[i * d + k] * dir[k];
      pb[i] = s;
    }
    total += wasserstein2_1d(pa, pb);
  }
  return total / n_projections;
}

GradNormSummary grad_norm_series(std::span<const double> norms, std::size_t window,
                                 double factor) {
  GradNormSummary out;
  std::vector<double> history;
  std::vector<double> scratch;
  bool any = false;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    const double v = norms[i];
    if (!std::isfinite(v)) continue;
    if (!any || v > out.max) out.max = v;
    out.final = v;
    any = true;
    if (history.size() >= 10) {
      const std::size_t from = history.size() > window ? history.size() - window : 0;
      scratch.assign(history.begin() + static_cast<std::ptrdiff_t>(from), history.end());
      auto mid = scratch.begin() + static_cast<std::ptrdiff_t>(scratch.size() / 2);
      std::nth_element(scratch.begin(), mid, scratch.end());
      double median = *mid;
      if (scratch.size() % 2 == 0) {
        median = 0.5 * (median + *std::max_element(scratch.begin(), mid));
      }
      if (v > factor * median && !out.diverged) {
        out.diverged = true;
        out.first_divergence = static_cast<long>(i);
      }
    }
    history.push_back(v);
  }
  return out;
}

MetricReport compare_clouds(const Tensor& samples, const Tensor& reference, std::uint64_t seed,
                            const MetricOptions& opts) {
  MetricReport r;
  const FrechetResult fg = frechet_gaussian(samples, reference);
  r.frechet_gaussian = fg.value;
  r.ridge_applied = fg.ridge_applied;
  const std::size_t na = std::min(samples.rows(), opts.energy_max_points);
  const std::size_t nb = std::min(reference.rows(), opts.energy_max_points);
  r.energy_distance = energy_distance(slice_rows(samples, 0, na), slice_rows(reference, 0, nb));
  Rng rng(seed, 0x5e1);
  r.sliced_w2 = sliced_w2(samples, reference, opts.n_projections, rng);
  r.n_samples = samples.rows();
  r.seed = seed;
  return r;
}

void append_report_csv(const std::string& path, const std::string& label,
                       const MetricReport& report) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot open " + path + " for appending");
  if (fresh) out << "label,frechet_gaussian,energy_distance,sliced_w2,n_samples,seed\n";
  out << std::setprecision(10) << label << ',' << report.frechet_gaussian << ','
      << report.energy_distance << ',' << report.sliced_w2 << ',' << report.n_samples << ','
      << report.seed << '\n';
}

}  // namespace fmlab
