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

// Acceptance harness. Prints one PASS/FAIL line per criterion, followed by
// the measurements behind it. Threads default to the hardware count and can
// be bounded with FMLAB_JOBS. Artifacts go to the directory given as the
// first argument (default: ./acceptance_artifacts). --quick runs only the
// criteria that need no trained model (1, 2 and 9). The exit status is
// nonzero when the harness itself fails, or with --strict when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "fmlab/checkpoint.hpp"
#include "fmlab/data_oracle.hpp"
#include "fmlab/experiment.hpp"
#include "fmlab/metrics.hpp"
#include "fmlab/objectives.hpp"
#include "fmlab/samplers.hpp"
#include "fmlab/trainer.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace fmlab;
using fmlab::testing::random_net;
using fmlab::testing::rel_err;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  int id = 0;
  std::string name;
  bool pass = false;
  std::vector<std::string> details;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.raw(), b.raw(), a.size() * sizeof(double)) == 0;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

unsigned jobs() {
  if (const char* j = std::getenv("FMLAB_JOBS")) return std::max(1, std::atoi(j));
  return default_jobs();
}

constexpr std::uint64_t kReferenceSeed = 11;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

// Mean Frechet distance over kSeeds. Each seed draws reference.rows()
// samples in chunks of kChunk rows, chunk c using sampler seed 1000 seed + c.
constexpr std::size_t kChunk = 100000;

double mean_frechet(const VelocityNet& net, SamplerKind kind, int nfe, const Tensor& reference,
                    std::vector<double>* per_seed = nullptr) {
  const std::size_t chunks = std::max<std::size_t>(1, reference.rows() / kChunk);
  const std::size_t rows = reference.rows() / chunks;
  std::vector<Tensor> parts(kSeeds.size() * chunks);
  parallel_for(parts.size(), jobs(), [&](std::size_t i) {
    SamplerSpec spec;
    spec.kind = kind;
    spec.nfe = nfe;
    spec.seed = 1000 * kSeeds[i / chunks] + i % chunks;
    parts[i] = run_sampler(net, spec, std::vector<int>(rows, kNullClass)).samples;
  });
  std::vector<double> v;
  for (std::size_t si = 0; si < kSeeds.size(); ++si) {
    Tensor all({rows * chunks, reference.cols()});
    for (std::size_t c = 0; c < chunks; ++c) {
      const Tensor& part = parts[si * chunks + c];
      std::copy(part.raw(), part.raw() + part.size(), all.raw() + c * part.size());
    }
    v.push_back(frechet_gaussian(all, reference).value);
  }
  if (per_seed) *per_seed = v;
  double m = 0.0;
  for (double x : v) m += x;
  return m / static_cast<double>(v.size());
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.3g", x);
  return s;
}

// ---------------------------------------------------------------------------

Verdict differentiation() {
  Verdict v{1, "reverse-mode gradients and JVP tangents match finite differences"};
  const auto t0 = Clock::now();
  double worst_grad = 0.0, worst_jvp = 0.0;
  std::size_t n_grad = 0, n_jvp = 0;
  for (int n = 0; n < 100; ++n) {
    NetArch arch;
    arch.width = 8 + 8 * static_cast<std::size_t>(n % 4);
    arch.depth = 1 + static_cast<std::size_t>(n % 3);
    arch.n_freq = 2 + static_cast<std::size_t>(n % 5);
    arch.class_dim = 3;
    arch.n_classes = n % 2 ? 3 : 0;
    const VelocityNet net = random_net(arch, 1000 + n);
    Rng rng(2000 + n);
    const std::size_t rows = 3;
    const Tensor x = rng.normal_tensor(rows, 2);
    Conditioning cond;
    for (std::size_t r = 0; r < rows; ++r) {
      const double a = rng.uniform(), b = rng.uniform();
      cond.t.push_back(std::min(a, b));
      cond.s.push_back(std::max(a, b));
      cond.labels.push_back(arch.n_classes ? static_cast<int>(r) - 1 : kNullClass);
    }

    // Parameter gradients of w . F against Richardson-extrapolated central
    // differences.
    const Tensor w = rng.normal_tensor(rows, 2);
    const TapedForward tf = net.forward_taped(x, cond);
    const std::vector<Tensor> grads = net.param_gradients(tf.tape, w);
    std::vector<Tensor> p = net.params();
    const auto central_p = [&](std::size_t i, std::size_t k, double h) {
      const double keep = p[i][k];
      p[i][k] = keep + h;
      const double up = dot(w, net.with_params(p).eval(x, cond));
      p[i][k] = keep - h;
      const double down = dot(w, net.with_params(p).eval(x, cond));
      p[i][k] = keep;
      return (up - down) / (2 * h);
    };
    // Entries far below the largest one are compared on the largest one's
    // scale, where double-precision differencing still resolves them.
    double scale = 1.0;
    for (const auto& g : grads)
      for (std::size_t k = 0; k < g.size(); ++k) scale = std::max(scale, std::abs(g[k]));
    for (std::size_t i = 0; i < grads.size(); ++i) {
      for (std::size_t k = 0; k < grads[i].size(); ++k) {
        const double fd = (4.0 * central_p(i, k, 1e-3) - central_p(i, k, 2e-3)) / 3.0;
        worst_grad = std::max(worst_grad, rel_err(grads[i][k], fd, 1e-6 * scale));
        ++n_grad;
      }
    }

    // Tangent along (dx, dt, ds) against Richardson-extrapolated central
    // differences.
    const Tensor dx = rng.normal_tensor(rows, 2);
    std::vector<double> dt(rows), ds(rows);
    for (std::size_t r = 0; r < rows; ++r) dt[r] = rng.normal(), ds[r] = rng.normal();
    // Keep the perturbed times inside [0, 1].
    for (std::size_t r = 0; r < rows; ++r) {
      const double margin = 2e-3 * std::max(std::abs(dt[r]), std::abs(ds[r]));
      cond.t[r] = std::clamp(cond.t[r], margin, 1.0 - margin);
      cond.s[r] = std::clamp(cond.s[r], margin, 1.0 - margin);
    }
    const DualValue jv = net.jvp(x, cond, dx, dt, ds);
    auto central = [&](double eps) {
      Tensor xp = x, xm = x;
      axpy(eps, dx, xp);
      axpy(-eps, dx, xm);
      Conditioning cp = cond, cm = cond;
      for (std::size_t r = 0; r < rows; ++r) {
        cp.t[r] += eps * dt[r], cp.s[r] += eps * ds[r];
        cm.t[r] -= eps * dt[r], cm.s[r] -= eps * ds[r];
      }
      return (0.5 / eps) * (net.eval(xp, cp) - net.eval(xm, cm));
    };
    const Tensor d1 = central(2.5e-4), d2 = central(5e-4), d4 = central(1e-3);
    const Tensor fd = (64.0 / 45.0) * d1 - (20.0 / 45.0) * d2 + (1.0 / 45.0) * d4;
    for (std::size_t k = 0; k < fd.size(); ++k) {
      worst_jvp = std::max(worst_jvp, rel_err(jv.tangent[k], fd[k], 1e-3));
      ++n_jvp;
    }
  }
  const double secs = seconds_since(t0);
  v.pass = worst_grad < 1e-5 && worst_jvp < 1e-6 && secs < 120.0;
  v.details.push_back(fmt("100 networks, %zu gradient entries: max rel err %.3g (limit 1e-5)",
                          n_grad, worst_grad));
  v.details.push_back(
      fmt("%zu tangent entries: max rel err %.3g (limit 1e-6)", n_jvp, worst_jvp));
  v.details.push_back(fmt("runtime %.1f s (limit 120 s)", secs));
  return v;
}

Verdict boundary_identity() {
  Verdict v{2, "flow_map(net, x, t, t) == x bit-exactly"};
  std::size_t checked = 0, mismatched = 0;
  for (int b = 0; b < 100; ++b) {
    NetArch arch = fmlab::testing::small_arch(b % 2 ? 2 : 0);
    const VelocityNet net = random_net(arch, 500 + b, 1.0);
    Rng rng(600 + b);
    const Tensor x = (1.0 + 10.0 * rng.uniform()) * rng.normal_tensor(100, 2);
    Conditioning cond;
    for (int r = 0; r < 100; ++r) {
      const double t = r == 0 ? 0.0 : r == 1 ? 1.0 : rng.uniform();
      cond.t.push_back(t);
      cond.s.push_back(t);
      cond.labels.push_back(arch.n_classes ? r % 3 - 1 : kNullClass);
    }
    const Tensor y = flow_map(net, x, cond);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      ++checked;
      if (std::memcmp(y.raw() + 2 * r, x.raw() + 2 * r, 2 * sizeof(double)) != 0) ++mismatched;
    }
  }
  v.pass = mismatched == 0 && checked == 10000;
  v.details.push_back(fmt("%zu (x, t) pairs, %zu differ", checked, mismatched));
  return v;
}

Verdict determinism(const fs::path& dir) {
  Verdict v{9, "identical config and seed give bit-identical logs and Euler clouds"};
  bool ok = true;
  std::optional<VelocityNet> teacher;
  for (const char* mode : {"teacher", "student"}) {
    TrainConfig c = std::string(mode) == "teacher"
                        ? teacher_config()
                        : student_config("two-gaussians", LossFlags::parse("fm,cd,n2n"));
    c.total_steps = 300;
    c.seed = 42;
    std::vector<std::string> logs;
    std::vector<Tensor> clouds;
    std::vector<std::string> digests;
    for (int run = 0; run < 2; ++run) {
      RunOptions o;
      o.log_path = (dir / fmt("determinism_%s_%d.csv", mode, run)).string();
      const RunResult res = run_training(c, teacher, o);
      const VelocityNet ema(res.state.net.arch(), res.state.ema.shadow);
      SamplerSpec spec;
      spec.kind = SamplerKind::kEuler;
      spec.nfe = 20;
      spec.seed = 7;
      clouds.push_back(run_sampler(ema, spec, std::vector<int>(4000, kNullClass)).samples);
      logs.push_back(read_file(o.log_path));
      digests.push_back(checkpoint_digest(make_checkpoint(res.state)));
      if (!teacher) teacher = ema;
    }
    const bool same = logs[0] == logs[1] && bit_equal(clouds[0], clouds[1]) &&
                      digests[0] == digests[1] && !logs[0].empty();
    ok = ok && same;
    v.details.push_back(fmt("%s: 300-step log %zu bytes, Euler cloud 4000x2, checkpoint %s: %s",
                            mode, logs[0].size(), digests[0].c_str(),
                            same ? "identical" : "DIFFERENT"));
  }
  v.pass = ok;
  return v;
}

// Shared trained models for criteria 3 to 8.
struct Models {
  std::optional<VelocityNet> teacher;
  std::optional<VelocityNet> student;
  ToyDataset data = make_two_gaussians();
  Tensor reference;
  double teacher_fd = 0.0;
};

Verdict teacher_fidelity(Models& m, const fs::path& dir) {
  Verdict v{3, "teacher velocity RMSE < 0.1 and 50-NFE Euler Frechet < 0.05"};
  const TrainConfig c = teacher_config();
  RunOptions o;
  o.log_path = (dir / "teacher_metrics.csv").string();
  o.checkpoint_path = (dir / "teacher.ckpt").string();
  const auto t0 = Clock::now();
  const RunResult res = run_training(c, std::nullopt, o);
  m.teacher.emplace(res.state.net.arch(), res.state.ema.shadow);
  const double train_secs = seconds_since(t0);
  const double rmse = oracle_rmse(*m.teacher, m.data, 100, 100);
  const Tensor reference = reference_cloud(m.data, 100000, kReferenceSeed);
  std::vector<double> fd;
  m.teacher_fd = mean_frechet(*m.teacher, SamplerKind::kEuler, 50, reference, &fd);
  // Student comparisons sit close to the metric's sampling noise, so they
  // use ten times more samples.
  m.reference = reference_cloud(m.data, 1000000, kReferenceSeed);
  v.pass = rmse < 0.1 && *std::max_element(fd.begin(), fd.end()) < 0.05;
  v.details.push_back(fmt("%llu FM steps in %.0f s; EMA velocity RMSE over 100 t x 100 points: %.4f",
                          static_cast<unsigned long long>(c.total_steps), train_secs, rmse));
  v.details.push_back(
      fmt("50-NFE Euler Frechet at 1e5 samples, seeds 1..3: %s (mean %.3g)", list(fd).c_str(),
          m.teacher_fd));
  return v;
}

Verdict distillation(Models& m, const fs::path& dir) {
  Verdict v{4, "1-NFE student <= 2x teacher 50-NFE Euler, and 2 NFE <= 1 NFE"};
  const TrainConfig c = student_config("two-gaussians", LossFlags::parse("fm,cd,n2n"));
  RunOptions o;
  o.log_path = (dir / "student_metrics.csv").string();
  o.checkpoint_path = (dir / "student.ckpt").string();
  const auto t0 = Clock::now();
  const RunResult res = run_training(c, m.teacher, o);
  m.student.emplace(res.state.net.arch(), res.state.ema.shadow);
  const double train_secs = seconds_since(t0);
  std::vector<double> one, two;
  const double fd1 = mean_frechet(*m.student, SamplerKind::kCm, 1, m.reference, &one);
  const double fd2 = mean_frechet(*m.student, SamplerKind::kCm, 2, m.reference, &two);
  v.pass = fd1 <= 2.0 * m.teacher_fd && fd2 <= fd1;
  v.details.push_back(fmt("{fm,cd,n2n} student, %llu steps in %.0f s",
                          static_cast<unsigned long long>(c.total_steps), train_secs));
  v.details.push_back(fmt("1 NFE at 1e6 samples: %s (mean %.3g) vs 2x teacher %.3g", list(one).c_str(), fd1,
                          2.0 * m.teacher_fd));
  v.details.push_back(fmt("2 NFE: %s (mean %.3g)", list(two).c_str(), fd2));
  return v;
}

Verdict sampler_ordering(Models& m) {
  Verdict v{6, "NFE 4: mix <= cm <= euler, euler >= 5x mix"};
  std::vector<double> mix, cm, euler;
  const double a = mean_frechet(*m.student, SamplerKind::kMix, 4, m.reference, &mix);
  const double b = mean_frechet(*m.student, SamplerKind::kCm, 4, m.reference, &cm);
  const double c = mean_frechet(*m.student, SamplerKind::kEuler, 4, m.reference, &euler);
  v.pass = a <= b && b <= c && c >= 5.0 * a;
  SamplerSpec spec;
  spec.kind = SamplerKind::kMix;
  spec.nfe = 4;
  v.details.push_back(fmt("1e6 samples per seed; mix (k = %d): %s (mean %.3g)", resolve(spec).mix_k, list(mix).c_str(), a));
  v.details.push_back(fmt("cm: %s (mean %.3g)", list(cm).c_str(), b));
  v.details.push_back(fmt("euler: %s (mean %.3g), %.0fx mix", list(euler).c_str(), c, c / a));
  return v;
}

Verdict ablation(const fs::path& dir) {
  Verdict v{5, "checkerboard ablation orderings with 20% margin"};
  TrainConfig tc = teacher_config("checkerboard");
  const auto t0 = Clock::now();
  const RunResult tres = run_training(tc, std::nullopt);
  const VelocityNet teacher(tres.state.net.arch(), tres.state.ema.shadow);
  save_checkpoint((dir / "checkerboard_teacher.ckpt").string(), make_checkpoint(tres.state));
  v.details.push_back(fmt("checkerboard teacher: %.0f s", seconds_since(t0)));

  const ToyDataset ds = make_checkerboard();
  const Tensor reference = reference_cloud(ds, 20000, kReferenceSeed);
  const std::vector<std::string> rows{"fm,cd,n2n", "fm,cd", "fm", "fm,n2n", "cd"};
  struct Cell {
    double one = 0.0, two = 0.0, fifty = 0.0;
  };
  std::vector<Cell> cells(rows.size() * kSeeds.size());
  const auto t1 = Clock::now();
  parallel_for(cells.size(), jobs(), [&](std::size_t i) {
    TrainConfig c = student_config("checkerboard", LossFlags::parse(rows[i / kSeeds.size()]));
    c.total_steps = 5000;
    c.seed = kSeeds[i % kSeeds.size()];
    const RunResult res = run_training(c, teacher);
    const VelocityNet ema(res.state.net.arch(), res.state.ema.shadow);
    const std::vector<int> labels(reference.rows(), kNullClass);
    SamplerSpec spec;
    spec.seed = c.seed;
    spec.kind = SamplerKind::kCm;
    spec.nfe = 1;
    cells[i].one = frechet_gaussian(run_sampler(ema, spec, labels).samples, reference).value;
    spec.nfe = 2;
    cells[i].two = frechet_gaussian(run_sampler(ema, spec, labels).samples, reference).value;
    spec.kind = SamplerKind::kEuler;
    spec.nfe = 50;
    cells[i].fifty = frechet_gaussian(run_sampler(ema, spec, labels).samples, reference).value;
  });
  v.details.push_back(fmt("15 students, 5000 steps each: %.0f s", seconds_since(t1)));
  std::ofstream table(dir / "ablation_checkerboard.csv");
  table << "losses,seed,frechet_1nfe_cm,frechet_2nfe_cm,frechet_50nfe_euler\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    table << '"' << rows[i / kSeeds.size()] << "\"," << kSeeds[i % kSeeds.size()] << ','
          << cells[i].one << ',' << cells[i].two << ',' << cells[i].fifty << '\n';
  }

  const auto at = [&](std::size_t row, std::size_t seed) { return cells[row * kSeeds.size() + seed]; };
  // a <= 0.8 b on every seed.
  bool ok = true;
  const auto check = [&](const std::string& what, auto a, auto b) {
    std::vector<double> ratio;
    bool all = true;
    for (std::size_t s = 0; s < kSeeds.size(); ++s) {
      ratio.push_back(a(s) / b(s));
      all = all && a(s) <= 0.8 * b(s);
    }
    ok = ok && all;
    v.details.push_back(fmt("%s: ratio per seed %s (need <= 0.8) %s", what.c_str(),
                            list(ratio).c_str(), all ? "ok" : "violated"));
  };
  check("1 NFE {fm,cd,n2n} / {fm,cd}", [&](std::size_t s) { return at(0, s).one; },
        [&](std::size_t s) { return at(1, s).one; });
  check("1 NFE {fm,cd} / {fm}", [&](std::size_t s) { return at(1, s).one; },
        [&](std::size_t s) { return at(2, s).one; });
  check("1 NFE {fm,cd} / {fm,n2n}", [&](std::size_t s) { return at(1, s).one; },
        [&](std::size_t s) { return at(3, s).one; });
  check("50 NFE {fm,cd,n2n} / {cd}", [&](std::size_t s) { return at(0, s).fifty; },
        [&](std::size_t s) { return at(4, s).fifty; });
  v.pass = ok;
  std::vector<double> two_over_one;
  for (std::size_t s = 0; s < kSeeds.size(); ++s) two_over_one.push_back(at(0, s).two / at(0, s).one);
  v.details.push_back(fmt("not scored: {fm,cd,n2n} 2 NFE / 1 NFE per seed %s",
                          list(two_over_one).c_str()));
  return v;
}

Verdict stability(Models& m) {
  Verdict v{7, "without the FM loss the running-max gradient norm is >= 2x higher or diverges"};
  const std::vector<std::string> arms{"fm,cd,n2n", "cd,n2n"};
  std::vector<GradNormSummary> sums(arms.size() * kSeeds.size());
  parallel_for(sums.size(), jobs(), [&](std::size_t i) {
    TrainConfig c = student_config("two-gaussians", LossFlags::parse(arms[i / kSeeds.size()]));
    c.total_steps = 5000;
    c.seed = kSeeds[i % kSeeds.size()];
    const RunResult res = run_training(c, m.teacher);
    std::vector<double> norms;
    for (const auto& r : res.log) norms.push_back(r.grad_norm);
    sums[i] = grad_norm_series(norms);
  });
  bool ok = true;
  for (std::size_t s = 0; s < kSeeds.size(); ++s) {
    const GradNormSummary& with = sums[s];
    const GradNormSummary& without = sums[kSeeds.size() + s];
    const bool seed_ok = without.diverged || without.max >= 2.0 * with.max;
    ok = ok && seed_ok;
    v.details.push_back(fmt("seed %llu: max grad norm with FM %.3g%s, without %.3g%s: %s",
                            static_cast<unsigned long long>(kSeeds[s]), with.max,
                            with.diverged ? " (diverged)" : "", without.max,
                            without.diverged ? " (diverged)" : "", seed_ok ? "ok" : "violated"));
  }
  v.pass = ok;
  return v;
}

Verdict cm_fixed_point(Models& m) {
  Verdict v{8, "oracle mean velocity drives the consistency residual below 5e-3"};
  const VelocityField field = net_field(*m.teacher);
  const int steps = 512;
  // Mean velocity of the teacher flow over [t, 1], by RK4.
  const auto mean_velocity = [&](const Tensor& x, double t) {
    return (1.0 / (1.0 - t)) * (rk4_flow(field, x, t, 1.0, steps) - x);
  };
  Rng rng(77);
  double total = 0.0, total_student = 0.0;
  std::size_t count = 0;
  const double h = 1e-3;
  for (int i = 0; i < 8; ++i) {
    const double t = i / 8.0;
    const std::size_t n = 64;
    const Tensor x1 = sample_data(m.data, n, rng).points;
    const Tensor z = rng.normal_tensor(n, 2);
    const Tensor xt = (1.0 - t) * z + t * x1;
    const std::vector<double> tv(n, t);
    // Total derivative along the teacher trajectory, one-sided second order.
    const Tensor x_h = rk4_flow(field, xt, t, t + h, 16);
    const Tensor x_2h = rk4_flow(field, xt, t, t + 2 * h, 32);
    const Tensor f0 = mean_velocity(xt, t);
    const Tensor df = (1.0 / (2 * h)) * (4.0 * mean_velocity(x_h, t + h) - 3.0 * f0 -
                                         mean_velocity(x_2h, t + 2 * h));
    const Tensor vel = m.teacher->eval(xt, t, t);
    for (double r : row_squared_norms(cm_residual(f0, vel, df, tv))) total += std::sqrt(r);
    // The trained student in the same slot, for scale.
    const DualValue jv = m.student->jvp(xt, Conditioning::uniform(n, t, 1.0), vel,
                                        std::vector<double>(n, 1.0), std::vector<double>(n, 0.0));
    for (double r : row_squared_norms(cm_residual(jv.primal, vel, jv.tangent, tv)))
      total_student += std::sqrt(r);
    count += n;
  }
  const double mean = total / static_cast<double>(count);
  v.pass = mean < 5e-3;
  v.details.push_back(fmt("oracle mean velocity: mean |g_cm| %.3g over %zu points at t = 0..7/8",
                          mean, count));
  v.details.push_back(fmt("distilled student for comparison: mean |g_cm| %.3g",
                          total_student / static_cast<double>(count)));
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path dir = "acceptance_artifacts";
  bool quick = false, strict = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--quick") == 0) {
      quick = true;
    } else if (std::strcmp(argv[i], "--strict") == 0) {
      strict = true;
    } else {
      dir = argv[i];
    }
  }
  fs::create_directories(dir);
  std::printf("threads: %u\n", jobs());
  std::fflush(stdout);

  std::vector<Verdict> verdicts;
  auto report = [&](Verdict v) {
    std::printf("criterion %d: %s  %s\n", v.id, v.pass ? "PASS" : "FAIL", v.name.c_str());
    for (const auto& d : v.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    verdicts.push_back(std::move(v));
  };

  report(differentiation());
  report(boundary_identity());
  report(determinism(dir));
  const auto finish = [&] {
    std::sort(verdicts.begin(), verdicts.end(),
              [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
    std::printf("\nsummary\n");
    std::ofstream out(dir / "report.txt");
    int failed = 0;
    for (const auto& v : verdicts) {
      std::printf("criterion %d: %s\n", v.id, v.pass ? "PASS" : "FAIL");
      out << "criterion " << v.id << ": " << (v.pass ? "PASS  " : "FAIL  ") << v.name << '\n';
      for (const auto& d : v.details) out << "    " << d << '\n';
      failed += !v.pass;
    }
    return strict && failed > 0 ? 1 : 0;
  };
  if (quick) return finish();

  Models models;
  const auto t0 = Clock::now();
  report(teacher_fidelity(models, dir));
  report(distillation(models, dir));
  report(sampler_ordering(models));
  report(ablation(dir));
  const double budget_secs = seconds_since(t0);
  report(stability(models));
  report(cm_fixed_point(models));
  {
    Verdict v{10, "criteria 3 to 6 finish within 2 hours"};
    v.pass = budget_secs < 7200.0;
    v.details.push_back(fmt("%.0f s on %u threads (limit 7200 s)", budget_secs, jobs()));
    report(std::move(v));
  }

  return finish();
}
