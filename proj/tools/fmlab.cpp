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

// fmlab: train a toy teacher, distill a flow map student, sample, evaluate
// and run ablation grids. Exit status is 0 on success, 1 on runtime errors
// (including checkpoint digest mismatches), 2 on usage errors and 3 when a
// training run aborts after repeated numeric faults.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "fmlab/checkpoint.hpp"
#include "fmlab/config.hpp"
#include "fmlab/data_oracle.hpp"
#include "fmlab/errors.hpp"
#include "fmlab/experiment.hpp"
#include "fmlab/metrics.hpp"
#include "fmlab/samplers.hpp"
#include "fmlab/trainer.hpp"
#include "plot.hpp"

namespace fs = std::filesystem;
using namespace fmlab;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitAborted = 3;
constexpr std::uint64_t kAblationStepCap = 10000;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string g_command_line;

// ---------------------------------------------------------------------------
// Config assembly and run metadata.

struct ConfigSource {
  std::string path;
  std::vector<std::string> sets;
};

std::vector<ConfigEntry> set_entries(const std::vector<std::string>& sets) {
  std::string text;
  for (const auto& s : sets) {
    if (s.find('=') == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    text += s + '\n';
  }
  return parse_key_values(text, "--set");
}

void apply_source(TrainConfig& config, const ConfigSource& src) {
  if (!src.path.empty()) config.apply(read_key_values(src.path), src.path);
  if (!src.sets.empty()) config.apply(set_entries(src.sets), "--set");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out || !(out << text)) throw Error("cannot write " + path.string());
}

// run.txt: everything needed to reproduce the directory besides config.txt.
void write_run_metadata(const fs::path& dir, const TrainConfig& config,
                        const std::map<std::string, std::string>& extra) {
  std::ostringstream os;
  os << "tool_version = " << FMLAB_VERSION << '\n'
     << "command = " << g_command_line << '\n'
     << "seed = " << config.seed << '\n'
     << "config_digest = " << hex64(config.digest()) << '\n';
  for (const auto& [k, v] : extra) os << k << " = " << v << '\n';
  write_text(dir / "run.txt", os.str());
}

Checkpoint load_verified(const std::string& path, const std::string& expected_digest) {
  if (!fs::exists(path)) throw Error("checkpoint not found: " + path);
  Checkpoint ck = load_checkpoint(path);
  if (!expected_digest.empty()) {
    const std::string got = checkpoint_digest(ck);
    if (got != expected_digest) {
      throw Error("checkpoint digest mismatch for " + path + ": expected " + expected_digest +
                  ", file has " + got);
    }
  }
  return ck;
}

SamplerSpec spec_of(SamplerKind kind, int nfe, std::uint64_t seed) {
  SamplerSpec s;
  s.kind = kind;
  s.nfe = nfe;
  s.seed = seed;
  return s;
}

double cloud_extent(const Tensor& pts) {
  double m = 0.0;
  for (std::size_t i = 0; i < pts.rows(); ++i)
    for (std::size_t j = 0; j < pts.cols(); ++j)
      if (std::isfinite(pts.at(i, j))) m = std::max(m, std::abs(pts.at(i, j)));
  return std::max(1.0, 1.1 * m);
}

std::vector<double> grad_norms(const std::vector<StepReport>& log) {
  std::vector<double> out;
  out.reserve(log.size());
  for (const auto& r : log) out.push_back(r.grad_norm);
  return out;
}

// Figures for a finished training run: the gradient norm curve and sample
// clouds next to the data.
void training_figures(const fs::path& dir, const TrainState& state,
                      const std::vector<StepReport>& log) {
  fs::create_directories(dir / "figures");
  if (!log.empty()) {
    plot::line_png((dir / "figures" / "grad_norm.png").string(),
                   {{grad_norms(log), plot::palette(0)}}, true);
  }
  const VelocityNet ema(state.net.arch(), state.ema.shadow);
  const Tensor data = reference_cloud(state.dataset, 2000, 11);
  std::vector<plot::ScatterPanel> panels{{data, {}}};
  std::vector<SamplerSpec> specs;
  if (state.config.mode == TrainMode::kFromScratch) {
    specs.push_back(spec_of(SamplerKind::kEuler, 50, 1));
  } else {
    for (int nfe : {1, 2, 4}) specs.push_back(spec_of(SamplerKind::kCm, nfe, 1));
  }
  for (const auto& spec : specs) {
    panels.push_back({run_sampler(ema, spec, std::vector<int>(2000, kNullClass)).samples, {}});
  }
  plot::scatter_png((dir / "figures" / "samples.png").string(), panels, cloud_extent(data));
}

// ---------------------------------------------------------------------------
// train-teacher and distill.

struct TrainArgs {
  ConfigSource source;
  std::string out;
  std::string resume;
  std::string teacher;
  std::string teacher_digest;
  bool quiet = false;
};

int run_train_command(const TrainArgs& args, bool distill) {
  TrainConfig config = distill ? student_config("two-gaussians", LossFlags{}) : teacher_config();
  std::optional<VelocityNet> teacher;
  std::map<std::string, std::string> meta;
  if (distill) {
    const Checkpoint tck = load_verified(args.teacher, args.teacher_digest);
    // The student shares the teacher architecture unless the config says
    // otherwise, in which case the trainer reports the mismatch.
    config.width = tck.arch.width;
    config.depth = tck.arch.depth;
    config.n_freq = tck.arch.n_freq;
    config.class_dim = tck.arch.class_dim;
    config.conditional = tck.arch.n_classes > 0;
    teacher = tck.ema_net();
    meta["teacher"] = args.teacher;
    meta["teacher_digest"] = checkpoint_digest(tck);
  }
  apply_source(config, args.source);
  if (distill != (config.mode == TrainMode::kDistill)) {
    throw UsageError(std::string("mode = ") + to_string(config.mode) + " does not match the " +
                     (distill ? "distill" : "train-teacher") + " command");
  }

  const fs::path dir(args.out);
  fs::create_directories(dir);
  write_text(dir / "config.txt", config.to_text());

  TrainState state = [&] {
    if (args.resume.empty()) return make_train_state(config, teacher);
    const Checkpoint ck = load_verified(args.resume, "");
    meta["resumed_from"] = args.resume;
    meta["resumed_step"] = std::to_string(ck.step);
    return resume_train_state(config, ck, teacher);
  }();

  RunOptions options;
  options.log_path =
      (dir / (args.resume.empty() ? std::string("metrics.csv")
                                  : "metrics_from_" + std::to_string(state.iters) + ".csv"))
          .string();
  options.checkpoint_path = (dir / "model.ckpt").string();
  const auto t0 = std::chrono::steady_clock::now();
  if (!args.quiet) {
    options.on_step = [&](const StepReport& r) {
      if (r.step % 1000 != 0 && r.step + 1 != config.total_steps) return;
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::fprintf(stderr, "step %llu  fm %.4g  cm %.4g  n2n %.4g  grad %.3g  [%.0fs]\n",
                   static_cast<unsigned long long>(r.step), r.loss_fm, r.loss_cm, r.loss_n2n,
                   r.grad_norm, secs);
    };
  }
  const RunResult result = run_training(std::move(state), options);

  const Checkpoint ck = make_checkpoint(result.state);
  meta["checkpoint_digest"] = checkpoint_digest(ck);
  meta["final_step"] = std::to_string(result.state.iters);
  meta["updates"] = std::to_string(result.state.updates);
  meta["faults"] = std::to_string(result.state.total_faults);
  const VelocityNet ema(result.state.net.arch(), result.state.ema.shadow);
  if (!distill) {
    const double rmse = oracle_rmse(ema, result.state.dataset);
    std::ostringstream r;
    r << rmse;
    meta["oracle_rmse"] = r.str();
  }
  write_run_metadata(dir, result.state.config, meta);
  training_figures(dir, result.state, result.log);
  std::printf("wrote %s (checkpoint %s)\n", (dir / "model.ckpt").string().c_str(),
              meta["checkpoint_digest"].c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// sample, eval, data.

struct SampleArgs {
  std::string ckpt, digest, sampler = "cm", out, figure;
  int nfe = 1, segments = 8, label = kNullClass;
  std::optional<int> k;
  bool instantaneous = false, online = false;
  std::size_t n = 10000;
  std::uint64_t seed = 0;
};

int run_sample_command(const SampleArgs& a) {
  SamplerSpec spec;
  try {
    spec.kind = parse_sampler_kind(a.sampler);
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  }
  if (a.k && spec.kind != SamplerKind::kMix) throw UsageError("--k applies only to --sampler mix");
  if (a.instantaneous && spec.kind != SamplerKind::kMix) {
    throw UsageError("--instantaneous applies only to --sampler mix");
  }
  spec.nfe = a.nfe;
  spec.segments = a.segments;
  spec.mix_k = a.k.value_or(0);
  spec.mix_step = a.instantaneous ? MixStep::kInstantaneous : MixStep::kFlowMap;
  spec.seed = a.seed;
  try {
    (void)resolve(spec);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  const Checkpoint ck = load_verified(a.ckpt, a.digest);
  const VelocityNet net = a.online ? ck.online_net() : ck.ema_net();
  const SampleRun run = run_sampler(net, spec, std::vector<int>(a.n, a.label));
  write_samples_csv(a.out, run);
  write_sample_metadata(a.out + ".meta", run, checkpoint_digest(ck));
  if (!a.figure.empty()) {
    plot::scatter_png(a.figure, {{run.samples, run.labels}}, cloud_extent(run.samples));
  }
  std::printf("wrote %zu samples to %s\n", run.samples.rows(), a.out.c_str());
  return 0;
}

struct EvalArgs {
  std::string samples, data, dataset, report, label;
  std::size_t n = 20000;
  std::uint64_t seed = 11;
  int projections = 256;
};

int run_eval_command(const EvalArgs& a) {
  if (a.data.empty() == a.dataset.empty()) throw UsageError("give exactly one of --data or --dataset");
  const Tensor samples = read_samples_csv(a.samples);
  const Tensor reference =
      a.data.empty() ? reference_cloud(make_dataset(a.dataset), a.n, a.seed) : read_samples_csv(a.data);
  MetricOptions opts;
  opts.n_projections = a.projections;
  const MetricReport m = compare_clouds(samples, reference, a.seed, opts);
  const std::string label = a.label.empty() ? fs::path(a.samples).stem().string() : a.label;
  if (!a.report.empty()) append_report_csv(a.report, label, m);
  std::printf("%s frechet_gaussian %.6g energy_distance %.6g sliced_w2 %.6g n %zu%s\n",
              label.c_str(), m.frechet_gaussian, m.energy_distance, m.sliced_w2, m.n_samples,
              m.ridge_applied ? " (ridge)" : "");
  return 0;
}

int run_data_command(const std::string& dataset, std::size_t n, std::uint64_t seed,
                     const std::string& out) {
  Rng rng(seed);
  const DataBatch batch = sample_data(make_dataset(dataset), n, rng);
  SampleRun run;
  run.samples = batch.points;
  run.labels = batch.labels;
  write_samples_csv(out, run);
  std::printf("wrote %zu %s points to %s\n", n, dataset.c_str(), out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// ablate.

struct AblateArgs {
  ConfigSource source;
  std::string grid, teacher, student, out, seeds = "1,2,3";
  std::uint64_t steps = kAblationStepCap;
  std::size_t n = 20000;
  unsigned jobs = 0;
};

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("--seeds expects a comma separated list of integers, got '" + s + "'");
    }
  }
  if (out.empty()) throw UsageError("--seeds is empty");
  return out;
}

struct Setting {
  std::string name;
  std::vector<std::string> sets;
};

struct EvalPoint {
  SamplerKind kind;
  int nfe;
  int mix_k = 0;  // 0: sampler default
};

struct CellResult {
  std::string setting;
  std::uint64_t seed = 0;
  std::vector<std::pair<EvalPoint, MetricReport>> metrics;
  std::vector<double> grad_norms;
  GradNormSummary summary;
  std::vector<Tensor> clouds;
};

SamplerSpec spec_of(const EvalPoint& p, std::uint64_t seed = 0) {
  SamplerSpec s = spec_of(p.kind, p.nfe, seed);
  s.mix_k = p.mix_k;
  return s;
}

const char* kTableHeader =
    "grid,setting,seed,sampler,nfe,mix_k,frechet_gaussian,energy_distance,sliced_w2,max_grad_norm,"
    "diverged";

void write_table(const fs::path& path, const std::string& grid,
                 const std::vector<CellResult>& cells) {
  std::ofstream out(path);
  out << kTableHeader << '\n' << std::setprecision(8);
  for (const auto& c : cells) {
    for (const auto& [p, m] : c.metrics) {
      out << grid << ',' << c.setting << ',' << c.seed << ',' << to_string(p.kind) << ','
          << p.nfe << ',' << (p.kind == SamplerKind::kMix ? resolve(spec_of(p)).mix_k : 0) << ','
          << m.frechet_gaussian << ',' << m.energy_distance << ',' << m.sliced_w2
          << ',';
      if (c.grad_norms.empty()) {
        out << ",\n";
      } else {
        out << c.summary.max << ',' << (c.summary.diverged ? 1 : 0) << '\n';
      }
    }
  }
  if (!out) throw Error("cannot write " + path.string());
}

// Mean over seeds, one row per (setting, sampler, nfe).
void write_summary(const fs::path& path, const std::vector<CellResult>& cells) {
  struct Acc {
    double fd = 0, ed = 0, sw = 0;
    int n = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  for (const auto& c : cells) {
    for (const auto& [p, m] : c.metrics) {
      const std::string key = c.setting + ',' + to_string(p.kind) + ',' + std::to_string(p.nfe);
      if (!acc.count(key)) order.push_back(key);
      Acc& a = acc[key];
      a.fd += m.frechet_gaussian, a.ed += m.energy_distance, a.sw += m.sliced_w2, ++a.n;
    }
  }
  std::ofstream out(path);
  out << "setting,sampler,nfe,frechet_gaussian,energy_distance,sliced_w2,seeds\n"
      << std::setprecision(8);
  for (const auto& key : order) {
    const Acc& a = acc[key];
    out << key << ',' << a.fd / a.n << ',' << a.ed / a.n << ',' << a.sw / a.n << ',' << a.n << '\n';
  }
  if (!out) throw Error("cannot write " + path.string());
}

// One row per sampler, one column per NFE, mean Frechet distance over seeds.
void write_sampler_matrix(const fs::path& path, const std::vector<CellResult>& cells,
                          const std::vector<int>& nfes) {
  std::map<std::pair<SamplerKind, int>, std::pair<double, int>> acc;
  for (const auto& c : cells)
    for (const auto& [p, m] : c.metrics) {
      if (p.mix_k != 0) continue;
      auto& a = acc[{p.kind, p.nfe}];
      a.first += m.frechet_gaussian, ++a.second;
    }
  std::ofstream out(path);
  out << "sampler";
  for (int nfe : nfes) out << ",nfe" << nfe;
  out << '\n' << std::setprecision(8);
  for (SamplerKind k : {SamplerKind::kEuler, SamplerKind::kCm, SamplerKind::kMix}) {
    out << to_string(k);
    for (int nfe : nfes) {
      const auto& a = acc[{k, nfe}];
      out << ',' << (a.second ? a.first / a.second : std::nan(""));
    }
    out << '\n';
  }
}

std::vector<Setting> grid_settings(const std::string& grid) {
  if (grid == "losses") {
    return {{"fm_cd_n2n", {"losses=fm,cd,n2n"}},
            {"fm_cd", {"losses=fm,cd"}},
            {"fm", {"losses=fm"}},
            {"fm_n2n", {"losses=fm,n2n"}},
            {"cd", {"losses=cd"}}};
  }
  if (grid == "schedules") {
    return {{"uniform-seg", {"timestep=uniform-N-seg"}},
            {"lognorm", {"timestep=lognorm"}},
            {"arctan-norm", {"timestep=arctan-norm"}},
            {"uniform-seg_linear", {"timestep=uniform-N-seg", "weight=linear"}}};
  }
  if (grid == "freq") {
    std::vector<Setting> out;
    for (int f : {1, 2, 3, 5, 10}) out.push_back({"freq" + std::to_string(f), {"freq=" + std::to_string(f)}});
    return out;
  }
  throw UsageError("unknown grid '" + grid + "' (losses, samplers, schedules, freq)");
}

int run_ablate_command(const AblateArgs& a) {
  const auto seeds = parse_seeds(a.seeds);
  if (a.steps == 0 || a.steps > kAblationStepCap) {
    throw UsageError("--steps must be in 1.." + std::to_string(kAblationStepCap));
  }
  const unsigned jobs = a.jobs ? a.jobs : default_jobs();
  const fs::path dir(a.out);
  fs::create_directories(dir / "figures");

  if (a.grid == "samplers") {
    if (a.student.empty()) throw UsageError("--grid samplers needs --student");
    const Checkpoint ck = load_verified(a.student, "");
    const VelocityNet net = ck.ema_net();
    TrainConfig base = student_config("two-gaussians", LossFlags{});
    apply_source(base, a.source);
    const ToyDataset ds = make_dataset(base.dataset);
    const Tensor reference = reference_cloud(ds, a.n, 11);
    const std::vector<int> nfes{4, 8, 12, 16};
    std::vector<EvalPoint> points;
    // Default splits feed the summary matrix; every other mix split is
    // reported in the table only.
    for (SamplerKind k : {SamplerKind::kEuler, SamplerKind::kCm, SamplerKind::kMix})
      for (int nfe : nfes) points.push_back({k, nfe});
    for (int nfe : nfes)
      for (int k = 2; k < nfe; ++k) points.push_back({SamplerKind::kMix, nfe, k});
    std::vector<CellResult> cells(seeds.size());
    parallel_for(seeds.size() * points.size(), jobs, [&](std::size_t i) {
      const std::size_t si = i / points.size(), pi = i % points.size();
      const SamplerSpec spec = spec_of(points[pi], seeds[si]);
      const MetricReport m = eval_sampler(net, spec, reference);
      static std::mutex mu;
      std::lock_guard lock(mu);
      cells[si].setting = "student";
      cells[si].seed = seeds[si];
      cells[si].metrics.push_back({points[pi], m});
    });
    for (auto& c : cells)
      std::sort(c.metrics.begin(), c.metrics.end(), [](const auto& x, const auto& y) {
        return std::tuple(static_cast<int>(x.first.kind), x.first.nfe, x.first.mix_k) <
               std::tuple(static_cast<int>(y.first.kind), y.first.nfe, y.first.mix_k);
      });
    write_table(dir / "table.csv", a.grid, cells);
    write_sampler_matrix(dir / "summary.csv", cells, nfes);
    for (SamplerKind k : {SamplerKind::kEuler, SamplerKind::kCm, SamplerKind::kMix}) {
      std::vector<plot::ScatterPanel> panels;
      for (int nfe : nfes) {
        const SamplerSpec spec = spec_of(k, nfe, seeds.front());
        panels.push_back({run_sampler(net, spec, std::vector<int>(2000, kNullClass)).samples, {}});
      }
      plot::scatter_png((dir / "figures" / ("clouds_" + to_string(k) + ".png")).string(), panels,
                        cloud_extent(reference));
    }
    std::printf("wrote %s\n", (dir / "summary.csv").string().c_str());
    return 0;
  }

  const auto settings = grid_settings(a.grid);
  if (a.teacher.empty()) throw UsageError("--grid " + a.grid + " needs --teacher");
  const Checkpoint tck = load_verified(a.teacher, "");
  const VelocityNet teacher = tck.ema_net();
  TrainConfig base = student_config("two-gaussians", LossFlags{});
  base.width = tck.arch.width;
  base.depth = tck.arch.depth;
  base.n_freq = tck.arch.n_freq;
  base.class_dim = tck.arch.class_dim;
  apply_source(base, a.source);
  base.total_steps = a.steps;
  const ToyDataset ds = make_dataset(base.dataset);
  const Tensor reference = reference_cloud(ds, a.n, 11);
  const std::vector<EvalPoint> points{
      {SamplerKind::kCm, 1}, {SamplerKind::kCm, 2}, {SamplerKind::kEuler, 50}};

  std::vector<CellResult> cells(settings.size() * seeds.size());
  std::mutex io;
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    const Setting& setting = settings[i / seeds.size()];
    const std::uint64_t seed = seeds[i % seeds.size()];
    TrainConfig config = base;
    config.apply(set_entries(setting.sets), setting.name);
    config.seed = seed;
    const fs::path cell_dir = dir / "runs" / (setting.name + "_seed" + std::to_string(seed));
    fs::create_directories(cell_dir);
    write_text(cell_dir / "config.txt", config.to_text());
    RunOptions options;
    options.log_path = (cell_dir / "metrics.csv").string();
    options.checkpoint_path = (cell_dir / "model.ckpt").string();
    const RunResult res = run_training(config, teacher, options);
    const VelocityNet ema(res.state.net.arch(), res.state.ema.shadow);
    CellResult& c = cells[i];
    c.setting = setting.name;
    c.seed = seed;
    c.grad_norms = grad_norms(res.log);
    c.summary = grad_norm_series(c.grad_norms);
    for (const auto& p : points) {
      const SamplerSpec spec = spec_of(p.kind, p.nfe, seed);
      c.metrics.push_back({p, eval_sampler(ema, spec, reference)});
      c.clouds.push_back(run_sampler(ema, spec, std::vector<int>(2000, kNullClass)).samples);
    }
    write_run_metadata(cell_dir, config,
                       {{"teacher_digest", checkpoint_digest(tck)},
                        {"checkpoint_digest", checkpoint_digest(make_checkpoint(res.state))}});
    std::lock_guard lock(io);
    std::fprintf(stderr, "%s seed %llu: 1-NFE frechet %.4g\n", setting.name.c_str(),
                 static_cast<unsigned long long>(seed), c.metrics.front().second.frechet_gaussian);
  });

  write_table(dir / "table.csv", a.grid, cells);
  write_summary(dir / "summary.csv", cells);
  // Figures from the first seed: clouds per NFE for each setting, and the
  // gradient norm curves of all settings on one chart.
  std::vector<plot::Series> curves;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    const CellResult& c = cells[s * seeds.size()];
    std::vector<plot::ScatterPanel> panels{{reference_cloud(ds, 2000, 12), {}}};
    for (const auto& cloud : c.clouds) panels.push_back({cloud, {}});
    plot::scatter_png((dir / "figures" / ("clouds_" + c.setting + ".png")).string(), panels,
                      cloud_extent(reference));
    curves.push_back({c.grad_norms, plot::palette(s)});
  }
  plot::line_png((dir / "figures" / "grad_norm.png").string(), curves, true);
  {
    std::ofstream legend(dir / "figures" / "grad_norm_legend.csv");
    legend << "series,setting,color\n";
    for (std::size_t s = 0; s < settings.size(); ++s) {
      const auto c = plot::palette(s);
      legend << s << ',' << settings[s].name << ",#" << std::hex << std::setfill('0') << std::setw(2)
             << int(c.r) << std::setw(2) << int(c.g) << std::setw(2) << int(c.b) << std::dec << '\n';
    }
  }
  std::printf("wrote %s\n", (dir / "summary.csv").string().c_str());
  return 0;
}

void add_config_options(CLI::App* cmd, ConfigSource& src) {
  cmd->add_option("--config", src.path, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", src.sets, "override one config key (key=value), repeatable");
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Flow map distillation on toy 2-D data"};
  app.set_version_flag("--version", std::string(FMLAB_VERSION));
  app.require_subcommand(1);

  TrainArgs teach_args;
  auto* teach = app.add_subcommand("train-teacher", "train an instantaneous velocity teacher");
  add_config_options(teach, teach_args.source);
  teach->add_option("--out", teach_args.out, "run directory")->required();
  teach->add_option("--resume", teach_args.resume, "checkpoint to continue from");
  teach->add_flag("--quiet", teach_args.quiet);

  TrainArgs distill_args;
  auto* distill = app.add_subcommand("distill", "distill a flow map student from a teacher");
  add_config_options(distill, distill_args.source);
  distill->add_option("--teacher", distill_args.teacher, "teacher checkpoint")->required();
  distill->add_option("--teacher-digest", distill_args.teacher_digest,
                      "expected teacher checkpoint digest");
  distill->add_option("--out", distill_args.out, "run directory")->required();
  distill->add_option("--resume", distill_args.resume, "checkpoint to continue from");
  distill->add_flag("--quiet", distill_args.quiet);

  SampleArgs sample_args;
  int k_value = 0;
  auto* sample = app.add_subcommand("sample", "draw samples from a checkpoint");
  sample->add_option("--ckpt", sample_args.ckpt)->required();
  sample->add_option("--digest", sample_args.digest, "expected checkpoint digest");
  sample->add_option("--sampler", sample_args.sampler, "euler, cm or mix")->capture_default_str();
  sample->add_option("--nfe", sample_args.nfe)->capture_default_str();
  auto* k_opt = sample->add_option("--k", k_value, "deterministic steps of the mix sampler");
  sample->add_flag("--instantaneous", sample_args.instantaneous,
                   "mix sampler uses F(x,t,t) Euler steps instead of flow map jumps");
  sample->add_option("--segments", sample_args.segments)->capture_default_str();
  sample->add_option("--n", sample_args.n)->capture_default_str();
  sample->add_option("--seed", sample_args.seed)->capture_default_str();
  sample->add_option("--label", sample_args.label, "class id, -1 for unconditional");
  sample->add_flag("--online", sample_args.online, "use online weights instead of EMA");
  sample->add_option("--out", sample_args.out, "sample CSV")->required();
  sample->add_option("--figure", sample_args.figure, "scatter PNG");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "compare a sample CSV with data");
  eval->add_option("--samples", eval_args.samples)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_args.data, "reference CSV")->check(CLI::ExistingFile);
  eval->add_option("--dataset", eval_args.dataset, "draw the reference from a toy dataset");
  eval->add_option("--n", eval_args.n, "reference size with --dataset")->capture_default_str();
  eval->add_option("--seed", eval_args.seed)->capture_default_str();
  eval->add_option("--projections", eval_args.projections)->capture_default_str();
  eval->add_option("--report", eval_args.report, "append a row to this CSV");
  eval->add_option("--label", eval_args.label, "row label (default: sample file stem)");

  std::string data_name = "two-gaussians", data_out;
  std::size_t data_n = 20000;
  std::uint64_t data_seed = 11;
  auto* data = app.add_subcommand("data", "dump points from a toy dataset");
  data->add_option("--dataset", data_name)->capture_default_str();
  data->add_option("--n", data_n)->capture_default_str();
  data->add_option("--seed", data_seed)->capture_default_str();
  data->add_option("--out", data_out)->required();

  AblateArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "run an ablation grid");
  add_config_options(ablate, ablate_args.source);
  ablate->add_option("--grid", ablate_args.grid)
      ->required()
      ->check(CLI::IsMember({"losses", "samplers", "schedules", "freq"}));
  ablate->add_option("--teacher", ablate_args.teacher, "teacher checkpoint (training grids)");
  ablate->add_option("--student", ablate_args.student, "student checkpoint (samplers grid)");
  ablate->add_option("--seeds", ablate_args.seeds)->capture_default_str();
  ablate->add_option("--steps", ablate_args.steps, "steps per run, at most 10000")
      ->capture_default_str();
  ablate->add_option("--n", ablate_args.n, "samples per evaluation")->capture_default_str();
  ablate->add_option("--jobs", ablate_args.jobs, "worker threads (default: all cores)");
  ablate->add_option("--out", ablate_args.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*teach) return run_train_command(teach_args, false);
    if (*distill) return run_train_command(distill_args, true);
    if (*sample) {
      if (*k_opt) sample_args.k = k_value;
      return run_sample_command(sample_args);
    }
    if (*eval) return run_eval_command(eval_args);
    if (*data) return run_data_command(data_name, data_n, data_seed, data_out);
    if (*ablate) return run_ablate_command(ablate_args);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\nRun with --help for usage.\n", e.what());
    return kExitUsage;
  } catch (const TrainingAborted& e) {
    std::fprintf(stderr, "training aborted: %s\n", e.what());
    return kExitAborted;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
