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

#include "fmlab/trainer.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "fmlab/errors.hpp"
#include "fmlab/schedules.hpp"

namespace fmlab {

AdamW::AdamW(const std::vector<Tensor>& like, double lr, double beta1, double beta2,
             double weight_decay, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), wd_(weight_decay), eps_(eps) {
  for (const auto& t : like) {
    m_.emplace_back(t.shape());
    v_.emplace_back(t.shape());
  }
}

void AdamW::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("AdamW: tensor count mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i], grads[i], "AdamW");
    Tensor& p = params[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * p[k]);
    }
  }
}

namespace {

Conditioning cond_rows(std::span<const double> t, std::span<const double> s,
                       const std::vector<int>& labels) {
  Conditioning c;
  c.t.assign(t.begin(), t.end());
  c.s.assign(s.begin(), s.end());
  c.labels = labels;
  return c;
}

Tensor interpolate_rows(const Tensor& z, const Tensor& x1, std::span<const double> t) {
  require_same_shape(z, x1, "interpolate_rows");
  Tensor out(z.shape());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto o = out.row_span(r);
    auto a = z.row_span(r);
    auto b = x1.row_span(r);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] = (1.0 - t[r]) * a[j] + t[r] * b[j];
  }
  return out;
}

bool all_finite(const std::vector<Tensor>& ts) {
  for (const auto& t : ts) {
    if (!t.all_finite()) return false;
  }
  return true;
}

void accumulate(std::vector<Tensor>& into, const std::vector<Tensor>& g) {
  if (into.empty()) {
    into = g;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) axpy(1.0, g[i], into[i]);
}

double global_norm(const std::vector<Tensor>& g) {
  double acc = 0.0;
  for (const auto& t : g) acc += squared_norm(t);
  return std::sqrt(acc);
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericFault(what, "non-finite loss");
}

// Applies one optimizer update; returns the gradient norm.
double apply_update(TrainState& st, std::vector<Tensor>& grads, int phase) {
  if (st.s_path_frozen) st.net.mask_s_pathway(grads);
  if (st.grad_hook) st.grad_hook(st.iters, phase, grads);
  if (!all_finite(grads)) throw NumericFault("update", "non-finite gradient");
  const double norm = global_norm(grads);
  st.optimizer.step(st.net.params(), grads);
  if (!all_finite(st.net.params())) throw NumericFault("update", "non-finite weights after update");
  ema_update(st.ema, st.net.params());
  ++st.updates;
  return norm;
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

Tensor teacher_velocity(const VelocityNet& teacher, const Tensor& x, std::span<const double> t,
                        const std::vector<int>& labels, const GuidanceSpec& guidance) {
  const Conditioning cond = cond_rows(t, t, labels);
  Tensor v_cond = teacher.eval(x, cond);
  bool any_labelled = false;
  for (int l : labels) any_labelled = any_labelled || l != kNullClass;
  if (guidance.w_cfg == 1.0 || !any_labelled) return v_cond;
  Conditioning uncond = cond;
  uncond.labels.assign(labels.size(), kNullClass);
  return guided_velocity(v_cond, teacher.eval(x, uncond), guidance);
}

Batch prepare_batch(const VelocityNet* teacher, const ToyDataset& data, Rng& rng,
                    const TrainConfig& config, TimeBranch branch) {
  if (config.mode == TrainMode::kDistill && teacher == nullptr) {
    throw DomainError("distillation needs a teacher");
  }
  const std::size_t n = config.batch_size;
  Batch b;
  DataBatch d = sample_data(data, n, rng);
  b.z_ref = std::move(d.points);
  b.z = rng.normal_tensor(n, data.dim);
  b.t.resize(n);
  for (double& t : b.t) t = sample_t(config.timesteps, rng, branch);
  b.labels.assign(n, kNullClass);
  if (config.conditional) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool drop = config.mode == TrainMode::kFromScratch && rng.uniform() < config.label_dropout;
      b.labels[i] = drop ? kNullClass : d.labels[i];
    }
  }
  b.z_t = interpolate_rows(b.z, b.z_ref, b.t);
  if (config.mode == TrainMode::kFromScratch) {
    b.v_t = b.z_ref - b.z;
  } else {
    b.v_t = teacher_velocity(*teacher, b.z_t, b.t, b.labels, config.guidance);
  }
  return b;
}

TrainState make_train_state(const TrainConfig& config, std::optional<VelocityNet> teacher) {
  config.validate();
  ToyDataset ds = make_dataset(config.dataset);
  const NetArch arch = config.arch(ds.dim, ds.n_classes());
  std::optional<VelocityNet> net;
  bool frozen = false;
  if (config.mode == TrainMode::kDistill) {
    if (!teacher) throw DomainError("distill mode requires a teacher checkpoint");
    if (!(teacher->arch() == arch)) {
      throw FormatError("incompatible teacher: architecture width " +
                        std::to_string(teacher->arch().width) + " depth " +
                        std::to_string(teacher->arch().depth) + " classes " +
                        std::to_string(teacher->arch().n_classes) + " does not match config width " +
                        std::to_string(arch.width) + " depth " + std::to_string(arch.depth) +
                        " classes " + std::to_string(arch.n_classes));
    }
    net.emplace(teacher->with_params(teacher->params()));
    net->zero_s_pathway();
  } else {
    net.emplace(arch, config.seed);
    // Pure flow matching only ever queries s = t, so s carries no
    // information and its pathway stays at zero.
    frozen = config.losses == LossFlags{true, false, false};
    if (frozen) net->zero_s_pathway();
  }
  TrainState st{config,
                std::move(ds),
                std::move(*net),
                {},
                {},
                std::move(teacher),
                frozen,
                0,
                0,
                0,
                0,
                {}};
  st.ema = make_ema(st.net, config.ema_decay);
  st.optimizer = AdamW(st.net.params(), config.lr, config.beta1, config.beta2, config.weight_decay);
  return st;
}

TrainState resume_train_state(const TrainConfig& config, const Checkpoint& ck,
                              std::optional<VelocityNet> teacher) {
  if (ck.config_digest != config.digest()) {
    throw FormatError("config digest mismatch: checkpoint " + hex64(ck.config_digest) +
                      ", config " + hex64(config.digest()));
  }
  TrainState st = make_train_state(config, std::move(teacher));
  if (!(ck.arch == st.net.arch())) throw FormatError("checkpoint architecture differs from config");
  st.net = ck.online_net();
  st.ema.shadow = ck.ema;
  st.iters = ck.step;
  st.s_path_frozen = ck.s_path_frozen;
  return st;
}

StepReport train_step(TrainState& st) {
  const TrainConfig& cfg = st.config;
  StepReport rep;
  rep.step = st.iters;

  const std::vector<Tensor> saved_params = st.net.params();
  const EmaShadow saved_ema = st.ema;
  const AdamW saved_opt = st.optimizer;
  const std::uint64_t saved_updates = st.updates;
  const VelocityNet* teacher = st.teacher ? &*st.teacher : nullptr;
  const std::uint64_t step_seed = derive_seed(cfg.seed, st.iters);

  try {
    // Phase 1: consistency + flow matching on one batch.
    if (cfg.losses.cd || cfg.losses.fm) {
      Rng rng(step_seed, 1);
      const Batch b = prepare_batch(teacher, st.dataset, rng, cfg,
                                    cfg.losses.cd ? TimeBranch::kCm : TimeBranch::kFm);
      std::vector<Tensor> grads;
      if (cfg.losses.cd) {
        const LossTarget lt = cm_target(st.net, b.z_t, b.t, b.labels, b.v_t, cfg.weights);
        const LossEval le = cfg.distance.with_grad(lt.prediction.output, lt.target);
        rep.loss_cm = le.loss;
        require_finite(le.loss, "loss_cm");
        rep.term_sup = lt.diagnostics.term_sup;
        rep.term_self = lt.diagnostics.term_self;
        accumulate(grads, st.net.param_gradients(lt.prediction.tape, le.seed));
      } else if (cfg.probe_every > 0 && st.iters % cfg.probe_every == 0) {
        const InstabilityTerms it = instability_probe(st.net, b.z_t, b.t, b.labels, b.v_t);
        rep.term_sup = it.term_sup;
        rep.term_self = it.term_self;
      }
      if (cfg.losses.fm) {
        const LossTarget lt = fm_target(st.net, b.z_t, b.t, b.labels, b.v_t);
        const LossEval le =
            fm_loss_terms(lt.prediction.output, lt.target, cfg.distance, cfg.beta_cos);
        rep.loss_fm = le.loss;
        require_finite(le.loss, "loss_fm");
        accumulate(grads, st.net.param_gradients(lt.prediction.tape, le.seed));
      }
      rep.grad_norm = apply_update(st, grads, 1);
      ++rep.updates;
    }

    // Phase 2: noise-to-noisy + flow matching on fresh data, r = 0.
    if (cfg.losses.n2n && st.iters % static_cast<std::uint64_t>(cfg.freq) == 0) {
      Rng rng(step_seed, 2);
      const Batch b = prepare_batch(teacher, st.dataset, rng, cfg, TimeBranch::kN2nRight);
      const std::vector<double> r(b.t.size(), 0.0);
      const Tensor& x_r = b.z;
      Tensor v_r = cfg.mode == TrainMode::kFromScratch
                       ? b.v_t
                       : teacher_velocity(*teacher, x_r, r, b.labels, cfg.guidance);
      Tensor v_right = b.v_t;
      if (cfg.n2n_right_velocity == RightVelocity::kMapped) {
        const Tensor mapped = flow_map(st.net, x_r, cond_rows(r, b.t, b.labels));
        v_right = cfg.mode == TrainMode::kFromScratch
                      ? b.v_t
                      : teacher_velocity(*teacher, mapped, b.t, b.labels, cfg.guidance);
      }
      std::vector<Tensor> grads;
      const LossTarget lt = n2n_target(st.net, x_r, r, b.t, b.labels, v_r, v_right,
                                       {cfg.lambda, cfg.gamma}, cfg.weights);
      const LossEval le = cfg.distance.with_grad(lt.prediction.output, lt.target);
      rep.loss_n2n = le.loss;
      require_finite(le.loss, "loss_n2n");
      accumulate(grads, st.net.param_gradients(lt.prediction.tape, le.seed));
      if (cfg.losses.fm) {
        const LossTarget ft = fm_target(st.net, b.z_t, b.t, b.labels, b.v_t);
        const LossEval fe = fm_loss_terms(ft.prediction.output, ft.target, cfg.distance, cfg.beta_cos);
        rep.loss_fm_n2n = fe.loss;
        require_finite(fe.loss, "loss_fm_n2n");
        accumulate(grads, st.net.param_gradients(ft.prediction.tape, fe.seed));
      }
      const double norm = apply_update(st, grads, 2);
      if (rep.updates == 0) rep.grad_norm = norm;
      ++rep.updates;
    }
  } catch (const NumericFault& e) {
    rep.faulted = true;
    rep.fault = e.what();
  }

  if (rep.faulted) {
    st.net.params() = saved_params;
    st.ema = saved_ema;
    st.optimizer = saved_opt;
    st.updates = saved_updates;
    rep.updates = 0;
    ++st.total_faults;
    if (++st.consecutive_faults >= cfg.fault_threshold) {
      ++st.iters;
      throw TrainingAborted("training aborted at step " + std::to_string(rep.step) + " after " +
                            std::to_string(st.consecutive_faults) +
                            " consecutive faulted steps; last fault: " + rep.fault);
    }
  } else {
    st.consecutive_faults = 0;
  }
  rep.ema_gap = params_distance(st.ema.shadow, st.net.params());
  ++st.iters;
  return rep;
}

Checkpoint make_checkpoint(const TrainState& st) {
  Checkpoint ck;
  ck.arch = st.net.arch();
  ck.s_path_frozen = st.s_path_frozen;
  ck.step = st.iters;
  ck.config_digest = st.config.digest();
  ck.ema_decay = st.ema.decay;
  ck.online = st.net.params();
  ck.ema = st.ema.shadow;
  return ck;
}

std::string metric_log_row(const StepReport& r) {
  return std::to_string(r.step) + "," + fmt(r.loss_fm) + "," + fmt(r.loss_cm) + "," +
         fmt(r.loss_n2n) + "," + fmt(r.grad_norm) + "," + fmt(r.term_sup) + "," +
         fmt(r.term_self) + "," + fmt(r.ema_gap);
}

RunResult run_training(TrainState state, const RunOptions& options) {
  RunResult res{std::move(state), {}};
  TrainState& st = res.state;
  std::ofstream log;
  if (!options.log_path.empty()) {
    log.open(options.log_path, std::ios::trunc);
    if (!log) throw Error("cannot write metric log " + options.log_path);
    log << kMetricLogHeader << '\n';
  }
  // total_steps is an absolute budget, so a resumed run stops where a fresh one would.
  const std::uint64_t end = st.config.total_steps;
  while (st.iters < end) {
    StepReport rep;
    try {
      rep = train_step(st);
    } catch (const TrainingAborted&) {
      if (log) log.flush();
      throw;
    }
    if (log) log << metric_log_row(rep) << '\n';
    if (options.on_step) options.on_step(rep);
    res.log.push_back(std::move(rep));
    if (!options.checkpoint_path.empty() && st.config.checkpoint_every > 0 &&
        st.iters % st.config.checkpoint_every == 0 && st.iters < end) {
      save_checkpoint(options.checkpoint_path + ".step" + std::to_string(st.iters),
                      make_checkpoint(st));
    }
  }
  if (!options.checkpoint_path.empty()) save_checkpoint(options.checkpoint_path, make_checkpoint(st));
  return res;
}

RunResult run_training(const TrainConfig& config, std::optional<VelocityNet> teacher,
                       const RunOptions& options) {
  return run_training(make_train_state(config, std::move(teacher)), options);
}

}  // namespace fmlab
