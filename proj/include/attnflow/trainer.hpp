#pragma once

// Plain gradient-descent training loops over an SDC dataset: fixed-focus
// classifier training, joint (u, W) training, and the soft-then-hard hybrid
// schedule. Trainers never read fg_index except through the fixed-focus
// weights and the evaluation-only alpha column of the trace.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "attnflow/gradients.hpp"
#include "attnflow/losses.hpp"
#include "attnflow/ode_flow.hpp"
#include "attnflow/rng.hpp"

namespace attnflow {

enum class InitKind { Zero, Gaussian };

enum class TrainPhase { FixedFocus, Joint, PreSwitch, PostSwitch };

inline std::string_view to_string(TrainPhase p) {
  switch (p) {
    case TrainPhase::FixedFocus: return "fixed";
    case TrainPhase::Joint: return "joint";
    case TrainPhase::PreSwitch: return "pre-switch";
    case TrainPhase::PostSwitch: return "post-switch";
  }
  return "?";
}

struct TrainConfig {
  Paradigm paradigm = Paradigm::SA;
  double learning_rate = 0.1;
  std::size_t epochs = 100;
  std::size_t batch = 0;  ///< 0 means full batch
  std::optional<double> alpha;  ///< fixed-focus weight
  std::uint64_t seed = 0;
  InitKind init = InitKind::Zero;
  double init_sigma = 0.01;

  /// Hybrid only: first epoch trained with HA. Defaults to epochs / 2.
  std::optional<std::size_t> switch_epoch;
  /// Hybrid only: switch as soon as the SA focus-improvement incentive at the
  /// current empirical foreground attention drops below this value.
  std::optional<double> switch_incentive_threshold;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw ConfigError("learning_rate must be positive");
    if (!(init_sigma >= 0.0)) throw ConfigError("init sigma must be nonnegative");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  Paradigm paradigm = Paradigm::SA;
  TrainPhase phase = TrainPhase::Joint;
  double alpha = std::numeric_limits<double>::quiet_NaN();  ///< fixed alpha, or mean a_z
  double mu_proj = std::numeric_limits<double>::quiet_NaN();
  double nu_proj = std::numeric_limits<double>::quiet_NaN();
  double w_norm = 0.0;
  double u_norm = 0.0;
};

struct TrainTrace {
  std::vector<EpochRecord> records;
  std::optional<std::size_t> switch_epoch;
};

struct TrainResult {
  FcamParams params;
  TrainTrace trace;
};

/// Called after every completed epoch with (epoch, params).
using EpochCallback = std::function<void(std::size_t, const FcamParams&)>;

// Helpers ----------------------------------------------------------------------

inline FcamParams initial_params(const SdcDataset& ds, const TrainConfig& cfg) {
  FcamParams p = FcamParams::zeros(ds.config.d, ds.config.C);
  if (cfg.init == InitKind::Gaussian && cfg.init_sigma > 0.0) {
    Rng rng = make_stream(cfg.seed, Stream::Init);
    std::normal_distribution<double> normal(0.0, cfg.init_sigma);
    for (Index i = 0; i < p.u.size(); ++i) p.u(i) = normal(rng);
    for (Index j = 0; j < p.W.cols(); ++j)
      for (Index k = 0; k < p.W.rows(); ++k) p.W(k, j) = normal(rng);
  }
  return p;
}

/// Dataset mean of the attention weight on the true foreground segment.
inline double mean_foreground_attention(const FcamParams& p, const SdcDataset& ds) {
  CompensatedSum acc;
  for (const auto& inst : ds.instances) acc.add(attention_weights(p, inst.segments)(inst.fg_index));
  return acc.value() / static_cast<double>(ds.size());
}

/// Focus-improvement incentive: mean of L(alpha) - L(alpha') with
/// alpha' = min(alpha + 0.01, 1). Positive when sharper focus lowers the loss.
inline double incentive(const FcamParams& p, const SdcDataset& ds, Paradigm paradigm, double alpha) {
  if (ds.instances.empty()) throw InvalidInputError("dataset is empty");
  const FixedFocusSpec at{alpha};
  at.validate(static_cast<Index>(ds.config.m));
  const FixedFocusSpec ahead{std::min(alpha + 0.01, 1.0)};
  CompensatedSum acc;
  for (const auto& inst : ds.instances)
    acc.add(fixed_focus_loss(p, inst, paradigm, at) - fixed_focus_loss(p, inst, paradigm, ahead));
  return acc.value() / static_cast<double>(ds.size());
}

namespace detail {

inline bool is_orthogonal_mode(const SdcDataset& ds) {
  return ds.config.mode == SdcMode::OrthoZeroBg || ds.config.mode == SdcMode::OrthoRademacherBg;
}

inline EpochRecord make_record(const FcamParams& p, const SdcDataset& ds, std::size_t epoch,
                               Paradigm paradigm, TrainPhase phase,
                               const std::optional<FixedFocusSpec>& spec) {
  EpochRecord r;
  r.epoch = epoch;
  r.paradigm = paradigm;
  r.phase = phase;
  r.loss = dataset_loss(p, ds, paradigm, spec);
  r.alpha = spec ? spec->alpha : mean_foreground_attention(p, ds);
  if (is_orthogonal_mode(ds)) {
    const auto pr = project_structured(p, ds.basis);
    r.mu_proj = pr.mu;
    r.nu_proj = pr.nu;
  }
  r.w_norm = p.W.norm();
  r.u_norm = p.u.norm();
  if (!std::isfinite(r.loss) || !p.finite()) throw DivergenceError("training diverged", epoch);
  return r;
}

/// One epoch of (minibatch) gradient descent. Batch order depends only on
/// (seed, epoch) so that interrupted runs resume identically.
inline void run_epoch(FcamParams& p, const SdcDataset& ds, const TrainConfig& cfg, std::size_t epoch,
                      Paradigm paradigm, const std::optional<FixedFocusSpec>& spec) {
  const std::size_t n = ds.size();
  if (cfg.batch == 0 || cfg.batch >= n) {
    FcamGradient g = dataset_grad(p, ds, paradigm, spec);
    p.W -= cfg.learning_rate * g.grad_W;
    if (!spec) p.u -= cfg.learning_rate * g.grad_u;
    return;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_stream(cfg.seed, Stream::Shuffle, epoch);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::reference_wrapper<const MosaicInstance>> batch;
  batch.reserve(cfg.batch);
  for (std::size_t start = 0; start < n; start += cfg.batch) {
    batch.clear();
    for (std::size_t i = start; i < std::min(n, start + cfg.batch); ++i)
      batch.emplace_back(ds.instances[order[i]]);
    FcamGradient g = mean_grad(p, batch, paradigm, spec);
    p.W -= cfg.learning_rate * g.grad_W;
    if (!spec) p.u -= cfg.learning_rate * g.grad_u;
  }
}

}  // namespace detail

/// Trains epochs [first_epoch, last_epoch) from `params` and appends one record
/// per completed epoch. A record for `first_epoch` itself is added when the
/// trace is empty.
inline void continue_training(FcamParams& params, const SdcDataset& ds, const TrainConfig& cfg,
                              Paradigm paradigm, TrainPhase phase, std::size_t first_epoch,
                              std::size_t last_epoch, TrainTrace& trace,
                              const std::optional<FixedFocusSpec>& spec = std::nullopt,
                              const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (spec) spec->validate(static_cast<Index>(ds.config.m));
  if (trace.records.empty()) trace.records.push_back(detail::make_record(params, ds, first_epoch, paradigm, phase, spec));
  for (std::size_t e = first_epoch; e < last_epoch; ++e) {
    try {
      detail::run_epoch(params, ds, cfg, e, paradigm, spec);
    } catch (const InvalidInputError&) {
      // NaN reached a softmax mid-epoch
      throw DivergenceError("training diverged", e + 1);
    }
    if (!params.finite()) throw DivergenceError("training diverged", e + 1);
    trace.records.push_back(detail::make_record(params, ds, e + 1, paradigm, phase, spec));
    if (on_epoch) on_epoch(e + 1, params);
  }
}

/// Gradient descent on W alone under the fixed-focus loss at cfg.alpha.
inline TrainResult train_fixed_focus(const SdcDataset& ds, const TrainConfig& cfg,
                                     const EpochCallback& on_epoch = {}) {
  if (!cfg.alpha) throw ConfigError("fixed-focus training needs alpha");
  const FixedFocusSpec spec{*cfg.alpha};
  spec.validate(static_cast<Index>(ds.config.m));
  TrainResult res{initial_params(ds, cfg), {}};
  continue_training(res.params, ds, cfg, cfg.paradigm, TrainPhase::FixedFocus, 0, cfg.epochs, res.trace, spec,
                    on_epoch);
  return res;
}

/// Simultaneous gradient descent on (u, W).
inline TrainResult train_joint(const SdcDataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  TrainResult res{initial_params(ds, cfg), {}};
  continue_training(res.params, ds, cfg, cfg.paradigm, TrainPhase::Joint, 0, cfg.epochs, res.trace, std::nullopt,
                    on_epoch);
  return res;
}

/// SA on (u, W) for epochs [0, switch), then HA from the same parameters.
inline TrainResult train_hybrid(const SdcDataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const std::size_t planned = cfg.switch_epoch.value_or(cfg.epochs / 2);
  if (planned > cfg.epochs) throw ConfigError("switch_epoch must not exceed epochs");
  TrainResult res{initial_params(ds, cfg), {}};

  std::size_t switch_at = planned;
  if (cfg.switch_incentive_threshold) {
    // Incentive-triggered switch; `planned` acts as the latest allowed switch.
    const double lo = 1.0 / static_cast<double>(ds.config.m);
    res.trace.records.push_back(
        detail::make_record(res.params, ds, 0, Paradigm::SA, TrainPhase::PreSwitch, std::nullopt));
    switch_at = 0;
    while (switch_at < planned) {
      const double a_hat = std::clamp(mean_foreground_attention(res.params, ds), lo, 1.0);
      if (switch_at > 0 && incentive(res.params, ds, Paradigm::SA, a_hat) < *cfg.switch_incentive_threshold)
        break;
      continue_training(res.params, ds, cfg, Paradigm::SA, TrainPhase::PreSwitch, switch_at, switch_at + 1,
                        res.trace, std::nullopt, on_epoch);
      ++switch_at;
    }
  } else {
    continue_training(res.params, ds, cfg, Paradigm::SA, TrainPhase::PreSwitch, 0, switch_at, res.trace,
                      std::nullopt, on_epoch);
  }
  res.trace.switch_epoch = switch_at;
  if (switch_at == 0) res.trace.records.clear();
  continue_training(res.params, ds, cfg, Paradigm::HA, TrainPhase::PostSwitch, switch_at, cfg.epochs, res.trace,
                    std::nullopt, on_epoch);
  return res;
}

// CSV ------------------------------------------------------------------------------

inline void write_train_trace_csv(std::ostream& os, const TrainTrace& tr, const io::HeaderBlock& header = {}) {
  header.write(os, "# ");
  os << "epoch,loss,paradigm,phase,alpha,mu_proj,nu_proj\n";
  for (const auto& r : tr.records) {
    os << r.epoch << ',' << io::fmt17(r.loss) << ',' << to_string(r.paradigm) << ',' << to_string(r.phase) << ','
       << io::fmt17(r.alpha) << ',';
    if (std::isfinite(r.mu_proj)) os << io::fmt17(r.mu_proj);
    os << ',';
    if (std::isfinite(r.nu_proj)) os << io::fmt17(r.nu_proj);
    os << '\n';
  }
}

}  // namespace attnflow
