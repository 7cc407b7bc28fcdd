#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include "attnflow/fcam.hpp"
#include "attnflow/numeric.hpp"
#include "attnflow/sdc_data.hpp"

namespace attnflow {

/// Idealised focus: weight alpha on the foreground segment and
/// (1 - alpha) / (m - 1) on each background segment.
struct FixedFocusSpec {
  double alpha = 1.0;

  void validate(Index m) const {
    const double lo = 1.0 / static_cast<double>(m);
    if (!(alpha >= lo - 1e-12 && alpha <= 1.0))
      throw InvalidInputError("fixed-focus alpha must lie in [1/m, 1]");
  }

  Vector weights(Index m, Index fg_index) const {
    validate(m);
    Vector a = Vector::Constant(m, (1.0 - alpha) / static_cast<double>(m - 1));
    a(fg_index) = alpha;
    return a;
  }
};

namespace detail {

/// Loss of one instance for explicit attention weights `a` (with matching
/// log-weights, which may contain -inf for zero weights).
inline double weighted_loss(const Matrix& W, const Matrix& X, Index y, const Vector& a,
                            const Vector& log_a, Paradigm paradigm) {
  switch (paradigm) {
    case Paradigm::SA:
      return -log_softmax(W * (X * a))(y);
    case Paradigm::HA: {
      const Matrix lsm = column_log_softmax(W * X);
      double s = 0.0;
      for (Index j = 0; j < X.cols(); ++j)
        if (a(j) > 0.0) s -= a(j) * lsm(y, j);
      return s;
    }
    case Paradigm::LV: {
      const Matrix lsm = column_log_softmax(W * X);
      return -logsumexp(log_a + lsm.row(y).transpose());
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

inline Vector safe_log(const Vector& a) {
  Vector out(a.size());
  for (Index i = 0; i < a.size(); ++i)
    out(i) = a(i) > 0.0 ? std::log(a(i)) : -std::numeric_limits<double>::infinity();
  return out;
}

inline void check_label(const FcamParams& p, const MosaicInstance& inst) {
  require_dims(inst.label >= 0 && inst.label < p.C(), "label out of range for parameters");
}

}  // namespace detail

/// Per-instance training loss of the learnable model (attention from u).
inline double loss(const FcamParams& p, const MosaicInstance& inst, Paradigm paradigm) {
  const Vector f = focus_scores(p, inst.segments);
  detail::check_label(p, inst);
  const Vector log_a = log_softmax(f);
  const Vector a = log_a.array().exp().matrix();
  return detail::weighted_loss(p.W, inst.segments, inst.label, a, log_a, paradigm);
}

/// Loss with the focus replaced by the fixed-focus weights; u is ignored.
inline double fixed_focus_loss(const FcamParams& p, const MosaicInstance& inst, Paradigm paradigm,
                               const FixedFocusSpec& spec) {
  check_dims(p, inst.segments);
  detail::check_label(p, inst);
  const Vector a = spec.weights(inst.segments.cols(), inst.fg_index);
  return detail::weighted_loss(p.W, inst.segments, inst.label, a, detail::safe_log(a), paradigm);
}

inline double instance_loss(const FcamParams& p, const MosaicInstance& inst, Paradigm paradigm,
                            const std::optional<FixedFocusSpec>& spec) {
  return spec ? fixed_focus_loss(p, inst, paradigm, *spec) : loss(p, inst, paradigm);
}

/// Mean loss over the dataset with compensated summation.
inline double dataset_loss(const FcamParams& p, const SdcDataset& ds, Paradigm paradigm,
                           const std::optional<FixedFocusSpec>& spec = std::nullopt) {
  if (ds.instances.empty()) throw InvalidInputError("dataset is empty");
  CompensatedSum acc;
  for (const auto& inst : ds.instances) acc.add(instance_loss(p, inst, paradigm, spec));
  return acc.value() / static_cast<double>(ds.instances.size());
}

}  // namespace attnflow
