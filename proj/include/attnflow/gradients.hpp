#pragma once

// Closed-form gradients of the three attention losses with respect to the
// classifier rows w_k and the focus vector u. All functions return the true
// gradient (the descent direction is its negative).
//
// With a = softmax(X^T u), x~ = X a, P_j = softmax(W x_j):
//   SA  dL/dw_k = -(1[y=k] - softmax_k(W x~)) x~
//       dL/du   = -sum_j a_j x_j ((x_j - x~) . r),  r = w_y - sum_k softmax_k(W x~) w_k
//   HA  dL/dw_k = -sum_j a_j (1[y=k] - P_kj) x_j
//       dL/du   = -sum_j a_j log(P_yj) (x_j - x~)
//   LV  dL/dw_k = -sum_j g_j (1[y=k] - P_kj) x_j
//       dL/du   = -sum_j g_j (x_j - x~),  g_j = a_j P_yj / sum_j' a_j' P_yj'

#include <cmath>
#include <optional>
#include <vector>

#include "attnflow/fcam.hpp"
#include "attnflow/losses.hpp"
#include "attnflow/sdc_data.hpp"

namespace attnflow {

struct FcamGradient {
  Vector grad_u;
  Matrix grad_W;

  static FcamGradient zeros(Index d, Index C) { return {Vector::Zero(d), Matrix::Zero(C, d)}; }

  FcamGradient& operator+=(const FcamGradient& o) {
    grad_u += o.grad_u;
    grad_W += o.grad_W;
    return *this;
  }
  FcamGradient& operator*=(double s) {
    grad_u *= s;
    grad_W *= s;
    return *this;
  }
  bool finite() const { return grad_u.allFinite() && grad_W.allFinite(); }
};

namespace detail {

/// Posterior over segments, computed in log space from column log-softmaxes.
inline Vector posterior_from_logs(const Vector& log_a, const Matrix& lsm, Index y) {
  return softmax(log_a + lsm.row(y).transpose());
}

/// Gradient for explicit attention weights. When `with_u` is false the focus
/// is treated as fixed and grad_u is zero.
inline FcamGradient weighted_grad(const Matrix& W, const Matrix& X, Index y, const Vector& a,
                                  const Vector& log_a, Paradigm paradigm, bool with_u) {
  const Index d = X.rows(), C = W.rows();
  FcamGradient g = FcamGradient::zeros(d, C);
  const Vector x_bar = X * a;
  const Matrix centred = with_u ? Matrix(X.colwise() - x_bar) : Matrix();  // columns x_j - x~

  if (paradigm == Paradigm::SA) {
    Vector delta = -softmax(W * x_bar);
    delta(y) += 1.0;  // 1[y=k] - softmax_k
    g.grad_W.noalias() = -delta * x_bar.transpose();
    if (with_u) {
      const Vector r = W.transpose() * delta;
      g.grad_u.noalias() = -X * a.cwiseProduct(centred.transpose() * r);
    }
    return g;
  }

  const Matrix lsm = column_log_softmax(W * X);
  const Vector weight = paradigm == Paradigm::HA ? a : posterior_from_logs(log_a, lsm, y);
  Matrix delta = -lsm.array().exp().matrix();
  delta.row(y).array() += 1.0;
  g.grad_W.noalias() = -(delta * weight.asDiagonal()) * X.transpose();
  if (with_u) {
    const Vector coef = paradigm == Paradigm::HA ? Vector(a.cwiseProduct(lsm.row(y).transpose())) : weight;
    g.grad_u.noalias() = -centred * coef;
  }
  return g;
}

}  // namespace detail

/// Segment posterior of the LV loss, gamma_j = a_j P_yj / sum_j' a_j' P_yj'.
inline Vector lv_posterior(const FcamParams& p, const MosaicInstance& inst) {
  const Vector log_a = log_softmax(focus_scores(p, inst.segments));
  detail::check_label(p, inst);
  return detail::posterior_from_logs(log_a, column_log_softmax(p.W * inst.segments), inst.label);
}

inline FcamGradient grad(const FcamParams& p, const MosaicInstance& inst, Paradigm paradigm) {
  const Vector log_a = log_softmax(focus_scores(p, inst.segments));
  detail::check_label(p, inst);
  const Vector a = log_a.array().exp().matrix();
  return detail::weighted_grad(p.W, inst.segments, inst.label, a, log_a, paradigm, true);
}

/// Gradient of the fixed-focus loss: only the classifier receives a gradient.
inline FcamGradient fixed_focus_grad(const FcamParams& p, const MosaicInstance& inst, Paradigm paradigm,
                                     const FixedFocusSpec& spec) {
  check_dims(p, inst.segments);
  detail::check_label(p, inst);
  const Vector a = spec.weights(inst.segments.cols(), inst.fg_index);
  return detail::weighted_grad(p.W, inst.segments, inst.label, a, detail::safe_log(a), paradigm, false);
}

inline FcamGradient instance_grad(const FcamParams& p, const MosaicInstance& inst, Paradigm paradigm,
                                  const std::optional<FixedFocusSpec>& spec) {
  return spec ? fixed_focus_grad(p, inst, paradigm, *spec) : grad(p, inst, paradigm);
}

namespace detail {

using ExtVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
using ExtMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

inline long double ext_logsumexp(const ExtVector& v) {
  const long double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  long double s = 0.0L;
  for (Index i = 0; i < v.size(); ++i) s += std::exp(v(i) - mx);
  return mx + std::log(s);
}

/// The loss evaluated in long double, so central differences are not swamped
/// by rounding in the loss value itself.
inline long double ext_loss(const ExtVector& u, const ExtMatrix& W, const MosaicInstance& inst,
                            Paradigm paradigm, const std::optional<FixedFocusSpec>& spec) {
  const ExtMatrix X = inst.segments.cast<long double>();
  const Index m = X.cols(), y = inst.label;
  ExtVector log_a(m);
  if (spec) {
    const Vector a = spec->weights(m, inst.fg_index);
    for (Index j = 0; j < m; ++j) log_a(j) = a(j) > 0.0 ? std::log(static_cast<long double>(a(j))) : -INFINITY;
  } else {
    const ExtVector f = X.transpose() * u;
    log_a = f.array() - ext_logsumexp(f);
  }
  const ExtVector a = log_a.array().exp();
  auto log_p = [&](const ExtVector& x) {
    const ExtVector z = W * x;
    return z(y) - ext_logsumexp(z);
  };
  switch (paradigm) {
    case Paradigm::SA:
      return -log_p(X * a);
    case Paradigm::HA: {
      long double s = 0.0L;
      for (Index j = 0; j < m; ++j)
        if (a(j) > 0.0L) s -= a(j) * log_p(X.col(j));
      return s;
    }
    case Paradigm::LV: {
      ExtVector t(m);
      for (Index j = 0; j < m; ++j) t(j) = log_a(j) + log_p(X.col(j));
      return -ext_logsumexp(t);
    }
  }
  return NAN;
}

}  // namespace detail

/// Coordinate-wise central differences of the (fixed-focus) loss.
inline FcamGradient fd_grad(const FcamParams& p, const MosaicInstance& inst, Paradigm paradigm,
                            double h = 1e-5, const std::optional<FixedFocusSpec>& spec = std::nullopt) {
  if (!(h > 0.0)) throw InvalidInputError("finite-difference step must be positive");
  check_dims(p, inst.segments);
  detail::check_label(p, inst);
  detail::ExtVector u = p.u.cast<long double>();
  detail::ExtMatrix W = p.W.cast<long double>();
  const long double step = h;
  FcamGradient g = FcamGradient::zeros(p.d(), p.C());
  auto central = [&](long double& coord) {
    const long double saved = coord;
    coord = saved + step;
    const long double up = detail::ext_loss(u, W, inst, paradigm, spec);
    coord = saved - step;
    const long double down = detail::ext_loss(u, W, inst, paradigm, spec);
    coord = saved;
    return static_cast<double>((up - down) / (2.0L * step));
  };
  for (Index i = 0; i < p.d(); ++i) g.grad_u(i) = central(u(i));
  for (Index k = 0; k < p.C(); ++k)
    for (Index i = 0; i < p.d(); ++i) g.grad_W(k, i) = central(W(k, i));
  return g;
}

/// Probability-weighted sum of per-atom gradients.
inline FcamGradient population_grad(const FcamParams& p, const std::vector<WeightedInstance>& atoms,
                                    Paradigm paradigm,
                                    const std::optional<FixedFocusSpec>& spec = std::nullopt) {
  FcamGradient total = FcamGradient::zeros(p.d(), p.C());
  for (const auto& atom : atoms) {
    FcamGradient g = instance_grad(p, atom.instance, paradigm, spec);
    g *= atom.probability;
    total += g;
  }
  return total;
}

inline FcamGradient population_grad(const FcamParams& p, const SdcConfig& config, Paradigm paradigm,
                                    const std::optional<FixedFocusSpec>& spec = std::nullopt) {
  return population_grad(p, enumerate_population(config), paradigm, spec);
}

/// Mean of per-instance gradients over a set of instances.
template <typename InstanceRange>
FcamGradient mean_grad(const FcamParams& p, const InstanceRange& instances, Paradigm paradigm,
                       const std::optional<FixedFocusSpec>& spec = std::nullopt) {
  FcamGradient total = FcamGradient::zeros(p.d(), p.C());
  std::size_t n = 0;
  for (const MosaicInstance& inst : instances) {
    total += instance_grad(p, inst, paradigm, spec);
    ++n;
  }
  if (n == 0) throw InvalidInputError("cannot average gradient over zero instances");
  total *= 1.0 / static_cast<double>(n);
  return total;
}

inline FcamGradient dataset_grad(const FcamParams& p, const SdcDataset& ds, Paradigm paradigm,
                                 const std::optional<FixedFocusSpec>& spec = std::nullopt) {
  return mean_grad(p, ds.instances, paradigm, spec);
}

}  // namespace attnflow
