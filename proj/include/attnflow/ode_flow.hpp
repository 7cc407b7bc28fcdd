#pragma once

// Population gradient flow in the linear-orthogonal setting. From zero
// initialisation the parameters stay on
//   w_k(t) = mu(t) (s_k - mean_k' s_k'),   u(t) = nu(t) sum_k s_k,
// so the whole trajectory is described by the scalars (mu, nu).

#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "attnflow/common.hpp"
#include "attnflow/fcam.hpp"
#include "attnflow/io.hpp"
#include "attnflow/rk4.hpp"

namespace attnflow {

struct FlowState {
  double mu = 0.0;
  double nu = 0.0;
  double t = 0.0;
};

enum class FlowMode { FixedFocus, Joint };

inline std::string_view to_string(FlowMode m) { return m == FlowMode::Joint ? "joint" : "fixed"; }

struct FlowSample {
  double t, mu, nu, alpha, beta, Z;
};

struct FlowTrace {
  std::vector<FlowSample> samples;
  Paradigm paradigm = Paradigm::SA;
  FlowMode mode = FlowMode::Joint;
  double fixed_alpha = std::numeric_limits<double>::quiet_NaN();
  std::size_t m = 0;  ///< 0 in fixed-focus mode
  std::size_t C = 0;
  double dt = 0.0;
  std::size_t stride = 1;

  const FlowSample& back() const { return samples.back(); }
};

// Trajectory scalars ----------------------------------------------------------

/// Foreground attention e^nu / (e^nu + m - 1).
inline double focus_alpha(double nu, std::size_t m) {
  const double k = static_cast<double>(m) - 1.0;
  if (nu >= 0.0) return 1.0 / (1.0 + k * std::exp(-nu));
  const double e = std::exp(nu);
  return e / (e + k);
}

/// 1 - focus_alpha, without cancellation for large nu.
inline double focus_alpha_complement(double nu, std::size_t m) {
  const double k = static_cast<double>(m) - 1.0;
  if (nu >= 0.0) {
    const double e = std::exp(-nu);
    return k * e / (1.0 + k * e);
  }
  return k / (std::exp(nu) + k);
}

/// True-class probability e^mu / (e^mu + C - 1).
inline double class_beta(double mu, std::size_t C) { return focus_alpha(mu, C); }

/// LV mixture normaliser alpha beta + (1 - alpha) / C.
inline double mixture_norm(double alpha, double beta, std::size_t C) {
  return alpha * beta + (1.0 - alpha) / static_cast<double>(C);
}

namespace detail {

/// beta - 1/C, using expm1 near mu = 0.
inline double beta_excess(double mu, std::size_t C) {
  const double c = static_cast<double>(C);
  if (std::abs(mu) < 1.0) return std::expm1(mu) * (c - 1.0) / (c * (std::exp(mu) + c - 1.0));
  return class_beta(mu, C) - 1.0 / c;
}

/// log(C beta) = log C - log1p((C-1) e^{-mu}).
inline double log_c_beta(double mu, std::size_t C) {
  const double c = static_cast<double>(C);
  if (mu >= 0.0) return -std::log1p((c - 1.0) * std::exp(-mu)) + std::log(c);
  return std::log(c) + mu - std::log(std::exp(mu) + c - 1.0);
}

}  // namespace detail

/// d mu / dt for focus weight `alpha`.
inline double mu_rhs(const FlowState& s, Paradigm paradigm, double alpha, std::size_t C) {
  const double c = static_cast<double>(C);
  switch (paradigm) {
    case Paradigm::SA:
      return alpha / (std::exp(alpha * s.mu) + c - 1.0);
    case Paradigm::HA:
      // alpha beta / e^mu
      return alpha / (std::exp(s.mu) + c - 1.0);
    case Paradigm::LV: {
      // alpha beta^2 / (Z e^mu)
      const double beta = class_beta(s.mu, C);
      return alpha * beta / (mixture_norm(alpha, beta, C) * (std::exp(s.mu) + c - 1.0));
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// d nu / dt with alpha = focus_alpha(nu, m).
inline double nu_rhs(const FlowState& s, Paradigm paradigm, std::size_t m, std::size_t C) {
  const double c = static_cast<double>(C);
  const double alpha = focus_alpha(s.nu, m);
  const double spread = alpha * focus_alpha_complement(s.nu, m);  // alpha - alpha^2
  switch (paradigm) {
    case Paradigm::SA:
      return s.mu * (c - 1.0) * spread / (c * (std::exp(alpha * s.mu) + c - 1.0));
    case Paradigm::HA:
      return detail::log_c_beta(s.mu, C) / c * spread;
    case Paradigm::LV: {
      // (alpha / C)(beta / Z - 1) = (alpha / C)(1 - alpha)(beta - 1/C) / Z
      const double beta = class_beta(s.mu, C);
      return spread / c * detail::beta_excess(s.mu, C) / mixture_norm(alpha, beta, C);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// Integration -------------------------------------------------------------------

struct OdeGrid {
  double horizon;
  double dt;
};

/// Horizon long enough for the joint flow to pass its knee in all paradigms;
/// the initial rate scales as 1 / (m C).
inline OdeGrid default_joint_grid(std::size_t m, std::size_t C) {
  const double mc = static_cast<double>(m * C);
  return {1.5 * mc, mc <= 1e4 ? 1e-2 : 1e-1};
}

inline OdeGrid default_fixed_grid() { return {200.0, 1e-2}; }

namespace detail {

inline void check_grid(double T, double dt) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidInputError("horizon must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInputError("step must be positive");
}

template <typename Rhs, typename Sampler>
void run_rk4(std::array<double, 2>& x, double T, double dt, std::size_t stride, const Rhs& rhs,
             const Sampler& record) {
  if (stride == 0) stride = 1;
  const auto steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
  record(0.0, x);
  for (std::size_t i = 1; i <= steps; ++i) {
    const double t0 = static_cast<double>(i - 1) * dt;
    const double h = i == steps ? T - t0 : dt;
    rk4_step<2>(rhs, x, t0, h);
    if (!std::isfinite(x[0]) || !std::isfinite(x[1]))
      throw DivergenceError("gradient-flow integration produced a non-finite state", i);
    if (i % stride == 0 || i == steps) record(i == steps ? T : static_cast<double>(i) * dt, x);
  }
}

}  // namespace detail

/// RK4 on mu' = mu_rhs from mu(0) = 0 with focus weight held at alpha.
inline FlowTrace integrate_fixed_focus(Paradigm paradigm, double alpha, std::size_t C, double T, double dt,
                                       std::size_t stride = 1) {
  detail::check_grid(T, dt);
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInputError("alpha must lie in [0, 1]");
  if (C < 2) throw InvalidInputError("C must be at least 2");
  FlowTrace tr;
  tr.paradigm = paradigm;
  tr.mode = FlowMode::FixedFocus;
  tr.fixed_alpha = alpha;
  tr.C = C;
  tr.dt = dt;
  tr.stride = stride == 0 ? 1 : stride;
  std::array<double, 2> x{0.0, 0.0};
  auto rhs = [&](double, const std::array<double, 2>& s) {
    return std::array<double, 2>{mu_rhs({s[0], 0.0, 0.0}, paradigm, alpha, C), 0.0};
  };
  detail::run_rk4(x, T, dt, tr.stride, rhs, [&](double t, const std::array<double, 2>& s) {
    const double beta = class_beta(s[0], C);
    tr.samples.push_back({t, s[0], std::numeric_limits<double>::quiet_NaN(), alpha, beta,
                          mixture_norm(alpha, beta, C)});
  });
  return tr;
}

/// RK4 on the coupled (mu, nu) system from (0, 0).
inline FlowTrace integrate_joint(Paradigm paradigm, std::size_t m, std::size_t C, double T, double dt,
                                 std::size_t stride = 1) {
  detail::check_grid(T, dt);
  if (m < 2 || C < 2) throw InvalidInputError("m and C must be at least 2");
  FlowTrace tr;
  tr.paradigm = paradigm;
  tr.mode = FlowMode::Joint;
  tr.m = m;
  tr.C = C;
  tr.dt = dt;
  tr.stride = stride == 0 ? 1 : stride;
  std::array<double, 2> x{0.0, 0.0};
  auto rhs = [&](double, const std::array<double, 2>& s) {
    const FlowState st{s[0], s[1], 0.0};
    return std::array<double, 2>{mu_rhs(st, paradigm, focus_alpha(s[1], m), C), nu_rhs(st, paradigm, m, C)};
  };
  detail::run_rk4(x, T, dt, tr.stride, rhs, [&](double t, const std::array<double, 2>& s) {
    const double alpha = focus_alpha(s[1], m);
    const double beta = class_beta(s[0], C);
    tr.samples.push_back({t, s[0], s[1], alpha, beta, mixture_norm(alpha, beta, C)});
  });
  return tr;
}

// Parameter-space view -----------------------------------------------------------

/// Rows s_k - mean of basis columns, as a C x d matrix.
inline Matrix centered_class_directions(const Matrix& basis) {
  const Vector mean = basis.rowwise().mean();
  return (basis.colwise() - mean).transpose();
}

inline FcamParams reconstruct_params(double mu, double nu, const Matrix& basis) {
  return {nu * basis.rowwise().sum(), mu * centered_class_directions(basis)};
}

struct StructuredProjection {
  double mu = 0.0;
  double nu = 0.0;
  double residual_W = 0.0;  ///< Frobenius norm outside the mu direction
  double residual_u = 0.0;  ///< norm outside the nu direction
};

/// Least-squares coordinates of (u, W) along (sum_k s_k, centered directions).
inline StructuredProjection project_structured(const Vector& u, const Matrix& W, const Matrix& basis) {
  require_dims(W.rows() == basis.cols() && W.cols() == basis.rows() && u.size() == basis.rows(),
               "projection dimensions do not match basis");
  const Matrix D = centered_class_directions(basis);
  const Vector s = basis.rowwise().sum();
  StructuredProjection pr;
  pr.mu = (W.array() * D.array()).sum() / D.squaredNorm();
  pr.nu = u.dot(s) / s.squaredNorm();
  pr.residual_W = (W - pr.mu * D).norm();
  pr.residual_u = (u - pr.nu * s).norm();
  return pr;
}

inline StructuredProjection project_structured(const FcamParams& p, const Matrix& basis) {
  return project_structured(p.u, p.W, basis);
}

// CSV ------------------------------------------------------------------------------

inline void write_trace_csv(std::ostream& os, const FlowTrace& tr, const io::HeaderBlock& header = {}) {
  header.write(os, "# ");
  os << "t,mu,nu,alpha,beta,Z,paradigm,mode\n";
  for (const auto& s : tr.samples) {
    os << io::fmt17(s.t) << ',' << io::fmt17(s.mu) << ',' << io::fmt17(s.nu) << ',' << io::fmt17(s.alpha)
       << ',' << io::fmt17(s.beta) << ',' << io::fmt17(s.Z) << ',' << to_string(tr.paradigm) << ','
       << to_string(tr.mode) << '\n';
  }
}

}  // namespace attnflow
