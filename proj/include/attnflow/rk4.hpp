#pragma once

#include <array>
#include <cstddef>

namespace attnflow {

/// One classic fourth-order Runge-Kutta step for dx/dt = f(t, x).
template <std::size_t N, typename System>
void rk4_step(const System& f, std::array<double, N>& x, double t, double dt) {
  using State = std::array<double, N>;
  auto axpy = [](const State& base, double h, const State& k) {
    State out;
    for (std::size_t i = 0; i < N; ++i) out[i] = base[i] + h * k[i];
    return out;
  };
  const double half = 0.5 * dt;
  const State k1 = f(t, x);
  const State k2 = f(t + half, axpy(x, half, k1));
  const State k3 = f(t + half, axpy(x, half, k2));
  const State k4 = f(t + dt, axpy(x, dt, k3));
  for (std::size_t i = 0; i < N; ++i) x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace attnflow
