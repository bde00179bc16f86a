#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>

namespace flownet {

/// Nodes and weights of an N-point Gauss-Legendre rule on [-1, 1].
template <std::size_t N>
struct GaussLegendre {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};

  GaussLegendre() {
    constexpr double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < (N + 1) / 2; ++i) {
      double x = std::cos(pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(N) + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = x;
        for (std::size_t k = 2; k <= N; ++k) {
          const double kk = static_cast<double>(k);
          const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
          p0 = p1;
          p1 = p2;
        }
        dp = static_cast<double>(N) * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[i] = -x;
      nodes[N - 1 - i] = x;
      weights[i] = weights[N - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }

  /// Integrates f over [a, b].
  template <typename F>
  double integrate(F&& f, double a, double b) const {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (std::size_t i = 0; i < N; ++i) sum += weights[i] * f(mid + half * nodes[i]);
    return half * sum;
  }
};

/// Process-wide 32-point rule used by the line integrals.
const GaussLegendre<32>& gauss_legendre_32();

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 50);

}  // namespace flownet
