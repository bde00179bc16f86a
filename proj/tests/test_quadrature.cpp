#include <flownet/quadrature.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace flownet;

TEST(GaussLegendre, ExactForDegree63) {
  const auto& gl = gauss_legendre_32();
  EXPECT_NEAR(gl.integrate([](double x) { return std::pow(x, 62); }, 0.0, 1.0), 1.0 / 63.0, 1e-14);
  EXPECT_NEAR(gl.integrate([](double x) { return std::pow(x, 63); }, -1.0, 1.0), 0.0, 1e-14);
}

TEST(GaussLegendre, WeightsSumToIntervalLength) {
  double sum = 0.0;
  for (double w : gauss_legendre_32().weights) sum += w;
  EXPECT_NEAR(sum, 2.0, 1e-14);
}

TEST(GaussLegendre, SmoothIntegrand) {
  EXPECT_NEAR(gauss_legendre_32().integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi), 2.0, 1e-14);
}

TEST(GaussLegendre, ReversedLimitsFlipSign) {
  const auto f = [](double x) { return x * x; };
  EXPECT_NEAR(gauss_legendre_32().integrate(f, 1.0, 0.0), -1.0 / 3.0, 1e-15);
}

TEST(AdaptiveSimpson, Exponential) {
  EXPECT_NEAR(adaptive_simpson([](double x) { return std::exp(x); }, 0.0, 1.0, 1e-12), std::numbers::e - 1.0, 1e-11);
}

TEST(AdaptiveSimpson, Kink) {
  EXPECT_NEAR(adaptive_simpson([](double x) { return std::abs(x - 0.3); }, 0.0, 1.0, 1e-12), 0.5 * (0.09 + 0.49),
              1e-11);
}
