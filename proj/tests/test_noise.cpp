#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "sysid/noise.hpp"
#include "sysid/stats.hpp"

using namespace sysid;

TEST(Noise, UniformStaysInsideSupport) {
  const NoiseModel m = NoiseModel::uniform(0.5, 3);
  RngStream rng = make_stream(1, 0);
  for (int i = 0; i < 100000; ++i) {
    const Vec v = m.sample(rng);
    ASSERT_EQ(v.size(), 3);
    EXPECT_LE(v.cwiseAbs().maxCoeff(), 0.5);
  }
  EXPECT_DOUBLE_EQ(m.variance_proxy(), 0.25);
  EXPECT_NEAR(m.max_norm(), 0.5 * std::sqrt(3.0), 1e-15);
}

TEST(Noise, GaussianMomentsMatch) {
  const double sigma = 0.31622776601683794;
  const NoiseModel m = NoiseModel::gaussian(sigma, 2);
  RngStream rng = make_stream(2, 0);
  RunningMoments c0, c1;
  for (int i = 0; i < 1000000; ++i) {
    const Vec v = m.sample(rng);
    c0.push(v[0]);
    c1.push(v[1]);
  }
  EXPECT_LT(std::abs(c0.mean()), 5 * sigma / 1000.0);
  EXPECT_LT(std::abs(c1.mean()), 5 * sigma / 1000.0);
  EXPECT_NEAR(c0.variance() / (sigma * sigma), 1.0, 0.02);
  EXPECT_NEAR(c1.variance() / (sigma * sigma), 1.0, 0.02);
}

TEST(Noise, ZeroModelIsDegenerate) {
  RngStream rng = make_stream(3, 0);
  EXPECT_EQ(NoiseModel::zero(4).sample(rng), Vec::Zero(4));
  EXPECT_EQ(NoiseModel::zero(4).max_norm(), 0.0);
}

TEST(Noise, BadParametersThrow) {
  EXPECT_THROW(NoiseModel::gaussian(-1.0, 1), std::invalid_argument);
  EXPECT_THROW(NoiseModel::uniform(1.0, 0), std::invalid_argument);
  EXPECT_THROW(NoiseModel::gaussian(NAN, 1), std::invalid_argument);
}

TEST(NoiseBound, ZeroAtTimeZero) { EXPECT_EQ(noise_bound_wbar(0, 0.1, 1.0, 1), 0.0); }

TEST(NoiseBound, UnitLogArgumentGivesZero) {
  const double delta = std::numbers::pi * std::numbers::pi / 3.0;
  EXPECT_NEAR(noise_bound_wbar_unchecked(1, delta, 1.0, 1), 0.0, 1e-7);
}

TEST(NoiseBound, FrozenValues) {
  EXPECT_NEAR(noise_bound_wbar(100, 0.4 / 3.0, std::sqrt(0.1), 1), 1.5758230151605946226, 1e-13);
  EXPECT_NEAR(noise_bound_wbar(1, 0.1, 1.0, 2), 4.0922266587200087054, 1e-13);
}

TEST(NoiseBound, MatchesHighPrecisionOracle) {
  for (long t : {1L, 2L, 17L, 1000L, 123456L, 100000000L})
    for (double delta : {1e-6, 0.05, 0.4, 0.9})
      for (int n : {1, 2, 5}) {
        const double ref =
            static_cast<double>(oracle::wbar(t, oracle::Real(delta), oracle::Real(0.7), n));
        EXPECT_NEAR(noise_bound_wbar(t, delta, 0.7, n), ref, 1e-13 * ref) << t << " " << delta << " " << n;
      }
}

TEST(NoiseBound, DomainErrors) {
  EXPECT_THROW(noise_bound_wbar(5, 0.0, 1.0, 1), std::domain_error);
  EXPECT_THROW(noise_bound_wbar(5, 1.0, 1.0, 1), std::domain_error);
  EXPECT_THROW(noise_bound_wbar(5, 1.5, 1.0, 1), std::domain_error);
  EXPECT_THROW(noise_bound_wbar(-1, 0.1, 1.0, 1), std::domain_error);
  EXPECT_THROW(noise_bound_wbar(5, 0.1, 1.0, 0), std::domain_error);
  EXPECT_THROW(noise_bound_wbar(5, 0.1, -1.0, 1), std::domain_error);
}

TEST(NoiseBoundProperty, MonotoneInTimeAndDelta) {
  for (Index t = 1; t < 5000; t += 7) {
    EXPECT_LT(noise_bound_wbar(t, 0.1, 1.0, 2), noise_bound_wbar(t + 1, 0.1, 1.0, 2));
    EXPECT_GT(noise_bound_wbar(t, 0.01, 1.0, 2), noise_bound_wbar(t, 0.1, 1.0, 2));
  }
}

TEST(NoiseBoundProperty, EnvelopeHoldsOnSimulatedSequences) {
  const double delta = 0.1;
  const int n = 2, sequences = 2000, horizon = 1000;
  const NoiseModel m = NoiseModel::gaussian(1.0, n);
  int violated = 0;
  for (int s = 0; s < sequences; ++s) {
    RngStream rng = make_stream(99, static_cast<std::uint64_t>(s));
    for (Index t = 1; t <= horizon; ++t) {
      if (m.sample(rng).norm() > noise_bound_wbar(t, delta, 1.0, n)) {
        ++violated;
        break;
      }
    }
  }
  EXPECT_LE(wilson_interval(violated, sequences).lower, delta);
}
