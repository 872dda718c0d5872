#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sysid/growth.hpp"

using sysid::GrowthFn;

TEST(GrowthFn, EvalIdentity) { EXPECT_DOUBLE_EQ(GrowthFn::identity()(5.0), 5.0); }

TEST(GrowthFn, EvalScaledIdentity) { EXPECT_DOUBLE_EQ(GrowthFn::power(0.1, 1.0)(3.0), 0.3); }

TEST(GrowthFn, EvalQuadratic) { EXPECT_DOUBLE_EQ(GrowthFn::power(5.0, 2.0)(2.0), 20.0); }

TEST(GrowthFn, NegativeArgumentIsDomainError) {
  EXPECT_THROW(GrowthFn::identity().eval(-1e-9), std::domain_error);
}

TEST(GrowthFn, RejectsNegativeOrNonFiniteParameters) {
  EXPECT_THROW(GrowthFn({{-1.0, 1.0}}, 0.0), std::invalid_argument);
  EXPECT_THROW(GrowthFn({{1.0, -2.0}}, 0.0), std::invalid_argument);
  EXPECT_THROW(GrowthFn({{1.0, 1.0}}, -0.5), std::invalid_argument);
  EXPECT_THROW(GrowthFn({{INFINITY, 1.0}}, 0.0), std::invalid_argument);
}

TEST(GrowthFn, ZeroAtZeroIsOffset) {
  const GrowthFn f({{2.0, 1.5}, {3.0, 0.5}}, 0.75);
  EXPECT_DOUBLE_EQ(f(0.0), 0.75);
}

TEST(GrowthFn, ClassifyIdentity) {
  const auto f = GrowthFn::identity().classify();
  EXPECT_TRUE(f.is_K);
  EXPECT_TRUE(f.is_Kinf);
  EXPECT_TRUE(f.is_1SE);
  EXPECT_TRUE(f.is_2SE);
  EXPECT_TRUE(f.is_APB);
  EXPECT_TRUE(f.verified);
}

TEST(GrowthFn, ClassifyConstant) {
  const auto f = GrowthFn::constant(2.5).classify();
  EXPECT_FALSE(f.is_K);
  EXPECT_FALSE(f.is_Kinf);
  EXPECT_TRUE(f.is_APB);
}

TEST(GrowthFn, ClassifyQuadratic) {
  const auto f = GrowthFn::power(5.0, 2.0).classify();
  EXPECT_TRUE(f.is_Kinf);
  EXPECT_TRUE(f.is_2SE);
  EXPECT_TRUE(f.is_APB);
}

TEST(GrowthFn, ClassifyOffsetBreaksK) {
  const auto f = (GrowthFn::identity() + GrowthFn::constant(1.0)).classify();
  EXPECT_FALSE(f.is_K);
  EXPECT_FALSE(f.is_Kinf);
}

TEST(GrowthFn, AddMergesLikeExponents) {
  const GrowthFn f = GrowthFn::identity() + GrowthFn::identity();
  ASSERT_EQ(f.terms().size(), 1u);
  EXPECT_DOUBLE_EQ(f.terms()[0].coeff, 2.0);
  EXPECT_DOUBLE_EQ(f.terms()[0].exponent, 1.0);
}

TEST(GrowthFn, ScaleIdentity) {
  const GrowthFn f = scale(GrowthFn::identity(), 0.1);
  ASSERT_EQ(f.terms().size(), 1u);
  EXPECT_DOUBLE_EQ(f.terms()[0].coeff, 0.1);
  EXPECT_DOUBLE_EQ(f(7.0), 0.7);
}

TEST(GrowthFn, QuadraticPlusConstantAtOne) {
  EXPECT_DOUBLE_EQ((GrowthFn::power(5.0, 2.0) + GrowthFn::constant(2.5))(1.0), 7.5);
}

TEST(GrowthFn, ScaleByZeroGivesZeroFunction) {
  const GrowthFn f = scale(GrowthFn::power(3.0, 2.0) + GrowthFn::constant(1.0), 0.0);
  EXPECT_EQ(f(10.0), 0.0);
  EXPECT_FALSE(f.classify().is_K);
}

TEST(GrowthFn, CustomCarriesDeclaredFlagsUnverified) {
  sysid::ClassFlags declared;
  declared.is_K = declared.is_Kinf = declared.is_1SE = declared.is_APB = true;
  const GrowthFn f = GrowthFn::custom([](double r) { return std::log1p(r); }, declared, "log1p");
  EXPECT_NEAR(f(std::exp(1.0) - 1.0), 1.0, 1e-15);
  const auto c = f.classify();
  EXPECT_TRUE(c.is_Kinf);
  EXPECT_FALSE(c.verified);
  EXPECT_FALSE((f + GrowthFn::identity()).classify().verified);
}

namespace {

GrowthFn random_fn(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coeff(0.0, 5.0), expo(0.0, 3.0), off(0.0, 2.0);
  std::uniform_int_distribution<int> count(0, 4);
  std::vector<sysid::PowerTerm> terms;
  for (int k = count(rng); k > 0; --k) terms.push_back({coeff(rng), expo(rng)});
  return GrowthFn(terms, off(rng));
}

}  // namespace

TEST(GrowthFnProperty, MonotoneOnRandomPairs) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> r(0.0, 100.0);
  for (int i = 0; i < 500; ++i) {
    const GrowthFn f = random_fn(rng);
    double a = r(rng), b = r(rng);
    if (a > b) std::swap(a, b);
    EXPECT_LE(f(a), f(b));
  }
}

TEST(GrowthFnProperty, AddAndScaleMatchPointwise) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> r(0.0, 50.0), c(0.0, 4.0);
  for (int i = 0; i < 100; ++i) {
    const GrowthFn f = random_fn(rng), g = random_fn(rng);
    const double x = r(rng), k = c(rng);
    const double sum = f(x) + g(x);
    EXPECT_NEAR((f + g)(x), sum, 8 * std::numeric_limits<double>::epsilon() * std::max(1.0, sum));
    const double sc = k * f(x);
    EXPECT_NEAR(scale(f, k)(x), sc, 8 * std::numeric_limits<double>::epsilon() * std::max(1.0, sc));
  }
}

TEST(GrowthFnProperty, KinfIsUnbounded) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const GrowthFn f = random_fn(rng);
    if (!f.classify().is_Kinf) continue;
    for (double m : {1e1, 1e3, 1e6, 1e9}) {
      double r = 1.0;
      while (f(r) < m && r < 1e300) r *= 2.0;
      EXPECT_GE(f(r), m);
    }
  }
}
