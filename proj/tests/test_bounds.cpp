#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "sysid/bounds.hpp"
#include "sysid/excitation.hpp"

using namespace sysid;

namespace {

const double kDelta = 0.4;
const Vec kX0 = Vec::Constant(1, 1.0);
const Vec kX0Di = (Vec(2) << 1.0, 0.0).finished();

SystemSpec pwa(double thr) {
  PwaOptions o;
  o.threshold = thr;
  return make_pwa_system(o);
}

ExcitationCertificate pwa_cert(double thr) {
  return certificate_from_moments(pwa_moment_certificate(thr, std::sqrt(0.1), 1.0), pwa_excitation_region(thr));
}

ExcitationCertificate di_cert() {
  return certificate_from_moments(double_integrator_certificate(1.0, 0.5, 1.0), Region::all());
}

BoundOptions opts(BurnInConstant c, DeltaUsage u) {
  BoundOptions o;
  o.burn_in_constant = c;
  o.delta_usage = u;
  return o;
}

}  // namespace

TEST(PointwiseBounds, PwaStateAndRegressor) {
  const SystemSpec s = pwa(3500.0);
  EXPECT_DOUBLE_EQ(state_bound_xbar(s, 0, kDelta / 3, kX0), 1.0);
  EXPECT_NEAR(state_bound_xbar(s, 100, kDelta / 3, kX0), 268.58230151605946226, 1e-11);
  EXPECT_DOUBLE_EQ(regressor_bound_zbar(s, 1, kDelta / 3, kX0), std::sqrt(2.0));
  EXPECT_THROW(regressor_bound_zbar(s, 0, kDelta / 3, kX0), std::domain_error);
  EXPECT_THROW(state_bound_xbar(s, 5, 1.2, kX0), std::domain_error);
}

TEST(PointwiseBounds, StateBoundMatchesOracle) {
  const SystemSpec s = pwa(3500.0);
  for (long t : {1L, 7L, 1000L, 65536L, 10000000L}) {
    const double ref = static_cast<double>(oracle::pwa_xbar(t, oracle::Real(kDelta) / 3));
    EXPECT_NEAR(state_bound_xbar(s, t, kDelta / 3, kX0), ref, 1e-13 * ref);
  }
}

TEST(GramianBound, UnitRegularisationFirstStep) {
  PwaOptions o;
  o.gamma = 1.0;
  EXPECT_DOUBLE_EQ(gramian_upper_beta(make_pwa_system(o), 1, kDelta / 3, kX0), 3.0);
}

TEST(GramianBound, FrozenPwaValues) {
  const SystemSpec s = pwa(3500.0);
  BoundTable table(s, kDelta / 3, kX0);
  EXPECT_NEAR(table.beta_max(3), 38.594611691242127722, 1e-12);
  EXPECT_NEAR(table.beta_max(100), 2300647.8183662498126, 1e-6);
  EXPECT_NEAR(table.beta_max(14705) / 10749391262897.741628, 1.0, 1e-12);
  const double ref = static_cast<double>(oracle::pwa_beta(2000, oracle::Real(kDelta) / 3, oracle::Real("1e-4")));
  EXPECT_NEAR(table.beta_max(2000) / ref, 1.0, 1e-12);
}

TEST(GramianBound, FrozenDoubleIntegratorValue) {
  const SystemSpec s = make_double_integrator();
  EXPECT_NEAR(gramian_upper_beta(s, 1000, kDelta / 3, kX0Di) / 2.542366862862473e19, 1.0, 1e-12);
}

TEST(GramianBound, TailUpperBoundDominatesExactSum) {
  const SystemSpec s = pwa(3500.0);
  BoundTable small(s, kDelta / 3, kX0, 1000);
  BoundTable big(s, kDelta / 3, kX0, 5000);
  for (Index t : {1001, 2000, 5000}) EXPECT_GE(small.zsum_upper(t), big.zsum(t));
  EXPECT_THROW(small.zsum(1001), std::out_of_range);
}

TEST(Containment, PwaHalfLine) {
  const SystemSpec s = pwa(3500.0);
  const Region r = pwa_excitation_region(3500.0);
  EXPECT_TRUE(reachable_containment(s, 3148.9, r).contained);
  EXPECT_FALSE(reachable_containment(s, 3148.9 + 1e-9, r).contained);
  EXPECT_TRUE(reachable_containment(s, 1e300, Region::all()).contained);
  EXPECT_FALSE(reachable_containment(s, INFINITY, r).contained);
  EXPECT_THROW(reachable_containment(s, -1.0, r), std::invalid_argument);
}

TEST(Containment, DoubleIntegratorBallIsConservative) {
  const SystemSpec s = make_double_integrator();
  const ContainmentResult c = reachable_containment(s, 1.0, Region::ball(Vec::Zero(2), 100.0));
  EXPECT_TRUE(c.contained);
  EXPECT_TRUE(c.conservative);
  EXPECT_FALSE(reachable_containment(s, 100.0, Region::ball(Vec::Zero(2), 100.0)).contained);
}

TEST(Containment, CustomFamilyHasNoBound) {
  SystemSpec s = pwa(3500.0);
  s.family = CustomFamily{};
  EXPECT_THROW(reachable_containment(s, 1.0, Region::half_line(10.0)), std::invalid_argument);
}

TEST(ExcitedTime, FrozenPwaValues) {
  const auto theorem = opts(BurnInConstant::kDefinition2Delta, DeltaUsage::kTheorem);
  const auto reported = opts(BurnInConstant::kDefinition2Delta, DeltaUsage::kReportedExample);
  EXPECT_EQ(excited_time(pwa(3500.0), pwa_cert(3500.0), kDelta, kX0, theorem), ExtTime::finite(1067));
  EXPECT_EQ(excited_time(pwa(3500.0), pwa_cert(3500.0), kDelta, kX0, reported), ExtTime::finite(1047));
  EXPECT_EQ(excited_time(pwa(5000.0), pwa_cert(5000.0), kDelta, kX0, theorem), ExtTime::finite(1505));
  EXPECT_EQ(excited_time(pwa(5000.0), pwa_cert(5000.0), kDelta, kX0, reported), ExtTime::finite(1478));
  EXPECT_TRUE(excited_time(pwa(INFINITY), pwa_cert(INFINITY), kDelta, kX0, theorem).is_infinite());
}

TEST(ExcitedTime, ContainmentHoldsAtAndFailsAfter) {
  const SystemSpec s = pwa(3500.0);
  const ExcitationCertificate c = pwa_cert(3500.0);
  const Index T = excited_time(s, c, kDelta, kX0).value();
  EXPECT_TRUE(reachable_containment(s, state_bound_xbar(s, T - 1, kDelta / 3, kX0), c.region).contained);
  EXPECT_FALSE(reachable_containment(s, state_bound_xbar(s, T, kDelta / 3, kX0), c.region).contained);
}

TEST(ExcitedTime, EmptyWhenStartOutsideRegion) {
  const SystemSpec s = pwa(3500.0);
  EXPECT_EQ(excited_time(s, pwa_cert(3500.0), kDelta, Vec::Constant(1, 5000.0)), ExtTime::finite(0));
}

TEST(BurnIn, FrozenPwaValuesAllConventions) {
  struct Case {
    BurnInConstant c;
    DeltaUsage u;
    Index expected;
  };
  for (const Case& k : {Case{BurnInConstant::kDefinition2Delta, DeltaUsage::kTheorem, 14705},
                        Case{BurnInConstant::kProof6Delta, DeltaUsage::kTheorem, 14475},
                        Case{BurnInConstant::kDefinition2Delta, DeltaUsage::kReportedExample, 14947},
                        Case{BurnInConstant::kProof6Delta, DeltaUsage::kReportedExample, 14718}}) {
    for (double thr : {3500.0, 5000.0, double(INFINITY)}) {
      const BurnInResult r = burn_in_time(pwa(thr), pwa_cert(thr), kDelta, kX0, opts(k.c, k.u));
      EXPECT_EQ(r.time, ExtTime::finite(k.expected)) << to_string(k.c) << " " << to_string(k.u) << " " << thr;
      EXPECT_TRUE(r.horizon_verified);
      EXPECT_TRUE(r.slack_growing);
      EXPECT_GT(r.final_slack, 0.0);
    }
  }
}

TEST(BurnIn, FrozenDoubleIntegratorValue) {
  const BurnInResult r = burn_in_time(make_double_integrator(), di_cert(), kDelta, kX0Di);
  EXPECT_EQ(r.time, ExtTime::finite(1393160));
  EXPECT_TRUE(r.horizon_verified);
  EXPECT_TRUE(r.used_sum_upper_bound);
}

TEST(BurnIn, StrongCertificateShortensBurnIn) {
  ExcitationCertificate strong = pwa_cert(INFINITY);
  strong.c_pe = 1.0;
  strong.p_pe = 1.0;
  const Index t_strong = burn_in_time(pwa(INFINITY), strong, kDelta, kX0).time.value();
  EXPECT_LT(t_strong, 1000);
  EXPECT_LT(t_strong, 14705);
}

TEST(BurnInProperty, SmallerDeltaNeverShortens) {
  const SystemSpec s = pwa(INFINITY);
  const ExcitationCertificate c = pwa_cert(INFINITY);
  Index prev = 0;
  for (double d : {0.8, 0.4, 0.2, 0.1, 0.05}) {
    const Index t = burn_in_time(s, c, d, kX0).time.value();
    EXPECT_GE(t, prev);
    prev = t;
  }
}

TEST(ErrorBound, FrozenPwaValues) {
  const SystemSpec s = pwa(3500.0);
  const ExcitationCertificate c = pwa_cert(3500.0);
  EXPECT_NEAR(error_bound_e(s, c, 14705, kDelta, kX0), 2.3219467884593281528, 1e-12);
  EXPECT_NEAR(error_bound_e(s, c, 100, kDelta, kX0), 22.330498329576388632, 1e-11);
}

TEST(ErrorBound, MatchesOracleFormula) {
  const SystemSpec s = pwa(3500.0);
  const ExcitationCertificate c = pwa_cert(3500.0);
  for (long t : {2L, 50L, 3000L}) {
    const oracle::Real d3 = oracle::Real(kDelta) / 3, g("1e-4");
    const oracle::Real beta = oracle::pwa_beta(t, d3, g);
    const double ref = static_cast<double>(oracle::error_bound(t, oracle::Real(kDelta), beta, g, sqrt(oracle::Real("1.01")),
                                                               sqrt(oracle::Real("0.1")), 1, 2, oracle::Real(c.c_pe),
                                                               oracle::Real(c.p_pe)));
    EXPECT_NEAR(error_bound_e(s, c, t, kDelta, kX0), ref, 1e-12 * ref) << t;
  }
}

TEST(ErrorBound, FrozenDoubleIntegratorValues) {
  const SystemSpec s = make_double_integrator();
  const ExcitationCertificate c = di_cert();
  EXPECT_NEAR(error_bound_e(s, c, 100, kDelta, kX0Di), 889.683, 1e-3);
  EXPECT_NEAR(error_bound_e(s, c, 10000, kDelta, kX0Di), 131.757, 1e-3);
  EXPECT_NEAR(error_bound_e(s, c, 1000000, kDelta, kX0Di), 15.3407, 1e-4);
}

TEST(ErrorBound, ExtendedBranches) {
  const SystemSpec s = pwa(3500.0);
  const ExcitationCertificate c = pwa_cert(3500.0);
  const double beta = 1e6;
  const double num = error_numerator(s, beta, kDelta);
  const ExtTime burn = ExtTime::finite(100), exc = ExtTime::finite(1000);
  EXPECT_DOUBLE_EQ(extended_error_from_beta(s, c, 50, kDelta, beta, burn, exc), num / std::sqrt(s.gamma));
  EXPECT_DOUBLE_EQ(extended_error_from_beta(s, c, 500, kDelta, beta, burn, exc),
                   error_bound_from_beta(s, c, 500, kDelta, beta));
  EXPECT_DOUBLE_EQ(extended_error_from_beta(s, c, 5000, kDelta, beta, burn, exc),
                   error_bound_from_beta(s, c, 1000, kDelta, beta));
  EXPECT_DOUBLE_EQ(extended_error_from_beta(s, c, 5000, kDelta, beta, burn, ExtTime::infinite()),
                   error_bound_from_beta(s, c, 5000, kDelta, beta));
}

TEST(ErrorBound, ImprovementConditionViolation) {
  const SystemSpec s = pwa(3500.0);
  const ExcitationCertificate c = pwa_cert(3500.0);
  try {
    extended_error_from_beta(s, c, 10, kDelta, 1e6, ExtTime::finite(14705), ExtTime::finite(1067));
    FAIL() << "expected a violation";
  } catch (const ImprovementConditionViolated& e) {
    EXPECT_EQ(e.burn_in(), ExtTime::finite(14705));
    EXPECT_EQ(e.excited(), ExtTime::finite(1067));
  }
  EXPECT_THROW(extended_error_from_beta(s, c, 10, kDelta, 1e6, ExtTime::infinite(), ExtTime::infinite()),
               ImprovementConditionViolated);
}

TEST(ErrorBoundProperty, DecreasingAndReproducible) {
  const SystemSpec s = make_double_integrator();
  const ExcitationCertificate c = di_cert();
  BoundTable table(s, kDelta / 3, kX0Di);
  double prev = INFINITY;
  for (Index t : geometric_grid(10, 100000, 10)) {
    const double e = error_bound_from_beta(s, c, t, kDelta, table.beta_max(t));
    EXPECT_LT(e, prev);
    prev = e;
  }
  for (Index t : {17, 4000, 99999}) {
    const double a = error_bound_e(s, c, t, kDelta, kX0Di);
    const double b = error_bound_e(s, c, t, kDelta, kX0Di);
    EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  }
}

TEST(RateEnvelope, DoubleIntegratorIsBounded) {
  const RateEnvelope r = rate_envelope(make_double_integrator(), di_cert(), kDelta, kX0Di, 1000, 1000000);
  EXPECT_TRUE(r.bounded);
  EXPECT_LE(r.trend, 1.1);
  EXPECT_GT(r.trend, 0.8);
}

TEST(RateEnvelope, DetectsSlowRates) {
  const SystemSpec s = make_double_integrator();
  const ExcitationCertificate c = di_cert();
  const RateEnvelope expo = rate_envelope_of(
      [&](Index t) { return error_bound_from_beta(s, c, t, kDelta, s.gamma * std::exp(t / 50.0)); }, 10, 10000);
  EXPECT_GT(expo.trend, 2.0);
  EXPECT_FALSE(expo.bounded);
  const RateEnvelope flat = rate_envelope_of([](Index) { return 1.0; }, 10, 100000);
  EXPECT_GT(flat.trend, 10.0);
}

TEST(RateEnvelope, NeedsGlobalCertificate) {
  EXPECT_THROW(rate_envelope(pwa(3500.0), pwa_cert(3500.0), kDelta, kX0, 100, 1000), std::invalid_argument);
}

TEST(Profile, ConsistentWithPointwiseFunctions) {
  const SystemSpec s = pwa(INFINITY);
  const ExcitationCertificate c = pwa_cert(INFINITY);
  const BoundProfile p = make_bound_profile(s, c, kDelta, kX0, 20000);
  EXPECT_EQ(p.burn_in.time, ExtTime::finite(14705));
  EXPECT_TRUE(p.improvement_condition());
  EXPECT_EQ(p.pe_interval(20000), (std::pair<Index, Index>{14705, 20000}));
  EXPECT_DOUBLE_EQ(p.e(s, 15000), error_bound_e(s, c, 15000, kDelta, kX0));
  EXPECT_DOUBLE_EQ(p.xbar[321], state_bound_xbar(s, 321, kDelta / 3, kX0));
  EXPECT_DOUBLE_EQ(p.e_tilde(s, 14000), error_numerator(s, p.beta_max[13999], kDelta) / std::sqrt(s.gamma));
}
