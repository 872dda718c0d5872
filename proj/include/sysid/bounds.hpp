#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sysid/excitation.hpp"
#include "sysid/extended.hpp"
#include "sysid/linalg.hpp"
#include "sysid/noise.hpp"
#include "sysid/region.hpp"
#include "sysid/system.hpp"

namespace sysid {

inline void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("delta must be in (0,1)");
}

// ---------------------------------------------------------------------------
// Pointwise bounds. `delta` here is the argument actually plugged in; callers
// that hold a total failure probability pass delta / 3.

inline double state_bound_xbar(const SystemSpec& spec, Index t, double delta, const Vec& x0) {
  if (t < 0) throw std::domain_error("xbar: t must be >= 0");
  const GrowthCertificate& g = spec.growth;
  const double td = static_cast<double>(t);
  const double w = noise_bound_wbar(t, delta, spec.sigma_w(), spec.n);
  return g.chi1(td) + g.chi2(x0.norm()) + g.chi3(td * g.sigma1(spec.u_max)) + g.chi4(td * g.sigma2(w)) + g.c1;
}

inline double regressor_bound_zbar(const SystemSpec& spec, Index t, double delta, const Vec& x0) {
  if (t < 1) throw std::domain_error("zbar: t must be >= 1");
  const double xb = state_bound_xbar(spec, t - 1, delta, x0);
  return spec.growth.chi5(std::hypot(xb, spec.u_max));
}

// Prefix sums of zbar^2 for one (spec, delta, x0), built on demand. Beyond
// `exact_limit` only an upper bound on the sum is available:
//   S(t) <= S(L) + (t - L) zbar(t)^2, since zbar is nondecreasing.
// Not thread-safe while growing; call reserve() before sharing.
class BoundTable {
 public:
  BoundTable(const SystemSpec& spec, double delta, Vec x0, Index exact_limit = Index{1} << 22)
      : spec_(&spec), delta_(delta), x0_(std::move(x0)), limit_(exact_limit) {
    check_delta(delta);
    sum_.push_back(0.0);
  }

  double delta() const { return delta_; }
  Index exact_limit() const { return limit_; }

  double xbar(Index t) const { return state_bound_xbar(*spec_, t, delta_, x0_); }
  double zbar(Index t) const { return regressor_bound_zbar(*spec_, t, delta_, x0_); }

  void reserve(Index t) {
    if (t > limit_) throw std::out_of_range("BoundTable: exact prefix sums requested beyond the table limit");
    for (Index i = static_cast<Index>(sum_.size()); i <= t; ++i) {
      const double z = zbar(i);
      sum_.push_back(sum_.back() + z * z);
    }
  }

  // sum_{i<=t} zbar(i)^2
  double zsum(Index t) {
    reserve(t);
    return sum_[static_cast<std::size_t>(t)];
  }

  double zsum_upper(Index t) {
    if (t <= limit_) return zsum(t);
    const double z = zbar(t);
    return zsum(limit_) + static_cast<double>(t - limit_) * z * z;
  }

  double beta_max(Index t) {
    if (t < 1) throw std::domain_error("beta_max: t must be >= 1");
    return zsum(t) + spec_->gamma;
  }

 private:
  const SystemSpec* spec_;
  double delta_;
  Vec x0_;
  Index limit_;
  std::vector<double> sum_;
};

inline double gramian_upper_beta(const SystemSpec& spec, Index t, double delta, const Vec& x0) {
  BoundTable table(spec, delta, x0, std::max<Index>(t, 1));
  return table.beta_max(t);
}

// ---------------------------------------------------------------------------
// One-step reachable set containment: Gamma(B_r(0) ∩ X) ⊆ region.

struct ContainmentResult {
  bool contained = false;
  bool conservative = false;  // true when a sufficient (not exact) test was used
};

namespace detail {

struct Ival {
  double lo, hi;
};

inline Ival ival_add(Ival a, Ival b) { return {a.lo + b.lo, a.hi + b.hi}; }
inline Ival ival_mul(Ival a, Ival b) {
  const double c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  Ival r{c[0], c[0]};
  for (double v : c) {
    if (std::isnan(v)) v = 0.0;  // 0 * inf on a degenerate interval
    r.lo = std::min(r.lo, v);
    r.hi = std::max(r.hi, v);
  }
  return r;
}
inline Ival ival_pow(Ival a, int p) {
  Ival r{1.0, 1.0};
  if (p % 2 == 0 && p > 0 && a.lo <= 0.0 && a.hi >= 0.0) {
    const double m = std::max(-a.lo, a.hi);
    return {0.0, std::pow(m, p)};
  }
  for (int k = 0; k < p; ++k) r = ival_mul(r, a);
  return r;
}

// Interval enclosure of g(x, u, 0) over the box |x_i| <= r, |u_j| <= u_max.
inline std::vector<Ival> generic_image_box(const SystemSpec& spec, const GenericFamily& fam, double r) {
  const int nv = spec.n + spec.m;
  std::vector<Ival> vars(static_cast<std::size_t>(nv));
  for (int i = 0; i < spec.n; ++i) vars[static_cast<std::size_t>(i)] = {-r, r};
  for (int j = 0; j < spec.m; ++j) vars[static_cast<std::size_t>(spec.n + j)] = {-spec.u_max, spec.u_max};
  auto term_ival = [&](const PolyTerm& t) {
    Ival v{t.coeff, t.coeff};
    for (std::size_t k = 0; k < t.powers.size(); ++k)
      if (t.powers[k] != 0) v = ival_mul(v, ival_pow(vars[k], t.powers[k]));
    // A gate can switch the term off anywhere in the box.
    if (t.gate_var >= 0) v = {std::min(v.lo, 0.0), std::max(v.hi, 0.0)};
    return v;
  };
  std::vector<Ival> psi(static_cast<std::size_t>(spec.d), Ival{0.0, 0.0});
  for (const auto& t : fam.psi_terms) psi[static_cast<std::size_t>(t.output)] = ival_add(psi[static_cast<std::size_t>(t.output)], term_ival(t));
  std::vector<Ival> out(static_cast<std::size_t>(spec.n), Ival{0.0, 0.0});
  for (const auto& t : fam.f_terms) out[static_cast<std::size_t>(t.output)] = ival_add(out[static_cast<std::size_t>(t.output)], term_ival(t));
  for (int i = 0; i < spec.n; ++i)
    for (int k = 0; k < spec.d; ++k) {
      const double c = spec.theta_star(k, i);
      out[static_cast<std::size_t>(i)] = ival_add(out[static_cast<std::size_t>(i)], ival_mul({c, c}, psi[static_cast<std::size_t>(k)]));
    }
  return out;
}

}  // namespace detail

inline ContainmentResult reachable_containment(const SystemSpec& spec, double radius, const Region& region) {
  if (!(radius >= 0.0)) throw std::invalid_argument("containment: radius must be >= 0");
  if (region.is_all()) return {true, false};
  const auto* half = std::get_if<Region::HalfLine>(&region.kind());
  const auto* ball = std::get_if<Region::Ball>(&region.kind());
  if (!half && !ball) throw std::invalid_argument("containment: unsupported region " + region.describe());
  if (std::isinf(radius)) return {false, false};

  if (std::holds_alternative<PwaFamily>(spec.family)) {
    if (!half) throw std::invalid_argument("containment: PWA system needs a half-line region");
    // g(x, u, 0) = 1 + theta1 x + theta2 1{x <= thr} u, largest at x = r.
    const double top = 1.0 + std::abs(spec.theta_star(0, 0)) * radius + std::abs(spec.theta_star(1, 0)) * spec.u_max;
    return {top <= half->upper, false};
  }
  if (std::holds_alternative<DoubleIntegratorFamily>(spec.family)) {
    if (!ball) throw std::invalid_argument("containment: double integrator needs a ball region");
    const Mat a = spec.theta_star.topRows(2).transpose();
    const double an = spectral_error(a, Mat::Zero(2, 2));
    const double reach = ball->center.norm() + an * radius + spec.theta_star.row(2).norm() * spec.u_max;
    return {reach <= ball->radius, true};
  }
  if (const auto* gen = std::get_if<GenericFamily>(&spec.family)) {
    const auto box = detail::generic_image_box(spec, *gen, radius);
    if (half) {
      if (spec.n != 1) throw std::invalid_argument("containment: half-line region needs n = 1");
      return {box[0].hi <= half->upper, true};
    }
    if (ball->center.size() != spec.n) throw std::invalid_argument("containment: ball centre has wrong dimension");
    double far = 0.0;
    for (int i = 0; i < spec.n; ++i) {
      const double c = ball->center[i];
      const double e = std::max(std::abs(box[static_cast<std::size_t>(i)].lo - c), std::abs(box[static_cast<std::size_t>(i)].hi - c));
      far += e * e;
    }
    return {std::sqrt(far) <= ball->radius, true};
  }
  throw std::invalid_argument("containment: no reachable-set bound for system '" + spec.name + "'");
}

// ---------------------------------------------------------------------------
// Times

enum class BurnInConstant { kDefinition2Delta, kProof6Delta };
// kTheorem evaluates T(delta) with the delta/3 split inside; kReportedExample
// evaluates T(delta/3), the argument used when the worked example reports times.
enum class DeltaUsage { kTheorem, kReportedExample };

inline const char* to_string(BurnInConstant c) {
  return c == BurnInConstant::kDefinition2Delta ? "2delta" : "6delta";
}
inline const char* to_string(DeltaUsage u) { return u == DeltaUsage::kTheorem ? "T(delta)" : "T(delta/3)"; }

struct BoundOptions {
  BurnInConstant burn_in_constant = BurnInConstant::kDefinition2Delta;
  DeltaUsage delta_usage = DeltaUsage::kTheorem;
  Index min_verification_horizon = 1'000'000;  // H = max(10 T, this)
  Index search_cap = Index{1} << 40;
  Index excited_cap = Index{1} << 50;
  Index exact_table_limit = Index{1} << 22;

  double delta_argument(double delta_total) const {
    return delta_usage == DeltaUsage::kTheorem ? delta_total : delta_total / 3.0;
  }
};

// sup{T : Gamma(B_{xbar(T-1, delta_arg/3)}) ⊆ region}, found by bisection on
// the nondecreasing radius. Empty set gives 0.
inline ExtTime excited_time_at(const SystemSpec& spec, const ExcitationCertificate& cert, double delta_arg,
                               const Vec& x0, Index cap = Index{1} << 50) {
  check_delta(delta_arg);
  if (cert.region.is_all()) return ExtTime::infinite();
  auto ok = [&](Index T) {
    return reachable_containment(spec, state_bound_xbar(spec, T - 1, delta_arg / 3.0, x0), cert.region).contained;
  };
  if (!ok(1)) return ExtTime::finite(0);
  if (ok(cap)) return ExtTime::at_least(cap);
  Index lo = 1, hi = cap;  // ok(lo), !ok(hi)
  while (hi - lo > 1) {
    const Index mid = lo + (hi - lo) / 2;
    (ok(mid) ? lo : hi) = mid;
  }
  return ExtTime::finite(lo);
}

inline ExtTime excited_time(const SystemSpec& spec, const ExcitationCertificate& cert, double delta_total,
                            const Vec& x0, const BoundOptions& opt = {}) {
  check_delta(delta_total);
  return excited_time_at(spec, cert, opt.delta_argument(delta_total), x0, opt.excited_cap);
}

struct BurnInResult {
  ExtTime time = ExtTime::infinite();
  Index horizon = 0;            // verification horizon H used for the returned T
  bool horizon_verified = false;
  bool slack_growing = false;   // t - RHS(t) positive and increasing over [H/10, H]
  double final_slack = 0.0;
  bool used_sum_upper_bound = false;  // some t exceeded the exact prefix table
};

namespace detail {

class BurnInCondition {
 public:
  BurnInCondition(const SystemSpec& spec, const ExcitationCertificate& cert, double delta_arg, const Vec& x0,
                  BurnInConstant constant, Index table_limit)
      : table_(spec, delta_arg / 3.0, x0, table_limit),
        d_(spec.d),
        cp_(cert.c_pe * cert.p_pe),
        a_(2.0 / ((1.0 - std::numbers::ln2) * cert.p_pe)),
        k_delta_((constant == BurnInConstant::kDefinition2Delta ? 2.0 : 6.0) * delta_arg) {}

  // Upper bound on the right-hand side for every t in [a, b] with start T.
  double rhs_block(Index T, Index a, Index b) {
    if (b > table_.exact_limit()) upper_used_ = true;
    const double s = table_.zsum_upper(b);
    const double span = static_cast<double>(b - T + 1);
    return a_ * (d_ * std::log1p(16.0 * s / (cp_ * static_cast<double>(a - 1))) +
                 std::log(std::numbers::pi * std::numbers::pi * span * span / k_delta_)) +
           1.0;
  }

  double slack(Index T, Index t) { return static_cast<double>(t) - rhs_block(T, t, t); }

  // t >= RHS(t) for all t in [T, H], checked on geometric blocks that are
  // split until the block bound holds or a single t fails.
  bool holds(Index T, Index H) {
    Index a = T;
    std::vector<std::pair<Index, Index>> stack;
    while (a <= H) {
      Index b = std::min(H, a + a / 1024);
      stack.assign(1, {a, b});
      while (!stack.empty()) {
        auto [lo, hi] = stack.back();
        stack.pop_back();
        if (static_cast<double>(lo) >= rhs_block(T, lo, hi)) continue;
        if (lo == hi) return false;
        const Index mid = lo + (hi - lo) / 2;
        stack.push_back({mid + 1, hi});
        stack.push_back({lo, mid});
      }
      a = b + 1;
    }
    return true;
  }

  bool upper_used() const { return upper_used_; }

 private:
  BoundTable table_;
  int d_;
  double cp_, a_, k_delta_;
  bool upper_used_ = false;
};

}  // namespace detail

// Literal definition evaluated at delta_arg: inf{T : t >= RHS(t; T) for all t >= T},
// with the tail verified up to H = max(10 T, min_verification_horizon) plus a
// slack-growth check over the last decade of [T, H].
inline BurnInResult burn_in_time_at(const SystemSpec& spec, const ExcitationCertificate& cert, double delta_arg,
                                    const Vec& x0, BurnInConstant constant, const BoundOptions& opt = {}) {
  check_delta(delta_arg);
  cert.validate();
  detail::BurnInCondition cond(spec, cert, delta_arg, x0, constant, opt.exact_table_limit);
  auto horizon = [&](Index T) { return std::max(10 * T, opt.min_verification_horizon); };
  auto ok = [&](Index T) { return cond.holds(T, horizon(T)); };

  BurnInResult res;
  // t = 1 makes the Gramian term singular, so T starts at 2.
  Index hi = 2;
  while (!ok(hi)) {
    if (hi >= opt.search_cap) {
      res.time = ExtTime::infinite();
      res.used_sum_upper_bound = cond.upper_used();
      return res;
    }
    hi = std::min(hi * 2, opt.search_cap);
  }
  Index lo = std::max<Index>(1, hi / 2);  // !ok(lo) unless lo == 1
  while (hi - lo > 1) {
    const Index mid = lo + (hi - lo) / 2;
    (ok(mid) ? hi : lo) = mid;
  }
  const Index T = hi;
  const Index H = horizon(T);
  res.time = ExtTime::finite(T);
  res.horizon = H;
  res.horizon_verified = true;
  Index start = std::max(T, H / 10);
  double prev = -std::numeric_limits<double>::infinity();
  res.slack_growing = true;
  for (int k = 0; k <= 10; ++k) {
    const auto t = static_cast<Index>(std::llround(static_cast<double>(start) *
                                                   std::pow(static_cast<double>(H) / start, k / 10.0)));
    const double s = cond.slack(T, std::min(t, H));
    if (!(s > 0.0) || s < prev) res.slack_growing = false;
    prev = s;
    res.final_slack = s;
  }
  res.used_sum_upper_bound = cond.upper_used();
  return res;
}

inline BurnInResult burn_in_time(const SystemSpec& spec, const ExcitationCertificate& cert, double delta_total,
                                 const Vec& x0, const BoundOptions& opt = {}) {
  check_delta(delta_total);
  return burn_in_time_at(spec, cert, opt.delta_argument(delta_total), x0, opt.burn_in_constant, opt);
}

// ---------------------------------------------------------------------------
// Error bounds

// Numerator sigma_w sqrt(2n (ln(3n/delta) + (d/2) ln(beta/gamma))) + sqrt(gamma) |theta*|_F.
inline double error_numerator(const SystemSpec& spec, double beta, double delta) {
  const double n = spec.n;
  const double inner = std::log(3.0 * n / delta) + 0.5 * spec.d * std::log(beta / spec.gamma);
  return std::sqrt(spec.gamma) * spec.theta_star.norm() + spec.sigma_w() * std::sqrt(2.0 * n * std::max(inner, 0.0));
}

inline double pe_lower_bound(const ExcitationCertificate& cert, double gamma, double t) {
  return 0.25 * cert.c_pe * cert.p_pe * (t - 1.0) + gamma;
}

// e(t) with beta_max supplied directly.
inline double error_bound_from_beta(const SystemSpec& spec, const ExcitationCertificate& cert, Index t,
                                    double delta, double beta) {
  if (t < 1) throw std::domain_error("error bound: t must be >= 1");
  check_delta(delta);
  return error_numerator(spec, beta, delta) / std::sqrt(pe_lower_bound(cert, spec.gamma, static_cast<double>(t)));
}

inline double error_bound_e(const SystemSpec& spec, const ExcitationCertificate& cert, Index t, double delta,
                            const Vec& x0) {
  check_delta(delta);
  const double beta = gramian_upper_beta(spec, t, delta / 3.0, x0);
  return error_bound_from_beta(spec, cert, t, delta, beta);
}

class ImprovementConditionViolated : public std::runtime_error {
 public:
  ImprovementConditionViolated(ExtTime burn, ExtTime excited)
      : std::runtime_error("improvement condition violated: T_burn_in=" + burn.str() + " > T_excited=" + excited.str()),
        burn_(burn),
        excited_(excited) {}
  ExtTime burn_in() const { return burn_; }
  ExtTime excited() const { return excited_; }

 private:
  ExtTime burn_, excited_;
};

// Three-regime bound valid for all t: denominator sqrt(gamma) before burn-in,
// e(t) on the PE interval, and the denominator frozen at T_excited afterwards.
// A capped T_excited freezes at its lower bound, which only enlarges the bound.
inline double extended_error_from_beta(const SystemSpec& spec, const ExcitationCertificate& cert, Index t,
                                       double delta, double beta, ExtTime burn_in, ExtTime excited) {
  if (t < 1) throw std::domain_error("error bound: t must be >= 1");
  check_delta(delta);
  if (!burn_in.is_finite() || (!excited.is_infinite() && burn_in.value() > excited.value()))
    throw ImprovementConditionViolated(burn_in, excited);
  const double num = error_numerator(spec, beta, delta);
  const auto td = static_cast<double>(t);
  if (t < burn_in.value()) return num / std::sqrt(spec.gamma);
  if (excited.is_infinite() || t <= excited.value()) return num / std::sqrt(pe_lower_bound(cert, spec.gamma, td));
  return num / std::sqrt(pe_lower_bound(cert, spec.gamma, static_cast<double>(excited.value())));
}

// ---------------------------------------------------------------------------
// Profile

struct BoundProfile {
  double delta = 0.0;
  Vec x0;
  Index horizon = 0;
  BoundOptions options;
  std::vector<double> wbar;      // [t-1], t = 1..H, at delta/3
  std::vector<double> xbar;      // [t],   t = 0..H, at delta/3
  std::vector<double> zbar;      // [t-1]
  std::vector<double> beta_max;  // [t-1]
  BurnInResult burn_in;
  ExtTime excited = ExtTime::infinite();
  ExcitationCertificate cert;

  bool improvement_condition() const {
    if (!burn_in.time.is_finite()) return false;
    return excited.is_infinite() || burn_in.time.value() <= excited.value();
  }

  // PE interval clipped to [1, horizon]; empty when first > last.
  std::pair<Index, Index> pe_interval(Index up_to) const {
    if (!burn_in.time.is_finite()) return {1, 0};
    const Index first = burn_in.time.value();
    Index last = up_to;
    if (!excited.is_infinite()) last = std::min(last, excited.value());
    return {first, last};
  }

  double e(const SystemSpec& spec, Index t) const {
    return error_bound_from_beta(spec, cert, t, delta, beta_max.at(static_cast<std::size_t>(t - 1)));
  }
  double e_tilde(const SystemSpec& spec, Index t) const {
    return extended_error_from_beta(spec, cert, t, delta, beta_max.at(static_cast<std::size_t>(t - 1)),
                                    burn_in.time, excited);
  }
};

inline BoundProfile make_bound_profile(const SystemSpec& spec, const ExcitationCertificate& cert, double delta,
                                       const Vec& x0, Index horizon, const BoundOptions& opt = {}) {
  check_delta(delta);
  if (horizon < 1) throw std::domain_error("profile: horizon must be >= 1");
  BoundProfile p;
  p.delta = delta;
  p.x0 = x0;
  p.horizon = horizon;
  p.options = opt;
  p.cert = cert;
  const double d3 = delta / 3.0;
  BoundTable table(spec, d3, x0, horizon);
  p.xbar.push_back(table.xbar(0));
  for (Index t = 1; t <= horizon; ++t) {
    p.wbar.push_back(noise_bound_wbar(t, d3, spec.sigma_w(), spec.n));
    p.xbar.push_back(table.xbar(t));
    p.zbar.push_back(table.zbar(t));
    p.beta_max.push_back(table.beta_max(t));
  }
  p.burn_in = burn_in_time(spec, cert, delta, x0, opt);
  p.excited = excited_time(spec, cert, delta, x0, opt);
  return p;
}

// ---------------------------------------------------------------------------
// Rate envelope e(t) sqrt(t / ln t)

struct RateEnvelope {
  std::vector<double> t;
  std::vector<double> value;
  double sup_value = 0.0;
  double trend = 0.0;  // last-decade mean / first-decade mean
  bool bounded = false;  // trend <= 1.1
};

inline std::vector<Index> geometric_grid(Index t_lo, Index t_hi, int per_decade = 20) {
  if (t_lo < 2 || t_hi <= t_lo) throw std::domain_error("rate envelope: need 2 <= t_lo < t_hi");
  std::vector<Index> out;
  const double step = std::pow(10.0, 1.0 / per_decade);
  for (double x = static_cast<double>(t_lo); x <= static_cast<double>(t_hi) * (1.0 + 1e-12); x *= step) {
    const auto t = static_cast<Index>(std::llround(x));
    if (out.empty() || t != out.back()) out.push_back(t);
  }
  if (out.back() != t_hi) out.push_back(t_hi);
  return out;
}

inline RateEnvelope rate_envelope_of(const std::function<double(Index)>& e, Index t_lo, Index t_hi,
                                     int per_decade = 20) {
  RateEnvelope r;
  for (Index t : geometric_grid(t_lo, t_hi, per_decade)) {
    const auto td = static_cast<double>(t);
    r.t.push_back(td);
    r.value.push_back(e(t) * std::sqrt(td / std::log(td)));
  }
  r.sup_value = *std::max_element(r.value.begin(), r.value.end());
  double first = 0.0, last = 0.0;
  int nf = 0, nl = 0;
  const double lo = r.t.front(), hi = r.t.back();
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    if (r.t[i] <= lo * 10.0) first += r.value[i], ++nf;
    if (r.t[i] >= hi / 10.0) last += r.value[i], ++nl;
  }
  r.trend = (last / nl) / (first / nf);
  r.bounded = r.trend <= 1.1;
  return r;
}

inline RateEnvelope rate_envelope(const SystemSpec& spec, const ExcitationCertificate& cert, double delta,
                                  const Vec& x0, Index t_lo, Index t_hi) {
  check_delta(delta);
  if (!cert.region.is_all()) throw std::invalid_argument("rate envelope: needs a global excitation certificate");
  if (!spec.growth.polynomial()) throw std::invalid_argument("rate envelope: needs a polynomial growth certificate");
  BoundTable table(spec, delta / 3.0, x0, t_hi);
  table.reserve(t_hi);
  return rate_envelope_of(
      [&](Index t) { return error_bound_from_beta(spec, cert, t, delta, table.beta_max(t)); }, t_lo, t_hi);
}

}  // namespace sysid
