#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sysid {

// Membership of a comparison function in the classes used by the growth
// assumptions. `verified` is false when the flags were declared by a user
// callable rather than derived from a power-sum representation.
struct ClassFlags {
  bool is_K = false;
  bool is_Kinf = false;
  bool is_1SE = false;
  bool is_2SE = false;
  bool is_APB = false;
  bool verified = true;
};

struct PowerTerm {
  double coeff = 0.0;
  double exponent = 0.0;
};

// r -> sum_i a_i r^{p_i} + offset with a_i, p_i, offset >= 0.
//
// The closed power-sum algebra covers both worked systems exactly and keeps
// class membership decidable. A user callable with self-declared flags can be
// wrapped with GrowthFn::custom(); such functions report verified = false and
// cannot be combined symbolically.
class GrowthFn {
 public:
  GrowthFn() = default;

  GrowthFn(std::vector<PowerTerm> terms, double offset) : offset_(offset) {
    if (!std::isfinite(offset) || offset < 0.0)
      throw std::invalid_argument("GrowthFn: offset must be finite and >= 0");
    for (const auto& t : terms) {
      if (!std::isfinite(t.coeff) || !std::isfinite(t.exponent) || t.coeff < 0.0 ||
          t.exponent < 0.0)
        throw std::invalid_argument("GrowthFn: coefficients and exponents must be finite and >= 0");
      add_term(t);
    }
  }

  static GrowthFn identity() { return power(1.0, 1.0); }
  static GrowthFn power(double coeff, double exponent) {
    return GrowthFn({{coeff, exponent}}, 0.0);
  }
  static GrowthFn constant(double c) { return GrowthFn({}, c); }

  // Extension point for comparison functions outside the power-sum algebra.
  // The callable must be nonnegative and nondecreasing on [0, inf); this is
  // not checked.
  static GrowthFn custom(std::function<double(double)> fn, ClassFlags declared,
                         std::string label = "custom") {
    GrowthFn g;
    declared.verified = false;
    g.custom_ = std::move(fn);
    g.custom_flags_ = declared;
    g.label_ = std::move(label);
    return g;
  }

  bool is_custom() const { return static_cast<bool>(custom_); }
  const std::vector<PowerTerm>& terms() const { return terms_; }
  double offset() const { return offset_; }

  double operator()(double r) const { return eval(r); }

  double eval(double r) const {
    if (!(r >= 0.0)) throw std::domain_error("GrowthFn: argument must be >= 0");
    if (custom_) return custom_(r);
    double s = offset_;
    for (const auto& t : terms_) s += t.coeff * pow_nonneg(r, t.exponent);
    return s;
  }

  ClassFlags classify() const {
    if (custom_) return custom_flags_;
    ClassFlags f;
    // Exponent-0 terms are folded into the offset on construction, so any
    // remaining term with a > 0 is strictly increasing and unbounded.
    bool increasing_part =
        std::any_of(terms_.begin(), terms_.end(), [](const PowerTerm& t) { return t.coeff > 0.0; });
    f.is_K = offset_ == 0.0 && increasing_part;
    f.is_Kinf = f.is_K;
    // ln(sum a r^{np}) = O(ln r) = o(r) for every finite power sum.
    f.is_1SE = true;
    f.is_2SE = true;
    f.is_APB = true;
    f.verified = true;
    return f;
  }

  friend GrowthFn operator+(const GrowthFn& a, const GrowthFn& b) {
    if (a.is_custom() || b.is_custom()) {
      ClassFlags fa = a.classify(), fb = b.classify();
      ClassFlags f{fa.is_K && fb.is_K, fa.is_Kinf || fb.is_Kinf, fa.is_1SE && fb.is_1SE,
                   fa.is_2SE && fb.is_2SE, fa.is_APB && fb.is_APB, false};
      f.is_Kinf = f.is_Kinf && f.is_K;
      return custom([a, b](double r) { return a.eval(r) + b.eval(r); }, f, a.label() + "+" + b.label());
    }
    GrowthFn out = a;
    out.offset_ += b.offset_;
    for (const auto& t : b.terms_) out.add_term(t);
    return out;
  }

  friend GrowthFn scale(const GrowthFn& f, double c) {
    if (!std::isfinite(c) || c < 0.0) throw std::invalid_argument("GrowthFn: scale must be >= 0");
    if (f.is_custom()) {
      ClassFlags fl = f.classify();
      if (c == 0.0) fl = ClassFlags{false, false, true, true, true, false};
      return custom([f, c](double r) { return c * f.eval(r); }, fl, f.label());
    }
    GrowthFn out;
    out.offset_ = c * f.offset_;
    for (const auto& t : f.terms_) out.add_term({c * t.coeff, t.exponent});
    return out;
  }

  std::string label() const {
    if (custom_) return label_;
    std::string s;
    for (const auto& t : terms_) {
      if (!s.empty()) s += " + ";
      s += std::to_string(t.coeff) + "*r^" + std::to_string(t.exponent);
    }
    if (offset_ != 0.0 || s.empty()) s += (s.empty() ? "" : " + ") + std::to_string(offset_);
    return s;
  }

 private:
  static double pow_nonneg(double r, double p) {
    if (p == 1.0) return r;
    if (p == 2.0) return r * r;
    return std::pow(r, p);
  }

  void add_term(PowerTerm t) {
    if (t.coeff == 0.0) return;
    if (t.exponent == 0.0) {
      offset_ += t.coeff;
      return;
    }
    auto it = std::find_if(terms_.begin(), terms_.end(),
                           [&](const PowerTerm& u) { return u.exponent == t.exponent; });
    if (it != terms_.end()) {
      it->coeff += t.coeff;
    } else {
      terms_.push_back(t);
      std::sort(terms_.begin(), terms_.end(),
                [](const PowerTerm& x, const PowerTerm& y) { return x.exponent < y.exponent; });
    }
  }

  std::vector<PowerTerm> terms_;
  double offset_ = 0.0;
  std::function<double(double)> custom_;
  ClassFlags custom_flags_;
  std::string label_;
};

}  // namespace sysid
