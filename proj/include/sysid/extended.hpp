#pragma once

#include <cstdint>
#include <limits>
#include <string>

namespace sysid {

// A time index that may be infinite, or only known to be at least some value
// because a search stopped at its cap.
class ExtTime {
 public:
  enum class Kind { kFinite, kInfinite, kAtLeast };

  static constexpr ExtTime finite(std::int64_t k) { return ExtTime(Kind::kFinite, k); }
  static constexpr ExtTime infinite() { return ExtTime(Kind::kInfinite, 0); }
  static constexpr ExtTime at_least(std::int64_t k) { return ExtTime(Kind::kAtLeast, k); }

  constexpr Kind kind() const { return kind_; }
  constexpr bool is_finite() const { return kind_ == Kind::kFinite; }
  constexpr bool is_infinite() const { return kind_ == Kind::kInfinite; }
  constexpr bool is_capped() const { return kind_ == Kind::kAtLeast; }

  // Finite value, or the lower bound for a capped value. Meaningless for infinite.
  constexpr std::int64_t value() const { return value_; }

  // Largest value this quantity is known to reach: +inf for infinite.
  double as_double() const {
    return is_infinite() ? std::numeric_limits<double>::infinity() : static_cast<double>(value_);
  }

  // Conservative comparisons: a capped value compares as its lower bound when
  // used as an upper end, and as unknown-but-large when used as a lower end.
  constexpr bool certainly_le(const ExtTime& other) const {
    if (other.is_infinite()) return true;
    if (is_infinite()) return false;
    if (is_capped()) return false;
    return value_ <= other.value_;
  }

  std::string str() const {
    switch (kind_) {
      case Kind::kFinite:
        return std::to_string(value_);
      case Kind::kInfinite:
        return "inf";
      case Kind::kAtLeast:
        return ">=" + std::to_string(value_);
    }
    return "?";
  }

  friend constexpr bool operator==(const ExtTime& a, const ExtTime& b) {
    return a.kind_ == b.kind_ && (a.kind_ == Kind::kInfinite || a.value_ == b.value_);
  }

 private:
  constexpr ExtTime(Kind kind, std::int64_t v) : kind_(kind), value_(v) {}
  Kind kind_;
  std::int64_t value_;
};

}  // namespace sysid
