#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sysid/rng.hpp"
#include "sysid/types.hpp"

namespace sysid {

// Subsets of the state space used as excitation regions.
class Region {
 public:
  struct HalfLine {
    double upper;  // {x in R : x <= upper}; upper may be +inf
  };
  struct Ball {
    Vec center;
    double radius;  // may be +inf
  };
  struct All {};
  struct Predicate {
    std::function<bool(const Vec&)> contains;
    std::function<Vec(RngStream&)> sample;  // must only return members
    std::string label;
  };

  Region() : kind_(All{}) {}

  static Region half_line(double upper) {
    if (std::isnan(upper)) throw std::invalid_argument("Region: half-line bound is NaN");
    return Region(HalfLine{upper});
  }
  static Region ball(Vec center, double radius) {
    if (!(radius >= 0.0)) throw std::invalid_argument("Region: ball radius must be >= 0");
    return Region(Ball{std::move(center), radius});
  }
  static Region all() { return Region(All{}); }
  static Region predicate(std::function<bool(const Vec&)> contains, std::function<Vec(RngStream&)> sample,
                          std::string label = "predicate") {
    return Region(Predicate{std::move(contains), std::move(sample), std::move(label)});
  }

  const auto& kind() const { return kind_; }

  // True when the region is the whole space (including degenerate half-lines
  // and balls with infinite bound).
  bool is_all() const {
    if (std::holds_alternative<All>(kind_)) return true;
    if (auto* h = std::get_if<HalfLine>(&kind_)) return h->upper == std::numeric_limits<double>::infinity();
    if (auto* b = std::get_if<Ball>(&kind_)) return std::isinf(b->radius);
    return false;
  }

  bool contains(const Vec& x) const {
    return std::visit(
        [&](const auto& k) -> bool {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, HalfLine>) {
            if (x.size() != 1) throw std::invalid_argument("Region: half-line needs a scalar state");
            return x[0] <= k.upper;
          } else if constexpr (std::is_same_v<K, Ball>) {
            return (x - k.center).norm() <= k.radius;
          } else if constexpr (std::is_same_v<K, All>) {
            return true;
          } else {
            return k.contains(x);
          }
        },
        kind_);
  }

  // Deterministic-given-rng set of member states for Monte Carlo grids:
  // boundary points, a spread of interior points within `scale` of the
  // boundary, and a few far points when the region is unbounded.
  std::vector<Vec> sample_states(int count, int n, RngStream& rng, double scale) const {
    if (count < 1) throw std::invalid_argument("Region: need at least one sample");
    std::vector<Vec> out;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, HalfLine>) {
            if (n != 1) throw std::invalid_argument("Region: half-line needs n = 1");
            const double top = std::isinf(k.upper) ? 0.0 : k.upper;
            out.push_back(Vec::Constant(1, top));
            for (int i = 1; i < count - 1; ++i)
              out.push_back(Vec::Constant(1, top - scale * static_cast<double>(i) / (count - 1)));
            if (count > 1) out.push_back(Vec::Constant(1, top - 100.0 * scale));
          } else if constexpr (std::is_same_v<K, Ball>) {
            const double r = std::isinf(k.radius) ? scale : k.radius;
            out.push_back(k.center);
            for (int i = 1; i < count; ++i) {
              Vec dir(k.center.size());
              for (Index j = 0; j < dir.size(); ++j) dir[j] = gauss(rng);
              if (dir.norm() == 0.0) dir[0] = 1.0;
              dir.normalize();
              const double rad = (i % 4 == 0) ? r : r * std::pow(unit(rng), 1.0 / static_cast<double>(dir.size()));
              out.push_back(k.center + rad * dir);
            }
          } else if constexpr (std::is_same_v<K, All>) {
            out.push_back(Vec::Zero(n));
            for (int i = 1; i < count; ++i) {
              Vec v(n);
              const double s = (i % 5 == 0) ? 100.0 * scale : scale;
              for (int j = 0; j < n; ++j) v[j] = s * (2.0 * unit(rng) - 1.0);
              out.push_back(v);
            }
          } else {
            if (!k.sample) throw std::invalid_argument("Region: predicate region has no sampler");
            for (int i = 0; i < count; ++i) out.push_back(k.sample(rng));
          }
        },
        kind_);
    if (out.empty()) throw std::runtime_error("Region: empty state sample");
    return out;
  }

  std::string describe() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, HalfLine>) {
            return "halfline(-inf, " + std::to_string(k.upper) + "]";
          } else if constexpr (std::is_same_v<K, Ball>) {
            return "ball(radius=" + std::to_string(k.radius) + ")";
          } else if constexpr (std::is_same_v<K, All>) {
            return "all";
          } else {
            return k.label;
          }
        },
        kind_);
  }

 private:
  template <class K>
  explicit Region(K k) : kind_(std::move(k)) {}

  std::variant<HalfLine, Ball, All, Predicate> kind_;
};

}  // namespace sysid
