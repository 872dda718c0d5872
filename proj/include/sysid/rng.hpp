#pragma once

#include <cstdint>
#include <random>

namespace sysid {

using RngStream = std::mt19937_64;

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Independent stream for (master seed, index, salt). Streams depend only on
// these three values, so Monte Carlo results do not depend on which worker
// runs which index.
inline RngStream make_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0) {
  std::uint64_t a = detail::splitmix64(seed ^ detail::splitmix64(salt + 0x51ed270b27ULL));
  std::uint64_t b = detail::splitmix64(a ^ detail::splitmix64(index + 0x2545f4914f6cdd1dULL));
  std::uint64_t c = detail::splitmix64(b);
  std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return RngStream(seq);
}

}  // namespace sysid
