#pragma once

#include <cstdint>
#include <string_view>

#include "mqrlr/gaussian.hpp"

namespace mqrlr {

// SplitMix64 finalizer; full-avalanche 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-based uniform stream. The draw at a given counter depends only on
// (seed, tag, index, counter), never on evaluation order, so parallel
// consumers (scenario paths, grid cells, replications) stay reproducible.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0)
      : key_(mix64(mix64(seed ^ hash_tag(tag)) ^
                   (0x9e3779b97f4a7c15ULL * (index + 1)))) {}

  std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix64(key_ ^ mix64(counter ^ 0x5851f42d4c957f2dULL));
  }

  // Uniform on the open interval (0,1); never returns an endpoint, so the
  // value is always a valid quantile probability.
  double uniform(std::uint64_t counter) const noexcept {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal(std::uint64_t counter) const {
    return normal_quantile(uniform(counter));
  }

 private:
  std::uint64_t key_;
};

}  // namespace mqrlr
