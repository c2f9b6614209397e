#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <string_view>

namespace r3 {

// Deterministic random stream keyed by (seed, name, indices). Two streams with
// the same key produce the same sequence regardless of when or where they are
// created, so concurrent rollouts stay reproducible.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::string_view name, std::initializer_list<std::uint64_t> indices = {});

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n). Requires n > 0.
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix64(std::uint64_t x);
// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t stable_hash(std::string_view text);

}  // namespace r3
