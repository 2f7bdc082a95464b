#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace cmrpipe {

/// Seedable generator with a fully specified bit stream.
///
/// The engine is `std::mt19937_64`, whose output sequence is fixed by the
/// C++ standard. The standard distributions are implementation-defined, so
/// every conversion to a real or integer draw is done here by hand:
///   uniform01   = (next() >> 11) * 2^-53           in [0, 1)
///   uniform(a,b) = a + (b - a) * uniform01
///   below(n)    = next() mod n, rejecting the biased tail of the range
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next() { return engine_(); }

  double uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Per-slice stream seed: mix of the master seed, the case id and the slice
/// index. Independent of processing order, so parallel runs draw the same
/// numbers as serial ones.
std::uint64_t derive_seed(std::uint64_t master, std::string_view case_id,
                          std::size_t slice_index) noexcept;

}  // namespace cmrpipe
