#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "relgen/errors.hpp"

namespace relgen {

/// Counter-based splittable generator.
///
/// Draw i of a stream with key k is finalize(k + (i+1) * PHI), so draws are
/// random-access and involve no hidden library state: identical seeds give
/// bit-identical integer sequences on every platform. child(stream) derives an
/// independent stream key from (key, stream), which lets callers hand each
/// table, row batch, or corpus slot its own generator without coordinating
/// draw counts.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(mix64(seed + kPhi)), counter_(0) {}

  /// Independent stream derived from (this stream's key, stream id).
  Rng child(std::uint64_t stream) const {
    Rng r(0);
    r.key_ = mix64(key_ ^ mix64(stream ^ 0xBF58476D1CE4E5B9ULL));
    r.counter_ = 0;
    return r;
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kPhi);
  }

  std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

  /// Uniform double in [0, 1), 53 mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw ContractError("uniform_int: empty range");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Exponential with the given mean.
  double exponential(double mean) {
    double u = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    return -mean * std::log(u);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct indices drawn uniformly from [0, n), returned ascending.
  /// k > n is clamped to n.
  std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k) {
    if (k >= n) {
      std::vector<std::uint32_t> all(n);
      for (std::uint32_t i = 0; i < n; ++i) all[i] = i;
      return all;
    }
    // Floyd's algorithm: k draws regardless of n.
    std::vector<std::uint32_t> picked;
    picked.reserve(k);
    for (std::uint32_t j = n - k; j < n; ++j) {
      std::uint32_t t = static_cast<std::uint32_t>(uniform_int(j + 1));
      if (std::find(picked.begin(), picked.end(), t) != picked.end()) {
        picked.push_back(j);
      } else {
        picked.push_back(t);
      }
    }
    std::sort(picked.begin(), picked.end());
    return picked;
  }

 private:
  static constexpr std::uint64_t kPhi = 0x9E3779B97F4A7C15ULL;

  // SplitMix64 finalizer: bijective avalanche over 64 bits.
  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace relgen
