#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace glasshands::detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b * 0xD1B54A32D192ED03ULL);
  return splitmix64(s);
}

/// Standard normal deviates from a 4096-quantile inverse-CDF table, five per 64-bit draw.
/// Tails are truncated near 3.5 sigma; the table is rescaled to unit variance.
class TableGaussian {
 public:
  explicit TableGaussian(std::uint64_t seed) : state_(seed) {}

  double next() { return table()[next_index()]; }
  float next_float() { return float_table()[next_index()]; }

  /// Writes `n` deviates to `out`; same sequence as repeated next_float() from a fresh draw.
  void fill(float* out, std::size_t n) {
    const auto& t = float_table();
    std::size_t i = 0;
    while (remaining_ > 0 && i < n) out[i++] = next_float();
    for (; i + 5 <= n; i += 5) {
      std::uint64_t b = splitmix64(state_);
      for (int k = 0; k < 5; ++k, b >>= 12) out[i + k] = t[b & 0xFFF];
    }
    while (i < n) out[i++] = next_float();
  }

 private:
  static constexpr std::size_t kSize = 4096;

  std::size_t next_index() {
    if (remaining_ == 0) {
      bits_ = splitmix64(state_);
      remaining_ = 5;
    }
    const auto idx = static_cast<std::size_t>(bits_ & 0xFFF);
    bits_ >>= 12;
    --remaining_;
    return idx;
  }

  static const std::array<float, kSize>& float_table() {
    static const std::array<float, kSize> t = [] {
      std::array<float, kSize> f{};
      for (std::size_t i = 0; i < kSize; ++i) f[i] = static_cast<float>(table()[i]);
      return f;
    }();
    return t;
  }

  static const std::array<double, kSize>& table() {
    static const std::array<double, kSize> t = [] {
      std::array<double, kSize> q{};
      double var = 0.0;
      for (std::size_t i = 0; i < kSize; ++i) {
        const double p = (static_cast<double>(i) + 0.5) / kSize;
        double lo = -10.0, hi = 10.0;
        for (int it = 0; it < 80; ++it) {
          const double mid = 0.5 * (lo + hi);
          (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
        }
        q[i] = 0.5 * (lo + hi);
        var += q[i] * q[i];
      }
      const double scale = 1.0 / std::sqrt(var / kSize);
      for (auto& v : q) v *= scale;
      return q;
    }();
    return t;
  }

  std::uint64_t state_;
  std::uint64_t bits_ = 0;
  int remaining_ = 0;
};

}  // namespace glasshands::detail
