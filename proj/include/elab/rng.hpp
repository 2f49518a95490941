#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace elab {

/// Philox4x32-10 counter-based block cipher (Salmon et al. 2011).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t(kM0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(kM1) * ctr[2];
      ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
             std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Random stream of one path: counter = (block, tag, path_lo, path_hi), key = seed.
/// Draw n of a stream is a pure function of (seed, path, tag, n).
class PathStream {
 public:
  enum Tag : std::uint32_t { Increments = 0, Bridge = 1 };

  PathStream(std::uint64_t seed, std::uint64_t path, Tag tag) noexcept
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
        path_lo_(std::uint32_t(path)),
        path_hi_(std::uint32_t(path >> 32)),
        tag_(tag) {}

  static double to_uniform(std::uint32_t x) noexcept { return (double(x) + 0.5) * 0x1p-32; }

  /// Uniform in (0, 1) with index n along the stream.
  double uniform(std::uint64_t n) {
    load(n / 4);
    return to_uniform(raw_[n % 4]);
  }

  /// Standard normal with index n: inverse cdf of uniform n.
  double normal(std::uint64_t n) { return normal_quantile(uniform(n)); }

  /// Inverse standard normal cdf for p in (0, 1) (Wichura's AS241, relative error ~1e-16).
  static double normal_quantile(double p) noexcept {
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
      const double r = 0.180625 - q * q;
      return q *
             (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                  45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
               133.14166789178437745) * r + 3.387132872796366608) /
             (((((((5226.495278852545561 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                  21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
               42.313330701600911252) * r + 1.0);
    }
    double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
    double x;
    if (r <= 5.0) {
      r -= 1.6;
      x = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
    } else {
      r -= 5.0;
      x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
    }
    return q < 0.0 ? -x : x;
  }

 private:
  void load(std::uint64_t block) {
    if (block == block_) return;
    block_ = block;
    raw_ = Philox4x32::block({std::uint32_t(block), std::uint32_t(tag_) | (std::uint32_t(block >> 32) << 8),
                              path_lo_, path_hi_},
                             key_);
  }

  Philox4x32::Key key_;
  std::uint32_t path_lo_, path_hi_;
  std::uint32_t tag_;
  std::uint64_t block_ = ~std::uint64_t{0};
  Philox4x32::Counter raw_{};
};

}  // namespace elab
