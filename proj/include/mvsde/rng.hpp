#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace mvsde {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The output block is a pure function of (key, counter), so a stream can be
/// addressed directly by (seed, particle, step) without any sequential state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& ctr, const Key& key) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
};

/// SplitMix64 finalizer; used to derive independent seeds for replicas and
/// epsilon levels from one user seed.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(seed ^ mix64(a + 0x632BE59BD9B4E019ull)) ^ mix64(b + 0x85157AF5ull));
}

/// Gaussian increments addressed by (particle, step). Each call consumes one
/// or more Philox blocks whose counter encodes (particle, step, block), so
/// the numbers never depend on evaluation order or thread schedule.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  /// Fills `out` with iid N(0, 1) samples for the given (particle, step).
  void standard_normals(std::uint64_t particle, std::uint64_t step, std::span<double> out) const {
    std::size_t filled = 0;
    std::uint32_t block = 0;
    while (filled < out.size()) {
      const Philox4x32::Counter ctr{static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                                    static_cast<std::uint32_t>(particle), block++};
      const auto r = Philox4x32::generate(ctr, key_);
      // Two Box-Muller pairs per block; each pair uses 64 bits.
      for (int pair = 0; pair < 2 && filled < out.size(); ++pair) {
        const double u1 = to_open_unit(r[2 * pair]);
        const double u2 = to_open_unit(r[2 * pair + 1]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[filled++] = radius * std::cos(angle);
        if (filled < out.size()) out[filled++] = radius * std::sin(angle);
      }
    }
  }

 private:
  // Maps to (0, 1]; never returns 0 so log(u) stays finite.
  static double to_open_unit(std::uint32_t v) { return (static_cast<double>(v) + 1.0) * 0x1.0p-32; }

  Philox4x32::Key key_;
};

}  // namespace mvsde
