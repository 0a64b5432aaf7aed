#pragma once

#include <cstdint>
#include <random>

namespace margeff {

/// What a random stream is used for. Part of the stream key so that
/// different consumers inside one replicate never share draws.
enum class StreamPurpose : std::uint64_t {
  trial_s1 = 1,
  trial_s2 = 2,
  maic_bootstrap = 3,
  gcomp_bootstrap = 4,
  calibration = 5,
};

/// Counter-style key identifying one independent stream:
/// (master seed, replicate, purpose, index). The index is the study for
/// calibration draws and the resample number for bootstrap streams.
struct StreamKey {
  std::uint64_t master = 0;
  std::uint64_t replicate = 0;
  StreamPurpose purpose = StreamPurpose::trial_s1;
  std::uint64_t index = 0;

  StreamKey with(StreamPurpose p, std::uint64_t i = 0) const noexcept {
    return {master, replicate, p, i};
  }
};

/// splitmix64 finalizer chained over the key fields.
std::uint64_t derive_seed(const StreamKey& key) noexcept;

/// Random source used everywhere in the engine: mt19937_64 seeded from a
/// derived key, with the uniform, normal and bounded-integer transforms
/// written out here so that draws do not depend on the standard library's
/// distribution implementations.
class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  explicit RandomStream(const StreamKey& key) : engine_(derive_seed(key)) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
  }

  /// Standard normal via the Box-Muller transform; the second variate of
  /// each pair is cached.
  double normal() noexcept;

  /// Uniform integer in [0, bound), bound > 0 (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t bound) noexcept;

private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace margeff
