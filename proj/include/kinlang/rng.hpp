#pragma once

#include <array>
#include <cstdint>

namespace kinlang {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Variable tags used to separate independent draws sharing a step index.
enum class StreamTag : std::uint32_t {
  initial_state = 1,
  triple = 2,
  exp_pair = 3,
  half_exp_pairs = 4,
  midpoint = 5,
  dataset = 6,
  selftest = 7,
};

/// Identifies one independent stream of random numbers.
///
/// Every stream is a pure function of its key, so a draw never depends on how
/// many other streams were consumed before it or on which thread asked.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t chain = 0;
  std::uint64_t step = 0;
  std::uint32_t tag = 0;

  StreamKey with_step(std::uint64_t s) const { return {seed, chain, s, tag}; }
};

/// Source of uniform and standard normal variates.
///
/// Operations that consume randomness take this by reference, which lets tests
/// substitute a source whose Gaussian draws are zero.
class RandomSource {
 public:
  virtual ~RandomSource() = default;

  /// Uniform on the open interval (0, 1).
  virtual double uniform() = 0;
  /// Standard normal.
  virtual double normal() = 0;

  /// +1 or -1 with equal probability.
  int rademacher() { return uniform() < 0.5 ? 1 : -1; }
};

/// Counter-based stream: Philox4x32-10 keyed by a hash of (seed, chain), with
/// (step, tag, block) in the counter.
class PhiloxStream final : public RandomSource {
 public:
  explicit PhiloxStream(const StreamKey& key);
  PhiloxStream(std::uint64_t seed, std::uint64_t chain, std::uint64_t step, StreamTag tag)
      : PhiloxStream(StreamKey{seed, chain, step, static_cast<std::uint32_t>(tag)}) {}

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  double uniform() override;
  double normal() override;

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Gaussian draws are identically zero; uniforms still come from the wrapped key.
class ZeroNormalSource final : public RandomSource {
 public:
  explicit ZeroNormalSource(const StreamKey& key = {}) : uniforms_(key) {}
  double uniform() override { return uniforms_.uniform(); }
  double normal() override { return 0.0; }

 private:
  PhiloxStream uniforms_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace kinlang
