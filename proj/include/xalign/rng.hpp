#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

namespace xalign {

/// Seeded random source with platform-independent draws.
///
/// The engine is std::mt19937_64 (fully specified by the standard); the
/// distributions are implemented here rather than taken from <random>, whose
/// distribution algorithms are implementation-defined. Streams derived with
/// `substream` are independent of each other and of call order elsewhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Named stream derived from a top-level seed, e.g. ("adversary.batches").
  static Rng substream(std::uint64_t seed, std::string_view name);

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Uniform real in [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Box-Muller, second variate cached).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  /// Serialized engine state, restorable with `restore`.
  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
  std::optional<double> cached_normal_;
};

}  // namespace xalign
