#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace jointrecon {

/// 64-bit FNV-1a; used to key streams by their text label.
std::uint64_t fnv1a64(std::string_view text);

/// Counter-based random stream (Philox-4x32-10). The key is the seed and the
/// upper half of the counter is the label hash, so streams with distinct
/// labels never overlap and any (seed, label) reproduces the same sequence on
/// every platform. Single owner: derive child streams instead of sharing.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string label);

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

  /// Child stream labeled "<label>/<child>".
  RandomStream derive(const std::string& child) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform double in (0, 1].
  double uniform_open0();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double gaussian();
  std::uint64_t poisson(double mean);

 private:
  void refill();

  std::uint64_t seed_;
  std::string label_;
  std::uint64_t label_hash_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// n standard-normal draws.
std::vector<double> draw_gaussian(RandomStream& stream, std::size_t n);

}  // namespace jointrecon
