#pragma once

#include <cstdint>

namespace ntkeig {

// Counter-based seeding scheme used everywhere randomness appears.
//
// Every random object is generated from a sub-seed obtained as
//   derive_seed(master, stream, index)
// where `stream` identifies the purpose (data points, weight rows, Monte
// Carlo shards, sweep cells, ...) and `index` is the position within that
// stream. Sub-seeds depend only on the three integers, never on evaluation
// order, so parallel and serial execution produce identical results.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

// Stream identifiers. Kept in one place so independent subsystems cannot
// collide on (stream, index) pairs for the same master seed.
namespace streams {
inline constexpr std::uint64_t kDataPoint = 0x01;
inline constexpr std::uint64_t kWeightRow = 0x02;
inline constexpr std::uint64_t kOuterWeight = 0x03;
inline constexpr std::uint64_t kMonteCarloShard = 0x04;
inline constexpr std::uint64_t kSweepCell = 0x05;
inline constexpr std::uint64_t kTrial = 0x06;
inline constexpr std::uint64_t kNetwork = 0x07;
inline constexpr std::uint64_t kResample = 0x08;
inline constexpr std::uint64_t kDeepLayer = 0x100;
}  // namespace streams

// Gaussian generator on top of splitmix64 (Box-Muller with a cached spare).
// Self-contained so that samples are bit-identical across platforms and
// thread counts.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : state_(seed) {}

  double next();

  // uniform on (0, 1]
  double next_uniform();

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ntkeig
