#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace declab {

// Counter-based random streams (Philox-style 4x32 block function, 10 rounds).
// A stream is addressed by (master_seed, node, iteration, tag); every draw is
// a pure function of that address plus a per-stream block counter, so results
// do not depend on thread scheduling or evaluation order.

enum class StreamTag : uint32_t {
  minibatch = 1,
  init = 2,
  synth = 3,
  partition = 4,
  centralized = 5,
  generic = 6,
};

class RandomStream {
 public:
  RandomStream(uint64_t master_seed, uint32_t node, uint32_t iteration, StreamTag tag);

  uint64_t next_u64();
  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01();
  // Unbiased uniform integer on [0, bound); bound >= 1.
  uint64_t below(uint64_t bound);
  // Standard normal deviate (Box-Muller).
  double gaussian();

 private:
  void refill();

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 3> prefix_;
  uint32_t block_ = 0;
  std::array<uint32_t, 4> buf_{};
  int buf_pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Uniform sample without replacement: `count` distinct indices from
// [0, population), order as produced by a partial Fisher-Yates pass.
std::vector<int> sample_indices(int population, int count, RandomStream& rs);

}  // namespace declab
