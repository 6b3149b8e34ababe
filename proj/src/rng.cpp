#include "declab/rng.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace declab {
namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::array<uint32_t, 4> philox_round(const std::array<uint32_t, 4>& ctr,
                                            const std::array<uint32_t, 2>& key) {
  const uint64_t p0 = uint64_t(kPhiloxM0) * ctr[0];
  const uint64_t p1 = uint64_t(kPhiloxM1) * ctr[2];
  const uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
  const uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
  return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

std::array<uint32_t, 4> philox10(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
  ctr = philox_round(ctr, key);
  for (int r = 1; r < 10; ++r) {
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
    ctr = philox_round(ctr, key);
  }
  return ctr;
}

}  // namespace

RandomStream::RandomStream(uint64_t master_seed, uint32_t node, uint32_t iteration,
                           StreamTag tag)
    : key_{uint32_t(master_seed), uint32_t(master_seed >> 32)},
      prefix_{node, iteration, static_cast<uint32_t>(tag)} {}

void RandomStream::refill() {
  buf_ = philox10({prefix_[0], prefix_[1], prefix_[2], block_}, key_);
  ++block_;
  buf_pos_ = 0;
}

uint64_t RandomStream::next_u64() {
  if (buf_pos_ > 2) refill();
  const uint64_t lo = buf_[buf_pos_];
  const uint64_t hi = buf_[buf_pos_ + 1];
  buf_pos_ += 2;
  return lo | (hi << 32);
}

double RandomStream::uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

uint64_t RandomStream::below(uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("RandomStream::below: bound must be positive");
  const uint64_t threshold = (-bound) % bound;  // 2^64 mod bound
  for (;;) {
    const uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

double RandomStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so the log never sees zero.
  const double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = double(next_u64() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * M_PI * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

std::vector<int> sample_indices(int population, int count, RandomStream& rs) {
  if (population < 0 || count < 0 || count > population)
    throw std::invalid_argument("sample_indices: need 0 <= count <= population");
  std::vector<int> idx(population);
  std::iota(idx.begin(), idx.end(), 0);
  for (int j = 0; j < count; ++j) {
    const int swap_with = j + int(rs.below(uint64_t(population - j)));
    std::swap(idx[j], idx[swap_with]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace declab
