#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace darkside {

// Deterministic random stream. All sampling used for data pipelines goes
// through this class so that runs are reproducible across platforms; the
// bounded-int and real draws are implemented here instead of relying on
// std::uniform_*_distribution, whose draw sequences are not portable.
//
// Each worker owns its stream; the class is not thread-safe by itself.
class RngStream {
 public:
  explicit RngStream(uint64_t seed);

  uint64_t next_u64();

  // Uniform integer in [lo, hi], inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi);

  // Uniform real in [lo, hi).
  double uniform_real(double lo, double hi);

  double normal(double mean, double stddev);

  // Derived stream for a parallel worker or a sub-task. Depends only on the
  // construction seed and the tag, not on how much the parent has consumed.
  RngStream child(uint64_t tag) const;

  uint64_t seed() const { return base_seed_; }

  std::string serialize() const;
  static RngStream deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
  uint64_t base_seed_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

// splitmix64; used for seed derivation.
uint64_t mix_seed(uint64_t seed, uint64_t tag);

}  // namespace darkside
