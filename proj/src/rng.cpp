#include "darkside/rng.hpp"

#include <cmath>
#include <sstream>

#include "darkside/common.hpp"

namespace darkside {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

uint64_t mix_seed(uint64_t seed, uint64_t tag) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(uint64_t seed) : engine_(seed), base_seed_(seed) {}

uint64_t RngStream::next_u64() { return engine_(); }

int64_t RngStream::uniform_int(int64_t lo, int64_t hi) {
  if (lo > hi) throw ValidationError("uniform_int: empty range");
  uint64_t n = static_cast<uint64_t>(hi - lo) + 1;
  if (n == 0) return static_cast<int64_t>(next_u64());  // full 64-bit range
  // rejection sampling for an unbiased bounded draw
  uint64_t threshold = (0 - n) % n;
  for (;;) {
    uint64_t u = next_u64();
    if (u >= threshold) return lo + static_cast<int64_t>(u % n);
  }
}

double RngStream::uniform_real(double lo, double hi) {
  double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double RngStream::normal(double mean, double stddev) {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return mean + stddev * spare_normal_;
  }
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
  double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  spare_normal_ = r * std::sin(kTwoPi * u2);
  has_spare_normal_ = true;
  return mean + stddev * r * std::cos(kTwoPi * u2);
}

RngStream RngStream::child(uint64_t tag) const { return RngStream(mix_seed(base_seed_, tag)); }

std::string RngStream::serialize() const {
  std::ostringstream os;
  os << base_seed_ << ' ' << (has_spare_normal_ ? 1 : 0) << ' ';
  os.precision(17);
  os << spare_normal_ << ' ' << engine_;
  return os.str();
}

RngStream RngStream::deserialize(const std::string& state) {
  std::istringstream is(state);
  RngStream out(0);
  int spare_flag = 0;
  is >> out.base_seed_ >> spare_flag >> out.spare_normal_ >> out.engine_;
  if (!is) throw ValidationError("RngStream: malformed serialized state");
  out.has_spare_normal_ = spare_flag != 0;
  return out;
}

}  // namespace darkside
