#pragma once

#include <cstdint>
#include <random>

namespace qdmd {

// Gaussian stream with a fully pinned-down algorithm (mt19937_64 +
// Box-Muller) so that a seed reproduces the same samples bitwise on any
// platform; std::normal_distribution is implementation-defined and is
// deliberately avoided.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : gen_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0,1], u2 in [0,1)
    const double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1p-53;
    const double u2 = static_cast<double>(gen_() >> 11) * 0x1p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double uniform() {  // [0,1)
    return static_cast<double>(gen_() >> 11) * 0x1p-53;
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64-style mixing so per-stream seeds derived from (master, index)
// are decorrelated regardless of index spacing.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace qdmd
