#ifndef SIMSIAM_RNG_HPP
#define SIMSIAM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace simsiam {

// Counter-based splittable RNG. A stream is keyed by a root seed plus a
// derivation path (e.g. sample id, epoch, view index); identical paths give
// identical draws, distinct paths give independent streams. Draws are
// platform-independent, unlike the <random> distributions.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t root) : state_(mix(root ^ kRootTag)) {}

  SplitRng(std::uint64_t root, std::initializer_list<std::uint64_t> path)
      : SplitRng(root) {
    for (std::uint64_t p : path) descend(p);
  }

  // Derive a child stream; does not disturb this stream's counter.
  SplitRng child(std::uint64_t key) const {
    SplitRng r = *this;
    r.descend(key);
    return r;
  }

  void descend(std::uint64_t key) { state_ = mix(state_ ^ mix(key + kPathTag)); }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return finalize(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection-free modulo is fine here: n is tiny relative to 2^64.
    return next_u64() % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; deterministic, caches the second draw.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // Avoid log(0).
    u1 = u1 > 0.0 ? u1 : 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(t);
    have_cached_ = true;
    return r * std::cos(t);
  }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t j = uniform_index(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  static constexpr std::uint64_t kRootTag = 0x53696d5369616d00ULL;
  static constexpr std::uint64_t kPathTag = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t mix(std::uint64_t z) {
    return finalize(z + 0x9e3779b97f4a7c15ULL);
  }

  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Well-known path tags so distinct subsystems never collide on a stream.
namespace rng_path {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t shuffle = 2;
inline constexpr std::uint64_t augment = 3;
inline constexpr std::uint64_t dataset = 4;
inline constexpr std::uint64_t probe = 5;
}  // namespace rng_path

}  // namespace simsiam

#endif  // SIMSIAM_RNG_HPP
