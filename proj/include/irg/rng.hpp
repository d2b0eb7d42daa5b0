#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace irg {

// splitmix64 step; used to whiten seeds and to derive independent streams
// from (root_seed, stream_index) so that parallel tasks never share state.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t x = root;
  std::uint64_t a = splitmix64(x);
  x ^= 0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL;
  std::uint64_t b = splitmix64(x);
  return a ^ (b + 0x2545f4914f6cdd1dULL * (stream + 1));
}

// mt19937_64 with hand-rolled sampling helpers. The std distributions are
// implementation-defined, so all sampling goes through these to keep runs
// byte-reproducible across compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  Rng(std::uint64_t root, std::uint64_t stream) : gen_(mix_seed(root, stream)) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // uniform integer in [0, n)
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
  }

  // +1 or -1 with equal probability
  int rademacher() { return (gen_() & 1u) ? 1 : -1; }

  // index sampled from an unnormalized weight vector (linear scan)
  int categorical(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    if (total <= 0.0) throw std::invalid_argument("categorical: nonpositive total weight");
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      acc += w[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(w.size()) - 1;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace irg
