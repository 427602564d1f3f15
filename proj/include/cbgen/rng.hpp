#ifndef CBGEN_RNG_HPP
#define CBGEN_RNG_HPP

#include <cstdint>
#include <random>

namespace cbgen {

// All randomness in the library flows through these helpers so that results
// are reproducible across standard-library implementations. std::mt19937_64
// has a standard-mandated output sequence; the std::*_distribution adapters
// do not, so we avoid them.

using Rng = std::mt19937_64;

// splitmix64 finalizer; mixes a seed with up to three stream tags.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0);

// Unbiased draw from [0, n), n >= 1. Rejection sampling on the top bits.
std::uint64_t uniform_below(Rng& rng, std::uint64_t n);

// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

// Uniform double in [lo, hi).
double uniform_range(Rng& rng, double lo, double hi);

// In-place Fisher-Yates shuffle.
template <class T, class Alloc, template <class, class> class Vec>
void shuffle(Vec<T, Alloc>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace cbgen

#endif  // CBGEN_RNG_HPP
