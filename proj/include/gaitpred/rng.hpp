#pragma once

#include <cstdint>
#include <initializer_list>

namespace gaitpred {

// SplitMix64 generator. The whole state is one 64-bit word:
//
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// Doubles are taken from the top 53 bits; normals use Box-Muller with no
// cached second value, so every draw consumes exactly two words. The
// sequence is therefore identical on every platform and compiler.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    // Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);
    double normal();

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

// The SplitMix64 output function applied to a single word.
std::uint64_t mix64(std::uint64_t z);

// Derives a child seed from a parent seed and a list of integer tags
// (cell coordinates, layer index, ...). Order of tags matters.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags);

}  // namespace gaitpred
