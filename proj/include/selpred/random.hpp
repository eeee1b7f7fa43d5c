#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace selpred {

/// The engine's frozen pseudo-random source.
///
/// Raw bits come from std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. Bounded integers, uniforms and normals are derived here rather
/// than through <random> distributions, which are implementation-defined and
/// would make shuffles differ between standard libraries.
class SeededGenerator {
public:
    explicit SeededGenerator(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, bound) by rejection sampling (no modulo bias).
    std::uint64_t below(std::uint64_t bound);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// SplitMix64 finalizer applied to (seed, stream). Used to derive independent
/// per-replicate generator seeds from a single user seed, so replicate r's
/// stream does not depend on how many replicates ran before it.
std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream);

/// Reinterprets a signed user seed as the engine's 64-bit seed.
inline std::uint64_t seed_bits(std::int64_t seed) { return static_cast<std::uint64_t>(seed); }

/// Deterministic Fisher-Yates permutation of [0, n).
///
/// Starting from the identity, for i = n-1 down to 1 swap position i with a
/// position drawn by SeededGenerator(seed).below(i + 1). Throws DomainError
/// when n == 0.
std::vector<std::size_t> shuffled_order(std::size_t n, std::int64_t seed);

}  // namespace selpred
