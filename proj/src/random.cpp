#include "selpred/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <utility>

#include "selpred/errors.hpp"

namespace selpred {

std::uint64_t SeededGenerator::below(std::uint64_t bound) {
    if (bound == 0) {
        throw DomainError("SeededGenerator::below: bound must be positive");
    }
    // Largest multiple of bound representable in 64 bits; draws at or above it are rejected.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                (std::numeric_limits<std::uint64_t>::max() % bound + 1) % bound;
    std::uint64_t draw = engine_();
    while (draw > limit) {
        draw = engine_();
    }
    return draw % bound;
}

double SeededGenerator::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededGenerator::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::int64_t seed) {
    if (n == 0) {
        throw DomainError("shuffled_order: n must be at least 1");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SeededGenerator rng(seed_bits(seed));
    for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i + 1));
        std::swap(order[i], order[j]);
    }
    return order;
}

}  // namespace selpred
