#pragma once

#include <cstdint>
#include <vector>

namespace dualprobe {

/// Seeded generator with a fully pinned output sequence, so fixtures can be
/// regenerated bit-for-bit in any language.
///
///   next():     SplitMix64. state += 0x9E3779B97F4A7C15, then
///               z = state; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
///               z = (z ^ (z >> 27)) * 0x94D049BB133111EB; return z ^ (z >> 31).
///   uniform():  (next() >> 11) * 2^-53, in [0, 1).
///   gaussian(): Box-Muller, cosine branch only. Draws u1 = ((next() >> 11) + 1) * 2^-53
///               in (0, 1] and then u2 = uniform(); returns sqrt(-2 ln u1) * cos(2 pi u2).
///               Each call consumes exactly two next() values.
///   below(n):   next() % n (modulo bias is below 2^-40 for the sizes used here).
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept;
    double uniform() noexcept;
    double gaussian() noexcept;
    std::uint64_t below(std::uint64_t n) noexcept;

    /// Fisher-Yates, iterating i from size-1 down to 1 and swapping with below(i + 1).
    template <typename T>
    void shuffle(std::vector<T>& items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace dualprobe
