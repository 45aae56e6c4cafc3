#pragma once

#include <cstdint>
#include <initializer_list>

namespace mbwish {

/// Counter-based pseudo-random stream. The key is a SplitMix64 digest of a
/// seed plus any number of stream coordinates, so the stream for a single
/// (seed, level, repetition) triple can be regenerated in isolation.
///
/// Randomness is handed out bit by bit from 64-bit blocks; bits_consumed()
/// counts every bit drawn, which makes the randomness cost of each hash
/// construction observable.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : key_(mix(seed)) {}
    RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> coordinates);

    std::uint64_t key() const noexcept { return key_; }

    /// `count` (<= 64) fresh bits.
    std::uint64_t bits(unsigned count);

    /// Uniform integer in [0, bound) by rejection on ceil(log2 bound) bits.
    std::uint32_t uniform(std::uint32_t bound);

    /// True with probability `p`, from a 53-bit uniform draw.
    bool bernoulli(double p);

    /// Uniform double in [0, 1) from 53 bits.
    double unit();

    std::uint64_t bits_consumed() const noexcept { return consumed_; }

    static std::uint64_t mix(std::uint64_t x) noexcept {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t next_block() noexcept { return mix(key_ ^ mix(counter_++)); }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::uint64_t buffer_ = 0;
    unsigned available_ = 0;
    std::uint64_t consumed_ = 0;
};

}  // namespace mbwish
