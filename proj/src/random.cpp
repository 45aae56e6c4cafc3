#include "mbwish/random.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace mbwish {

RandomStream::RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> coordinates)
    : key_(mix(seed)) {
    for (auto c : coordinates) key_ = mix(key_ ^ mix(c + 0x632be59bd9b4e019ULL));
}

std::uint64_t RandomStream::bits(unsigned count) {
    if (count == 0) return 0;
    if (count > 64) throw std::invalid_argument("RandomStream::bits: count > 64");
    consumed_ += count;
    std::uint64_t out = 0;
    unsigned filled = 0;
    while (filled < count) {
        if (available_ == 0) {
            buffer_ = next_block();
            available_ = 64;
        }
        const unsigned take = std::min(count - filled, available_);
        const std::uint64_t mask = take == 64 ? ~0ULL : ((1ULL << take) - 1);
        out |= (buffer_ & mask) << filled;
        buffer_ = take == 64 ? 0 : buffer_ >> take;
        available_ -= take;
        filled += take;
    }
    return out;
}

std::uint32_t RandomStream::uniform(std::uint32_t bound) {
    if (bound == 0) throw std::invalid_argument("RandomStream::uniform: empty range");
    if (bound == 1) return 0;
    const unsigned width = static_cast<unsigned>(std::bit_width(bound - 1));
    for (;;) {
        const auto v = static_cast<std::uint32_t>(bits(width));
        if (v < bound) return v;
    }
}

double RandomStream::unit() {
    return static_cast<double>(bits(53)) * 0x1.0p-53;
}

bool RandomStream::bernoulli(double p) {
    return unit() < p;
}

}  // namespace mbwish
