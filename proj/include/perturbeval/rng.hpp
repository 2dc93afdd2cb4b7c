#pragma once

#include <array>
#include <cstdint>

namespace perturbeval {

/// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
/// numbers: as easy as 1, 2, 3", SC'11).
///
/// The 64-bit seed is the key. The 128-bit counter is split into a 64-bit
/// stream id (high words) and a 64-bit block index (low words), so
/// `PhiloxStream(seed, i)` is an independent substream that can be created
/// in any order or on any thread without affecting the values of other
/// streams. Masks use stream id = mask index.
class PhiloxStream {
public:
    using Block = std::array<std::uint32_t, 4>;

    PhiloxStream(std::uint64_t seed, std::uint64_t stream);

    /// Raw Philox4x32-10 bijection, exposed for known-answer tests.
    static Block philox(Block counter, std::array<std::uint32_t, 2> key);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double();

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t next_below(std::uint64_t bound);

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    Block buffer_{};
    unsigned used_ = 4;
};

}  // namespace perturbeval
