#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace ncvine {

/// One Philox4x32-10 block: 10 rounds of the counter-based bijection.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Counter-based generator. The key comes from `seed`, the upper counter
/// words from `stream`, so (seed, stream) pairs give independent sequences
/// that are reproducible on every platform.
class Philox4x32 {
public:
    using result_type = std::uint32_t;

    explicit Philox4x32(std::uint64_t seed, std::uint64_t stream = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();
    /// Uniform on the open interval (0,1) with 53 random bits.
    double uniform();
    /// Standard normal by the Box-Muller transform.
    double normal();

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace ncvine
