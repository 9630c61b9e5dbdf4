#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace zvlab {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11). Stateless: the output is
/// a pure function of (counter, key).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key);
};

/// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Fills out with standard normals number [first, first + out.size()) of the
/// stream identified by (seed, stream_id). Each pair of normals consumes one
/// Philox block through Box-Muller.
void fill_normals(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t first,
                  std::span<double> out);

}  // namespace zvlab
