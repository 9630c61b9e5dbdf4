#include "zvlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace zvlab {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

// 53-bit uniform on (0, 1].
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
    return (static_cast<double>(bits & ((1ULL << 53) - 1)) + 1.0) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void fill_normals(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t first,
                  std::span<double> out) {
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    const auto sid_lo = static_cast<std::uint32_t>(stream_id);
    const auto sid_hi = static_cast<std::uint32_t>(stream_id >> 32);

    std::uint64_t index = first;
    std::size_t pos = 0;
    while (pos < out.size()) {
        const std::uint64_t block = index / 2;
        const auto r = Philox4x32::generate(
            {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), sid_lo, sid_hi}, key);
        const double u1 = to_unit(r[0], r[1]);
        const double u2 = to_unit(r[2], r[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        const double pair[2] = {radius * std::cos(angle), radius * std::sin(angle)};
        for (std::uint64_t j = index % 2; j < 2 && pos < out.size(); ++j, ++index, ++pos) {
            out[pos] = pair[j];
        }
    }
}

}  // namespace zvlab
