#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace condbm {

// Seed used by the CLI and the acceptance suite when none is given.
inline constexpr std::uint64_t kDefaultSeed = 271828182845ULL;

// Counter-based Philox4x32-10 stream (constants and round structure per the
// Random123 reference implementation).
//
// Why hand-rolled: the determinism contract is byte-identical output for a
// given (seed, stream index), and <random>'s normal_distribution is
// implementation-defined, so both the generator and the Gaussian transform
// are fixed here. Counter layout: words 0-1 are the running 128-bit block
// counter, words 2-3 are the stream index, the key is the seed. Distinct
// stream indices therefore select disjoint counter families and never
// overlap; ensembles assign stream = path index.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    std::uint32_t next_u32() noexcept {
        if (idx_ == 4) refill();
        return block_[idx_++];
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // Uniform on the open interval (0,1): 53-bit mantissa plus a half-ulp
    // offset, so logarithms are always safe.
    double uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    // Standard normal via Box-Muller; the second variate of each pair is
    // cached, so consecutive calls consume one 128-bit block per two normals.
    double gaussian() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    static constexpr std::uint32_t kW32A = 0x9E3779B9u;   // key schedule (golden ratio)
    static constexpr std::uint32_t kW32B = 0xBB67AE85u;   // key schedule (sqrt(3)-1)
    static constexpr std::uint32_t kM4x32A = 0xD2511F53u; // round multiplier, lanes 0/3
    static constexpr std::uint32_t kM4x32B = 0xCD9E8D57u; // round multiplier, lanes 2/1

    void refill() noexcept {
        std::uint32_t c0 = static_cast<std::uint32_t>(counter_);
        std::uint32_t c1 = static_cast<std::uint32_t>(counter_ >> 32);
        std::uint32_t c2 = static_cast<std::uint32_t>(stream_);
        std::uint32_t c3 = static_cast<std::uint32_t>(stream_ >> 32);
        std::uint32_t k0 = static_cast<std::uint32_t>(seed_);
        std::uint32_t k1 = static_cast<std::uint32_t>(seed_ >> 32);
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM4x32A) * c0;
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM4x32B) * c2;
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            const std::uint32_t n0 = hi1 ^ c1 ^ k0;
            const std::uint32_t n2 = hi0 ^ c3 ^ k1;
            c0 = n0;
            c1 = lo1;
            c2 = n2;
            c3 = lo0;
            k0 += kW32A;
            k1 += kW32B;
        }
        block_ = {c0, c1, c2, c3};
        ++counter_;
        idx_ = 0;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int idx_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace condbm
