#pragma once
// Philox4x32-10 counter-based generator. Chosen because experiments need a
// named, seedable generator whose streams are reproducible across platforms
// and independent of call interleaving: (seed, stream, block) fully determine
// every output. Verified against published known-answer vectors and an
// independent reference implementation (tests/oracle/philox_ref.py).

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ntkeq {

class Philox {
public:
    explicit Philox(std::uint64_t seed, std::uint32_t stream = 0)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          stream_(stream) {}

    std::uint32_t next_u32() {
        if (have_ == 0) refill();
        return buf_[4 - have_--];
    }

    std::uint64_t next_u64() {
        std::uint64_t lo = next_u32();
        std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // Uniform in (0,1]: 53 high bits, shifted so 0 is excluded (log-safe).
    double next_uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1p-53;
    }

    // Standard normal via Box-Muller; consumes two uniforms per pair and
    // caches the second value.
    double next_gauss() {
        if (have_gauss_) {
            have_gauss_ = false;
            return cached_gauss_;
        }
        double u1 = next_uniform();
        double u2 = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 2.0 * std::numbers::pi * u2;
        cached_gauss_ = r * std::sin(t);
        have_gauss_ = true;
        return r * std::cos(t);
    }

    // Jump directly to a block boundary (4 u32 outputs per block). Discards
    // any buffered words and the cached gaussian.
    void skip_to_block(std::uint64_t block) {
        block_ = block;
        have_ = 0;
        have_gauss_ = false;
    }

    std::uint64_t block() const { return block_; }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;

    void refill() {
        std::uint32_t c0 = static_cast<std::uint32_t>(block_);
        std::uint32_t c1 = static_cast<std::uint32_t>(block_ >> 32);
        std::uint32_t c2 = stream_;
        std::uint32_t c3 = 0;
        std::uint32_t k0 = key0_, k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                k0 += kW0;
                k1 += kW1;
            }
            std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c0;
            std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c2;
            std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            std::uint32_t n0 = hi1 ^ c1 ^ k0;
            std::uint32_t n1 = lo1;
            std::uint32_t n2 = hi0 ^ c3 ^ k1;
            std::uint32_t n3 = lo0;
            c0 = n0; c1 = n1; c2 = n2; c3 = n3;
        }
        buf_[0] = c0; buf_[1] = c1; buf_[2] = c2; buf_[3] = c3;
        have_ = 4;
        ++block_;
    }

    std::uint32_t key0_, key1_, stream_;
    std::uint64_t block_ = 0;
    std::uint32_t buf_[4] = {};
    int have_ = 0;
    bool have_gauss_ = false;
    double cached_gauss_ = 0.0;
};

}  // namespace ntkeq
