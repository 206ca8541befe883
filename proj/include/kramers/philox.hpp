#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "kramers/fastmath.hpp"

namespace kramers {

// Philox4x32-10 block cipher (Salmon, Moraes, Dror, Shaw; SC'11).
// Counter-based: the n-th block of a stream is a pure function of
// (key, counter), so streams can be split across workers without any
// shared state and replayed bit-exactly in any order.
struct Philox4x32 {
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
        std::uint32_t k0 = key[0], k1 = key[1];
#pragma GCC unroll 10
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c0;
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c2;
            const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
            const std::uint32_t n1 = static_cast<std::uint32_t>(p1);
            const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
            const std::uint32_t n3 = static_cast<std::uint32_t>(p0);
            c0 = n0;
            c1 = n1;
            c2 = n2;
            c3 = n3;
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        return {c0, c1, c2, c3};
    }
};

// One logical random stream: key = 64-bit seed, counter prefix = (stream id,
// context tag), counter low word = running block index.  Each block yields
// two doubles in [0,1).  Box-Muller consumes exactly one block per pair of
// normals, so the mapping step -> counter is static.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint32_t context = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          prefix_{static_cast<std::uint32_t>(stream),
                  static_cast<std::uint32_t>(stream >> 32),
                  context} {}

    // Two uniforms in [0,1) from one Philox block.
    void uniform_pair(double& u0, double& u1) {
        const auto r = Philox4x32::block(
            {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
             prefix_[0] ^ prefix_[2], prefix_[1]},
            {key_[0] ^ prefix_[0], key_[1] ^ prefix_[1]});
        ++block_;
        const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
        const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
        u0 = static_cast<double>(a >> 11) * 0x1.0p-53;
        u1 = static_cast<double>(b >> 11) * 0x1.0p-53;
    }

    double uniform() {
        if (!have_uniform_) {
            uniform_pair(ubuf_[0], ubuf_[1]);
            have_uniform_ = true;
            return ubuf_[0];
        }
        have_uniform_ = false;
        return ubuf_[1];
    }

    // Standard Gaussian pair (Box-Muller).  u0 is shifted into (0,1].
    void normal_pair(double& z0, double& z1) {
        double u0, u1;
        uniform_pair(u0, u1);
        const double r = std::sqrt(-2.0 * std::log(1.0 - u0));
        const double th = 6.283185307179586476925286766559 * u1;
        double s, c;
        fast_sincos(th, s, c);
        z0 = r * c;
        z1 = r * s;
    }

    double normal() {
        if (have_normal_) {
            have_normal_ = false;
            return cached_normal_;
        }
        double z0, z1;
        normal_pair(z0, z1);
        cached_normal_ = z1;
        have_normal_ = true;
        return z0;
    }

    std::uint64_t blocks_used() const { return block_; }

private:
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 3> prefix_;
    std::uint64_t block_ = 0;
    double ubuf_[2] = {0, 0};
    double cached_normal_ = 0;
    bool have_uniform_ = false;
    bool have_normal_ = false;
};

}  // namespace kramers
