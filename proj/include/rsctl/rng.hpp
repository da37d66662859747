#pragma once

// Counter-based random streams (Philox4x32-10). The stream for
// (seed, path_index) is a pure function of its counters, so paths can be
// generated in any order on any thread.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace rsctl {

namespace detail {

inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t m0 = 0xD2511F53u;
    constexpr std::uint32_t m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

// 53-bit uniform in [0, 1).
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Reproducible stream for one simulated path. Uniform and Gaussian draws come
/// from separate counter channels, so skipping Gaussian draws never shifts the
/// uniform sequence.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t path_index) : seed_(seed), path_index_(path_index) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t path_index() const { return path_index_; }
    std::uint64_t uniform_counter() const { return uniform_block_; }
    std::uint64_t gaussian_counter() const { return gaussian_block_; }

    /// Uniform on [0, 1).
    double uniform() {
        if (uniform_left_ == 0) {
            const auto w = block(0, uniform_block_++);
            uniform_buf_[0] = detail::to_unit(w[0], w[1]);
            uniform_buf_[1] = detail::to_unit(w[2], w[3]);
            uniform_left_ = 2;
        }
        return uniform_buf_[2 - uniform_left_--];
    }

    /// Standard normal via Box-Muller on one counter block.
    double gaussian() {
        if (gaussian_left_ == 0) {
            const auto w = block(1, gaussian_block_++);
            const double u1 = 1.0 - detail::to_unit(w[0], w[1]);  // (0, 1]
            const double u2 = detail::to_unit(w[2], w[3]);
            const double r = std::sqrt(-2.0 * std::log(u1));
            const double theta = 2.0 * std::numbers::pi * u2;
            gaussian_buf_[0] = r * std::cos(theta);
            gaussian_buf_[1] = r * std::sin(theta);
            gaussian_left_ = 2;
        }
        return gaussian_buf_[2 - gaussian_left_--];
    }

private:
    std::array<std::uint32_t, 4> block(std::uint32_t channel, std::uint64_t index) const {
        const std::array<std::uint32_t, 4> ctr = {
            static_cast<std::uint32_t>(index),
            static_cast<std::uint32_t>(index >> 32) ^ (channel << 31),
            static_cast<std::uint32_t>(path_index_),
            static_cast<std::uint32_t>(path_index_ >> 32),
        };
        const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                                  static_cast<std::uint32_t>(seed_ >> 32)};
        return detail::philox4x32(ctr, key);
    }

    std::uint64_t seed_;
    std::uint64_t path_index_;
    std::uint64_t uniform_block_ = 0;
    std::uint64_t gaussian_block_ = 0;
    double uniform_buf_[2] = {0.0, 0.0};
    double gaussian_buf_[2] = {0.0, 0.0};
    int uniform_left_ = 0;
    int gaussian_left_ = 0;
};

inline RngStream make_rng_stream(std::uint64_t seed, std::uint64_t path_index) { return RngStream(seed, path_index); }

}  // namespace rsctl
