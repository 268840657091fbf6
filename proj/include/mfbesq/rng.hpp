#pragma once

// Counter-based random streams (Philox4x32-10, Salmon et al. SC'11) plus the
// scalar samplers the simulation kernels need: uniform, normal, gamma,
// Poisson, chi-square.
//
// A stream is addressed by (seed, substream). Draws inside a stream advance a
// 64-bit block counter, so the value of draw k depends only on
// (seed, substream, k) and never on thread schedule or evaluation order of
// other streams.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "mfbesq/special.hpp"

namespace mfbesq {

namespace detail {

struct PhiloxBlock {
    std::uint32_t w[4];
};

inline void mulhilo32(std::uint32_t a, std::uint32_t b, std::uint32_t& lo,
                      std::uint32_t& hi) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
}

// One 10-round Philox4x32 block. Constants from the reference implementation.
inline PhiloxBlock philox4x32_10(PhiloxBlock ctr, std::uint32_t k0,
                                 std::uint32_t k1) {
    constexpr std::uint32_t M0 = 0xD2511F53u;
    constexpr std::uint32_t M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u;
    constexpr std::uint32_t W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t lo0, hi0, lo1, hi1;
        mulhilo32(M0, ctr.w[0], lo0, hi0);
        mulhilo32(M1, ctr.w[2], lo1, hi1);
        const PhiloxBlock next{{hi1 ^ ctr.w[1] ^ k0, lo1, hi0 ^ ctr.w[3] ^ k1, lo0}};
        ctr = next;
        k0 += W0;
        k1 += W1;
    }
    return ctr;
}

} // namespace detail

class Rng {
  public:
    Rng(std::uint64_t seed, std::uint64_t substream)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          sub_lo_(static_cast<std::uint32_t>(substream)),
          sub_hi_(static_cast<std::uint32_t>(substream >> 32)) {}

    // Stream for one particle (or one replica draw site). stream_id is folded
    // into the upper substream word, so distinct (stream_id, index) pairs with
    // stream_id < 2^32 and index < 2^32 get disjoint streams.
    static Rng for_particle(std::uint64_t seed, std::uint64_t stream_id,
                            std::uint64_t index) {
        const std::uint32_t fold = static_cast<std::uint32_t>(stream_id) ^
                                   static_cast<std::uint32_t>(stream_id >> 32);
        const std::uint64_t sub =
            (static_cast<std::uint64_t>(fold) << 32) |
            static_cast<std::uint32_t>(index);
        return Rng(seed, sub);
    }

    std::uint64_t next_u64() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        detail::PhiloxBlock ctr{{static_cast<std::uint32_t>(block_),
                                 static_cast<std::uint32_t>(block_ >> 32),
                                 sub_lo_, sub_hi_}};
        ++block_;
        const detail::PhiloxBlock out = detail::philox4x32_10(ctr, key0_, key1_);
        spare_ = (static_cast<std::uint64_t>(out.w[2]) << 32) | out.w[3];
        have_spare_ = true;
        return (static_cast<std::uint64_t>(out.w[0]) << 32) | out.w[1];
    }

    // Uniform on the open interval (0,1); safe to feed to the normal inverse.
    double uniform01() {
        const std::uint64_t bits = next_u64() >> 11; // 53 bits
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    double normal() { return normal_quantile(uniform01()); }

    // Gamma(shape, scale 1) via Marsaglia-Tsang, with the shape<1 boost.
    double gamma(double shape) {
        if (shape < 0.0 || !std::isfinite(shape))
            throw std::invalid_argument("Rng::gamma: shape must be >= 0");
        if (shape == 0.0) return 0.0;
        if (shape < 1.0) {
            const double u = uniform01();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double chi_square(double dof) { return 2.0 * gamma(0.5 * dof); }

    std::uint64_t poisson(double mean) {
        if (mean < 0.0 || !std::isfinite(mean))
            throw std::invalid_argument("Rng::poisson: mean must be finite and >= 0");
        if (mean == 0.0) return 0;
        if (mean < 10.0) return poisson_inversion(mean);
        return poisson_ptrs(mean);
    }

  private:
    std::uint64_t poisson_inversion(double mean) {
        const double threshold = std::exp(-mean);
        std::uint64_t k = 0;
        double prod = uniform01();
        while (prod > threshold) {
            ++k;
            prod *= uniform01();
        }
        return k;
    }

    // Hoermann's transformed rejection (PTRS), valid for mean >= 10.
    std::uint64_t poisson_ptrs(double mean) {
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform01() - 0.5;
            const double v = uniform01();
            const double us = 0.5 - std::fabs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                kf * loglam - mean - std::lgamma(kf + 1.0))
                return static_cast<std::uint64_t>(kf);
        }
    }

    std::uint32_t key0_, key1_;
    std::uint32_t sub_lo_, sub_hi_;
    std::uint64_t block_ = 0;
    std::uint64_t spare_ = 0;
    bool have_spare_ = false;
};

} // namespace mfbesq
