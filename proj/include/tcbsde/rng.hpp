#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace tcbsde {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
// Counter-based streams keyed by (master seed, scenario, purpose) make every
// draw independent of scheduling, so batches are bit-identical for any
// thread count.
struct Philox4x32 {
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
            const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                   static_cast<std::uint32_t>(p0)};
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }
};

/// Purpose tag of an RNG stream. Intensity draws never share a stream with
/// noise draws, keeping the time-change independent of the driving noise.
enum class StreamPurpose : std::uint32_t {
    intensity = 0,
    brownian = 1,
    jumps = 2,
    validation = 3,
    inner = 4,
    misc = 5,
};

/// One independent random stream, addressed by (master seed, stream id, purpose).
class RngStream {
  public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id, StreamPurpose purpose)
        : key_{static_cast<std::uint32_t>(master_seed),
               static_cast<std::uint32_t>(master_seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream_id)),
          stream_hi_(static_cast<std::uint32_t>(stream_id >> 32) ^
                     (static_cast<std::uint32_t>(purpose) << 28) ^
                     (static_cast<std::uint32_t>(purpose) * 0x632BE59Bu)) {}

    std::uint64_t bits64() {
        if (available_ == 0) {
            const auto out = Philox4x32::block(
                {static_cast<std::uint32_t>(counter_),
                 static_cast<std::uint32_t>(counter_ >> 32), stream_lo_, stream_hi_},
                key_);
            ++counter_;
            word_[0] = (std::uint64_t(out[1]) << 32) | out[0];
            word_[1] = (std::uint64_t(out[3]) << 32) | out[2];
            available_ = 2;
        }
        return word_[--available_];
    }

    /// Uniform in the open interval (0,1); never returns 0 or 1.
    double uniform() {
        return static_cast<double>(bits64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double gaussian() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Poisson by CDF inversion; exact for any mean, large means split in half.
    long poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        if (mean > 30.0) {
            const long a = poisson(mean * 0.5);
            return a + poisson(mean - mean * 0.5);
        }
        const double u = uniform();
        double p = std::exp(-mean);
        double cdf = p;
        long k = 0;
        while (u > cdf && p > 0.0) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

  private:
    std::array<std::uint32_t, 2> key_;
    std::uint32_t stream_lo_, stream_hi_;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 2> word_{};
    int available_ = 0;
};

/// Distinct 64-bit token per scenario, derived from the master seed.
inline std::uint64_t scenario_seed_token(std::uint64_t master_seed, std::uint64_t scenario) {
    std::uint64_t x = master_seed ^ (scenario + 0x9E3779B97F4A7C15ULL);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

}  // namespace tcbsde
