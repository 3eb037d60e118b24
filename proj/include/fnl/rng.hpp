#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace fnl {

// Counter-based random numbers (Philox4x32-10).
//
// Every Gaussian increment in the laboratory is a pure function of
// (master seed; scenario, replication, agent, step, lane). That makes output
// bit-identical for any thread count and lets the simulation engine stream
// increments without materializing noise grids.

namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline Counter round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    return Counter{
        static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
        static_cast<std::uint32_t>(p1),
        static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
        static_cast<std::uint32_t>(p0),
    };
}

inline Counter philox4x32_10(Counter c, Key k) {
    c = round(c, k);
    for (int i = 1; i < 10; ++i) {
        k[0] += kWeyl0;
        k[1] += kWeyl1;
        c = round(c, k);
    }
    return c;
}

} // namespace philox

// Independent logical streams multiplexed over one keyed generator.
enum class Lane : std::uint32_t {
    Common = 0, // the common-noise increments dW0 (shared by a scenario)
    Idio = 1,   // idiosyncratic increments dW^i per (replication, agent)
    Type = 2,   // i.i.d. agent-type draws (heterogeneous populations)
    Aux = 3,    // auxiliary draws (subsampling, randomized test points)
};

struct StreamPoint {
    std::uint32_t scenario = 0;
    std::uint32_t replication = 0;
    std::uint32_t agent = 0;
    std::uint32_t step = 0;
    Lane lane = Lane::Common;
};

class Rng {
public:
    explicit Rng(std::uint64_t master_seed) : master_seed_(master_seed) {}

    std::uint64_t master_seed() const { return master_seed_; }

    // Raw 128-bit block for the stream point.
    philox::Counter block(const StreamPoint& p) const {
        const philox::Key key{static_cast<std::uint32_t>(master_seed_),
                              static_cast<std::uint32_t>(master_seed_ >> 32)};
        const philox::Counter ctr{
            p.scenario,
            p.replication,
            p.agent,
            (p.step << 2) | static_cast<std::uint32_t>(p.lane),
        };
        return philox::philox4x32_10(ctr, key);
    }

    // Uniform draw on (0, 1] built from 64 bits (53-bit resolution, never 0).
    double uniform(const StreamPoint& p) const {
        const auto b = block(p);
        return to_unit(u64(b[0], b[1]));
    }

    // Standard normal via Box-Muller on the two 64-bit halves of one block.
    double normal(const StreamPoint& p) const {
        const auto b = block(p);
        const double u1 = to_unit(u64(b[0], b[1]));
        const double u2 = to_unit(u64(b[2], b[3]));
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    // Brownian increment over dt.
    double increment(const StreamPoint& p, double sqrt_dt) const {
        return normal(p) * sqrt_dt;
    }

private:
    static std::uint64_t u64(std::uint32_t lo, std::uint32_t hi) {
        return static_cast<std::uint64_t>(lo) |
               (static_cast<std::uint64_t>(hi) << 32);
    }
    // Map to (0, 1]: (m + 1) * 2^-53 with m the top 53 bits. log() is finite
    // everywhere on the range and the normal transform is exact at u = 1.
    static double to_unit(std::uint64_t x) {
        return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
    }

    std::uint64_t master_seed_;
};

} // namespace fnl
