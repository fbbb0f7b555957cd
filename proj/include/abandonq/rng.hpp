#pragma once

#include <cstdint>
#include <random>

namespace abandonq {

/// Named substreams. Each (seed, stream, replication, substream) tuple maps
/// to an independent generator, so drawing from one never shifts another.
enum class Stream : std::uint64_t {
    Arrivals = 1,
    Services = 2,
    Patiences = 3,
    Probes = 4,
    Renewals = 5,
    Ou = 6,
    Sampling = 7,
    Permutation = 8,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

class RngStream {
public:
    RngStream(std::uint64_t seed, Stream stream, std::uint64_t replication = 0,
              std::uint64_t substream = 0);

    /// Uniform on the open interval (0, 1); never returns 0 or 1.
    double uniform() noexcept {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal by inversion (one uniform per variate).
    double normal();

    std::uint64_t next_u64() noexcept { return engine_(); }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
};

/// Per-replication bundle of the four queue streams.
struct StreamSet {
    RngStream arrivals;
    RngStream services;
    RngStream patiences;
    RngStream probes;

    static StreamSet for_replication(std::uint64_t seed, std::uint64_t replication);
};

}  // namespace abandonq
