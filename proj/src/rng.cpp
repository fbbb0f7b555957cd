#include "abandonq/rng.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>

namespace abandonq {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t replication,
                          std::uint64_t substream) noexcept {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    h = splitmix64(h ^ replication);
    h = splitmix64(h ^ substream);
    return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, Stream stream, std::uint64_t replication,
                     std::uint64_t substream)
    : engine_(derive_seed(seed, stream, replication, substream)) {}

double RngStream::normal() {
    // Phi^{-1}(u) = -sqrt(2) * erfc^{-1}(2u)
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * uniform());
}

StreamSet StreamSet::for_replication(std::uint64_t seed, std::uint64_t replication) {
    return StreamSet{RngStream(seed, Stream::Arrivals, replication),
                     RngStream(seed, Stream::Services, replication),
                     RngStream(seed, Stream::Patiences, replication),
                     RngStream(seed, Stream::Probes, replication)};
}

}  // namespace abandonq
