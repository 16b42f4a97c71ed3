#pragma once

#include <cstdint>
#include <random>

namespace bflow {

/// Names an independent random sequence: (seed, stream_id) always yields the
/// same numbers. Experiments use stream_id = replicate index, so a replicate
/// can be regenerated from the master seed alone.
///
/// A stream hands out engines for named substreams. Arrival times and
/// segment lengths draw from different substreams, which keeps the arrival
/// sequence identical across segment-length laws for a given replicate.
class RandomStream {
public:
    enum class Substream : std::uint32_t { arrivals = 1, segments = 2, auxiliary = 3 };

    RandomStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : seed_(seed), stream_id_(stream_id)
    {
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    std::mt19937_64 engine(Substream which) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
};

} // namespace bflow
