#include "bflow/random.hpp"

namespace bflow {

std::mt19937_64 RandomStream::engine(Substream which) const
{
    const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed_), hi(seed_), lo(stream_id_), hi(stream_id_),
                      static_cast<std::uint32_t>(which), 0x62666c77u};
    return std::mt19937_64(seq);
}

} // namespace bflow
