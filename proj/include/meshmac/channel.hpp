#pragma once

#include "meshmac/common.hpp"
#include "meshmac/topology.hpp"

#include <span>
#include <vector>

namespace meshmac {

struct Transmission {
    std::uint64_t id = 0;
    NodeId sender = 0;
    NodeId receiver = 0;
    int channel = 0;
    SimTime start{0};
    SimTime end{0};
    std::uint64_t packet_id = 0;
    bool corrupted = false;  // maintained by ChannelState
};

enum class Reception { delivered, collided };

/// Reference reception rule over an explicit set of other transmissions.
///
/// Collided iff some other transmission overlapping in time is audible at the
/// receiver on the same channel, or the receiver itself is transmitting. No
/// capture: absent collision the frame is always received.
Reception resolve_reception(const Topology& topology, const Transmission& tx,
                            std::span<const Transmission> others);

/// Active transmissions of one run. Interference is marked incrementally when a
/// transmission begins, so reception at the end is an O(1) lookup.
class ChannelState {
public:
    explicit ChannelState(const Topology& topology) : topology_(&topology) {}

    /// Starts a transmission over [start, end) and marks mutual interference
    /// with everything still on the air.
    std::uint64_t begin(NodeId sender, NodeId receiver, int channel, SimTime start, SimTime end,
                        std::uint64_t packet_id);

    /// Removes the transmission (at its end event) and returns it with the final corruption flag.
    Transmission finish(std::uint64_t id);

    /// Carrier sense from `listener` on `channel` at `now`. Transmissions that
    /// start exactly at `now` are not yet detectable.
    bool busy(NodeId listener, int channel, SimTime now) const;

    std::span<const Transmission> active() const noexcept { return active_; }

private:
    const Topology* topology_;
    std::vector<Transmission> active_;
    std::uint64_t next_id_ = 1;
};

}  // namespace meshmac
