#include "meshmac/channel.hpp"

#include <algorithm>

namespace meshmac {

namespace {

// True when `other` spoils reception of `tx` at tx.receiver.
bool interferes(const Topology& topology, const Transmission& tx, const Transmission& other) {
    if (other.sender == tx.receiver) return true;  // half duplex
    return other.channel == tx.channel && topology.adjacent(other.sender, tx.receiver);
}

}  // namespace

Reception resolve_reception(const Topology& topology, const Transmission& tx,
                            std::span<const Transmission> others) {
    for (const auto& other : others) {
        if (other.id == tx.id) continue;
        const bool overlap = other.start < tx.end && tx.start < other.end;
        if (overlap && interferes(topology, tx, other)) return Reception::collided;
    }
    return Reception::delivered;
}

std::uint64_t ChannelState::begin(NodeId sender, NodeId receiver, int channel, SimTime start,
                                  SimTime end, std::uint64_t packet_id) {
    Transmission tx{next_id_++, sender, receiver, channel, start, end, packet_id, false};
    for (auto& other : active_) {
        if (other.end <= start) continue;  // ends now; its end event is still queued
        if (interferes(*topology_, tx, other)) tx.corrupted = true;
        if (interferes(*topology_, other, tx)) other.corrupted = true;
    }
    active_.push_back(tx);
    return tx.id;
}

Transmission ChannelState::finish(std::uint64_t id) {
    const auto it = std::find_if(active_.begin(), active_.end(),
                                 [id](const Transmission& t) { return t.id == id; });
    if (it == active_.end()) throw Error("finish: unknown transmission");
    Transmission done = *it;
    *it = active_.back();
    active_.pop_back();
    return done;
}

bool ChannelState::busy(NodeId listener, int channel, SimTime now) const {
    return std::any_of(active_.begin(), active_.end(), [&](const Transmission& t) {
        return t.channel == channel && t.start < now && now < t.end &&
               topology_->adjacent(listener, t.sender);
    });
}

}  // namespace meshmac
