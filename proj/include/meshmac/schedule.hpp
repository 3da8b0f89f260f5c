#pragma once

#include "meshmac/common.hpp"
#include "meshmac/grouping.hpp"
#include "meshmac/topology.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace meshmac {

struct SlotframeConfig {
    int length = 100;         // slots
    int num_channels = 16;    // channel offsets F
    SimTime slot_duration{10'000};
    int reserved_slots = 2;   // beacon/sync slots at the end of the slotframe, never allocated
    double txn_slots = 0.4;   // one CSMA transaction in slots (4 ms / 10 ms)
    double contention_margin = 1.5;

    int usable_slots() const noexcept { return length - reserved_slots; }
    void validate() const;
};

/// Default slotframe length for a network of `node_count` nodes: max(N, 100).
int default_slotframe_length(std::size_t node_count);

struct DedicatedCell {
    NodeId sender = 0;
    NodeId receiver = 0;
};

/// Contiguous contention window owned by one SCG group, addressed to its parent.
struct GroupWindowCell {
    int group_id = 0;
    NodeId receiver = 0;
    int length = 1;  // slots
};

struct Cell {
    int slot = 0;  // first slot of the cell
    int channel_offset = 0;
    std::variant<DedicatedCell, GroupWindowCell> kind;

    int span() const noexcept {
        if (const auto* w = std::get_if<GroupWindowCell>(&kind)) return w->length;
        return 1;
    }
};

struct Slotframe {
    SlotframeConfig config;
    std::vector<Cell> cells;
};

/// Per-uplink outcome of schedule construction.
struct LinkAllocation {
    Link link;
    double demand = 0.0;    // packets per slotframe crossing this link (own + forwarded)
    double admitted = 0.0;  // share of `demand` the slotframe could accommodate
    int cells = 0;          // dedicated cells, or 0 when the sender is grouped
    std::optional<int> group_id;
    bool capacity_exceeded = false;
};

struct Schedule {
    Slotframe frame;
    std::vector<Group> groups;         // empty for plain TSCH
    std::vector<LinkAllocation> links; // one per non-coordinator node, ascending sender
    bool hybrid = false;

    /// True when every link's demand was fully placed.
    bool within_capacity() const;
    const Group* group(int group_id) const;
};

/// Plain 6TiSCH-style schedule: conflict-free dedicated cells only.
/// `demands[v]` is node v's own generation in packets per slotframe; forwarding
/// is accounted for, so a packet crossing k hops consumes k cells.
Schedule build_tsch_schedule(const Topology& topology, std::span<const double> demands,
                             const SlotframeConfig& config);

/// Hybrid schedule: each SCG group gets one contiguous window of
/// ceil(sum(member demand) * txn_slots * margin) slots on one channel offset;
/// ungrouped nodes get dedicated cells exactly as in build_tsch_schedule.
Schedule build_hybrid_schedule(const Topology& topology, const GroupingResult& grouping,
                               std::span<const double> demands, const SlotframeConfig& config);

/// Invariant check: slot/channel bounds, no (slot, channel) shared by two cells,
/// no node in two cells during one slot, reserved slots untouched. Returns the
/// list of violations (empty when the schedule is valid).
std::vector<std::string> schedule_violations(const Schedule& schedule);

nlohmann::json schedule_to_json(const Schedule& schedule);

}  // namespace meshmac
