#pragma once

#include "meshmac/common.hpp"
#include "meshmac/csma.hpp"
#include "meshmac/schedule.hpp"
#include "meshmac/topology.hpp"

#include <cstdint>
#include <iosfwd>
#include <queue>
#include <string_view>
#include <vector>

namespace meshmac {

enum class MacMode { csma, tsch, scg_hybrid };

std::string_view to_string(MacMode mode);
MacMode parse_mac_mode(std::string_view text);

enum class EventKind { arrival, backoff_expiry, cca_check, tx_start, tx_end, ack, slot_boundary };

std::string_view to_string(EventKind kind);

struct Event {
    SimTime time{0};
    std::uint64_t seq = 0;
    EventKind kind = EventKind::arrival;
    NodeId subject = 0;
    std::uint64_t token = 0;  // transmission id, or a staleness guard for backoff events
};

/// Min-queue over (time, seq). `seq` is assigned on push, so equal-time events
/// pop in insertion order and the whole run is a deterministic total order.
class EventQueue {
public:
    void push(SimTime time, EventKind kind, NodeId subject, std::uint64_t token = 0);
    Event pop();
    bool empty() const noexcept { return heap_.empty(); }
    std::size_t size() const noexcept { return heap_.size(); }
    SimTime next_time() const { return heap_.top().time; }

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    std::uint64_t next_seq_ = 0;
    SimTime last_popped_{0};
    std::uint64_t last_seq_ = 0;
    bool popped_any_ = false;
};

/// Periodic source: arrivals at phase, phase + interval, ...
struct TrafficSource {
    SimTime phase{0};
    SimTime interval{0};  // zero means the node generates nothing
};

/// One source per node (the coordinator's is silent). Interval is 1/rate rounded
/// to the microsecond; the phase is uniform in [0, interval) from the seeded stream.
std::vector<TrafficSource> make_traffic_sources(std::size_t node_count, double rate,
                                                std::uint64_t seed);

struct Arrival {
    SimTime time{0};
    NodeId node = 0;
};

/// All arrivals in [0, duration), sorted by (time, node).
std::vector<Arrival> generate_traffic(std::size_t node_count, double rate, SimTime duration,
                                      std::uint64_t seed);

struct RunConfig {
    MacMode mode = MacMode::csma;
    BackoffParams csma;
    SimTime duration{10'000'000};
    double warmup_fraction = 0.1;
    double rate = 1.0;  // packets per second per node
    std::uint64_t seed = 1;
    std::size_t queue_cap = 64;
    SimTime tsch_tx_duration{5'000};  // data + ACK inside one TSCH slot
    SimTime window_jitter{1'000};     // hybrid: members start contending within this offset

    SimTime warmup() const;
    void validate() const;
};

/// Counters for packets generated inside the measurement window, attributed to
/// their origin node; collisions are attributed to the transmitting node.
struct NodeCounters {
    std::uint64_t generated = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t overflowed = 0;  // the part of `dropped` lost to a full relay or source queue
    std::uint64_t in_flight = 0;
    std::uint64_t collided = 0;
};

struct RunMetrics {
    std::vector<NodeCounters> nodes;
    SimTime window_start{0};
    SimTime window_end{0};
    std::uint64_t delivered_in_window = 0;  // coordinator receptions inside the window
    std::uint64_t transmissions = 0;        // attempts ending inside the window
    std::vector<std::uint64_t> delivered_per_second;
    std::uint64_t events = 0;
    std::uint64_t trace_hash = 0;  // FNV-1a over (time, kind, subject) of every trace line

    std::uint64_t total_generated() const;
    std::uint64_t total_delivered() const;
    std::uint64_t total_dropped() const;
    std::uint64_t total_overflowed() const;
    std::uint64_t total_in_flight() const;
    std::uint64_t total_collided() const;
    std::vector<std::uint64_t> collisions_per_node() const;
};

/// Executes one run until the clock reaches `config.duration`.
///
/// `schedule` is required for tsch (plain) and scg_hybrid (hybrid) modes and
/// ignored for csma. If `trace` is non-null, every event is written as one
/// line "time_us kind subject".
RunMetrics run(const Topology& topology, const Schedule* schedule, const RunConfig& config,
               std::ostream* trace = nullptr);

}  // namespace meshmac
