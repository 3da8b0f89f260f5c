#include "meshmac/engine.hpp"

#include "meshmac/channel.hpp"
#include "meshmac/rng.hpp"

#include <cmath>
#include <deque>
#include <numeric>
#include <ostream>
#include <string>

namespace meshmac {

std::string_view to_string(MacMode mode) {
    switch (mode) {
    case MacMode::csma: return "csma";
    case MacMode::tsch: return "tsch";
    case MacMode::scg_hybrid: return "scg_hybrid";
    }
    return "?";
}

MacMode parse_mac_mode(std::string_view text) {
    if (text == "csma") return MacMode::csma;
    if (text == "tsch") return MacMode::tsch;
    if (text == "scg_hybrid") return MacMode::scg_hybrid;
    throw ConfigError("unknown mac mode '" + std::string(text) + "'");
}

std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::arrival: return "arrival";
    case EventKind::backoff_expiry: return "backoff_expiry";
    case EventKind::cca_check: return "cca_check";
    case EventKind::tx_start: return "tx_start";
    case EventKind::tx_end: return "tx_end";
    case EventKind::ack: return "ack";
    case EventKind::slot_boundary: return "slot_boundary";
    }
    return "?";
}

void EventQueue::push(SimTime time, EventKind kind, NodeId subject, std::uint64_t token) {
    heap_.push(Event{time, next_seq_++, kind, subject, token});
}

Event EventQueue::pop() {
    Event e = heap_.top();
    heap_.pop();
    if (popped_any_ && (e.time < last_popped_ || (e.time == last_popped_ && e.seq < last_seq_)))
        throw Error("event queue popped out of (time, seq) order");
    popped_any_ = true;
    last_popped_ = e.time;
    last_seq_ = e.seq;
    return e;
}

std::vector<TrafficSource> make_traffic_sources(std::size_t node_count, double rate,
                                                std::uint64_t seed) {
    if (rate < 0.0 || !std::isfinite(rate)) throw ConfigError("traffic rate must be >= 0");
    std::vector<TrafficSource> sources(node_count);
    if (rate == 0.0) return sources;
    const auto interval = static_cast<std::int64_t>(std::llround(1e6 / rate));
    if (interval < 1) throw ConfigError("traffic rate exceeds one packet per microsecond");
    Rng rng(seed, Rng::kTrafficPhase);
    for (std::size_t v = 1; v < node_count; ++v) {
        const auto phase = static_cast<std::int64_t>(rng.uniform_int(0, interval - 1));
        sources[v] = {SimTime{phase}, SimTime{interval}};
    }
    return sources;
}

std::vector<Arrival> generate_traffic(std::size_t node_count, double rate, SimTime duration,
                                      std::uint64_t seed) {
    std::vector<Arrival> arrivals;
    const auto sources = make_traffic_sources(node_count, rate, seed);
    for (NodeId v = 0; v < node_count; ++v) {
        if (sources[v].interval.count() == 0) continue;
        for (SimTime t = sources[v].phase; t < duration; t += sources[v].interval)
            arrivals.push_back({t, v});
    }
    std::sort(arrivals.begin(), arrivals.end(), [](const Arrival& a, const Arrival& b) {
        return a.time != b.time ? a.time < b.time : a.node < b.node;
    });
    return arrivals;
}

SimTime RunConfig::warmup() const {
    return SimTime{static_cast<std::int64_t>(
        std::llround(static_cast<double>(duration.count()) * warmup_fraction))};
}

void RunConfig::validate() const {
    csma.validate();
    if (duration.count() <= 0) throw ConfigError("run: duration must be positive");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
        throw ConfigError("run: warmup fraction must be in [0, 1)");
    if (queue_cap < 1) throw ConfigError("run: queue cap must be at least 1");
    if (window_jitter.count() < 0 || tsch_tx_duration.count() <= 0)
        throw ConfigError("run: invalid TSCH timing");
}

std::uint64_t RunMetrics::total_generated() const {
    return std::accumulate(nodes.begin(), nodes.end(), std::uint64_t{0},
                           [](std::uint64_t a, const NodeCounters& c) { return a + c.generated; });
}
std::uint64_t RunMetrics::total_delivered() const {
    return std::accumulate(nodes.begin(), nodes.end(), std::uint64_t{0},
                           [](std::uint64_t a, const NodeCounters& c) { return a + c.delivered; });
}
std::uint64_t RunMetrics::total_dropped() const {
    return std::accumulate(nodes.begin(), nodes.end(), std::uint64_t{0},
                           [](std::uint64_t a, const NodeCounters& c) { return a + c.dropped; });
}
std::uint64_t RunMetrics::total_overflowed() const {
    return std::accumulate(nodes.begin(), nodes.end(), std::uint64_t{0},
                           [](std::uint64_t a, const NodeCounters& c) { return a + c.overflowed; });
}
std::uint64_t RunMetrics::total_in_flight() const {
    return std::accumulate(nodes.begin(), nodes.end(), std::uint64_t{0},
                           [](std::uint64_t a, const NodeCounters& c) { return a + c.in_flight; });
}
std::uint64_t RunMetrics::total_collided() const {
    return std::accumulate(nodes.begin(), nodes.end(), std::uint64_t{0},
                           [](std::uint64_t a, const NodeCounters& c) { return a + c.collided; });
}
std::vector<std::uint64_t> RunMetrics::collisions_per_node() const {
    std::vector<std::uint64_t> out;
    out.reserve(nodes.size());
    for (const auto& c : nodes) out.push_back(c.collided);
    return out;
}

namespace {

struct Packet {
    std::uint64_t id = 0;
    NodeId origin = 0;
    bool counted = false;  // generated inside the measurement window
};

enum class OnAir { none, csma, dedicated };

struct NodeState {
    std::deque<Packet> queue;
    std::optional<CsmaTransaction> txn;
    std::uint64_t token = 0;  // bumps invalidate queued backoff events
    OnAir on_air = OnAir::none;
    std::uint64_t tx_id = 0;
    bool grouped = false;
    SimTime window_start{-1};
    SimTime window_end{-1};
    int window_channel = 0;
    std::optional<SimTime> frozen;  // backoff left over when the last window closed
    Rng rng;

    explicit NodeState(Rng r) : rng(r) {}
};

class Simulation {
public:
    Simulation(const Topology& topology, const Schedule* schedule, const RunConfig& config,
               std::ostream* trace)
        : topo_(topology), schedule_(schedule), cfg_(config), trace_(trace), channels_(topology) {
        cfg_.validate();
        if (!topology.has_tree()) throw ConfigError("run: topology has no tree");
        if (cfg_.mode == MacMode::tsch && (!schedule || schedule->hybrid))
            throw ConfigError("run: tsch mode needs a plain TSCH schedule");
        if (cfg_.mode == MacMode::scg_hybrid && (!schedule || !schedule->hybrid))
            throw ConfigError("run: scg_hybrid mode needs a hybrid schedule built from a grouping");
        if (cfg_.mode == MacMode::csma) schedule_ = nullptr;

        nodes_.reserve(topology.size());
        for (NodeId v = 0; v < topology.size(); ++v)
            nodes_.emplace_back(Rng(cfg_.seed, Rng::kNodeBase + v));

        if (schedule_) {
            const auto& frame = schedule_->frame;
            if (frame.config.length < 1) throw ConfigError("run: empty slotframe");
            cells_at_.assign(static_cast<std::size_t>(frame.config.length), {});
            for (std::size_t i = 0; i < frame.cells.size(); ++i) {
                const auto& cell = frame.cells[i];
                if (cell.slot < 0 || cell.slot >= frame.config.length)
                    throw ConfigError("run: schedule cell outside the slotframe");
                cells_at_[cell.slot].push_back(i);
            }
            for (const auto& g : schedule_->groups)
                for (NodeId m : g.members) {
                    if (m >= topology.size()) throw ConfigError("run: group member out of range");
                    nodes_[m].grouped = true;
                }
        }

        warmup_ = cfg_.warmup();
        metrics_.nodes.assign(topology.size(), {});
        metrics_.window_start = warmup_;
        metrics_.window_end = cfg_.duration;
        metrics_.delivered_per_second.assign(
            static_cast<std::size_t>((cfg_.duration.count() + 999'999) / 1'000'000), 0);
    }

    RunMetrics execute() {
        sources_ = make_traffic_sources(topo_.size(), cfg_.rate, cfg_.seed);
        for (NodeId v = 1; v < topo_.size(); ++v)
            if (sources_[v].interval.count() > 0 && sources_[v].phase < cfg_.duration)
                queue_.push(sources_[v].phase, EventKind::arrival, v);
        if (schedule_) queue_.push(SimTime{0}, EventKind::slot_boundary, 0, 0);

        while (!queue_.empty() && queue_.next_time() < cfg_.duration) {
            const Event e = queue_.pop();
            now_ = e.time;
            ++metrics_.events;
            switch (e.kind) {
            case EventKind::arrival: on_arrival(e); break;
            case EventKind::backoff_expiry: on_backoff(e); break;
            case EventKind::tx_end: on_tx_end(e); break;
            case EventKind::slot_boundary: on_slot(e); break;
            default: throw Error("run: unexpected queued event kind");
            }
        }

        for (const auto& node : nodes_)
            for (const auto& p : node.queue)
                if (p.counted) ++metrics_.nodes[p.origin].in_flight;
        metrics_.trace_hash = hash_;
        return std::move(metrics_);
    }

private:
    bool in_window(SimTime t) const { return t >= warmup_ && t < cfg_.duration; }

    void trace(EventKind kind, NodeId subject) {
        // FNV-1a over the fixed-width fields of the trace line.
        auto feed = [this](std::uint64_t value, int bytes) {
            for (int i = 0; i < bytes; ++i) {
                hash_ ^= (value >> (8 * i)) & 0xffU;
                hash_ *= 0x100000001b3ULL;
            }
        };
        feed(static_cast<std::uint64_t>(now_.count()), 8);
        feed(static_cast<std::uint64_t>(kind), 1);
        feed(subject, 4);
        if (trace_) *trace_ << now_.count() << ' ' << to_string(kind) << ' ' << subject << '\n';
    }

    bool contends(NodeId v) const {
        if (v == kCoordinator) return false;
        if (cfg_.mode == MacMode::csma) return true;
        return cfg_.mode == MacMode::scg_hybrid && nodes_[v].grouped;
    }

    bool window_open(const NodeState& node, SimTime t) const {
        return t >= node.window_start && t < node.window_end;
    }

    int contention_channel(const NodeState& node) const {
        return cfg_.mode == MacMode::csma ? 0 : node.window_channel;
    }

    void on_arrival(const Event& e) {
        trace(EventKind::arrival, e.subject);
        const NodeId v = e.subject;
        const bool counted = in_window(now_);
        if (counted) ++metrics_.nodes[v].generated;
        enqueue(v, Packet{next_packet_id_++, v, counted});

        const SimTime next = now_ + sources_[v].interval;
        if (next < cfg_.duration) queue_.push(next, EventKind::arrival, v);
        kick(v, SimTime{0});
    }

    void enqueue(NodeId v, const Packet& p) {
        auto& node = nodes_[v];
        if (node.queue.size() >= cfg_.queue_cap) {
            drop(p);
            if (p.counted) ++metrics_.nodes[p.origin].overflowed;
            return;
        }
        node.queue.push_back(p);
    }

    void drop(const Packet& p) {
        if (p.counted) ++metrics_.nodes[p.origin].dropped;
    }

    void deliver(const Packet& p) {
        if (p.counted) ++metrics_.nodes[p.origin].delivered;
        if (in_window(now_)) ++metrics_.delivered_in_window;
        const auto second = static_cast<std::size_t>(now_.count() / 1'000'000);
        if (second < metrics_.delivered_per_second.size()) ++metrics_.delivered_per_second[second];
    }

    void forward(NodeId v, const Packet& p) {
        const NodeId parent = *topo_.node(v).parent;
        if (parent == kCoordinator) {
            deliver(p);
            return;
        }
        enqueue(parent, p);
        kick(parent, SimTime{0});
    }

    // Opens a contention transaction for the queue head if the node may contend now.
    void kick(NodeId v, SimTime extra_delay) {
        auto& node = nodes_[v];
        if (!contends(v) || node.txn || node.queue.empty()) return;
        if (cfg_.mode == MacMode::scg_hybrid && !window_open(node, now_)) return;
        auto [txn, action] = open_transaction(v, *topo_.node(v).parent, node.queue.front().id,
                                              cfg_.csma, node.rng);
        node.txn = txn;
        apply(v, action, extra_delay);
    }

    // Backoff of a group member only counts down while its window is open; the
    // remainder is frozen at window end and resumed when the next window opens.
    void schedule_backoff(NodeId v, SimTime from, SimTime delay) {
        auto& node = nodes_[v];
        ++node.token;
        node.frozen.reset();
        if (cfg_.mode == MacMode::scg_hybrid) {
            const SimTime run = window_open(node, from) ? node.window_end - from : SimTime{0};
            if (delay >= run) {
                node.frozen = delay - run;
                return;
            }
        }
        queue_.push(from + delay, EventKind::backoff_expiry, v, node.token);
    }

    void apply(NodeId v, const TxnAction& action, SimTime extra_delay = SimTime{0}) {
        auto& node = nodes_[v];
        switch (action.kind) {
        case TxnAction::Kind::schedule_backoff:
            schedule_backoff(v, now_ + extra_delay, action.delay);
            break;
        case TxnAction::Kind::start_transmission: {
            trace(EventKind::tx_start, v);
            const SimTime end = now_ + action.delay;
            node.tx_id = channels_.begin(v, node.txn->receiver, contention_channel(node), now_, end,
                                         node.txn->packet_id);
            node.on_air = OnAir::csma;
            queue_.push(end, EventKind::tx_end, v, node.tx_id);
            break;
        }
        case TxnAction::Kind::dropped: {
            const Packet p = node.queue.front();
            node.queue.pop_front();
            drop(p);
            node.txn.reset();
            kick(v, SimTime{0});
            break;
        }
        case TxnAction::Kind::delivered:
        case TxnAction::Kind::run_cca:
        case TxnAction::Kind::none:
            break;
        }
    }

    void on_backoff(const Event& e) {
        const NodeId v = e.subject;
        auto& node = nodes_[v];
        if (e.token != node.token || !node.txn || node.txn->state != TxnState::backing_off) return;
        trace(EventKind::backoff_expiry, v);

        if (cfg_.mode == MacMode::scg_hybrid &&
            !(window_open(node, now_) && now_ + cfg_.csma.txn_duration <= node.window_end)) {
            // Not enough window left for the transaction: CCA first thing next window.
            node.frozen = SimTime{0};
            return;
        }
        advance_transaction(*node.txn, TxnEvent::backoff_expired, cfg_.csma, node.rng);
        trace(EventKind::cca_check, v);
        const auto status = cca(channels_, v, contention_channel(node), now_);
        const auto action = advance_transaction(
            *node.txn, status == ChannelStatus::clear ? TxnEvent::cca_clear : TxnEvent::cca_busy,
            cfg_.csma, node.rng);
        apply(v, action);
    }

    void on_tx_end(const Event& e) {
        const NodeId v = e.subject;
        auto& node = nodes_[v];
        trace(EventKind::tx_end, v);
        const Transmission tx = channels_.finish(e.token);
        const bool ok = !tx.corrupted;
        if (in_window(now_)) {
            ++metrics_.transmissions;
            if (!ok) ++metrics_.nodes[v].collided;
        }
        const OnAir kind = node.on_air;
        node.on_air = OnAir::none;

        if (kind == OnAir::dedicated) {
            if (ok) {
                trace(EventKind::ack, v);
                const Packet p = node.queue.front();
                node.queue.pop_front();
                forward(v, p);
            }
            return;
        }

        advance_transaction(*node.txn, TxnEvent::tx_end, cfg_.csma, node.rng);
        if (ok) {
            trace(EventKind::ack, v);
            advance_transaction(*node.txn, TxnEvent::ack_received, cfg_.csma, node.rng);
            const Packet p = node.queue.front();
            node.queue.pop_front();
            node.txn.reset();
            forward(v, p);
            kick(v, SimTime{0});
        } else {
            apply(v, advance_transaction(*node.txn, TxnEvent::ack_timeout, cfg_.csma, node.rng));
        }
    }

    void on_slot(const Event& e) {
        const auto& frame = schedule_->frame;
        const auto slot_index = static_cast<std::size_t>(e.token % frame.config.length);
        trace(EventKind::slot_boundary, static_cast<NodeId>(slot_index));

        for (std::size_t ci : cells_at_[slot_index]) {
            const auto& cell = frame.cells[ci];
            if (const auto* d = std::get_if<DedicatedCell>(&cell.kind)) {
                auto& node = nodes_[d->sender];
                if (node.queue.empty() || node.on_air != OnAir::none) continue;
                trace(EventKind::tx_start, d->sender);
                const SimTime end = now_ + cfg_.tsch_tx_duration;
                node.tx_id = channels_.begin(d->sender, d->receiver, cell.channel_offset, now_, end,
                                             node.queue.front().id);
                node.on_air = OnAir::dedicated;
                queue_.push(end, EventKind::tx_end, d->sender, node.tx_id);
            } else {
                const auto& w = std::get<GroupWindowCell>(cell.kind);
                open_window(w, cell.channel_offset, frame.config.slot_duration);
            }
        }

        const SimTime next = now_ + frame.config.slot_duration;
        if (next < cfg_.duration) queue_.push(next, EventKind::slot_boundary, 0, e.token + 1);
    }

    void open_window(const GroupWindowCell& w, int channel, SimTime slot_duration) {
        const auto* group = schedule_->group(w.group_id);
        if (!group) throw ConfigError("run: window references unknown group");
        for (NodeId m : group->members) {
            auto& node = nodes_[m];
            node.window_start = now_;
            node.window_end = now_ + slot_duration * w.length;
            node.window_channel = channel;
            // Members wake with a small independent offset (clock/guard jitter).
            const SimTime jitter{cfg_.window_jitter.count() > 0
                                     ? static_cast<std::int64_t>(node.rng.uniform_int(
                                           0, static_cast<std::uint64_t>(cfg_.window_jitter.count() - 1)))
                                     : 0};
            if (node.txn) {
                if (node.txn->state != TxnState::backing_off || !node.frozen) continue;
                schedule_backoff(m, now_ + jitter, *node.frozen);
            } else {
                kick(m, jitter);
            }
        }
    }

    const Topology& topo_;
    const Schedule* schedule_;
    RunConfig cfg_;
    std::ostream* trace_;
    ChannelState channels_;
    EventQueue queue_;
    std::vector<NodeState> nodes_;
    std::vector<TrafficSource> sources_;
    std::vector<std::vector<std::size_t>> cells_at_;
    RunMetrics metrics_;
    SimTime now_{0};
    SimTime warmup_{0};
    std::uint64_t next_packet_id_ = 1;
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

RunMetrics run(const Topology& topology, const Schedule* schedule, const RunConfig& config,
               std::ostream* trace) {
    return Simulation(topology, schedule, config, trace).execute();
}

}  // namespace meshmac
