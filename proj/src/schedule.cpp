#include "meshmac/schedule.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

namespace meshmac {

namespace {

constexpr double kEps = 1e-9;

// Ceiling that ignores floating-point dust (4 * 0.4 * 1.5 must stay 3, not become 4).
int ceil_count(double x) {
    if (x <= kEps) return 0;
    return static_cast<int>(std::ceil(x - kEps));
}

struct Admission {
    std::vector<double> flow;        // admitted packets/slotframe on each node's uplink
    std::vector<double> group_flow;  // per group
    std::vector<double> demand;      // requested packets/slotframe on each node's uplink
};

class Builder {
public:
    Builder(const Topology& topology, const std::vector<Group>& groups,
            std::span<const double> demands, const SlotframeConfig& config)
        : topo_(topology), groups_(groups), own_(demands.begin(), demands.end()), config_(config) {
        config_.validate();
        if (!topology.has_tree()) throw ConfigError("schedule: topology has no tree");
        if (own_.size() != topology.size())
            throw ConfigError("schedule: demand vector length must equal node count");
        for (double d : own_)
            if (d < 0.0 || !std::isfinite(d)) throw ConfigError("schedule: demands must be >= 0");

        group_of_.assign(topology.size(), -1);
        for (std::size_t g = 0; g < groups_.size(); ++g)
            for (NodeId m : groups_[g].members) {
                if (m >= topology.size() || m == kCoordinator)
                    throw ConfigError("grouping references an invalid node");
                if (group_of_[m] != -1) throw ConfigError("node appears in two groups");
                if (topology.node(m).parent != groups_[g].parent)
                    throw ConfigError("group member does not share the group parent");
                group_of_[m] = static_cast<int>(g);
            }
    }

    Schedule build(bool hybrid) {
        admit();
        Schedule schedule;
        schedule.hybrid = hybrid;
        schedule.groups = groups_;
        schedule.frame.config = config_;
        layout(schedule);
        return schedule;
    }

private:
    int window_length(double flow) const {
        return ceil_count(flow * config_.txn_slots * config_.contention_margin);
    }

    // Round-robin admission: every source in turn (descending demand, then id)
    // gets up to one more packet per round along its whole route, as long as no
    // node's slot budget and no channel budget overflows.
    void admit() {
        const std::size_t n = topo_.size();
        adm_.flow.assign(n, 0.0);
        adm_.demand.assign(n, 0.0);
        adm_.group_flow.assign(groups_.size(), 0.0);
        busy_.assign(n, 0);
        total_cells_ = 0;

        routes_.resize(n);
        for (NodeId v = 1; v < n; ++v) {
            routes_[v] = topo_.route_to_coordinator(v);
            for (std::size_t h = 0; h + 1 < routes_[v].size(); ++h)
                adm_.demand[routes_[v][h]] += own_[v];
        }

        std::vector<NodeId> order;
        for (NodeId v = 1; v < n; ++v)
            if (own_[v] > kEps) order.push_back(v);
        std::stable_sort(order.begin(), order.end(),
                         [&](NodeId a, NodeId b) { return own_[a] > own_[b]; });

        std::vector<double> remaining = own_;
        std::vector<bool> blocked(n, false);
        bool progress = true;
        while (progress) {
            progress = false;
            for (NodeId s : order) {
                if (blocked[s] || remaining[s] <= kEps) continue;
                const double inc = std::min(1.0, remaining[s]);
                if (try_admit(s, inc)) {
                    remaining[s] -= inc;
                    progress = true;
                } else {
                    blocked[s] = true;
                }
            }
        }
    }

    bool try_admit(NodeId source, double inc) {
        std::map<NodeId, int> delta;
        std::map<int, double> group_inc;
        long cell_delta = 0;
        const auto& route = routes_[source];
        for (std::size_t h = 0; h + 1 < route.size(); ++h) {
            const NodeId v = route[h];
            const NodeId p = route[h + 1];
            const int g = group_of_[v];
            if (g < 0) {
                const int d = ceil_count(adm_.flow[v] + inc) - ceil_count(adm_.flow[v]);
                delta[v] += d;
                delta[p] += d;
                cell_delta += d;
            } else {
                group_inc[g] += inc;
            }
        }
        for (const auto& [g, add] : group_inc) {
            const int d = window_length(adm_.group_flow[g] + add) - window_length(adm_.group_flow[g]);
            if (d == 0) continue;
            delta[groups_[g].parent] += d;
            for (NodeId m : groups_[g].members) delta[m] += d;
            cell_delta += d;
        }

        const int usable = config_.usable_slots();
        for (const auto& [node, d] : delta)
            if (busy_[node] + d > usable) return false;
        if (total_cells_ + cell_delta > static_cast<long>(usable) * config_.num_channels)
            return false;

        for (const auto& [node, d] : delta) busy_[node] += d;
        total_cells_ += cell_delta;
        for (std::size_t h = 0; h + 1 < route.size(); ++h) adm_.flow[route[h]] += inc;
        for (const auto& [g, add] : group_inc) adm_.group_flow[g] += add;
        return true;
    }

    struct Occupancy {
        std::vector<std::vector<std::uint8_t>> node;     // [node][slot]
        std::vector<std::vector<std::uint8_t>> channel;  // [slot][channel]
    };

    bool fits(const Occupancy& occ, std::span<const NodeId> nodes, int slot, int len,
              int channel) const {
        for (int s = slot; s < slot + len; ++s) {
            if (occ.channel[s][channel]) return false;
            for (NodeId v : nodes)
                if (occ.node[v][s]) return false;
        }
        return true;
    }

    // Earliest (slot, channel) where `nodes` are all idle for `len` slots.
    std::optional<std::pair<int, int>> first_fit(const Occupancy& occ,
                                                 std::span<const NodeId> nodes, int len) const {
        const int usable = config_.usable_slots();
        for (int s = 0; s + len <= usable; ++s)
            for (int c = 0; c < config_.num_channels; ++c)
                if (fits(occ, nodes, s, len, c)) return std::pair{s, c};
        return std::nullopt;
    }

    static void occupy(Occupancy& occ, std::span<const NodeId> nodes, int slot, int len,
                       int channel) {
        for (int s = slot; s < slot + len; ++s) {
            occ.channel[s][channel] = 1;
            for (NodeId v : nodes) occ.node[v][s] = 1;
        }
    }

    void layout(Schedule& schedule) {
        const std::size_t n = topo_.size();
        Occupancy occ;
        occ.node.assign(n, std::vector<std::uint8_t>(config_.length, 0));
        occ.channel.assign(config_.length, std::vector<std::uint8_t>(config_.num_channels, 0));

        // Windows first, nearest the coordinator first: they need contiguous runs.
        std::vector<std::size_t> window_order(groups_.size());
        std::iota(window_order.begin(), window_order.end(), 0);
        std::stable_sort(window_order.begin(), window_order.end(), [&](std::size_t a, std::size_t b) {
            const int la = topo_.node(groups_[a].parent).layer;
            const int lb = topo_.node(groups_[b].parent).layer;
            if (la != lb) return la < lb;
            return window_length(adm_.group_flow[a]) > window_length(adm_.group_flow[b]);
        });
        std::vector<bool> group_short(groups_.size(), false);
        for (std::size_t g : window_order) {
            const int wanted = window_length(adm_.group_flow[g]);
            if (wanted == 0) continue;
            std::vector<NodeId> nodes = groups_[g].members;
            nodes.push_back(groups_[g].parent);
            for (int len = wanted; len >= 1; --len) {
                if (auto at = first_fit(occ, nodes, len)) {
                    occupy(occ, nodes, at->first, len, at->second);
                    schedule.frame.cells.push_back(
                        {at->first, at->second,
                         GroupWindowCell{groups_[g].group_id, groups_[g].parent, len}});
                    group_short[g] = len < wanted;
                    break;
                }
                group_short[g] = true;
            }
        }

        std::vector<NodeId> link_order;
        for (NodeId v = 1; v < n; ++v)
            if (group_of_[v] < 0) link_order.push_back(v);
        std::stable_sort(link_order.begin(), link_order.end(), [&](NodeId a, NodeId b) {
            const int la = topo_.node(*topo_.node(a).parent).layer;
            const int lb = topo_.node(*topo_.node(b).parent).layer;
            if (la != lb) return la < lb;
            return ceil_count(adm_.flow[a]) > ceil_count(adm_.flow[b]);
        });
        std::vector<int> placed(n, 0);
        for (NodeId v : link_order) {
            const NodeId p = *topo_.node(v).parent;
            const std::array<NodeId, 2> pair{v, p};
            const int wanted = ceil_count(adm_.flow[v]);
            for (int k = 0; k < wanted; ++k) {
                const auto at = first_fit(occ, pair, 1);
                if (!at) break;
                occupy(occ, pair, at->first, 1, at->second);
                schedule.frame.cells.push_back({at->first, at->second, DedicatedCell{v, p}});
                ++placed[v];
            }
        }

        std::stable_sort(schedule.frame.cells.begin(), schedule.frame.cells.end(),
                         [](const Cell& a, const Cell& b) {
                             return a.slot != b.slot ? a.slot < b.slot
                                                     : a.channel_offset < b.channel_offset;
                         });

        for (NodeId v = 1; v < n; ++v) {
            LinkAllocation alloc;
            alloc.link = {v, *topo_.node(v).parent};
            alloc.demand = adm_.demand[v];
            alloc.admitted = adm_.flow[v];
            const int g = group_of_[v];
            bool short_placed = false;
            if (g >= 0) {
                alloc.group_id = groups_[g].group_id;
                short_placed = group_short[g];
            } else {
                alloc.cells = placed[v];
                short_placed = placed[v] < ceil_count(adm_.flow[v]);
            }
            alloc.capacity_exceeded = short_placed || alloc.admitted + kEps < alloc.demand;
            schedule.links.push_back(alloc);
        }
    }

    const Topology& topo_;
    std::vector<Group> groups_;
    std::vector<double> own_;
    SlotframeConfig config_;
    std::vector<int> group_of_;
    std::vector<std::vector<NodeId>> routes_;
    Admission adm_;
    std::vector<int> busy_;
    long total_cells_ = 0;
};

}  // namespace

void SlotframeConfig::validate() const {
    if (length < 1) throw ConfigError("tsch: slotframe length must be positive");
    if (num_channels < 1) throw ConfigError("tsch: need at least one channel");
    if (reserved_slots < 0 || reserved_slots >= length)
        throw ConfigError("tsch: reserved slots must leave at least one usable slot");
    if (slot_duration.count() <= 0) throw ConfigError("tsch: slot duration must be positive");
    if (!(txn_slots > 0.0) || !(contention_margin > 0.0))
        throw ConfigError("hybrid: txn_slots and margin must be positive");
}

int default_slotframe_length(std::size_t node_count) {
    return static_cast<int>(std::max<std::size_t>(node_count, 100));
}

bool Schedule::within_capacity() const {
    return std::none_of(links.begin(), links.end(),
                        [](const LinkAllocation& l) { return l.capacity_exceeded; });
}

const Group* Schedule::group(int group_id) const {
    for (const auto& g : groups)
        if (g.group_id == group_id) return &g;
    return nullptr;
}

Schedule build_tsch_schedule(const Topology& topology, std::span<const double> demands,
                             const SlotframeConfig& config) {
    const std::vector<Group> none;
    return Builder(topology, none, demands, config).build(false);
}

Schedule build_hybrid_schedule(const Topology& topology, const GroupingResult& grouping,
                               std::span<const double> demands, const SlotframeConfig& config) {
    return Builder(topology, grouping.groups, demands, config).build(true);
}

std::vector<std::string> schedule_violations(const Schedule& schedule) {
    std::vector<std::string> problems;
    const auto& cfg = schedule.frame.config;
    std::map<std::pair<int, int>, int> cell_at;  // (slot, channel) -> cell index
    std::map<std::pair<int, NodeId>, int> node_at;

    for (std::size_t i = 0; i < schedule.frame.cells.size(); ++i) {
        const auto& cell = schedule.frame.cells[i];
        const std::string where = "cell " + std::to_string(i) + " (slot " +
                                  std::to_string(cell.slot) + ", ch " +
                                  std::to_string(cell.channel_offset) + ")";
        if (cell.channel_offset < 0 || cell.channel_offset >= cfg.num_channels)
            problems.push_back(where + ": channel out of range");
        if (cell.slot < 0 || cell.slot + cell.span() > cfg.usable_slots())
            problems.push_back(where + ": outside usable slots");

        std::vector<NodeId> nodes;
        if (const auto* d = std::get_if<DedicatedCell>(&cell.kind)) {
            nodes = {d->sender, d->receiver};
            if (d->sender == d->receiver) problems.push_back(where + ": self link");
        } else {
            const auto& w = std::get<GroupWindowCell>(cell.kind);
            const auto* g = schedule.group(w.group_id);
            if (!g) {
                problems.push_back(where + ": unknown group");
                continue;
            }
            if (g->parent != w.receiver) problems.push_back(where + ": window not addressed to parent");
            nodes = g->members;
            nodes.push_back(w.receiver);
        }
        for (int s = cell.slot; s < cell.slot + cell.span(); ++s) {
            if (!cell_at.emplace(std::pair{s, cell.channel_offset}, static_cast<int>(i)).second)
                problems.push_back(where + ": shares slot " + std::to_string(s) + " and channel");
            for (NodeId v : nodes)
                if (!node_at.emplace(std::pair{s, v}, static_cast<int>(i)).second)
                    problems.push_back(where + ": node " + std::to_string(v) +
                                       " double-booked in slot " + std::to_string(s));
        }
    }
    return problems;
}

nlohmann::json schedule_to_json(const Schedule& schedule) {
    const auto& cfg = schedule.frame.config;
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : schedule.frame.cells) {
        nlohmann::json entry{{"slot", cell.slot}, {"channel_offset", cell.channel_offset}};
        if (const auto* d = std::get_if<DedicatedCell>(&cell.kind)) {
            entry["kind"] = "dedicated";
            entry["sender"] = d->sender;
            entry["receiver"] = d->receiver;
        } else {
            const auto& w = std::get<GroupWindowCell>(cell.kind);
            entry["kind"] = "group_window";
            entry["group_id"] = w.group_id;
            entry["receiver"] = w.receiver;
            entry["length"] = w.length;
        }
        cells.push_back(std::move(entry));
    }
    nlohmann::json links = nlohmann::json::array();
    for (const auto& l : schedule.links) {
        links.push_back({{"sender", l.link.sender},
                         {"receiver", l.link.receiver},
                         {"demand", l.demand},
                         {"admitted", l.admitted},
                         {"cells", l.cells},
                         {"group_id", l.group_id ? nlohmann::json(*l.group_id) : nlohmann::json()},
                         {"capacity_exceeded", l.capacity_exceeded}});
    }
    return {{"format", "meshmac.schedule"},
            {"version", 1},
            {"hybrid", schedule.hybrid},
            {"slotframe_len", cfg.length},
            {"channels", cfg.num_channels},
            {"slot_us", cfg.slot_duration.count()},
            {"reserved_slots", cfg.reserved_slots},
            {"cells", std::move(cells)},
            {"links", std::move(links)}};
}

}  // namespace meshmac
