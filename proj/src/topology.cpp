#include "meshmac/topology.hpp"

#include "meshmac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace meshmac {

std::string_view to_string(Layout layout) {
    return layout == Layout::mesh ? "mesh" : "single_hop";
}

Layout parse_layout(std::string_view text) {
    if (text == "mesh") return Layout::mesh;
    if (text == "single_hop") return Layout::single_hop;
    throw ConfigError("unknown layout '" + std::string(text) + "'");
}

std::string_view to_string(HnpFormula formula) {
    return formula == HnpFormula::receiver_centric ? "receiver_centric" : "as_written";
}

HnpFormula parse_hnp_formula(std::string_view text) {
    if (text == "receiver_centric") return HnpFormula::receiver_centric;
    if (text == "as_written") return HnpFormula::as_written;
    throw ConfigError("unknown hnp formula '" + std::string(text) + "'");
}

std::string_view to_string(LinkSet links) {
    switch (links) {
    case LinkSet::uplink: return "uplink";
    case LinkSet::downlink: return "downlink";
    case LinkSet::both: return "both";
    }
    return "both";
}

LinkSet parse_link_set(std::string_view text) {
    if (text == "uplink") return LinkSet::uplink;
    if (text == "downlink") return LinkSet::downlink;
    if (text == "both") return LinkSet::both;
    throw ConfigError("unknown link set '" + std::string(text) + "'");
}

Topology Topology::from_neighbors(std::vector<Position> positions,
                                  std::vector<std::vector<NodeId>> neighbors, double area_side,
                                  double comm_radius, std::uint64_t seed, Layout layout) {
    const std::size_t n = neighbors.size();
    if (n == 0) throw ConfigError("topology needs at least one node");
    if (positions.size() != n) positions.resize(n);

    Topology t;
    t.area_side_ = area_side;
    t.comm_radius_ = comm_radius;
    t.seed_ = seed;
    t.layout_ = layout;
    t.adjacency_.assign(n * n, 0);
    t.nodes_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& info = t.nodes_[i];
        info.id = static_cast<NodeId>(i);
        info.position = positions[i];
        info.neighbors = std::move(neighbors[i]);
        std::sort(info.neighbors.begin(), info.neighbors.end());
        if (std::adjacent_find(info.neighbors.begin(), info.neighbors.end()) != info.neighbors.end())
            throw ConfigError("duplicate neighbor of node " + std::to_string(i));
        for (NodeId j : info.neighbors) {
            if (j >= n) throw ConfigError("neighbor id out of range at node " + std::to_string(i));
            if (j == i) throw ConfigError("node " + std::to_string(i) + " lists itself as neighbor");
            t.adjacency_[i * n + j] = 1;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (t.adjacency_[i * n + j] != t.adjacency_[j * n + i])
                throw ConfigError("asymmetric adjacency between " + std::to_string(i) + " and " +
                                  std::to_string(j));
    return t;
}

Topology Topology::from_edges(std::size_t n, std::span<const Link> edges) {
    std::vector<std::vector<NodeId>> lists(n);
    for (const auto& e : edges) {
        if (e.sender >= n || e.receiver >= n) throw ConfigError("edge endpoint out of range");
        lists[e.sender].push_back(e.receiver);
        lists[e.receiver].push_back(e.sender);
    }
    return from_neighbors({}, std::move(lists));
}

int Topology::max_layer() const noexcept {
    int deepest = 0;
    for (const auto& n : nodes_) deepest = std::max(deepest, n.layer);
    return deepest;
}

std::vector<NodeId> Topology::route_to_coordinator(NodeId source) const {
    std::vector<NodeId> route{source};
    while (route.back() != kCoordinator) {
        const auto& parent = nodes_.at(route.back()).parent;
        if (!parent) throw DisconnectedTopology(1);
        route.push_back(*parent);
    }
    return route;
}

Topology generate_random(const TopologyParams& params) {
    if (params.node_count < 2) throw ConfigError("generate_random: need at least 2 nodes");
    if (!(params.area_side > 0.0)) throw ConfigError("generate_random: area_side must be positive");
    if (!(params.comm_radius > 0.0))
        throw ConfigError("generate_random: comm_radius must be positive");

    const std::size_t n = params.node_count;
    std::vector<Position> positions(n);
    positions[0] = {params.area_side / 2.0, params.area_side / 2.0};
    Rng rng(params.seed, Rng::kPlacement);
    for (std::size_t i = 1; i < n; ++i) {
        const double x = rng.uniform01() * params.area_side;
        const double y = rng.uniform01() * params.area_side;
        positions[i] = {x, y};
    }

    const double r2 = params.comm_radius * params.comm_radius;
    std::vector<std::vector<NodeId>> lists(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = positions[i].x - positions[j].x;
            const double dy = positions[i].y - positions[j].y;
            const double d2 = dx * dx + dy * dy;
            const bool coordinator_link = params.layout == Layout::single_hop && i == kCoordinator;
            if (coordinator_link || (d2 > 0.0 && d2 <= r2)) {
                lists[i].push_back(static_cast<NodeId>(j));
                lists[j].push_back(static_cast<NodeId>(i));
            }
        }
    }
    return build_tree(Topology::from_neighbors(std::move(positions), std::move(lists),
                                               params.area_side, params.comm_radius, params.seed,
                                               params.layout));
}

Topology build_tree(Topology topology) {
    const std::size_t n = topology.size();
    for (auto& node : topology.nodes_) {
        node.parent.reset();
        node.children.clear();
        node.layer = -1;
    }
    topology.nodes_[kCoordinator].layer = 0;

    std::vector<NodeId> frontier{kCoordinator};
    std::size_t reached = 1;
    while (!frontier.empty()) {
        std::vector<NodeId> next;
        // Frontier is ascending, so the first claimant of a node is its lowest-id candidate.
        for (NodeId u : frontier) {
            for (NodeId v : topology.nodes_[u].neighbors) {
                auto& child = topology.nodes_[v];
                if (child.layer != -1) continue;
                child.layer = topology.nodes_[u].layer + 1;
                child.parent = u;
                topology.nodes_[u].children.push_back(v);
                next.push_back(v);
            }
        }
        std::sort(next.begin(), next.end());
        for (NodeId u : frontier) std::sort(topology.nodes_[u].children.begin(),
                                            topology.nodes_[u].children.end());
        reached += next.size();
        frontier = std::move(next);
    }
    if (reached != n) throw DisconnectedTopology(n - reached);
    topology.has_tree_ = true;
    return topology;
}

Topology attach_tree(Topology topology, std::span<const std::optional<NodeId>> parents) {
    const std::size_t n = topology.size();
    if (parents.size() != n) throw ConfigError("parent list length mismatch");
    if (parents[kCoordinator]) throw ConfigError("coordinator cannot have a parent");
    for (auto& node : topology.nodes_) {
        node.parent = parents[node.id];
        node.children.clear();
        node.layer = node.id == kCoordinator ? 0 : -1;
    }
    for (auto& node : topology.nodes_) {
        if (!node.parent) {
            if (node.id != kCoordinator) throw DisconnectedTopology(1);
            continue;
        }
        if (*node.parent >= n || !topology.adjacent(node.id, *node.parent))
            throw ConfigError("parent of node " + std::to_string(node.id) + " is not a neighbor");
        topology.nodes_[*node.parent].children.push_back(node.id);
    }
    // Assign layers top-down; anything left unassigned sits on a cycle.
    std::vector<NodeId> frontier{kCoordinator};
    std::size_t reached = 1;
    while (!frontier.empty()) {
        std::vector<NodeId> next;
        for (NodeId u : frontier)
            for (NodeId c : topology.nodes_[u].children) {
                topology.nodes_[c].layer = topology.nodes_[u].layer + 1;
                next.push_back(c);
            }
        reached += next.size();
        frontier = std::move(next);
    }
    if (reached != n) throw ConfigError("parent assignment contains a cycle");
    topology.has_tree_ = true;
    return topology;
}

namespace {

// |A \ B| for ascending lists, skipping `skip_a` in A and treating `skip_b` as absent from B.
std::size_t difference_size(std::span<const NodeId> a, std::span<const NodeId> b, NodeId skip_a) {
    std::size_t count = 0;
    auto it = b.begin();
    for (NodeId x : a) {
        if (x == skip_a) continue;
        while (it != b.end() && *it < x) ++it;
        if (it == b.end() || *it != x) ++count;
    }
    return count;
}

}  // namespace

double link_hidden_ratio(const Topology& topology, NodeId sender, NodeId receiver,
                         HnpFormula formula) {
    if (sender >= topology.size() || receiver >= topology.size() ||
        !topology.adjacent(sender, receiver))
        throw NotALink(sender, receiver);

    const auto sender_nb = topology.neighbors(sender);
    const auto receiver_nb = topology.neighbors(receiver);
    // Endpoints are excluded from both sets: S = N(s) \ {r}, R = N(r) \ {s}.
    // The receiver is never in N(r) and the sender never in N(s), so only one
    // exclusion per side matters for each difference.
    if (formula == HnpFormula::receiver_centric) {
        const std::size_t denom = receiver_nb.size() - 1;
        if (denom == 0) return 0.0;
        return static_cast<double>(difference_size(receiver_nb, sender_nb, sender)) /
               static_cast<double>(denom);
    }
    const std::size_t denom = sender_nb.size() - 1;
    if (denom == 0) return 0.0;
    return static_cast<double>(difference_size(sender_nb, receiver_nb, receiver)) /
           static_cast<double>(denom);
}

std::vector<Link> tree_links(const Topology& topology, LinkSet which) {
    if (!topology.has_tree()) throw ConfigError("tree_links: topology has no tree");
    std::vector<Link> links;
    for (const auto& node : topology.nodes()) {
        if (!node.parent) continue;
        if (which != LinkSet::downlink) links.push_back({node.id, *node.parent});
        if (which != LinkSet::uplink) links.push_back({*node.parent, node.id});
    }
    return links;
}

double network_hidden_percentage(const Topology& topology, std::span<const Link> links,
                                 HnpFormula formula) {
    if (links.empty()) throw EmptyLinkSet();
    double sum = 0.0;
    for (const auto& link : links) sum += link_hidden_ratio(topology, link.sender, link.receiver, formula);
    return sum / static_cast<double>(links.size());
}

double network_hidden_percentage(const Topology& topology, LinkSet which, HnpFormula formula) {
    const auto links = tree_links(topology, which);
    return network_hidden_percentage(topology, links, formula);
}

TargetUnreachable::TargetUnreachable(Calibration best)
    : Error("no radius reaches the hidden-node target; best radius " +
            std::to_string(best.radius) + " achieves " + std::to_string(best.achieved)),
      best_(best) {}

Calibration calibrate_radius(const CalibrationRequest& request) {
    if (!(request.target_hidden >= 0.0 && request.target_hidden < 1.0))
        throw ConfigError("calibrate_radius: target must be in [0, 1)");
    if (request.node_count < 2 || !(request.area_side > 0.0))
        throw ConfigError("calibrate_radius: invalid node count or area");

    double lo = request.area_side / 50.0;
    double hi = request.area_side * std::sqrt(2.0);

    Calibration best;
    double best_error = std::numeric_limits<double>::infinity();

    // Returns the achieved ratio, or nullopt when the probe is disconnected.
    auto probe = [&](double radius) -> std::optional<double> {
        ++best.probes;
        try {
            const auto topo = generate_random({request.node_count, request.area_side, radius,
                                               request.seed, request.layout});
            const double achieved = network_hidden_percentage(topo, request.links, request.formula);
            const double error = std::abs(achieved - request.target_hidden);
            if (error < best_error) {
                best_error = error;
                best.radius = radius;
                best.achieved = achieved;
            }
            return achieved;
        } catch (const DisconnectedTopology&) {
            return std::nullopt;
        }
    };

    if (request.target_hidden == 0.0) probe(hi);
    while (best.probes < request.max_probes && best_error > request.tolerance) {
        const double mid = 0.5 * (lo + hi);
        const auto achieved = probe(mid);
        // Hidden share shrinks as the radius grows; disconnection means "too small".
        if (!achieved || *achieved > request.target_hidden)
            lo = mid;
        else
            hi = mid;
    }
    best.within_tolerance = best_error <= request.tolerance;
    if (!best.within_tolerance) throw TargetUnreachable(best);
    return best;
}

}  // namespace meshmac
