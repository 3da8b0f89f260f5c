#pragma once

#include "meshmac/common.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace meshmac {

struct Position {
    double x = 0.0;
    double y = 0.0;
};

struct NodeInfo {
    NodeId id = 0;
    Position position;
    std::optional<NodeId> parent;
    std::vector<NodeId> children;   // ascending
    int layer = 0;                  // hops from the coordinator
    std::vector<NodeId> neighbors;  // ascending, never contains id
    double traffic_rate = 0.0;      // packets per second; carried, not used by grouping
};

/// How node placement maps onto connectivity.
///
/// `mesh`: pure unit-disk graph, multi-hop tree to a centered coordinator.
/// `single_hop`: the coordinator (a data concentrator) reaches every node;
/// node-to-node edges still follow the unit-disk rule, so hidden pairs exist
/// while every node is one hop from the sink.
enum class Layout { mesh, single_hop };

std::string_view to_string(Layout layout);
Layout parse_layout(std::string_view text);

/// Immutable node placement + adjacency + routing tree.
class Topology {
public:
    Topology() = default;

    /// Builds a topology from explicit neighbor lists (no tree yet). Symmetry,
    /// self-loops and ordering are validated; neighbor lists are sorted.
    static Topology from_neighbors(std::vector<Position> positions,
                                   std::vector<std::vector<NodeId>> neighbors,
                                   double area_side = 0.0, double comm_radius = 0.0,
                                   std::uint64_t seed = 0, Layout layout = Layout::mesh);

    /// Convenience for tests and hand-built graphs: undirected edge list over n nodes.
    static Topology from_edges(std::size_t n, std::span<const Link> edges);

    std::size_t size() const noexcept { return nodes_.size(); }
    const NodeInfo& node(NodeId id) const { return nodes_.at(id); }
    std::span<const NodeInfo> nodes() const noexcept { return nodes_; }
    std::span<const NodeId> neighbors(NodeId id) const { return nodes_.at(id).neighbors; }

    bool adjacent(NodeId a, NodeId b) const noexcept {
        return adjacency_[static_cast<std::size_t>(a) * nodes_.size() + b] != 0;
    }

    bool has_tree() const noexcept { return has_tree_; }
    double area_side() const noexcept { return area_side_; }
    double comm_radius() const noexcept { return comm_radius_; }
    std::uint64_t seed() const noexcept { return seed_; }
    Layout layout() const noexcept { return layout_; }
    int max_layer() const noexcept;

    /// Nodes on the route from `source` up to (and including) the coordinator.
    std::vector<NodeId> route_to_coordinator(NodeId source) const;

    friend Topology build_tree(Topology topology);
    friend Topology attach_tree(Topology topology, std::span<const std::optional<NodeId>> parents);

private:
    std::vector<NodeInfo> nodes_;
    std::vector<std::uint8_t> adjacency_;  // dense n*n matrix
    double area_side_ = 0.0;
    double comm_radius_ = 0.0;
    std::uint64_t seed_ = 0;
    Layout layout_ = Layout::mesh;
    bool has_tree_ = false;
};

struct TopologyParams {
    std::size_t node_count = 0;
    double area_side = 0.0;
    double comm_radius = 0.0;
    std::uint64_t seed = 0;
    Layout layout = Layout::mesh;
};

/// Coordinator at the area center, the other n-1 nodes uniform over the square.
/// Throws DisconnectedTopology if some node cannot reach the coordinator.
Topology generate_random(const TopologyParams& params);

/// Breadth-first shortest-hop tree rooted at the coordinator. Among equal-hop
/// candidate parents the lowest NodeId wins.
Topology build_tree(Topology topology);

/// Installs an explicit parent assignment (used when importing a serialized
/// topology). Validates parent adjacency and that layers are consistent.
Topology attach_tree(Topology topology, std::span<const std::optional<NodeId>> parents);

/// Which reading of the per-link hidden-node ratio to use.
///
/// receiver_centric: |R \ S| / |R|, the share of the receiver's other neighbors
/// that the sender cannot hear. as_written: |S \ R| / |S|, the literal formula
/// with the sender's neighborhood in the denominator.
enum class HnpFormula { receiver_centric, as_written };

std::string_view to_string(HnpFormula formula);
HnpFormula parse_hnp_formula(std::string_view text);

double link_hidden_ratio(const Topology& topology, NodeId sender, NodeId receiver,
                         HnpFormula formula = HnpFormula::receiver_centric);

enum class LinkSet { uplink, downlink, both };

std::string_view to_string(LinkSet links);
LinkSet parse_link_set(std::string_view text);

/// Tree links in ascending child order; `both` yields child->parent then parent->child per edge.
std::vector<Link> tree_links(const Topology& topology, LinkSet which = LinkSet::both);

/// Mean link hidden ratio over `links`. Throws EmptyLinkSet / NotALink.
double network_hidden_percentage(const Topology& topology, std::span<const Link> links,
                                 HnpFormula formula = HnpFormula::receiver_centric);

/// Same, over the default tree link set.
double network_hidden_percentage(const Topology& topology, LinkSet which = LinkSet::both,
                                 HnpFormula formula = HnpFormula::receiver_centric);

struct CalibrationRequest {
    std::size_t node_count = 0;
    double area_side = 0.0;
    std::uint64_t seed = 0;
    double target_hidden = 0.0;
    double tolerance = 0.03;
    Layout layout = Layout::mesh;
    LinkSet links = LinkSet::both;
    HnpFormula formula = HnpFormula::receiver_centric;
    int max_probes = 64;
};

struct Calibration {
    double radius = 0.0;
    double achieved = 0.0;
    int probes = 0;
    bool within_tolerance = false;
};

/// Thrown when no probe lands within tolerance; carries the best-effort result.
class TargetUnreachable : public Error {
public:
    explicit TargetUnreachable(Calibration best);
    const Calibration& best() const noexcept { return best_; }

private:
    Calibration best_;
};

/// Bisection over the communication radius in [side/50, side*sqrt(2)].
/// Returns the probe closest to the target; throws TargetUnreachable when
/// none is within tolerance.
Calibration calibrate_radius(const CalibrationRequest& request);

}  // namespace meshmac
