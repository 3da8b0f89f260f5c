#pragma once

#include "meshmac/topology.hpp"

#include <json.hpp>

#include <span>
#include <vector>

namespace meshmac {

/// Neighbor list a node forwards to the coordinator during discovery.
struct NeighborReport {
    NodeId reporter = 0;
    std::vector<NodeId> neighbor_ids;  // ascending, excludes reporter
};

/// Indexed by reporter id.
using NeighborReports = std::vector<NeighborReport>;

struct CandidateRow {
    NodeId node = 0;
    int key = 0;

    friend bool operator==(const CandidateRow&, const CandidateRow&) = default;
};

/// Rows of (node, count) kept in a fixed order. Ties always break by ascending NodeId.
class CandidateTable {
public:
    enum class Order { ascending, descending };

    CandidateTable() = default;
    CandidateTable(std::vector<CandidateRow> rows, Order order);

    std::span<const CandidateRow> rows() const noexcept { return rows_; }
    bool empty() const noexcept { return rows_.empty(); }
    const CandidateRow& head() const { return rows_.front(); }
    Order order() const noexcept { return order_; }

private:
    std::vector<CandidateRow> rows_;
    Order order_ = Order::ascending;
};

struct Group {
    int group_id = 0;
    NodeId parent = 0;
    std::vector<NodeId> members;  // ascending
};

/// Partition of all non-coordinator nodes into contention groups and
/// singletons served by dedicated cells.
struct GroupingResult {
    std::vector<Group> groups;
    std::vector<NodeId> ungrouped;  // ascending
};

NeighborReports collect_neighbor_reports(const Topology& topology);

/// Hidden-peer count of every candidate within the candidate set, sorted descending.
CandidateTable hnp_cal(std::span<const NodeId> candidates, const NeighborReports& reports);

/// Children of `parent` keyed by total neighbor count, sorted ascending.
CandidateTable child_neighbor_index(const Topology& topology, NodeId parent);

/// Starts from `start` plus its neighbors that share its parent (restricted to
/// `eligible` when given) and removes the worst-hidden candidate until the set
/// is pairwise visible. The start node always survives. Result is ascending.
std::vector<NodeId> filter_group(NodeId start, const Topology& topology,
                                 const NeighborReports& reports,
                                 std::span<const NodeId> eligible = {});

/// Layer-dependent size limit: 2 for layers 2 and 3, otherwise 4.
std::size_t group_size_cap(int layer);

/// Trims an over-sized group to the cap, keeping the members with the largest
/// shared-neighbor overlap with `start` (the start node itself always ranks first).
std::vector<NodeId> apply_size_cap(std::span<const NodeId> members, NodeId start,
                                   const Topology& topology, const NeighborReports& reports);

GroupingResult run_grouping(const Topology& topology);

nlohmann::json grouping_to_json(const GroupingResult& result);
GroupingResult grouping_from_json(const nlohmann::json& doc);

}  // namespace meshmac
