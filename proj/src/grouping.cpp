#include "meshmac/grouping.hpp"

#include <algorithm>
#include <string>

namespace meshmac {

namespace {

bool reports_neighbor(const NeighborReports& reports, NodeId who, NodeId other) {
    const auto& list = reports.at(who).neighbor_ids;
    return std::binary_search(list.begin(), list.end(), other);
}

std::size_t overlap(const NeighborReports& reports, NodeId a, NodeId b) {
    const auto& la = reports.at(a).neighbor_ids;
    const auto& lb = reports.at(b).neighbor_ids;
    std::size_t count = 0;
    auto ia = la.begin();
    auto ib = lb.begin();
    while (ia != la.end() && ib != lb.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++count;
            ++ia;
            ++ib;
        }
    }
    return count;
}

}  // namespace

CandidateTable::CandidateTable(std::vector<CandidateRow> rows, Order order)
    : rows_(std::move(rows)), order_(order) {
    std::sort(rows_.begin(), rows_.end(), [order](const CandidateRow& a, const CandidateRow& b) {
        if (a.key != b.key) return order == Order::ascending ? a.key < b.key : a.key > b.key;
        return a.node < b.node;
    });
}

NeighborReports collect_neighbor_reports(const Topology& topology) {
    // Discovery is modeled as lossless: each node's list equals its true neighborhood.
    NeighborReports reports;
    reports.reserve(topology.size());
    for (const auto& node : topology.nodes()) {
        const auto nb = topology.neighbors(node.id);
        reports.push_back({node.id, {nb.begin(), nb.end()}});
    }
    return reports;
}

CandidateTable hnp_cal(std::span<const NodeId> candidates, const NeighborReports& reports) {
    std::vector<CandidateRow> rows;
    rows.reserve(candidates.size());
    for (NodeId x : candidates) {
        int hidden = 0;
        for (NodeId y : candidates)
            if (y != x && !reports_neighbor(reports, x, y)) ++hidden;
        rows.push_back({x, hidden});
    }
    return CandidateTable(std::move(rows), CandidateTable::Order::descending);
}

CandidateTable child_neighbor_index(const Topology& topology, NodeId parent) {
    std::vector<CandidateRow> rows;
    for (NodeId child : topology.node(parent).children)
        rows.push_back({child, static_cast<int>(topology.neighbors(child).size())});
    return CandidateTable(std::move(rows), CandidateTable::Order::ascending);
}

std::vector<NodeId> filter_group(NodeId start, const Topology& topology,
                                 const NeighborReports& reports, std::span<const NodeId> eligible) {
    const auto& parent = topology.node(start).parent;
    if (!parent) throw ConfigError("filter_group: start node " + std::to_string(start) +
                                   " has no parent");

    std::vector<NodeId> candidates{start};
    for (NodeId nb : reports.at(start).neighbor_ids) {
        if (topology.node(nb).parent != parent) continue;
        if (!eligible.empty() && std::find(eligible.begin(), eligible.end(), nb) == eligible.end())
            continue;
        candidates.push_back(nb);
    }

    // Every candidate neighbors the start node, so the start's key is always 0
    // and it is never the head while any positive key remains.
    for (;;) {
        const auto table = hnp_cal(candidates, reports);
        if (table.head().key == 0) break;
        std::erase(candidates, table.head().node);
    }
    std::sort(candidates.begin(), candidates.end());
    return candidates;
}

std::size_t group_size_cap(int layer) { return (layer == 2 || layer == 3) ? 2 : 4; }

std::vector<NodeId> apply_size_cap(std::span<const NodeId> members, NodeId start,
                                   const Topology& topology, const NeighborReports& reports) {
    std::vector<NodeId> kept(members.begin(), members.end());
    const std::size_t cap = group_size_cap(topology.node(start).layer);
    if (kept.size() > cap) {
        std::vector<CandidateRow> rows;
        for (NodeId m : kept) {
            const auto score = m == start ? reports.at(start).neighbor_ids.size()
                                          : overlap(reports, m, start);
            rows.push_back({m, static_cast<int>(score)});
        }
        const CandidateTable ranked(std::move(rows), CandidateTable::Order::descending);
        kept.clear();
        for (std::size_t i = 0; i < cap; ++i) kept.push_back(ranked.rows()[i].node);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

GroupingResult run_grouping(const Topology& topology) {
    if (!topology.has_tree()) throw ConfigError("run_grouping: topology has no tree");
    const auto reports = collect_neighbor_reports(topology);

    GroupingResult result;
    std::vector<bool> assigned(topology.size(), false);
    int next_group_id = 0;

    for (const auto& parent : topology.nodes()) {
        if (parent.children.empty()) continue;
        const auto index = child_neighbor_index(topology, parent.id);

        // One pass per still-unassigned child, least-connected first.
        for (const auto& row : index.rows()) {
            if (assigned[row.node]) continue;
            std::vector<NodeId> eligible;
            for (NodeId sibling : parent.children)
                if (!assigned[sibling]) eligible.push_back(sibling);

            const auto filtered = filter_group(row.node, topology, reports, eligible);
            const auto members = apply_size_cap(filtered, row.node, topology, reports);
            for (NodeId m : members) assigned[m] = true;
            if (members.size() >= 2)
                result.groups.push_back({next_group_id++, parent.id, members});
            else
                result.ungrouped.push_back(row.node);
        }
    }
    std::sort(result.ungrouped.begin(), result.ungrouped.end());
    return result;
}

nlohmann::json grouping_to_json(const GroupingResult& result) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : result.groups)
        groups.push_back({{"group_id", g.group_id}, {"parent", g.parent}, {"members", g.members}});
    return {{"format", "meshmac.grouping"},
            {"version", 1},
            {"groups", std::move(groups)},
            {"ungrouped", result.ungrouped}};
}

GroupingResult grouping_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "meshmac.grouping")
            throw ConfigError("not a meshmac grouping document");
        GroupingResult result;
        for (const auto& g : doc.at("groups"))
            result.groups.push_back({g.at("group_id").get<int>(), g.at("parent").get<NodeId>(),
                                     g.at("members").get<std::vector<NodeId>>()});
        result.ungrouped = doc.at("ungrouped").get<std::vector<NodeId>>();
        return result;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed grouping document: ") + e.what());
    }
}

}  // namespace meshmac
