#include "meshmac/topology_io.hpp"

#include <string>

namespace meshmac {

nlohmann::json topology_to_json(const Topology& topology) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : topology.nodes()) {
        nodes.push_back({
            {"id", n.id},
            {"x", n.position.x},
            {"y", n.position.y},
            {"parent", n.parent ? nlohmann::json(*n.parent) : nlohmann::json(nullptr)},
            {"layer", n.layer},
            {"neighbors", n.neighbors},
        });
    }
    return {
        {"format", "meshmac.topology"},
        {"version", kTopologyFormatVersion},
        {"area_side", topology.area_side()},
        {"comm_radius", topology.comm_radius()},
        {"seed", topology.seed()},
        {"layout", std::string(to_string(topology.layout()))},
        {"nodes", std::move(nodes)},
    };
}

Topology topology_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "meshmac.topology")
            throw ConfigError("not a meshmac topology document");
        const int version = doc.at("version").get<int>();
        if (version != kTopologyFormatVersion)
            throw ConfigError("unsupported topology version " + std::to_string(version));

        const auto& nodes = doc.at("nodes");
        const std::size_t n = nodes.size();
        std::vector<Position> positions(n);
        std::vector<std::vector<NodeId>> neighbors(n);
        std::vector<std::optional<NodeId>> parents(n);
        std::vector<int> layers(n);
        for (const auto& entry : nodes) {
            const auto id = entry.at("id").get<NodeId>();
            if (id >= n) throw ConfigError("node id out of range: " + std::to_string(id));
            positions[id] = {entry.at("x").get<double>(), entry.at("y").get<double>()};
            neighbors[id] = entry.at("neighbors").get<std::vector<NodeId>>();
            if (!entry.at("parent").is_null()) parents[id] = entry.at("parent").get<NodeId>();
            layers[id] = entry.at("layer").get<int>();
        }
        auto topo = Topology::from_neighbors(std::move(positions), std::move(neighbors),
                                             doc.at("area_side").get<double>(),
                                             doc.at("comm_radius").get<double>(),
                                             doc.at("seed").get<std::uint64_t>(),
                                             parse_layout(doc.at("layout").get<std::string>()));
        topo = attach_tree(std::move(topo), parents);
        for (const auto& node : topo.nodes())
            if (node.layer != layers[node.id])
                throw ConfigError("stored layer disagrees with parent chain at node " +
                                  std::to_string(node.id));
        return topo;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed topology document: ") + e.what());
    }
}

}  // namespace meshmac
