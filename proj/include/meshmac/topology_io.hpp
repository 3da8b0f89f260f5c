#pragma once

#include "meshmac/topology.hpp"

#include <json.hpp>

namespace meshmac {

inline constexpr int kTopologyFormatVersion = 1;

/// Versioned document: {"format":"meshmac.topology","version":1, area/radius/seed/layout,
/// "nodes":[{"id","x","y","parent","layer","neighbors"}]}. Doubles round-trip exactly.
nlohmann::json topology_to_json(const Topology& topology);

/// Rebuilds the topology from the stored neighbor lists and parents, without
/// recomputing adjacency from positions. Throws ConfigError on malformed input.
Topology topology_from_json(const nlohmann::json& doc);

}  // namespace meshmac
