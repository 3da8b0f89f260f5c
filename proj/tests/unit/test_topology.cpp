#include "../oracles.hpp"

#include "meshmac/topology.hpp"
#include "meshmac/topology_io.hpp"

#include <doctest.h>

#include <cmath>

using namespace meshmac;

namespace {

Topology edges(std::size_t n, std::initializer_list<Link> list) {
    return build_tree(Topology::from_edges(n, std::vector<Link>(list)));
}

Topology star(std::size_t leaves) {
    std::vector<Link> e;
    for (NodeId v = 1; v <= leaves; ++v) e.push_back({0, v});
    return build_tree(Topology::from_edges(leaves + 1, e));
}

}  // namespace

TEST_CASE("generate_random: two nodes within range") {
    for (std::uint64_t seed : {1u, 2u, 99u}) {
        const auto t = generate_random({2, 10.0, 20.0, seed});
        REQUIRE(t.size() == 2);
        CHECK(t.adjacent(0, 1));
        CHECK(t.node(1).parent == NodeId{0});
        CHECK(t.node(1).layer == 1);
    }
}

TEST_CASE("generate_random: adjacency matches pairwise distances") {
    int connected = 0;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        Topology t;
        try {
            t = generate_random({5, 50.0, 15.0, seed});
        } catch (const DisconnectedTopology&) {
            continue;
        }
        ++connected;
        for (NodeId a = 0; a < 5; ++a)
            for (NodeId b = 0; b < 5; ++b) {
                if (a == b) continue;
                const auto& p = t.node(a).position;
                const auto& q = t.node(b).position;
                CHECK(t.adjacent(a, b) == (std::hypot(p.x - q.x, p.y - q.y) <= 15.0));
            }
    }
    CHECK(connected > 0);
}

TEST_CASE("generate_random: coordinator centered, deterministic per seed") {
    const auto a = generate_random({40, 100.0, 40.0, 3});
    const auto b = generate_random({40, 100.0, 40.0, 3});
    const auto c = generate_random({40, 100.0, 40.0, 4});
    CHECK(a.node(0).position.x == 50.0);
    CHECK(a.node(0).position.y == 50.0);
    bool differs = false;
    for (NodeId v = 0; v < 40; ++v) {
        CHECK(a.node(v).position.x == b.node(v).position.x);
        CHECK(a.neighbors(v).size() == b.neighbors(v).size());
        differs |= a.node(v).position.x != c.node(v).position.x;
    }
    CHECK(differs);
}

TEST_CASE("generate_random: disconnected network is reported") {
    CHECK_THROWS_AS(generate_random({50, 100.0, 1.0, 1}), DisconnectedTopology);
}

TEST_CASE("single_hop layout: coordinator reaches everybody, peers follow the radius") {
    const auto t = generate_random({30, 100.0, 20.0, 5, Layout::single_hop});
    bool some_hidden = false;
    for (NodeId v = 1; v < 30; ++v) {
        CHECK(t.adjacent(0, v));
        CHECK(t.node(v).layer == 1);
        for (NodeId w = v + 1; w < 30; ++w) some_hidden |= !t.adjacent(v, w);
    }
    CHECK(some_hidden);
}

TEST_CASE("build_tree: chain, star and lowest-id tiebreak") {
    const auto chain = edges(3, {{0, 1}, {1, 2}});
    CHECK(chain.node(1).parent == NodeId{0});
    CHECK(chain.node(2).parent == NodeId{1});
    CHECK(chain.node(2).layer == 2);

    const auto s = star(4);
    for (NodeId v = 1; v <= 4; ++v) CHECK(s.node(v).layer == 1);

    // node 6 hears layer-1 nodes 3 and 5
    const auto t = edges(7, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}, {5, 6}, {3, 6}});
    CHECK(t.node(6).parent == NodeId{3});
    CHECK(t.node(3).children == std::vector<NodeId>{6});
}

TEST_CASE("build_tree: disconnected graph") {
    CHECK_THROWS_AS(edges(3, {{0, 1}}), DisconnectedTopology);
}

TEST_CASE("build_tree agrees with an independent BFS") {
    std::mt19937_64 gen(5);
    int compared = 0;
    for (int k = 0; k < 300; ++k) {
        const auto m = oracle::random_graph(3 + k % 10, 0.35, gen);
        const auto parents = oracle::bfs_parents(m);
        if (!parents) continue;
        const auto t = build_tree(Topology::from_edges(m.size(), oracle::edges_of(m)));
        for (std::size_t v = 1; v < m.size(); ++v)
            CHECK(*t.node(static_cast<NodeId>(v)).parent == static_cast<NodeId>((*parents)[v]));
        ++compared;
    }
    CHECK(compared > 100);
}

TEST_CASE("link_hidden_ratio: worked examples") {
    std::vector<Link> all;
    for (NodeId a = 0; a < 4; ++a)
        for (NodeId b = a + 1; b < 4; ++b) all.push_back({a, b});
    const auto complete = build_tree(Topology::from_edges(4, all));
    for (const auto& l : all) {
        CHECK(link_hidden_ratio(complete, l.sender, l.receiver) == 0.0);
        CHECK(link_hidden_ratio(complete, l.receiver, l.sender, HnpFormula::as_written) == 0.0);
    }

    const auto s = star(3);
    CHECK(link_hidden_ratio(s, 1, 0) == 1.0);
    CHECK(network_hidden_percentage(s, LinkSet::uplink) == 1.0);

    // a=0 b=1 c=2 d=3; edges a-b, b-c, b-d, a-c; link a->b: R={c,d}, S={c}
    const auto t = edges(4, {{0, 1}, {1, 2}, {1, 3}, {0, 2}});
    CHECK(link_hidden_ratio(t, 0, 1) == 0.5);
    // literal reading: S\R over S = {} / {c}
    CHECK(link_hidden_ratio(t, 0, 1, HnpFormula::as_written) == 0.0);
}

TEST_CASE("link_hidden_ratio: errors and bounds") {
    const auto chain = edges(3, {{0, 1}, {1, 2}});
    CHECK_THROWS_AS(link_hidden_ratio(chain, 0, 2), NotALink);
    CHECK_THROWS_AS(link_hidden_ratio(chain, 0, 9), NotALink);
    CHECK_THROWS_AS(network_hidden_percentage(chain, std::vector<Link>{}), EmptyLinkSet);

    const auto t = generate_random({60, 100.0, 25.0, 11});
    for (const auto& l : tree_links(t)) {
        const double r = link_hidden_ratio(t, l.sender, l.receiver);
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
    }
}

TEST_CASE("network_hidden_percentage matches the brute-force oracle") {
    std::mt19937_64 gen(17);
    for (int k = 0; k < 400; ++k) {
        const auto m = oracle::random_graph(2 + k % 7, 0.5, gen);
        const auto parents = oracle::bfs_parents(m);
        if (!parents) continue;
        const auto t = build_tree(Topology::from_edges(m.size(), oracle::edges_of(m)));
        CHECK(network_hidden_percentage(t) == oracle::network_hidden(m, *parents, true, true, false));
        CHECK(network_hidden_percentage(t, LinkSet::uplink, HnpFormula::as_written) ==
              oracle::network_hidden(m, *parents, true, false, true));
    }
}

TEST_CASE("tree_links ordering") {
    const auto chain = edges(3, {{0, 1}, {1, 2}});
    const auto both = tree_links(chain);
    REQUIRE(both.size() == 4);
    CHECK(both[0] == Link{1, 0});
    CHECK(both[1] == Link{0, 1});
    CHECK(both[2] == Link{2, 1});
    CHECK(tree_links(chain, LinkSet::uplink).size() == 2);
    CHECK(tree_links(chain, LinkSet::downlink)[0] == Link{0, 1});
}

TEST_CASE("calibrate_radius") {
    SUBCASE("target 0 is met by a covering radius") {
        const auto c = calibrate_radius({30, 100.0, 1, 0.0, 0.03});
        CHECK(c.within_tolerance);
        CHECK(c.achieved <= 0.03);
    }
    SUBCASE("100 nodes at 0.5, recomputed independently") {
        const auto c = calibrate_radius({100, 100.0, 2, 0.5, 0.03});
        CHECK(c.within_tolerance);
        const auto t = generate_random({100, 100.0, c.radius, 2});
        const double again = network_hidden_percentage(t);
        CHECK(again == c.achieved);
        CHECK(std::abs(again - 0.5) <= 0.03);
    }
    SUBCASE("300 nodes at 0.43") {
        const auto c = calibrate_radius({300, 100.0, 1, 0.43, 0.03});
        CHECK(c.achieved >= 0.40);
        CHECK(c.achieved <= 0.46);
    }
    SUBCASE("unreachable target carries the best effort") {
        try {
            calibrate_radius({3, 100.0, 1, 0.99, 0.001});
            FAIL("expected TargetUnreachable");
        } catch (const TargetUnreachable& e) {
            CHECK_FALSE(e.best().within_tolerance);
            CHECK(e.best().probes > 0);
        }
    }
    SUBCASE("bad input") {
        CHECK_THROWS_AS(calibrate_radius({30, 100.0, 1, 1.0, 0.03}), ConfigError);
        CHECK_THROWS_AS(calibrate_radius({1, 100.0, 1, 0.2, 0.03}), ConfigError);
    }
}

TEST_CASE("topology json round trip") {
    const auto t = generate_random({25, 80.0, 30.0, 9});
    const auto doc = topology_to_json(t);
    CHECK(doc.at("format") == "meshmac.topology");
    const auto back = topology_from_json(doc);
    REQUIRE(back.size() == t.size());
    for (NodeId v = 0; v < t.size(); ++v) {
        CHECK(back.node(v).position.x == t.node(v).position.x);
        CHECK(back.node(v).position.y == t.node(v).position.y);
        CHECK(back.node(v).parent == t.node(v).parent);
        CHECK(back.node(v).layer == t.node(v).layer);
        CHECK(back.node(v).neighbors == t.node(v).neighbors);
    }
    CHECK(topology_to_json(back) == doc);

    auto broken = doc;
    broken["version"] = 99;
    CHECK_THROWS_AS(topology_from_json(broken), ConfigError);
}

TEST_CASE("from_neighbors validation") {
    CHECK_THROWS_AS(Topology::from_neighbors({}, {{1}, {}}), ConfigError);       // asymmetric
    CHECK_THROWS_AS(Topology::from_neighbors({}, {{0}}), ConfigError);           // self loop
    CHECK_THROWS_AS(Topology::from_edges(2, std::vector<Link>{{0, 5}}), ConfigError);
}
