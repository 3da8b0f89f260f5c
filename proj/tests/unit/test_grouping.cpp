#include "../oracles.hpp"

#include "meshmac/grouping.hpp"

#include <doctest.h>

using namespace meshmac;

namespace {

Topology graph(std::size_t n, std::initializer_list<Link> list) {
    return build_tree(Topology::from_edges(n, std::vector<Link>(list)));
}

std::vector<int> keys_of(const CandidateTable& t, std::initializer_list<NodeId> order) {
    std::vector<int> out;
    for (auto id : order)
        for (const auto& r : t.rows())
            if (r.node == id) out.push_back(r.key);
    return out;
}

}  // namespace

TEST_CASE("collect_neighbor_reports") {
    const auto two = graph(2, {{0, 1}});
    const auto r2 = collect_neighbor_reports(two);
    REQUIRE(r2.size() == 2);
    CHECK(r2[0].neighbor_ids == std::vector<NodeId>{1});
    CHECK(r2[1].neighbor_ids == std::vector<NodeId>{0});

    const auto t = generate_random({5, 50.0, 30.0, 7});
    const auto r = collect_neighbor_reports(t);
    for (NodeId v = 0; v < 5; ++v) {
        CHECK(r[v].reporter == v);
        for (NodeId w = 0; w < 5; ++w) {
            const bool listed = std::find(r[v].neighbor_ids.begin(), r[v].neighbor_ids.end(), w) !=
                                r[v].neighbor_ids.end();
            CHECK(listed == t.adjacent(v, w));
        }
    }

    const auto s = graph(4, {{0, 1}, {0, 2}, {0, 3}});
    for (NodeId v = 1; v < 4; ++v) CHECK(collect_neighbor_reports(s)[v].neighbor_ids == std::vector<NodeId>{0});
}

TEST_CASE("hnp_cal") {
    // 0 hub; leaves 1,2,3 all mutually adjacent
    const auto clique = graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    const auto rc = collect_neighbor_reports(clique);
    const auto all_zero = hnp_cal(std::vector<NodeId>{1, 2, 3}, rc);
    CHECK(all_zero.rows().size() == 3);
    for (const auto& row : all_zero.rows()) CHECK(row.key == 0);

    // chain x-y-z with x=1 y=2 z=3
    const auto chain = graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {2, 3}});
    const auto table = hnp_cal(std::vector<NodeId>{1, 2, 3}, collect_neighbor_reports(chain));
    CHECK(keys_of(table, {1, 2, 3}) == std::vector<int>{1, 0, 1});
    CHECK(table.head().node == 1);  // descending, lowest id on ties
    CHECK(table.order() == CandidateTable::Order::descending);

    const auto single = hnp_cal(std::vector<NodeId>{2}, collect_neighbor_reports(chain));
    REQUIRE(single.rows().size() == 1);
    CHECK(single.head().key == 0);
}

TEST_CASE("filter_group") {
    const auto clique = graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    CHECK(filter_group(1, clique, collect_neighbor_reports(clique)) == std::vector<NodeId>{1, 2, 3});

    const auto chain = graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {2, 3}});
    CHECK(filter_group(2, chain, collect_neighbor_reports(chain)) == std::vector<NodeId>{2, 3});

    const auto s = graph(3, {{0, 1}, {0, 2}});
    CHECK(filter_group(1, s, collect_neighbor_reports(s)) == std::vector<NodeId>{1});
}

TEST_CASE("group_size_cap and apply_size_cap") {
    CHECK(group_size_cap(1) == 4);
    CHECK(group_size_cap(2) == 2);
    CHECK(group_size_cap(3) == 2);
    CHECK(group_size_cap(4) == 4);

    // layer 1: 1,2,3 pairwise adjacent
    const auto l1 = graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    const std::vector<NodeId> three{1, 2, 3};
    CHECK(apply_size_cap(three, 1, l1, collect_neighbor_reports(l1)) == three);

    // layer 2: 2,3,4 under node 1
    const auto l2 = graph(5, {{0, 1}, {1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}});
    const std::vector<NodeId> deep{2, 3, 4};
    const auto capped = apply_size_cap(deep, 2, l2, collect_neighbor_reports(l2));
    CHECK(capped.size() == 2);
    CHECK(std::find(capped.begin(), capped.end(), NodeId{2}) != capped.end());
}

TEST_CASE("apply_size_cap keeps the highest-overlap members") {
    // Layer-1 clique 1..6 (start 1), extra node 7 hangs off the coordinator.
    // 2,3,4 also hear 7, as does 1: they share one more neighbor with the start.
    std::vector<Link> e;
    for (NodeId v = 1; v <= 7; ++v) e.push_back({0, v});
    for (NodeId a = 1; a <= 6; ++a)
        for (NodeId b = a + 1; b <= 6; ++b) e.push_back({a, b});
    for (NodeId v : {1u, 2u, 3u, 4u}) e.push_back({v, 7});
    const auto t = build_tree(Topology::from_edges(8, e));
    const std::vector<NodeId> six{1, 2, 3, 4, 5, 6};
    CHECK(apply_size_cap(six, 1, t, collect_neighbor_reports(t)) == std::vector<NodeId>{1, 2, 3, 4});
}

TEST_CASE("run_grouping: star, clustered sketch, random") {
    const auto s = build_tree(Topology::from_edges(5, std::vector<Link>{{0, 1}, {0, 2}, {0, 3}, {0, 4}}));
    const auto gs = run_grouping(s);
    CHECK(gs.groups.empty());
    CHECK(gs.ungrouped == std::vector<NodeId>{1, 2, 3, 4});

    // two visible clusters {1,2,3} and {4,5} under the coordinator, 6 isolated
    const auto sketch = graph(7, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}, {0, 6}, {1, 2}, {1, 3}, {2, 3}, {4, 5}});
    const auto g = run_grouping(sketch);
    CHECK(g.groups.size() == 2);
    CHECK(g.ungrouped == std::vector<NodeId>{6});
    CHECK(oracle::grouping_violations(sketch, g).empty());

    const auto r = generate_random({20, 100.0, 35.0, 3});
    CHECK(oracle::grouping_violations(r, run_grouping(r)).empty());
}

TEST_CASE("run_grouping property over random topologies") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const auto t = generate_random({60 + seed * 3, 100.0, 28.0 + static_cast<double>(seed % 5) * 4, seed});
        const auto g = run_grouping(t);
        const auto bad = oracle::grouping_violations(t, g);
        CHECK_MESSAGE(bad.empty(), "seed ", seed, ": ", bad.empty() ? "" : bad.front());
        CHECK(run_grouping(t).groups.size() == g.groups.size());  // deterministic
    }
}

TEST_CASE("grouping json round trip") {
    const auto t = generate_random({80, 100.0, 30.0, 4});
    const auto g = run_grouping(t);
    const auto back = grouping_from_json(grouping_to_json(g));
    REQUIRE(back.groups.size() == g.groups.size());
    for (std::size_t i = 0; i < g.groups.size(); ++i) {
        CHECK(back.groups[i].group_id == g.groups[i].group_id);
        CHECK(back.groups[i].parent == g.groups[i].parent);
        CHECK(back.groups[i].members == g.groups[i].members);
    }
    CHECK(back.ungrouped == g.ungrouped);
}
