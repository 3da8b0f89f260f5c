#include "meshmac/schedule.hpp"

#include <doctest.h>

#include <set>

using namespace meshmac;

namespace {

Topology graph(std::size_t n, std::vector<Link> e) { return build_tree(Topology::from_edges(n, e)); }

std::vector<double> uniform_demand(std::size_t n, double d) {
    std::vector<double> v(n, d);
    v[0] = 0.0;
    return v;
}

int dedicated_cells(const Schedule& s, NodeId sender) {
    int n = 0;
    for (const auto& c : s.frame.cells)
        if (const auto* d = std::get_if<DedicatedCell>(&c.kind); d && d->sender == sender) ++n;
    return n;
}

}  // namespace

TEST_CASE("default slotframe length") {
    CHECK(default_slotframe_length(2) == 100);
    CHECK(default_slotframe_length(100) == 100);
    CHECK(default_slotframe_length(300) == 300);
}

TEST_CASE("tsch: single link gets slot 0") {
    SlotframeConfig cfg;
    cfg.num_channels = 1;
    const auto s = build_tsch_schedule(graph(2, {{0, 1}}), uniform_demand(2, 1.0), cfg);
    REQUIRE(s.frame.cells.size() == 1);
    CHECK(s.frame.cells[0].slot == 0);
    CHECK(s.within_capacity());
    CHECK(schedule_violations(s).empty());
}

TEST_CASE("tsch: 100-node star fills the 98 usable slots") {
    std::vector<Link> e;
    for (NodeId v = 1; v < 100; ++v) e.push_back({0, v});
    const auto s = build_tsch_schedule(graph(100, e), uniform_demand(100, 1.0), SlotframeConfig{});
    CHECK(s.frame.cells.size() == 98);
    CHECK_FALSE(s.within_capacity());
    int exceeded = 0;
    for (const auto& l : s.links) exceeded += l.capacity_exceeded ? 1 : 0;
    CHECK(exceeded == 1);
    for (const auto& c : s.frame.cells) CHECK(c.slot < 98);
    CHECK(schedule_violations(s).empty());
}

TEST_CASE("tsch: siblings never share a slot even with one channel") {
    SlotframeConfig cfg;
    cfg.num_channels = 1;
    const auto s = build_tsch_schedule(graph(3, {{0, 1}, {0, 2}}), uniform_demand(3, 1.0), cfg);
    REQUIRE(s.frame.cells.size() == 2);
    CHECK(s.frame.cells[0].slot != s.frame.cells[1].slot);
}

TEST_CASE("tsch: forwarding load is counted per hop") {
    const auto s = build_tsch_schedule(graph(3, {{0, 1}, {1, 2}}), uniform_demand(3, 1.0), SlotframeConfig{});
    CHECK(dedicated_cells(s, 1) == 2);
    CHECK(dedicated_cells(s, 2) == 1);
    CHECK(s.links[0].demand == 2.0);
}

TEST_CASE("hybrid: window sizing") {
    // four mutually visible children of the coordinator
    std::vector<Link> e{{0, 1}, {0, 2}, {0, 3}, {0, 4}};
    for (NodeId a = 1; a <= 4; ++a)
        for (NodeId b = a + 1; b <= 4; ++b) e.push_back({a, b});
    const auto t = graph(5, e);
    const auto g = run_grouping(t);
    REQUIRE(g.groups.size() == 1);
    REQUIRE(g.groups[0].members.size() == 4);
    SlotframeConfig cfg;  // txn 0.4 slot, margin 1.5
    const auto s = build_hybrid_schedule(t, g, uniform_demand(5, 1.0), cfg);
    REQUIRE(s.frame.cells.size() == 1);
    const auto* w = std::get_if<GroupWindowCell>(&s.frame.cells[0].kind);
    REQUIRE(w);
    CHECK(w->length == 3);
    CHECK(w->receiver == 0);
    CHECK(s.hybrid);
    CHECK(schedule_violations(s).empty());
}

TEST_CASE("hybrid with no groups reduces to tsch") {
    const auto t = generate_random({40, 100.0, 35.0, 8});
    GroupingResult none;
    for (NodeId v = 1; v < 40; ++v) none.ungrouped.push_back(v);
    const auto d = uniform_demand(40, 1.0);
    auto a = schedule_to_json(build_hybrid_schedule(t, none, d, SlotframeConfig{}));
    auto b = schedule_to_json(build_tsch_schedule(t, d, SlotframeConfig{}));
    a.erase("hybrid");
    b.erase("hybrid");
    CHECK(a == b);
}

TEST_CASE("schedules are conflict free on random networks") {
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        const auto t = generate_random({150, 100.0, 22.0, seed});
        const auto g = run_grouping(t);
        SlotframeConfig cfg;
        cfg.length = 150;
        for (double demand : {0.5, 1.0, 3.0}) {
            const auto d = uniform_demand(150, demand);
            const auto plain = build_tsch_schedule(t, d, cfg);
            const auto hybrid = build_hybrid_schedule(t, g, d, cfg);
            CHECK(schedule_violations(plain).empty());
            CHECK(schedule_violations(hybrid).empty());
            for (const auto& l : plain.links) {
                CHECK(l.admitted <= l.demand + 1e-9);
                CHECK(l.capacity_exceeded == (l.admitted + 1e-9 < l.demand));
            }
        }
    }
}

TEST_CASE("schedule_violations catches planted conflicts") {
    const auto t = graph(3, {{0, 1}, {0, 2}});
    auto s = build_tsch_schedule(t, uniform_demand(3, 1.0), SlotframeConfig{});
    REQUIRE(schedule_violations(s).empty());

    auto receiver_clash = s;
    receiver_clash.frame.cells[1].slot = receiver_clash.frame.cells[0].slot;
    receiver_clash.frame.cells[1].channel_offset = 5;
    CHECK_FALSE(schedule_violations(receiver_clash).empty());

    auto reserved = s;
    reserved.frame.cells[0].slot = 99;
    CHECK_FALSE(schedule_violations(reserved).empty());

    auto bad_channel = s;
    bad_channel.frame.cells[0].channel_offset = 16;
    CHECK_FALSE(schedule_violations(bad_channel).empty());
}

TEST_CASE("slotframe config validation") {
    SlotframeConfig cfg;
    cfg.reserved_slots = 100;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.num_channels = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
