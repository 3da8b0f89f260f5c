#include "meshmac/metrics.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace meshmac;

namespace {

RunMetrics metrics(std::uint64_t generated, std::uint64_t delivered, std::uint64_t in_flight,
                   std::uint64_t in_window, std::int64_t window_us) {
    RunMetrics m;
    m.nodes.resize(2);
    m.nodes[1].generated = generated;
    m.nodes[1].delivered = delivered;
    m.nodes[1].in_flight = in_flight;
    m.nodes[1].dropped = generated - delivered - in_flight;
    m.window_start = SimTime{0};
    m.window_end = SimTime{window_us};
    m.delivered_in_window = in_window;
    return m;
}

SummaryRow row(MacMode mode, double rate, double tput, std::uint64_t seed) {
    SummaryRow r;
    r.scenario = "t";
    r.mode = mode;
    r.node_count = 10;
    r.source_rate = rate;
    r.throughput = tput;
    r.pdr = 1.0;
    r.seed = seed;
    return r;
}

}  // namespace

TEST_CASE("throughput and pdr") {
    CHECK(throughput(metrics(100, 100, 0, 100, 10'000'000)) == 10.0);
    CHECK(pdr(metrics(50, 50, 0, 50, 1'000'000)) == 1.0);
    CHECK(pdr(metrics(50, 40, 10, 40, 1'000'000)) == 1.0);  // in-flight packets are not counted
    CHECK(pdr(metrics(50, 25, 0, 25, 1'000'000)) == 0.5);
    CHECK_THROWS_AS(pdr(metrics(0, 0, 0, 0, 1'000'000)), NoTraffic);
    CHECK_THROWS_AS(pdr(metrics(5, 0, 5, 0, 1'000'000)), NoTraffic);
    CHECK_THROWS_AS(throughput(metrics(1, 1, 0, 1, 0)), ConfigError);
}

TEST_CASE("collision_cdf") {
    const std::vector<std::uint64_t> zeros(5, 0);
    const auto z = collision_cdf(zeros);
    REQUIRE(z.size() == 1);
    CHECK(z[0].count == 0);
    CHECK(z[0].cumulative == 1.0);

    const std::vector<std::uint64_t> v{3, 0, 1, 0};
    const auto c = collision_cdf(v);
    REQUIRE(c.size() == 3);
    CHECK(c[0].count == 0);
    CHECK(c[0].cumulative == 0.5);
    CHECK(c[1].count == 1);
    CHECK(c[1].cumulative == 0.75);
    CHECK(c[2].count == 3);
    CHECK(c[2].cumulative == 1.0);

    CHECK(collision_cdf(std::vector<std::uint64_t>{}).empty());
}

TEST_CASE("collision_cdf properties on random vectors") {
    std::mt19937_64 gen(3);
    for (int k = 0; k < 200; ++k) {
        std::vector<std::uint64_t> v(1 + gen() % 50);
        for (auto& x : v) x = gen() % 12;
        const auto c = collision_cdf(v);
        CHECK(c.back().cumulative == 1.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            const auto below = std::count_if(v.begin(), v.end(), [&](auto x) { return x <= c[i].count; });
            CHECK(c[i].cumulative == doctest::Approx(static_cast<double>(below) / v.size()));
            if (i) {
                CHECK(c[i].count > c[i - 1].count);
                CHECK(c[i].cumulative > c[i - 1].cumulative);
            }
        }
    }
}

TEST_CASE("estimate") {
    const std::vector<double> same{3.0, 3.0, 3.0};
    CHECK(estimate(same).mean == 3.0);
    CHECK(estimate(same).ci_half_width == 0.0);
    const std::vector<double> two{10.0, 14.0};
    CHECK(estimate(two).mean == 12.0);
    // s = sqrt(8), 1.96 * s / sqrt(2) = 3.92
    CHECK(estimate(two).ci_half_width == doctest::Approx(3.92));
    CHECK_THROWS_AS(estimate(std::vector<double>{1.0}), InsufficientSeeds);
}

TEST_CASE("aggregate groups rows by cell in first-seen order") {
    std::vector<SummaryRow> rows{row(MacMode::csma, 1, 10, 1), row(MacMode::csma, 1, 14, 2),
                                 row(MacMode::tsch, 1, 5, 1), row(MacMode::tsch, 1, 5, 2),
                                 row(MacMode::csma, 1, 20, 1), row(MacMode::csma, 1, 22, 2)};
    std::vector<std::optional<double>> targets{0.0, 0.0, 0.0, 0.0, 0.5, 0.5};
    const auto a = aggregate(rows, targets);
    REQUIRE(a.size() == 3);
    CHECK(a[0].key.mode == MacMode::csma);
    CHECK(a[0].throughput.mean == 12.0);
    CHECK(a[1].throughput.ci_half_width == 0.0);
    CHECK(a[2].key.hidden_target == 0.5);
    CHECK(a[2].seeds == 2);

    std::vector<std::optional<double>> lonely{0.0, 0.0, 0.0, 0.0, 0.5, 0.7};
    CHECK_THROWS_AS(aggregate(rows, lonely), InsufficientSeeds);
    CHECK_THROWS_AS(aggregate(rows, std::span(targets).first(2)), ConfigError);

    std::ostringstream csv;
    write_aggregate_csv(csv, a);
    std::string header;
    std::getline(std::istringstream(csv.str()) >> std::ws, header);
    CHECK(header.rfind("scenario,mode,node_count,hidden_target", 0) == 0);
}

TEST_CASE("summary csv") {
    auto r = row(MacMode::scg_hybrid, 2.5, 42.125, 3);
    r.per_node_collisions = {0, 4, 1};
    r.hidden_as_written = 0.25;
    const auto line = summary_csv_line(r);
    CHECK(line.rfind("t,scg_hybrid,10,2.5,", 0) == 0);
    CHECK(line.find(",0.250000,") != std::string::npos);
    CHECK(line.substr(line.size() - 5) == "0;4;1");

    const auto header = summary_csv_header();
    CHECK(std::count(header.begin(), header.end(), ',') == std::count(line.begin(), line.end(), ','));

    r.hidden_as_written.reset();
    const auto plain = summary_csv_line(r);
    CHECK(std::count(plain.begin(), plain.end(), ',') == std::count(header.begin(), header.end(), ','));

    std::ostringstream out;
    std::vector<SummaryRow> rows{r, r};
    write_summary_csv(out, rows);
    const auto text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
