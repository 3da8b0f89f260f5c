#include "meshmac/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace meshmac {

double throughput(const RunMetrics& metrics) {
    const double seconds =
        static_cast<double>((metrics.window_end - metrics.window_start).count()) / 1e6;
    if (seconds <= 0.0) throw ConfigError("throughput: empty measurement window");
    return static_cast<double>(metrics.delivered_in_window) / seconds;
}

double pdr(const RunMetrics& metrics) {
    const auto generated = metrics.total_generated() - metrics.total_in_flight();
    if (generated == 0) throw NoTraffic();
    return static_cast<double>(metrics.total_delivered()) / static_cast<double>(generated);
}

std::vector<CdfPoint> collision_cdf(std::span<const std::uint64_t> per_node_collisions) {
    std::vector<std::uint64_t> sorted(per_node_collisions.begin(), per_node_collisions.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<CdfPoint> cdf;
    const auto n = static_cast<double>(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
        cdf.push_back({sorted[i], static_cast<double>(i + 1) / n});
    }
    return cdf;
}

std::string summary_csv_header() {
    return "scenario,mode,node_count,source_rate,packets_per_second,hidden,hidden_as_written,"
           "comm_radius,seed,throughput,pdr,generated,delivered,dropped,in_flight,"
           "total_collisions,within_capacity,per_node_collisions";
}

std::string summary_csv_line(const SummaryRow& row) {
    std::string per_node;
    for (std::size_t i = 0; i < row.per_node_collisions.size(); ++i) {
        if (i) per_node += ';';
        per_node += std::to_string(row.per_node_collisions[i]);
    }
    const std::string as_written =
        row.hidden_as_written ? fmt::format("{:.6f}", *row.hidden_as_written) : std::string();
    return fmt::format("{},{},{},{:.6g},{:.6f},{:.6f},{},{:.6f},{},{:.6f},{:.6f},{},{},{},{},{},{},{}",
                       row.scenario, to_string(row.mode), row.node_count, row.source_rate,
                       row.packets_per_second, row.hidden, as_written, row.comm_radius, row.seed,
                       row.throughput, row.pdr, row.generated, row.delivered, row.dropped,
                       row.in_flight, row.total_collisions, row.within_capacity ? 1 : 0, per_node);
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
    out << summary_csv_header() << '\n';
    for (const auto& row : rows) out << summary_csv_line(row) << '\n';
}

void write_cdf_csv(std::ostream& out, std::span<const CdfPoint> cdf) {
    out << "collisions,cumulative_fraction\n";
    for (const auto& p : cdf) out << fmt::format("{},{:.6f}\n", p.count, p.cumulative);
}

Estimate estimate(std::span<const double> samples) {
    if (samples.size() < 2) throw InsufficientSeeds(samples.size());
    const auto n = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    return {mean, 1.96 * sd / std::sqrt(n)};
}

std::vector<AggregateRow> aggregate(std::span<const SummaryRow> rows,
                                    std::span<const std::optional<double>> hidden_targets) {
    if (hidden_targets.size() != rows.size())
        throw ConfigError("aggregate: one hidden target per row required");
    std::vector<CellKey> keys;
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const CellKey key{rows[i].scenario, rows[i].mode, rows[i].node_count, hidden_targets[i],
                          rows[i].source_rate};
        const auto it = std::find(keys.begin(), keys.end(), key);
        if (it == keys.end()) {
            keys.push_back(key);
            members.push_back({i});
        } else {
            members[static_cast<std::size_t>(it - keys.begin())].push_back(i);
        }
    }

    std::vector<AggregateRow> out;
    for (std::size_t k = 0; k < keys.size(); ++k) {
        std::vector<double> tput, ratio, coll, hidden;
        for (std::size_t i : members[k]) {
            tput.push_back(rows[i].throughput);
            ratio.push_back(rows[i].pdr);
            coll.push_back(static_cast<double>(rows[i].total_collisions));
            hidden.push_back(rows[i].hidden);
        }
        out.push_back({keys[k], members[k].size(), estimate(tput), estimate(ratio), estimate(coll),
                       estimate(hidden)});
    }
    return out;
}

void write_aggregate_csv(std::ostream& out, std::span<const AggregateRow> rows) {
    out << "scenario,mode,node_count,hidden_target,source_rate,seeds,throughput_mean,"
           "throughput_ci95,pdr_mean,pdr_ci95,collisions_mean,collisions_ci95,hidden_mean,"
           "hidden_ci95\n";
    for (const auto& r : rows) {
        const std::string target =
            r.key.hidden_target ? fmt::format("{:.6g}", *r.key.hidden_target) : std::string();
        out << fmt::format("{},{},{},{},{:.6g},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},"
                           "{:.6f},{:.6f}\n",
                           r.key.scenario, to_string(r.key.mode), r.key.node_count,
                           target, r.key.source_rate, r.seeds, r.throughput.mean,
                           r.throughput.ci_half_width, r.pdr.mean, r.pdr.ci_half_width,
                           r.collisions.mean, r.collisions.ci_half_width, r.hidden.mean,
                           r.hidden.ci_half_width);
    }
}

}  // namespace meshmac
