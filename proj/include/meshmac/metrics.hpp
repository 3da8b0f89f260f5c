#pragma once

#include "meshmac/engine.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace meshmac {

class NoTraffic : public Error {
public:
    NoTraffic() : Error("no packets generated in the measurement window") {}
};

class InsufficientSeeds : public Error {
public:
    explicit InsufficientSeeds(std::size_t have)
        : Error("aggregation needs at least 2 seeds per cell, got " + std::to_string(have)) {}
};

/// Coordinator deliveries inside the measurement window divided by its length (packets/s).
double throughput(const RunMetrics& metrics);

/// Delivered / generated over packets generated in the window; in-flight
/// packets are excluded from both. Throws NoTraffic.
double pdr(const RunMetrics& metrics);

struct CdfPoint {
    std::uint64_t count = 0;
    double cumulative = 0.0;

    friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

/// Empirical right-continuous CDF: one point per distinct value, F(value).
std::vector<CdfPoint> collision_cdf(std::span<const std::uint64_t> per_node_collisions);

/// One line of summary.csv.
struct SummaryRow {
    std::string scenario;
    MacMode mode = MacMode::csma;
    std::size_t node_count = 0;
    double source_rate = 0.0;  // as listed in the scenario
    double packets_per_second = 0.0;
    double hidden = 0.0;                 // achieved network hidden percentage
    std::optional<double> hidden_as_written;  // reported when the literal formula is selected
    double comm_radius = 0.0;
    std::uint64_t seed = 0;
    double throughput = 0.0;
    double pdr = 0.0;
    std::uint64_t generated = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t in_flight = 0;
    std::uint64_t total_collisions = 0;
    bool within_capacity = true;  // TSCH/hybrid schedule fit all demand
    std::vector<std::uint64_t> per_node_collisions;
};

inline constexpr const char* kSummaryCsvVersion = "1";

/// Fixed documented header; per-node collisions are ';'-joined in the last column.
std::string summary_csv_header();
std::string summary_csv_line(const SummaryRow& row);
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);

/// Two-column CSV: collisions,cumulative_fraction.
void write_cdf_csv(std::ostream& out, std::span<const CdfPoint> cdf);

struct CellKey {
    std::string scenario;
    MacMode mode = MacMode::csma;
    std::size_t node_count = 0;
    std::optional<double> hidden_target;  // empty when the scenario fixes the radius
    double source_rate = 0.0;

    friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct Estimate {
    double mean = 0.0;
    double ci_half_width = 0.0;  // normal approximation, 95%
};

struct AggregateRow {
    CellKey key;
    std::size_t seeds = 0;
    Estimate throughput;
    Estimate pdr;
    Estimate collisions;
    Estimate hidden;
};

/// Sample mean and 1.96 * s / sqrt(n) of one quantity.
Estimate estimate(std::span<const double> samples);

/// Groups rows by (scenario, mode, node count, hidden target, rate) in first-seen
/// order. `hidden_targets[i]` is the cell coordinate of rows[i]. Throws
/// InsufficientSeeds when a cell has fewer than 2 rows.
std::vector<AggregateRow> aggregate(std::span<const SummaryRow> rows,
                                    std::span<const std::optional<double>> hidden_targets);

void write_aggregate_csv(std::ostream& out, std::span<const AggregateRow> rows);

}  // namespace meshmac
