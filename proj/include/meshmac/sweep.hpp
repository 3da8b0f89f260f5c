#pragma once

#include "meshmac/metrics.hpp"
#include "meshmac/scenario.hpp"
#include "meshmac/topology.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace meshmac {

struct SweepOptions {
    unsigned parallel = 0;                 // 0: hardware concurrency
    bool export_topology = false;          // also write topologies/<cell>.json
    std::optional<Topology> topology;      // use this network instead of generating one per seed
    std::optional<std::size_t> trace_run;  // write trace.txt for this run index
    std::ostream* log = nullptr;           // progress and warnings
};

/// One simulated (topology cell, mode, rate, seed) point, in scenario order.
struct RunRecord {
    std::size_t index = 0;
    std::optional<double> hidden_target;
    SummaryRow row;
    std::uint64_t events = 0;
    std::uint64_t trace_hash = 0;
    std::vector<std::uint64_t> delivered_per_second;
    std::string error;  // non-empty when the run failed
};

struct SweepResult {
    std::vector<RunRecord> runs;
    std::vector<std::string> warnings;
    std::vector<std::string> errors;
    nlohmann::json manifest;

    bool ok() const noexcept { return errors.empty(); }
    /// Successful runs' summary rows in scenario order.
    std::vector<SummaryRow> rows() const;
};

/// Runs every point of the scenario and writes summary.csv, aggregate.csv
/// (when there are at least two seeds), cdf_<mode>.csv, grouping.json,
/// schedule.json, runs.jsonl and manifest.json into `out_dir`. Results are
/// merged in scenario order whatever the degree of parallelism.
SweepResult run_sweep(const Scenario& scenario, const std::filesystem::path& out_dir,
                      const SweepOptions& options = {});

struct ReplayResult {
    SweepResult sweep;
    std::vector<std::string> mismatches;  // files whose hash differs from the manifest

    bool identical() const noexcept { return mismatches.empty() && sweep.ok(); }
};

/// Re-runs the scenario recorded in a manifest into `out_dir` and compares
/// every output hash with the recorded one.
ReplayResult replay_manifest(const std::filesystem::path& manifest_path,
                             const std::filesystem::path& out_dir, SweepOptions options = {});

}  // namespace meshmac
