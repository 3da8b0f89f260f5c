#include "meshmac/sweep.hpp"

#include "meshmac/digest.hpp"
#include "meshmac/engine.hpp"
#include "meshmac/grouping.hpp"
#include "meshmac/schedule.hpp"
#include "meshmac/topology_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace meshmac {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<SummaryRow> SweepResult::rows() const {
    std::vector<SummaryRow> out;
    for (const auto& r : runs)
        if (r.error.empty()) out.push_back(r.row);
    return out;
}

namespace {

// Calls fn(i) for i in [0, count) on up to `threads` workers. The first
// exception thrown by fn is rethrown after every worker has stopped.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mu);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
    }
    if (failure) std::rethrow_exception(failure);
}

struct TopoCell {
    std::size_t node_count = 0;
    std::optional<double> hidden_target;
    std::uint64_t seed = 0;

    std::shared_ptr<const Topology> topology;
    std::optional<GroupingResult> grouping;
    double hidden = 0.0;
    std::optional<double> hidden_as_written;
    std::string error;
};

std::string cell_label(const TopoCell& c) {
    std::string h = c.hidden_target ? fmt::format("h{:.3f}", *c.hidden_target) : "fixed";
    return fmt::format("n{}_{}_s{}", c.node_count, h, c.seed);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

class Logger {
public:
    explicit Logger(std::ostream* out) : out_(out) {}
    void operator()(const std::string& line) {
        if (!out_) return;
        std::lock_guard lock(mu_);
        *out_ << line << '\n';
        out_->flush();
    }

private:
    std::ostream* out_;
    std::mutex mu_;
};

void build_cell(TopoCell& cell, const Scenario& s, const std::optional<Topology>& imported,
                std::vector<std::string>& warnings, std::mutex& warn_mu, Logger& log) {
    try {
        Topology topo;
        if (imported) {
            topo = *imported;
            if (!topo.has_tree()) topo = build_tree(std::move(topo));
        } else {
            double radius = 0.0;
            if (s.radius) {
                radius = *s.radius;
            } else {
                CalibrationRequest req;
                req.node_count = cell.node_count;
                req.area_side = s.area_side;
                req.seed = cell.seed;
                req.target_hidden = *cell.hidden_target;
                req.tolerance = s.hidden_tolerance;
                req.layout = s.layout;
                req.links = s.hnp_links;
                req.formula = s.hnp_formula;
                try {
                    radius = calibrate_radius(req).radius;
                } catch (const TargetUnreachable& e) {
                    radius = e.best().radius;
                    const auto msg = fmt::format(
                        "warning: {}: hidden target {:.3f} not reached, using radius {:.3f} ({:.3f})",
                        cell_label(cell), *cell.hidden_target, e.best().radius, e.best().achieved);
                    log(msg);
                    std::lock_guard lock(warn_mu);
                    warnings.push_back(msg);
                }
            }
            topo = generate_random({cell.node_count, s.area_side, radius, cell.seed, s.layout});
        }
        cell.hidden = network_hidden_percentage(topo, s.hnp_links, HnpFormula::receiver_centric);
        if (s.hnp_formula == HnpFormula::as_written)
            cell.hidden_as_written = network_hidden_percentage(topo, s.hnp_links, HnpFormula::as_written);
        cell.grouping = run_grouping(topo);
        cell.topology = std::make_shared<const Topology>(std::move(topo));
    } catch (const std::exception& e) {
        cell.error = e.what();
    }
}

struct Job {
    std::size_t cell = 0;
    MacMode mode = MacMode::csma;
    double rate = 0.0;
};

Schedule make_schedule(const Scenario& s, const TopoCell& cell, MacMode mode, double rate) {
    const auto& topo = *cell.topology;
    const auto cfg = s.slotframe(topo.size());
    const double frame_s =
        static_cast<double>(cfg.length) * static_cast<double>(cfg.slot_duration.count()) / 1e6;
    std::vector<double> demands(topo.size(), s.packets_per_second(rate) * frame_s);
    demands[kCoordinator] = 0.0;
    if (mode == MacMode::tsch) return build_tsch_schedule(topo, demands, cfg);
    return build_hybrid_schedule(topo, *cell.grouping, demands, cfg);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

SweepResult run_sweep(const Scenario& scenario, const fs::path& out_dir, const SweepOptions& options) {
    scenario.validate();
    fs::create_directories(out_dir);
    Logger log(options.log);
    SweepResult result;
    std::mutex warn_mu;

    // Topology cells: node_count x hidden cell x seed.
    std::vector<TopoCell> cells;
    if (options.topology) {
        for (auto seed : scenario.seeds) {
            TopoCell c;
            c.node_count = options.topology->size();
            c.seed = seed;
            cells.push_back(std::move(c));
        }
    } else {
        for (auto n : scenario.node_counts)
            for (const auto& h : scenario.hidden_cells())
                for (auto seed : scenario.seeds) {
                    TopoCell c;
                    c.node_count = n;
                    c.hidden_target = h;
                    c.seed = seed;
                    cells.push_back(std::move(c));
                }
    }
    log(fmt::format("{}: building {} topologies", scenario.name, cells.size()));
    parallel_for(cells.size(), options.parallel, [&](std::size_t i) {
        build_cell(cells[i], scenario, options.topology, result.warnings, warn_mu, log);
    });
    // Warnings arrive in completion order; sort so errors.log is reproducible.
    std::sort(result.warnings.begin(), result.warnings.end());

    // Run order: node_count, hidden, mode, rate, seed. Cells are already
    // (node_count, hidden, seed)-major, so seeds are the innermost stride.
    const std::size_t per_seed = scenario.seeds.size();
    std::vector<Job> jobs;
    for (std::size_t block = 0; block < cells.size(); block += per_seed)
        for (auto mode : scenario.modes)
            for (auto rate : scenario.rates)
                for (std::size_t k = 0; k < per_seed; ++k) jobs.push_back({block + k, mode, rate});

    result.runs.resize(jobs.size());
    std::atomic<std::size_t> done{0};
    log(fmt::format("{}: {} runs", scenario.name, jobs.size()));
    parallel_for(jobs.size(), options.parallel, [&](std::size_t i) {
        const auto& job = jobs[i];
        const auto& cell = cells[job.cell];
        auto& rec = result.runs[i];
        rec.index = i;
        rec.hidden_target = cell.hidden_target;
        auto& row = rec.row;
        row.scenario = scenario.name;
        row.mode = job.mode;
        row.node_count = cell.node_count;
        row.source_rate = job.rate;
        row.packets_per_second = scenario.packets_per_second(job.rate);
        row.seed = cell.seed;
        if (!cell.error.empty()) {
            rec.error = "topology: " + cell.error;
        } else {
            try {
                row.hidden = cell.hidden;
                row.hidden_as_written = cell.hidden_as_written;
                row.comm_radius = cell.topology->comm_radius();
                std::optional<Schedule> schedule;
                if (job.mode != MacMode::csma) {
                    schedule = make_schedule(scenario, cell, job.mode, job.rate);
                    row.within_capacity = schedule->within_capacity();
                }
                const auto config = scenario.run_config(job.mode, job.rate, cell.seed);
                std::unique_ptr<std::ofstream> trace;
                if (options.trace_run && *options.trace_run == i) {
                    trace = std::make_unique<std::ofstream>(out_dir / "trace.txt", std::ios::binary);
                    if (!*trace) throw Error("cannot write trace.txt");
                }
                const auto m = run(*cell.topology, schedule ? &*schedule : nullptr, config, trace.get());
                row.throughput = throughput(m);
                row.pdr = pdr(m);
                row.generated = m.total_generated();
                row.delivered = m.total_delivered();
                row.dropped = m.total_dropped();
                row.in_flight = m.total_in_flight();
                row.total_collisions = m.total_collided();
                row.per_node_collisions = m.collisions_per_node();
                rec.events = m.events;
                rec.trace_hash = m.trace_hash;
                rec.delivered_per_second = m.delivered_per_second;
            } catch (const std::exception& e) {
                rec.error = e.what();
            }
        }
        const auto n = ++done;
        if (!rec.error.empty())
            log(fmt::format("run {} failed: {}", i, rec.error));
        else if (n % 50 == 0 || n == jobs.size())
            log(fmt::format("{}: {}/{} runs", scenario.name, n, jobs.size()));
    });

    for (const auto& r : result.runs)
        if (!r.error.empty())
            result.errors.push_back(fmt::format("run {} ({} n={} rate={} seed={}): {}", r.index,
                                                to_string(r.row.mode), r.row.node_count,
                                                r.row.source_rate, r.row.seed, r.error));

    // Outputs. Names are collected in write order for the manifest.
    std::vector<std::string> outputs;
    auto emit = [&](const std::string& name, const std::string& text) {
        write_text(out_dir / name, text);
        outputs.push_back(name);
    };

    const auto rows = result.rows();
    {
        std::ostringstream s;
        write_summary_csv(s, rows);
        emit("summary.csv", s.str());
    }
    if (scenario.seeds.size() >= 2 && !rows.empty()) {
        std::vector<std::optional<double>> targets;
        for (const auto& r : result.runs)
            if (r.error.empty()) targets.push_back(r.hidden_target);
        try {
            std::ostringstream s;
            write_aggregate_csv(s, aggregate(rows, targets));
            emit("aggregate.csv", s.str());
        } catch (const InsufficientSeeds& e) {
            result.warnings.push_back(std::string("aggregate.csv skipped: ") + e.what());
        }
    }
    const double cdf_rate = scenario.effective_cdf_rate();
    for (auto mode : scenario.modes) {
        std::vector<std::uint64_t> pooled;
        for (const auto& r : rows)
            if (r.mode == mode && r.source_rate == cdf_rate)
                for (std::size_t v = 1; v < r.per_node_collisions.size(); ++v)
                    pooled.push_back(r.per_node_collisions[v]);
        std::ostringstream s;
        write_cdf_csv(s, collision_cdf(pooled));
        emit(fmt::format("cdf_{}.csv", to_string(mode)), s.str());
    }
    {
        json groupings = json::array();
        for (const auto& c : cells) {
            if (!c.grouping) continue;
            groupings.push_back({{"node_count", c.node_count},
                                 {"hidden_target", optional_json(c.hidden_target)},
                                 {"seed", c.seed},
                                 {"grouping", grouping_to_json(*c.grouping)}});
        }
        emit("grouping.json", groupings.dump(1) + "\n");
    }
    {
        json schedules = json::array();
        for (std::size_t block = 0; block < cells.size(); block += per_seed) {
            const auto& c = cells[block];
            if (!c.topology) continue;
            for (auto mode : scenario.modes) {
                if (mode == MacMode::csma) continue;
                for (auto rate : scenario.rates)
                    schedules.push_back({{"node_count", c.node_count},
                                         {"hidden_target", optional_json(c.hidden_target)},
                                         {"seed", c.seed},
                                         {"mode", to_string(mode)},
                                         {"rate", rate},
                                         {"schedule", schedule_to_json(make_schedule(scenario, c, mode, rate))}});
            }
        }
        if (!schedules.empty()) emit("schedule.json", schedules.dump(1) + "\n");
    }
    {
        std::string lines;
        for (const auto& r : result.runs) {
            json j{{"index", r.index},
                   {"mode", to_string(r.row.mode)},
                   {"node_count", r.row.node_count},
                   {"hidden_target", optional_json(r.hidden_target)},
                   {"rate", r.row.source_rate},
                   {"seed", r.row.seed}};
            if (r.error.empty()) {
                j["hidden"] = r.row.hidden;
                j["comm_radius"] = r.row.comm_radius;
                j["throughput"] = r.row.throughput;
                j["pdr"] = r.row.pdr;
                j["generated"] = r.row.generated;
                j["delivered"] = r.row.delivered;
                j["dropped"] = r.row.dropped;
                j["in_flight"] = r.row.in_flight;
                j["collisions"] = r.row.total_collisions;
                j["within_capacity"] = r.row.within_capacity;
                j["events"] = r.events;
                j["trace_hash"] = fmt::format("{:016x}", r.trace_hash);
                j["delivered_per_second"] = r.delivered_per_second;
            } else {
                j["error"] = r.error;
            }
            lines += j.dump() + "\n";
        }
        emit("runs.jsonl", lines);
    }
    if (options.export_topology) {
        fs::create_directories(out_dir / "topologies");
        for (const auto& c : cells)
            if (c.topology)
                emit("topologies/" + cell_label(c) + ".json", topology_to_json(*c.topology).dump(1) + "\n");
    }
    if (options.trace_run && *options.trace_run < jobs.size()) outputs.push_back("trace.txt");
    {
        std::string text;
        for (const auto& w : result.warnings) text += w + "\n";
        for (const auto& e : result.errors) text += "error: " + e + "\n";
        emit("errors.log", text);
    }

    const auto scenario_doc = scenario_to_json(scenario);
    json files = json::object();
    for (const auto& name : outputs) files[name] = sha256_file(out_dir / name);
    json manifest{{"format", "meshmac.manifest"},
                  {"version", 1},
                  {"csv_version", kSummaryCsvVersion},
                  {"scenario", scenario_doc},
                  {"scenario_sha256", sha256_hex(scenario_doc.dump())},
                  {"imported_topology",
                   options.topology ? topology_to_json(*options.topology) : json(nullptr)},
                  {"export_topology", options.export_topology},
                  {"trace_run", options.trace_run ? json(*options.trace_run) : json(nullptr)},
                  {"runs", jobs.size()},
                  {"failed_runs", result.errors.size()},
                  {"outputs", files}};
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    result.manifest = std::move(manifest);
    return result;
}

ReplayResult replay_manifest(const fs::path& manifest_path, const fs::path& out_dir, SweepOptions options) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw Error("cannot read " + manifest_path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(manifest_path.string() + ": " + e.what());
    }
    if (doc.value("format", "") != "meshmac.manifest")
        throw ParseError(manifest_path.string() + ": not a meshmac manifest");
    if (doc.value("version", 0) != 1)
        throw ParseError(manifest_path.string() + ": unsupported manifest version");

    const auto scenario = scenario_from_json(doc.at("scenario"));
    if (sha256_hex(scenario_to_json(scenario).dump()) != doc.at("scenario_sha256").get<std::string>())
        throw ParseError(manifest_path.string() + ": scenario hash does not match its contents");
    options.topology.reset();
    if (!doc.at("imported_topology").is_null())
        options.topology = topology_from_json(doc.at("imported_topology"));
    options.export_topology = doc.value("export_topology", false);
    options.trace_run.reset();
    if (doc.contains("trace_run") && !doc.at("trace_run").is_null())
        options.trace_run = doc.at("trace_run").get<std::size_t>();

    ReplayResult out;
    out.sweep = run_sweep(scenario, out_dir, options);
    const auto& want = doc.at("outputs");
    const auto& got = out.sweep.manifest.at("outputs");
    for (const auto& [name, hash] : want.items())
        if (!got.contains(name) || got.at(name) != hash) out.mismatches.push_back(name);
    for (const auto& [name, hash] : got.items())
        if (!want.contains(name)) out.mismatches.push_back(name);
    return out;
}

}  // namespace meshmac
