#include "meshmac/presets.hpp"
#include "meshmac/scenario.hpp"
#include "meshmac/sweep.hpp"
#include "meshmac/topology_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

enum Exit { ok = 0, run_failed = 1, bad_input = 2, replay_mismatch = 3 };

meshmac::Topology read_topology(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw meshmac::Error("cannot read " + path);
    try {
        return meshmac::topology_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw meshmac::ParseError(path + ": " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sweeps CSMA, TSCH and grouped-contention hybrid MACs over random mesh networks."};
    app.set_version_flag("--version", "meshmac 1.0");

    std::string scenario_path, preset, manifest, out_dir, topology_path, formula;
    unsigned parallel = 0;
    bool export_topology = false, list_presets = false, quiet = false;
    std::string show_preset;
    std::optional<std::size_t> trace;

    auto* src = app.add_option_group("source", "what to run");
    src->add_option("--scenario", scenario_path, "scenario TOML file")->check(CLI::ExistingFile);
    src->add_option("--preset", preset, "built-in scenario (see --list-presets)");
    src->add_option("--manifest", manifest, "re-run a manifest.json and compare output hashes")
        ->check(CLI::ExistingFile);
    src->add_flag("--list-presets", list_presets, "print built-in scenario names");
    src->add_option("--show-preset", show_preset, "print a built-in scenario's TOML");
    src->require_option(1);

    app.add_option("--out", out_dir, "output directory (default: out/<scenario name>)");
    app.add_option("--parallel", parallel, "worker threads, 0 = all cores")->capture_default_str();
    app.add_flag("--export-topology", export_topology, "write every generated network to topologies/");
    app.add_option("--hnp-formula", formula, "hidden-ratio reading used for calibration")
        ->check(CLI::IsMember({"receiver_centric", "as_written"}));
    app.add_option("--topology", topology_path, "run on this network instead of generated ones")
        ->check(CLI::ExistingFile);
    app.add_option("--trace", trace, "write the event trace of this run index to trace.txt");
    app.add_flag("-q,--quiet", quiet, "no progress output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list_presets) {
            for (const auto& p : meshmac::builtin_presets()) std::cout << p.name << '\n';
            return ok;
        }
        if (!show_preset.empty()) {
            const auto* p = meshmac::find_preset(show_preset);
            if (!p) throw meshmac::Error("unknown preset: " + show_preset);
            std::cout << p->toml;
            return ok;
        }

        meshmac::SweepOptions options;
        options.parallel = parallel;
        options.log = quiet ? nullptr : &std::cerr;

        if (!manifest.empty()) {
            if (out_dir.empty()) out_dir = "out/replay";
            const auto r = meshmac::replay_manifest(manifest, out_dir, options);
            for (const auto& name : r.mismatches) std::cerr << "mismatch: " << name << '\n';
            for (const auto& e : r.sweep.errors) std::cerr << "error: " << e << '\n';
            if (!r.sweep.ok()) return run_failed;
            if (!r.identical()) return replay_mismatch;
            std::cout << "replay identical: " << out_dir << '\n';
            return ok;
        }

        meshmac::Scenario scenario;
        if (!preset.empty()) {
            const auto* p = meshmac::find_preset(preset);
            if (!p) throw meshmac::Error("unknown preset: " + preset + " (try --list-presets)");
            scenario = meshmac::parse_scenario(p->toml, "preset " + preset);
        } else {
            scenario = meshmac::load_scenario(scenario_path);
        }
        if (!formula.empty()) scenario.hnp_formula = meshmac::parse_hnp_formula(formula);
        scenario.validate();

        if (!topology_path.empty()) options.topology = read_topology(topology_path);
        options.export_topology = export_topology;
        options.trace_run = trace;
        if (out_dir.empty()) out_dir = "out/" + scenario.name;

        const auto r = meshmac::run_sweep(scenario, out_dir, options);
        for (const auto& e : r.errors) std::cerr << "error: " << e << '\n';
        std::cout << out_dir << "/manifest.json\n";
        return r.ok() ? ok : run_failed;
    } catch (const meshmac::ValidationError& e) {
        std::cerr << "invalid scenario: " << e.what() << '\n';
        return bad_input;
    } catch (const meshmac::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return bad_input;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return bad_input;
    }
}
