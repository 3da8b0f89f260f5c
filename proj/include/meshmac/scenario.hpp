#pragma once

#include "meshmac/csma.hpp"
#include "meshmac/engine.hpp"
#include "meshmac/schedule.hpp"
#include "meshmac/topology.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace meshmac {

class ParseError : public Error {
public:
    using Error::Error;
};

/// Raised for a well-formed document with bad content; `key()` is the dotted path.
class ValidationError : public Error {
public:
    ValidationError(std::string key, const std::string& what)
        : Error(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// One experiment description. The sweep runs every combination of
/// node_counts x hidden targets (or the fixed radius) x modes x rates x seeds.
struct Scenario {
    std::string name = "scenario";
    std::vector<MacMode> modes{MacMode::csma};

    Layout layout = Layout::mesh;
    std::vector<std::size_t> node_counts{100};
    double area_side = 100.0;
    std::optional<double> radius;       // exactly one of radius / target_hidden
    std::vector<double> target_hidden;
    double hidden_tolerance = 0.03;
    LinkSet hnp_links = LinkSet::both;
    HnpFormula hnp_formula = HnpFormula::receiver_centric;

    std::vector<double> rates{1.0};
    double rate_unit_s = 1.0;  // a rate r means r packets per rate_unit_s seconds per node

    double duration_s = 60.0;
    double warmup_fraction = 0.1;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::size_t queue_cap = 64;

    BackoffParams csma;

    double slot_ms = 10.0;
    int slotframe_len = 0;  // 0: max(node count, 100)
    int channels = 16;
    int reserved_slots = 2;
    std::int64_t tsch_tx_us = 5000;

    double margin = 1.5;
    std::int64_t window_jitter_us = 1000;

    std::optional<double> cdf_rate;  // rate whose per-node collisions feed cdf_<mode>.csv

    /// Packets per second per node for a listed rate.
    double packets_per_second(double rate) const { return rate / rate_unit_s; }
    /// Hidden targets to sweep; a fixed radius yields one empty cell.
    std::vector<std::optional<double>> hidden_cells() const;
    double effective_cdf_rate() const;

    SlotframeConfig slotframe(std::size_t node_count) const;
    RunConfig run_config(MacMode mode, double rate, std::uint64_t seed) const;

    void validate() const;
};

Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(std::string_view text, std::string_view source = "scenario");

/// Canonical JSON form (every field explicit). Round-trips through scenario_from_json.
nlohmann::json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& doc);

/// Every accepted dotted key, in documentation order.
std::vector<std::string_view> scenario_keys();

}  // namespace meshmac
