#include "meshmac/scenario.hpp"

#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace meshmac {

namespace {

constexpr std::string_view kKeys[] = {
    "name",
    "modes",
    "topology.layout",
    "topology.node_counts",
    "topology.area_side",
    "topology.radius",
    "topology.target_hidden",
    "topology.hidden_tolerance",
    "topology.hnp_links",
    "topology.hnp_formula",
    "traffic.rates",
    "traffic.rate_unit_s",
    "sim.duration_s",
    "sim.warmup_fraction",
    "sim.seeds",
    "sim.queue_cap",
    "csma.c_nb",
    "csma.c_be",
    "csma.max_attempts",
    "csma.window_exponent_cap",
    "csma.txn_duration_us",
    "csma.unit_backoff_us",
    "csma.initial_backoff",
    "tsch.slot_ms",
    "tsch.slotframe_len",
    "tsch.channels",
    "tsch.reserved_slots",
    "tsch.tx_duration_us",
    "hybrid.margin",
    "hybrid.window_jitter_us",
    "output.cdf_rate",
};

std::int64_t to_micros(double value, std::string_view key) {
    const double us = std::round(value);
    if (std::abs(us - value) > 1e-6 || us < 0 || us > 9.0e15)
        throw ValidationError(std::string(key), "must be a whole number of microseconds");
    return static_cast<std::int64_t>(us);
}

// Flattens nested tables into dotted keys; arrays and scalars are leaves.
void flatten(const toml::table& table, const std::string& prefix,
             std::map<std::string, const toml::node*>& out) {
    for (auto&& [k, v] : table) {
        const std::string path = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
        if (const auto* sub = v.as_table())
            flatten(*sub, path, out);
        else
            out.emplace(path, &v);
    }
}

class Reader {
public:
    explicit Reader(std::map<std::string, const toml::node*> values) : values_(std::move(values)) {
        for (const auto& [key, node] : values_) {
            (void)node;
            if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys))
                throw ValidationError(key, "unknown key");
        }
    }

    const toml::node* find(std::string_view key) const {
        const auto it = values_.find(std::string(key));
        return it == values_.end() ? nullptr : it->second;
    }

    bool has(std::string_view key) const { return find(key) != nullptr; }

    std::optional<std::string> string(std::string_view key) const {
        const auto* n = find(key);
        if (!n) return std::nullopt;
        if (const auto* s = n->as_string()) return s->get();
        throw ValidationError(std::string(key), "expected a string");
    }

    std::optional<double> number(std::string_view key) const {
        const auto* n = find(key);
        if (!n) return std::nullopt;
        return as_number(*n, key);
    }

    std::optional<std::int64_t> integer(std::string_view key) const {
        const auto* n = find(key);
        if (!n) return std::nullopt;
        return as_integer(*n, key);
    }

    std::optional<bool> boolean(std::string_view key) const {
        const auto* n = find(key);
        if (!n) return std::nullopt;
        if (const auto* b = n->as_boolean()) return b->get();
        throw ValidationError(std::string(key), "expected true or false");
    }

    // Lists accept a bare scalar as a one-element list.
    template <typename F>
    auto list(std::string_view key, F convert) const
        -> std::optional<std::vector<decltype(convert(std::declval<const toml::node&>(), key))>> {
        using T = decltype(convert(std::declval<const toml::node&>(), key));
        const auto* n = find(key);
        if (!n) return std::nullopt;
        std::vector<T> out;
        if (const auto* arr = n->as_array()) {
            for (const auto& item : *arr) out.push_back(convert(item, key));
        } else {
            out.push_back(convert(*n, key));
        }
        return out;
    }

    static double as_number(const toml::node& n, std::string_view key) {
        if (const auto* f = n.as_floating_point()) return f->get();
        if (const auto* i = n.as_integer()) return static_cast<double>(i->get());
        throw ValidationError(std::string(key), "expected a number");
    }

    static std::int64_t as_integer(const toml::node& n, std::string_view key) {
        if (const auto* i = n.as_integer()) return i->get();
        throw ValidationError(std::string(key), "expected an integer");
    }

    static std::string as_string(const toml::node& n, std::string_view key) {
        if (const auto* s = n.as_string()) return s->get();
        throw ValidationError(std::string(key), "expected a string");
    }

private:
    std::map<std::string, const toml::node*> values_;
};

template <typename E, typename Parse>
E parse_enum(std::string_view key, const std::string& text, Parse parse) {
    try {
        return parse(text);
    } catch (const Error& e) {
        throw ValidationError(std::string(key), e.what());
    }
}

std::size_t to_size(std::int64_t v, std::string_view key) {
    if (v < 0) throw ValidationError(std::string(key), "must be non-negative");
    return static_cast<std::size_t>(v);
}

int to_int(std::int64_t v, std::string_view key) {
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw ValidationError(std::string(key), "out of range");
    return static_cast<int>(v);
}

Scenario from_reader(const Reader& r) {
    Scenario s;
    if (auto v = r.string("name")) s.name = *v;
    if (auto v = r.list("modes", Reader::as_string)) {
        s.modes.clear();
        for (const auto& m : *v)
            s.modes.push_back(parse_enum<MacMode>("modes", m, parse_mac_mode));
    }

    if (auto v = r.string("topology.layout"))
        s.layout = parse_enum<Layout>("topology.layout", *v, parse_layout);
    if (auto v = r.list("topology.node_counts", Reader::as_integer)) {
        s.node_counts.clear();
        for (auto n : *v) s.node_counts.push_back(to_size(n, "topology.node_counts"));
    }
    if (auto v = r.number("topology.area_side")) s.area_side = *v;
    if (auto v = r.number("topology.radius")) s.radius = *v;
    if (auto v = r.list("topology.target_hidden", Reader::as_number)) s.target_hidden = *v;
    if (auto v = r.number("topology.hidden_tolerance")) s.hidden_tolerance = *v;
    if (auto v = r.string("topology.hnp_links"))
        s.hnp_links = parse_enum<LinkSet>("topology.hnp_links", *v, parse_link_set);
    if (auto v = r.string("topology.hnp_formula"))
        s.hnp_formula = parse_enum<HnpFormula>("topology.hnp_formula", *v, parse_hnp_formula);

    if (auto v = r.list("traffic.rates", Reader::as_number)) s.rates = *v;
    if (auto v = r.number("traffic.rate_unit_s")) s.rate_unit_s = *v;

    if (auto v = r.number("sim.duration_s")) s.duration_s = *v;
    if (auto v = r.number("sim.warmup_fraction")) s.warmup_fraction = *v;
    if (auto v = r.list("sim.seeds", Reader::as_integer)) {
        s.seeds.clear();
        for (auto seed : *v) {
            if (seed < 0) throw ValidationError("sim.seeds", "seeds must be non-negative");
            s.seeds.push_back(static_cast<std::uint64_t>(seed));
        }
    }
    if (auto v = r.integer("sim.queue_cap")) s.queue_cap = to_size(*v, "sim.queue_cap");

    if (auto v = r.integer("csma.c_nb")) s.csma.c_nb = to_int(*v, "csma.c_nb");
    if (auto v = r.integer("csma.c_be")) s.csma.c_be = to_int(*v, "csma.c_be");
    if (auto v = r.integer("csma.max_attempts")) s.csma.max_attempts = to_int(*v, "csma.max_attempts");
    if (auto v = r.integer("csma.window_exponent_cap"))
        s.csma.window_exponent_cap = to_int(*v, "csma.window_exponent_cap");
    if (auto v = r.integer("csma.txn_duration_us")) s.csma.txn_duration = SimTime{*v};
    if (auto v = r.integer("csma.unit_backoff_us")) s.csma.unit_backoff = SimTime{*v};
    if (auto v = r.boolean("csma.initial_backoff")) s.csma.initial_backoff = *v;

    if (auto v = r.number("tsch.slot_ms")) s.slot_ms = *v;
    if (auto v = r.integer("tsch.slotframe_len")) s.slotframe_len = to_int(*v, "tsch.slotframe_len");
    if (auto v = r.integer("tsch.channels")) s.channels = to_int(*v, "tsch.channels");
    if (auto v = r.integer("tsch.reserved_slots")) s.reserved_slots = to_int(*v, "tsch.reserved_slots");
    if (auto v = r.integer("tsch.tx_duration_us")) s.tsch_tx_us = *v;

    if (auto v = r.number("hybrid.margin")) s.margin = *v;
    if (auto v = r.integer("hybrid.window_jitter_us")) s.window_jitter_us = *v;

    if (auto v = r.number("output.cdf_rate")) s.cdf_rate = *v;

    s.validate();
    return s;
}

template <typename T>
bool has_duplicates(std::vector<T> v) {
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) != v.end();
}

}  // namespace

std::vector<std::string_view> scenario_keys() { return {std::begin(kKeys), std::end(kKeys)}; }

std::vector<std::optional<double>> Scenario::hidden_cells() const {
    if (radius) return {std::nullopt};
    return {target_hidden.begin(), target_hidden.end()};
}

double Scenario::effective_cdf_rate() const {
    if (cdf_rate) return *cdf_rate;
    return *std::max_element(rates.begin(), rates.end());
}

SlotframeConfig Scenario::slotframe(std::size_t node_count) const {
    SlotframeConfig c;
    c.length = slotframe_len > 0 ? slotframe_len : default_slotframe_length(node_count);
    c.num_channels = channels;
    c.slot_duration = SimTime{to_micros(slot_ms * 1000.0, "tsch.slot_ms")};
    c.reserved_slots = reserved_slots;
    c.txn_slots = static_cast<double>(csma.txn_duration.count()) /
                  static_cast<double>(c.slot_duration.count());
    c.contention_margin = margin;
    return c;
}

RunConfig Scenario::run_config(MacMode mode, double rate, std::uint64_t seed) const {
    RunConfig c;
    c.mode = mode;
    c.csma = csma;
    c.duration = SimTime{to_micros(duration_s * 1e6, "sim.duration_s")};
    c.warmup_fraction = warmup_fraction;
    c.rate = packets_per_second(rate);
    c.seed = seed;
    c.queue_cap = queue_cap;
    c.tsch_tx_duration = SimTime{tsch_tx_us};
    c.window_jitter = SimTime{window_jitter_us};
    return c;
}

void Scenario::validate() const {
    if (name.empty()) throw ValidationError("name", "must not be empty");
    if (name.find_first_of(",\"\n\r/\\") != std::string::npos)
        throw ValidationError("name", "must not contain commas, quotes, slashes or newlines");
    if (modes.empty()) throw ValidationError("modes", "must list at least one mode");
    if (has_duplicates(modes)) throw ValidationError("modes", "duplicate mode");

    if (node_counts.empty()) throw ValidationError("topology.node_counts", "must not be empty");
    for (auto n : node_counts)
        if (n < 2) throw ValidationError("topology.node_counts", "every network needs at least 2 nodes");
    if (has_duplicates(node_counts)) throw ValidationError("topology.node_counts", "duplicate entry");
    if (!(area_side > 0.0) || !std::isfinite(area_side))
        throw ValidationError("topology.area_side", "must be positive");
    if (radius.has_value() == !target_hidden.empty())
        throw ValidationError("topology.radius",
                              "set exactly one of topology.radius and topology.target_hidden");
    if (radius && (!(*radius > 0.0) || !std::isfinite(*radius)))
        throw ValidationError("topology.radius", "must be positive");
    for (double t : target_hidden)
        if (!(t >= 0.0 && t < 1.0)) throw ValidationError("topology.target_hidden", "targets must lie in [0, 1)");
    if (has_duplicates(target_hidden)) throw ValidationError("topology.target_hidden", "duplicate entry");
    if (!(hidden_tolerance > 0.0 && hidden_tolerance < 1.0))
        throw ValidationError("topology.hidden_tolerance", "must lie in (0, 1)");

    if (rates.empty()) throw ValidationError("traffic.rates", "must not be empty");
    for (double r : rates)
        if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("traffic.rates", "rates must be positive");
    if (has_duplicates(rates)) throw ValidationError("traffic.rates", "duplicate entry");
    if (!(rate_unit_s > 0.0) || !std::isfinite(rate_unit_s))
        throw ValidationError("traffic.rate_unit_s", "must be positive");

    if (!(duration_s > 0.0)) throw ValidationError("sim.duration_s", "must be positive");
    to_micros(duration_s * 1e6, "sim.duration_s");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
        throw ValidationError("sim.warmup_fraction", "must lie in [0, 1)");
    if (seeds.empty()) throw ValidationError("sim.seeds", "must not be empty");
    if (has_duplicates(seeds)) throw ValidationError("sim.seeds", "duplicate seed");
    if (queue_cap < 1) throw ValidationError("sim.queue_cap", "must be at least 1");

    try {
        csma.validate();
    } catch (const Error& e) {
        throw ValidationError("csma", e.what());
    }

    if (!(slot_ms > 0.0)) throw ValidationError("tsch.slot_ms", "must be positive");
    const auto slot_us = to_micros(slot_ms * 1000.0, "tsch.slot_ms");
    if (slotframe_len < 0) throw ValidationError("tsch.slotframe_len", "must be >= 0 (0 = automatic)");
    if (channels < 1) throw ValidationError("tsch.channels", "must be at least 1");
    if (reserved_slots < 0) throw ValidationError("tsch.reserved_slots", "must be >= 0");
    if (slotframe_len > 0 && slotframe_len <= reserved_slots)
        throw ValidationError("tsch.slotframe_len", "must exceed tsch.reserved_slots");
    for (auto n : node_counts)
        if (slotframe(n).usable_slots() < 1)
            throw ValidationError("tsch.reserved_slots", "leaves no usable slot");
    if (tsch_tx_us <= 0 || tsch_tx_us > slot_us)
        throw ValidationError("tsch.tx_duration_us", "must be positive and fit in one slot");

    if (!(margin > 0.0) || !std::isfinite(margin)) throw ValidationError("hybrid.margin", "must be positive");
    if (window_jitter_us < 0 || window_jitter_us >= slot_us)
        throw ValidationError("hybrid.window_jitter_us", "must lie in [0, slot duration)");

    if (cdf_rate && std::find(rates.begin(), rates.end(), *cdf_rate) == rates.end())
        throw ValidationError("output.cdf_rate", "must be one of traffic.rates");
}

Scenario parse_scenario(std::string_view text, std::string_view source) {
    toml::table table;
    try {
        table = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << source << ':' << e.source().begin.line << ':' << e.source().begin.column << ": "
            << e.description();
        throw ParseError(msg.str());
    }
    if (table.empty()) throw ParseError(std::string(source) + ": scenario is empty");
    std::map<std::string, const toml::node*> values;
    flatten(table, "", values);
    return from_reader(Reader(std::move(values)));
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string() + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.string());
}

nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json modes = nlohmann::json::array();
    for (auto m : s.modes) modes.push_back(std::string(to_string(m)));
    nlohmann::json doc;
    doc["name"] = s.name;
    doc["modes"] = modes;
    doc["topology"] = {
        {"layout", std::string(to_string(s.layout))},
        {"node_counts", s.node_counts},
        {"area_side", s.area_side},
        {"radius", s.radius ? nlohmann::json(*s.radius) : nlohmann::json(nullptr)},
        {"target_hidden", s.target_hidden},
        {"hidden_tolerance", s.hidden_tolerance},
        {"hnp_links", std::string(to_string(s.hnp_links))},
        {"hnp_formula", std::string(to_string(s.hnp_formula))},
    };
    doc["traffic"] = {{"rates", s.rates}, {"rate_unit_s", s.rate_unit_s}};
    doc["sim"] = {{"duration_s", s.duration_s},
                  {"warmup_fraction", s.warmup_fraction},
                  {"seeds", s.seeds},
                  {"queue_cap", s.queue_cap}};
    doc["csma"] = {{"c_nb", s.csma.c_nb},
                   {"c_be", s.csma.c_be},
                   {"max_attempts", s.csma.max_attempts},
                   {"window_exponent_cap", s.csma.window_exponent_cap},
                   {"txn_duration_us", s.csma.txn_duration.count()},
                   {"unit_backoff_us", s.csma.unit_backoff.count()},
                   {"initial_backoff", s.csma.initial_backoff}};
    doc["tsch"] = {{"slot_ms", s.slot_ms},
                   {"slotframe_len", s.slotframe_len},
                   {"channels", s.channels},
                   {"reserved_slots", s.reserved_slots},
                   {"tx_duration_us", s.tsch_tx_us}};
    doc["hybrid"] = {{"margin", s.margin}, {"window_jitter_us", s.window_jitter_us}};
    doc["output"] = {{"cdf_rate", s.cdf_rate ? nlohmann::json(*s.cdf_rate) : nlohmann::json(nullptr)}};
    return doc;
}

Scenario scenario_from_json(const nlohmann::json& doc) {
    try {
        Scenario s;
        s.name = doc.at("name").get<std::string>();
        s.modes.clear();
        for (const auto& m : doc.at("modes")) s.modes.push_back(parse_mac_mode(m.get<std::string>()));
        const auto& t = doc.at("topology");
        s.layout = parse_layout(t.at("layout").get<std::string>());
        s.node_counts = t.at("node_counts").get<std::vector<std::size_t>>();
        s.area_side = t.at("area_side").get<double>();
        if (!t.at("radius").is_null()) s.radius = t.at("radius").get<double>();
        s.target_hidden = t.at("target_hidden").get<std::vector<double>>();
        s.hidden_tolerance = t.at("hidden_tolerance").get<double>();
        s.hnp_links = parse_link_set(t.at("hnp_links").get<std::string>());
        s.hnp_formula = parse_hnp_formula(t.at("hnp_formula").get<std::string>());
        const auto& tr = doc.at("traffic");
        s.rates = tr.at("rates").get<std::vector<double>>();
        s.rate_unit_s = tr.at("rate_unit_s").get<double>();
        const auto& sim = doc.at("sim");
        s.duration_s = sim.at("duration_s").get<double>();
        s.warmup_fraction = sim.at("warmup_fraction").get<double>();
        s.seeds = sim.at("seeds").get<std::vector<std::uint64_t>>();
        s.queue_cap = sim.at("queue_cap").get<std::size_t>();
        const auto& c = doc.at("csma");
        s.csma.c_nb = c.at("c_nb").get<int>();
        s.csma.c_be = c.at("c_be").get<int>();
        s.csma.max_attempts = c.at("max_attempts").get<int>();
        s.csma.window_exponent_cap = c.at("window_exponent_cap").get<int>();
        s.csma.txn_duration = SimTime{c.at("txn_duration_us").get<std::int64_t>()};
        s.csma.unit_backoff = SimTime{c.at("unit_backoff_us").get<std::int64_t>()};
        s.csma.initial_backoff = c.at("initial_backoff").get<bool>();
        const auto& ts = doc.at("tsch");
        s.slot_ms = ts.at("slot_ms").get<double>();
        s.slotframe_len = ts.at("slotframe_len").get<int>();
        s.channels = ts.at("channels").get<int>();
        s.reserved_slots = ts.at("reserved_slots").get<int>();
        s.tsch_tx_us = ts.at("tx_duration_us").get<std::int64_t>();
        const auto& h = doc.at("hybrid");
        s.margin = h.at("margin").get<double>();
        s.window_jitter_us = h.at("window_jitter_us").get<std::int64_t>();
        const auto& o = doc.at("output");
        if (!o.at("cdf_rate").is_null()) s.cdf_rate = o.at("cdf_rate").get<double>();
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario json: ") + e.what());
    }
}

}  // namespace meshmac
