#pragma once

#include <span>
#include <string_view>

namespace meshmac {

struct Preset {
    std::string_view name;
    std::string_view toml;
};

/// Scenario files from presets/, compiled in, sorted by name.
std::span<const Preset> builtin_presets();
const Preset* find_preset(std::string_view name);

}  // namespace meshmac
