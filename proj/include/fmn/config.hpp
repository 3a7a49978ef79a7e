#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "fmn/attack.hpp"

namespace fmn {

inline constexpr const char* kToolkitVersion = "0.3.0";

// Attack configurations are flat JSON objects:
//   loss, alpha0, iterations, gamma0, gamma_min,
//   optimizer.kind, optimizer.<param>..., scheduler.kind, scheduler.<param>...
// Only the parameters of the selected optimizer / scheduler are written.
// Keys under "meta." are carried along and ignored on load.
nlohmann::ordered_json attack_config_to_json(const AttackConfig& cfg);
AttackConfig attack_config_from_json(const nlohmann::ordered_json& doc);

AttackConfig attack_config_from_text(const std::string& text);
AttackConfig load_attack_config(const std::filesystem::path& path);

/// Writes `cfg` plus the given meta.* entries as an indented document.
void save_attack_config(const AttackConfig& cfg, const std::filesystem::path& path,
                        const nlohmann::ordered_json& meta = nlohmann::ordered_json::object());

/// One-line "key=value;..." rendering used in CSV comment headers.
std::string attack_config_summary(const AttackConfig& cfg);

}  // namespace fmn
