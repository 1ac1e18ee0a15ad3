#pragma once

#include "transvqa/core.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace transvqa {

/// Keys accepted in config files and as TRANSVQA_<KEY> environment
/// variables.
const std::vector<std::string>& config_keys();

/// Sets one key from its textual value. Throws on an unknown key or a
/// value that does not parse.
void set_config_value(AttackConfig& config, const std::string& key, const std::string& value);

/// Flat "key = value" lines; '#' starts a comment. Later lines win.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> read_config_file(const std::string& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// defaults <- file <- environment <- flags, then validate().
AttackConfig resolve_config(const std::optional<std::string>& file, const EnvLookup& env,
                            const std::map<std::string, std::string>& flags);

/// Canonical "key=value" lines in config_keys() order; secrets are not
/// part of the config (only the name of the variable holding the key).
std::string canonical_config(const AttackConfig& config);

/// 16 hex digits of FNV-1a over canonical_config.
std::string config_hash(const AttackConfig& config);

}  // namespace transvqa
