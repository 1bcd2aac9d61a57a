#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace cuflinks::cli {

namespace fs = std::filesystem;

/// Settings shared by every command. `resolver` is either an http(s) base URL
/// of a registry service or the path of a local minid log.
struct CliConfig {
  std::string resolver;
  std::optional<std::string> token;
  std::string algorithms = "sha256";
  unsigned parallelism = 4;
  fs::path ledger;
  fs::path dictionary;
  std::string actor;

  bool resolver_is_url() const;
};

/// Flat `key = "value"` lines; `#` starts a comment. Throws ParseError.
std::map<std::string, std::string> parse_config_text(std::string_view text, std::string_view file);

using Environment = std::function<std::optional<std::string>(const std::string&)>;
Environment process_environment();

/// File, then CUFLINKS_<KEY> variables, then `flags`; later wins. Relative
/// paths in the file are taken from the file's directory, the rest from
/// `cwd`. Throws ConfigError for unknown keys or bad values.
CliConfig load_config(const std::optional<fs::path>& file, const Environment& env,
                      const std::map<std::string, std::string>& flags, const fs::path& cwd);

}  // namespace cuflinks::cli
