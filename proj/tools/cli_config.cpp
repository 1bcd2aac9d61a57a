#include "cli_config.hpp"

#include <cctype>
#include <cstdlib>
#include <set>

#include "cuflinks/digest.hpp"
#include "cuflinks/error.hpp"
#include "cuflinks/fsutil.hpp"

namespace cuflinks::cli {

namespace {

const std::set<std::string> kKeys = {"resolver", "token", "algorithms", "parallelism", "ledger", "dictionary", "actor"};
const std::set<std::string> kPathKeys = {"ledger", "dictionary"};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool is_url(std::string_view s) { return s.starts_with("http://") || s.starts_with("https://"); }

}  // namespace

bool CliConfig::resolver_is_url() const { return is_url(resolver); }

std::map<std::string, std::string> parse_config_text(std::string_view text, std::string_view file) {
  std::map<std::string, std::string> out;
  std::size_t n = 0;
  while (!text.empty()) {
    ++n;
    auto nl = text.find('\n');
    std::string line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(std::string(file), n, "expected key = \"value\"");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ParseError(std::string(file), n, "empty key");
    if (value.size() < 2 || value.front() != '"' || value.back() != '"')
      throw ParseError(std::string(file), n, "value for '" + key + "' must be double-quoted");
    value = value.substr(1, value.size() - 2);
    if (value.find('"') != std::string::npos) throw ParseError(std::string(file), n, "stray quote in value");
    out[key] = value;
  }
  return out;
}

Environment process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

CliConfig load_config(const std::optional<fs::path>& file, const Environment& env,
                      const std::map<std::string, std::string>& flags, const fs::path& cwd) {
  // key -> (value, base directory for relative paths)
  std::map<std::string, std::pair<std::string, fs::path>> merged;
  if (file) {
    fs::path abs = file->is_absolute() ? *file : cwd / *file;
    for (auto& [k, v] : parse_config_text(read_file(abs), abs.string())) {
      if (!kKeys.count(k)) throw ConfigError("unknown key '" + k + "' in " + abs.string());
      merged[k] = {v, abs.parent_path()};
    }
  }
  for (const auto& k : kKeys) {
    std::string name = "CUFLINKS_";
    for (char c : k) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (auto v = env(name)) merged[k] = {*v, cwd};
  }
  for (const auto& [k, v] : flags) {
    if (!kKeys.count(k)) throw ConfigError("unknown setting '" + k + "'");
    merged[k] = {v, cwd};
  }

  auto absolute = [](const std::string& v, const fs::path& base) {
    fs::path p(v);
    return (p.is_absolute() ? p : base / p).lexically_normal();
  };

  CliConfig c;
  for (const auto& [k, entry] : merged) {
    const auto& [v, base] = entry;
    if (k == "resolver") {
      c.resolver = v.empty() || is_url(v) ? v : absolute(v, base).string();
    } else if (k == "token") {
      if (!v.empty()) c.token = v;
    } else if (k == "algorithms") {
      try {
        parse_algorithm_list(v);
      } catch (const Error& e) {
        throw ConfigError(std::string("algorithms: ") + e.what());
      }
      c.algorithms = v;
    } else if (k == "parallelism") {
      try {
        std::size_t used = 0;
        long n = std::stol(v, &used);
        if (used != v.size() || n < 1 || n > 256) throw std::invalid_argument(v);
        c.parallelism = static_cast<unsigned>(n);
      } catch (const std::logic_error&) {
        throw ConfigError("parallelism must be an integer in 1..256, got '" + v + "'");
      }
    } else if (k == "actor") {
      c.actor = v;
    } else if (kPathKeys.count(k)) {
      (k == "ledger" ? c.ledger : c.dictionary) = v.empty() ? fs::path() : absolute(v, base);
    }
  }
  if (c.actor.empty()) {
    auto user = env("USER");
    c.actor = user && !user->empty() ? *user : "anonymous";
  }
  return c;
}

}  // namespace cuflinks::cli
