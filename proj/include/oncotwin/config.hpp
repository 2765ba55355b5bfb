/**
 * @file config.hpp
 * @brief Runtime configuration: a JSON file plus ONCOTWIN_* environment
 *        overrides.
 *
 * Keys may be nested objects or dotted names ({"store": {"path": ...}} and
 * {"store.path": ...} are equivalent). The environment variable for a key is
 * ONCOTWIN_ followed by the key upper-cased with dots as underscores, e.g.
 * ONCOTWIN_STORE_PATH or ONCOTWIN_BACKENDS_LOCAL_ENDPOINT.
 */
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oncotwin/codec.hpp"
#include "oncotwin/extraction.hpp"
#include "oncotwin/matcher.hpp"
#include "oncotwin/recommender.hpp"

namespace oncotwin {

struct Config {
    std::filesystem::path store_path = "oncotwin-store";
    std::string ocr_command;  // empty: scanned media cannot be ingested
    int ocr_timeout_seconds = 120;
    std::map<BackendKind, LlmBackendSpec> backends;
    std::string server_bind = "127.0.0.1";
    int server_port = 8080;
    std::filesystem::path kb_path;
    std::filesystem::path prompt_dir;
    RecommendContext recommend;
    EligibilitySpec eligibility;

    const LlmBackendSpec& backend(BackendKind kind) const;
};

/// Bundled defaults: mock backend answering from the shipped replies, the
/// shipped knowledge file and prompts, loopback bind.
Config default_config();

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Applies `file` (when given) and then the environment to the defaults.
/// Unknown keys and ill-typed values throw ConfigError naming the key.
Config load_config(const std::optional<std::filesystem::path>& file,
                   const EnvLookup& env = process_env);

/// Same, from an already parsed document.
Config config_from_json(const Json& doc, const EnvLookup& env = process_env);

/// Every recognized key, in a stable order.
const std::vector<std::string>& config_keys();

Json config_to_json(const Config& c);

}  // namespace oncotwin
