#include "oncotwin/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "text.hpp"

namespace oncotwin {

namespace {

constexpr BackendKind kKinds[] = {BackendKind::local, BackendKind::cloud, BackendKind::mock};

void flatten(const Json& j, const std::string& prefix, std::map<std::string, Json>& out) {
    for (const auto& [k, v] : j.items()) {
        std::string key = prefix.empty() ? k : prefix + "." + k;
        // The eligibility block is one value: it has its own decoder.
        if (v.is_object() && key != "eligibility") {
            flatten(v, key, out);
        } else {
            out[key] = v;
        }
    }
}

std::string env_name(const std::string& key) {
    std::string out = "ONCOTWIN_";
    for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

/// Environment values are strings; coerce them to the JSON type of the key.
Json env_value(const std::string& key, const std::string& raw) {
    static const std::vector<std::string> ints = {"ocr.timeout_seconds", "server.port",
                                                  "recommend.stale_after_months"};
    bool is_int = std::find(ints.begin(), ints.end(), key) != ints.end() ||
                  key.ends_with(".retries") || key.ends_with(".timeout_ms") ||
                  key.ends_with(".max_context_chars");
    try {
        if (is_int) return std::stoll(raw);
        if (key.ends_with(".max_requests_per_second")) return std::stod(raw);
    } catch (const std::logic_error&) {
        throw ConfigError("environment " + env_name(key) + " must be a number, got '" + raw + "'");
    }
    if (key == "recommend.allow_off_label") {
        auto v = text::lower(raw);
        if (v == "1" || v == "true" || v == "yes") return true;
        if (v == "0" || v == "false" || v == "no") return false;
        throw ConfigError("environment " + env_name(key) + " must be true or false");
    }
    if (key == "eligibility") {
        try {
            return Json::parse(raw);
        } catch (const Json::exception&) {
            throw ConfigError("environment " + env_name(key) + " must be a JSON object");
        }
    }
    return raw;
}

template <typename T>
T as(const std::string& key, const Json& v) {
    try {
        return v.get<T>();
    } catch (const Json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

void apply(Config& c, const std::string& key, const Json& v) {
    if (key == "store.path") {
        c.store_path = as<std::string>(key, v);
    } else if (key == "ocr.command") {
        c.ocr_command = as<std::string>(key, v);
    } else if (key == "ocr.timeout_seconds") {
        c.ocr_timeout_seconds = as<int>(key, v);
        if (c.ocr_timeout_seconds <= 0) throw ConfigError("ocr.timeout_seconds must be positive");
    } else if (key == "server.bind") {
        c.server_bind = as<std::string>(key, v);
    } else if (key == "server.port") {
        c.server_port = as<int>(key, v);
        if (c.server_port < 0 || c.server_port > 65535) throw ConfigError("server.port out of range");
    } else if (key == "kb.path") {
        c.kb_path = as<std::string>(key, v);
    } else if (key == "prompts.dir") {
        c.prompt_dir = as<std::string>(key, v);
    } else if (key == "recommend.region") {
        c.recommend.region = v.is_null() ? std::nullopt : std::optional(as<std::string>(key, v));
    } else if (key == "recommend.allow_off_label") {
        c.recommend.allow_off_label = as<bool>(key, v);
    } else if (key == "recommend.as_of") {
        c.recommend.as_of = v.is_null() ? std::nullopt : std::optional(as<std::string>(key, v));
    } else if (key == "recommend.stale_after_months") {
        c.recommend.stale_after_months = as<int>(key, v);
    } else if (key == "eligibility") {
        try {
            c.eligibility = spec_from_json(v);
        } catch (const DomainError& e) {
            throw ConfigError(std::string("eligibility: ") + e.what());
        }
    } else if (key.starts_with("backends.")) {
        auto rest = key.substr(9);
        auto dot = rest.find('.');
        if (dot == std::string::npos) throw ConfigError("unknown config key '" + key + "'");
        auto kind = backend_kind_from_string(rest.substr(0, dot));
        auto& spec = c.backends[kind];
        auto field = rest.substr(dot + 1);
        if (field == "endpoint") {
            spec.endpoint = as<std::string>(key, v);
        } else if (field == "model") {
            spec.model_name = as<std::string>(key, v);
        } else if (field == "privacy_tier") {
            spec.privacy_tier = privacy_tier_from_string(as<std::string>(key, v));
        } else if (field == "max_context_chars") {
            spec.max_context_chars = as<std::size_t>(key, v);
        } else if (field == "retries") {
            spec.retries = as<int>(key, v);
        } else if (field == "timeout_ms") {
            spec.timeout = std::chrono::milliseconds(as<long long>(key, v));
        } else if (field == "max_requests_per_second") {
            spec.max_requests_per_second = as<double>(key, v);
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

}  // namespace

const LlmBackendSpec& Config::backend(BackendKind kind) const {
    auto it = backends.find(kind);
    if (it == backends.end()) throw ConfigError("no backend configured for " + std::string(to_string(kind)));
    return it->second;
}

Config default_config() {
    Config c;
    const std::filesystem::path data = ONCOTWIN_DATA_DIR;
    c.kb_path = data / "kb" / "default_kb.jsonl";
    c.prompt_dir = data / "prompts";
    for (auto kind : kKinds) {
        LlmBackendSpec s;
        s.kind = kind;
        c.backends[kind] = s;
    }
    c.backends[BackendKind::local].endpoint = "http://127.0.0.1:8000/v1/extract";
    c.backends[BackendKind::local].model_name = "local-model";
    c.backends[BackendKind::cloud].privacy_tier = PrivacyTier::public_only;
    c.backends[BackendKind::cloud].model_name = "cloud-model";
    c.backends[BackendKind::mock].endpoint = (data / "mock_corpus" / "replies").string();
    c.backends[BackendKind::mock].model_name = "mock";
    return c;
}

std::optional<std::string> process_env(const std::string& name) {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k = {"store.path",       "ocr.command",         "ocr.timeout_seconds",
                                      "server.bind",      "server.port",         "kb.path",
                                      "prompts.dir",      "recommend.region",    "recommend.allow_off_label",
                                      "recommend.as_of",  "recommend.stale_after_months", "eligibility"};
        for (auto kind : kKinds) {
            for (const char* f : {"endpoint", "model", "privacy_tier", "max_context_chars", "retries",
                                  "timeout_ms", "max_requests_per_second"}) {
                k.push_back("backends." + std::string(to_string(kind)) + "." + f);
            }
        }
        return k;
    }();
    return keys;
}

Config config_from_json(const Json& doc, const EnvLookup& env) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    Config c = default_config();
    std::map<std::string, Json> flat;
    flatten(doc, "", flat);
    for (const auto& [k, v] : flat) apply(c, k, v);
    for (const auto& key : config_keys()) {
        if (auto raw = env(env_name(key))) apply(c, key, env_value(key, *raw));
    }
    return c;
}

Config load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
    Json doc = Json::object();
    if (file) {
        std::ifstream in(*file);
        if (!in) throw ConfigError("cannot read config file " + file->string());
        try {
            doc = Json::parse(in);
        } catch (const Json::exception& e) {
            throw ConfigError(file->string() + ": " + e.what());
        }
    }
    return config_from_json(doc, env);
}

Json config_to_json(const Config& c) {
    Json backends = Json::object();
    for (const auto& [kind, s] : c.backends) {
        backends[std::string(to_string(kind))] = {
            {"endpoint", s.endpoint},
            {"model", s.model_name},
            {"privacy_tier", std::string(to_string(s.privacy_tier))},
            {"max_context_chars", s.max_context_chars},
            {"retries", s.retries},
            {"timeout_ms", s.timeout.count()},
            {"max_requests_per_second", s.max_requests_per_second}};
    }
    auto opt = [](const std::optional<std::string>& v) { return v ? Json(*v) : Json(nullptr); };
    return Json{{"store", {{"path", c.store_path.string()}}},
                {"ocr", {{"command", c.ocr_command}, {"timeout_seconds", c.ocr_timeout_seconds}}},
                {"backends", backends},
                {"server", {{"bind", c.server_bind}, {"port", c.server_port}}},
                {"kb", {{"path", c.kb_path.string()}}},
                {"prompts", {{"dir", c.prompt_dir.string()}}},
                {"recommend", {{"region", opt(c.recommend.region)},
                               {"allow_off_label", c.recommend.allow_off_label},
                               {"as_of", opt(c.recommend.as_of)},
                               {"stale_after_months", c.recommend.stale_after_months}}},
                {"eligibility", spec_to_json(c.eligibility)}};
}

}  // namespace oncotwin
