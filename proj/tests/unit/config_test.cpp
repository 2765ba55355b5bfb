#include <gtest/gtest.h>

#include <fstream>

#include "oncotwin/config.hpp"
#include "test_support.hpp"

using namespace oncotwin;
using oncotwin::testing::TempDir;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
    return [vars](const std::string& name) -> std::optional<std::string> {
        auto it = vars.find(name);
        if (it == vars.end()) return std::nullopt;
        return it->second;
    };
}

const EnvLookup no_env = env_of({});

}  // namespace

TEST(Config, Defaults) {
    auto c = load_config(std::nullopt, no_env);
    EXPECT_EQ(c.server_bind, "127.0.0.1");
    EXPECT_TRUE(std::filesystem::exists(c.kb_path));
    EXPECT_TRUE(std::filesystem::exists(c.prompt_dir));
    EXPECT_EQ(c.backend(BackendKind::cloud).privacy_tier, PrivacyTier::public_only);
    EXPECT_EQ(c.backend(BackendKind::mock).kind, BackendKind::mock);
    EXPECT_EQ(c.eligibility, EligibilitySpec{});
}

TEST(Config, NestedAndDottedKeysAgree) {
    Json nested = {{"store", {{"path", "/tmp/s"}}}, {"backends", {{"local", {{"endpoint", "http://x"}}}}}};
    Json dotted = {{"store.path", "/tmp/s"}, {"backends.local.endpoint", "http://x"}};
    auto a = config_from_json(nested, no_env);
    auto b = config_from_json(dotted, no_env);
    EXPECT_EQ(a.store_path, "/tmp/s");
    EXPECT_EQ(a.backend(BackendKind::local).endpoint, "http://x");
    EXPECT_EQ(config_to_json(a), config_to_json(b));
}

TEST(Config, FileAndEnvironmentOverrides) {
    TempDir dir;
    auto path = dir.path() / "cfg.json";
    std::ofstream(path) << R"({"server": {"bind": "0.0.0.0", "port": 9000}, "ocr": {"command": "cat {input}"},
                             "eligibility": {"min_cps": 50}, "recommend": {"region": "Bavaria"}})";
    auto c = load_config(path, env_of({{"ONCOTWIN_SERVER_PORT", "9100"},
                                       {"ONCOTWIN_BACKENDS_LOCAL_PRIVACY_TIER", "public_only"},
                                       {"ONCOTWIN_OCR_TIMEOUT_SECONDS", "5"},
                                       {"ONCOTWIN_RECOMMEND_ALLOW_OFF_LABEL", "true"}}));
    EXPECT_EQ(c.server_bind, "0.0.0.0");
    EXPECT_EQ(c.server_port, 9100);
    EXPECT_EQ(c.ocr_command, "cat {input}");
    EXPECT_EQ(c.ocr_timeout_seconds, 5);
    EXPECT_EQ(c.backend(BackendKind::local).privacy_tier, PrivacyTier::public_only);
    EXPECT_DOUBLE_EQ(c.eligibility.min_cps, 50);
    EXPECT_EQ(c.recommend.region, "Bavaria");
    EXPECT_TRUE(c.recommend.allow_off_label);
}

TEST(Config, Errors) {
    EXPECT_THROW(config_from_json({{"store.pth", "x"}}, no_env), ConfigError);
    EXPECT_THROW(config_from_json({{"server", {{"port", "eighty"}}}}, no_env), ConfigError);
    EXPECT_THROW(config_from_json({{"backends.quantum.endpoint", "x"}}, no_env), ConfigError);
    EXPECT_THROW(config_from_json({{"backends.local.privacy_tier", "open"}}, no_env), ConfigError);
    EXPECT_THROW(config_from_json({{"eligibility", {{"min_cps", -1}}}}, no_env), ConfigError);
    EXPECT_THROW(config_from_json(Json::object(), env_of({{"ONCOTWIN_SERVER_PORT", "x"}})), ConfigError);
    EXPECT_THROW(load_config(std::filesystem::path("/nonexistent.json"), no_env), ConfigError);
    EXPECT_THROW(config_from_json(Json::array(), no_env), ConfigError);
}

TEST(Config, EveryKeyHasAnEnvironmentName) {
    for (const auto& key : config_keys()) {
        EXPECT_EQ(key.find(' '), std::string::npos);
    }
    EXPECT_NE(std::find(config_keys().begin(), config_keys().end(), "backends.cloud.endpoint"), config_keys().end());
}
