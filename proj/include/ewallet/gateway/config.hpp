#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "ewallet/platform.hpp"
#include "ewallet/ussd/menu.hpp"

namespace ewallet {

// Service configuration. Precedence, lowest first: built-in defaults, JSON
// config file, EWALLET_* environment variables, command-line flags.
struct ServiceConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080;
    std::optional<std::filesystem::path> journal;
    bool fsync = true;
    std::optional<std::filesystem::path> seed;
    std::string currency = "ZAR";
    std::string country_code = "27";
    std::string fee_preset = "default";
    std::int64_t access_code_ttl_seconds = 72 * 3600;
    std::int64_t ussd_session_ttl_seconds = 120;
    std::int64_t web_session_ttl_seconds = 15 * 60;
    int lock_threshold = 3;
    bool auto_credit_parked = true;
    std::int64_t confirm_threshold_minor = 0;
    std::string service_code = "#555*";
    std::optional<std::string> admin_token;
    // Reproducible secrets for scripted runs; never set in production.
    std::optional<std::uint64_t> random_seed;
};

// Applies a JSON object on top of cfg. Unknown keys and wrong types are
// BAD_REQUEST naming the key.
void apply_config_json(ServiceConfig& cfg, const nlohmann::json& j);
void apply_config_file(ServiceConfig& cfg, const std::filesystem::path& path);
// getenv is injectable for tests.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
void apply_config_env(ServiceConfig& cfg, const EnvLookup& env);
EnvLookup process_env();

// "host:port"; port 0 asks the OS for a free one.
void set_listen(ServiceConfig& cfg, const std::string& listen);

// Throws BAD_REQUEST listing every invalid field.
void validate(const ServiceConfig& cfg);

PlatformOptions platform_options(const ServiceConfig& cfg);
UssdOptions ussd_options(const ServiceConfig& cfg);

}  // namespace ewallet
