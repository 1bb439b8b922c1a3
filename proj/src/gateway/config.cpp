#include "ewallet/gateway/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>

#include "ewallet/engine/fees.hpp"
#include "ewallet/error.hpp"
#include "ewallet/money.hpp"
#include "ewallet/text.hpp"

namespace ewallet {

namespace {

using json = nlohmann::json;

// Config values as text, so the env layer and the JSON layer share parsing.
bool parse_bool(const std::string& key, const std::string& v) {
    const auto f = fold_case(v);
    if (f == "1" || f == "true" || f == "yes") return true;
    if (f == "0" || f == "false" || f == "no") return false;
    throw Error(ErrorCode::BadRequest, key + ": expected a boolean");
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const auto n = std::stoll(v, &used);
        if (used == v.size()) return n;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::BadRequest, key + ": expected an integer");
}

void set_field(ServiceConfig& cfg, const std::string& key, const std::string& v) {
    if (key == "listen") set_listen(cfg, v);
    else if (key == "journal") cfg.journal = v.empty() ? std::nullopt : std::optional<std::filesystem::path>(v);
    else if (key == "fsync") cfg.fsync = parse_bool(key, v);
    else if (key == "seed") cfg.seed = v.empty() ? std::nullopt : std::optional<std::filesystem::path>(v);
    else if (key == "currency") cfg.currency = v;
    else if (key == "country_code") cfg.country_code = v;
    else if (key == "fee_preset") cfg.fee_preset = v;
    else if (key == "access_code_ttl_seconds") cfg.access_code_ttl_seconds = parse_int(key, v);
    else if (key == "ussd_session_ttl_seconds") cfg.ussd_session_ttl_seconds = parse_int(key, v);
    else if (key == "web_session_ttl_seconds") cfg.web_session_ttl_seconds = parse_int(key, v);
    else if (key == "lock_threshold") cfg.lock_threshold = static_cast<int>(parse_int(key, v));
    else if (key == "auto_credit_parked") cfg.auto_credit_parked = parse_bool(key, v);
    else if (key == "confirm_threshold_minor") cfg.confirm_threshold_minor = parse_int(key, v);
    else if (key == "service_code") cfg.service_code = v;
    else if (key == "admin_token") cfg.admin_token = v.empty() ? std::nullopt : std::optional<std::string>(v);
    else if (key == "random_seed") cfg.random_seed = static_cast<std::uint64_t>(parse_int(key, v));
    else throw Error(ErrorCode::BadRequest, "unknown config key: " + key);
}

constexpr const char* kKeys[] = {
    "listen", "journal", "fsync", "seed", "currency", "country_code", "fee_preset", "access_code_ttl_seconds",
    "ussd_session_ttl_seconds", "web_session_ttl_seconds", "lock_threshold", "auto_credit_parked",
    "confirm_threshold_minor", "service_code", "admin_token", "random_seed",
};

}  // namespace

void set_listen(ServiceConfig& cfg, const std::string& listen) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos || colon == 0) throw Error(ErrorCode::BadRequest, "listen: expected host:port");
    cfg.listen_host = listen.substr(0, colon);
    cfg.listen_port = static_cast<int>(parse_int("listen", listen.substr(colon + 1)));
}

void apply_config_json(ServiceConfig& cfg, const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::BadRequest, "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        std::string text;
        if (value.is_string()) {
            text = value.get<std::string>();
        } else if (value.is_boolean()) {
            text = value.get<bool>() ? "true" : "false";
        } else if (value.is_number_integer()) {
            text = std::to_string(value.get<std::int64_t>());
        } else if (value.is_null()) {
            text = "";
        } else {
            throw Error(ErrorCode::BadRequest, key + ": unsupported value type");
        }
        set_field(cfg, key, text);
    }
}

void apply_config_file(ServiceConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::BadRequest, "cannot read config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadRequest, "config file " + path.string() + ": " + e.what());
    }
    apply_config_json(cfg, j);
}

void apply_config_env(ServiceConfig& cfg, const EnvLookup& env) {
    for (const char* key : kKeys) {
        std::string name = "EWALLET_";
        for (const char* c = key; *c; ++c) name += static_cast<char>(std::toupper(static_cast<unsigned char>(*c)));
        if (auto v = env(name)) set_field(cfg, key, *v);
    }
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (!v) return std::nullopt;
        return std::string(v);
    };
}

void validate(const ServiceConfig& cfg) {
    std::string problems;
    auto bad = [&](const std::string& p) { problems += (problems.empty() ? "" : "; ") + p; };
    if (cfg.listen_host.empty()) bad("listen: host is empty");
    if (cfg.listen_port < 0 || cfg.listen_port > 65535) bad("listen: port out of range");
    if (!is_currency_code(cfg.currency)) bad("currency: expected a three-letter code");
    if (cfg.country_code.empty() || cfg.country_code.size() > 3 || !is_digits(cfg.country_code)) {
        bad("country_code: expected 1 to 3 digits");
    }
    if (!FeeSchedule::preset(cfg.fee_preset)) bad("fee_preset: unknown preset " + cfg.fee_preset);
    if (cfg.access_code_ttl_seconds <= 0) bad("access_code_ttl_seconds: must be positive");
    if (cfg.ussd_session_ttl_seconds <= 0) bad("ussd_session_ttl_seconds: must be positive");
    if (cfg.web_session_ttl_seconds <= 0) bad("web_session_ttl_seconds: must be positive");
    if (cfg.lock_threshold < 1) bad("lock_threshold: must be at least 1");
    if (cfg.confirm_threshold_minor < 0) bad("confirm_threshold_minor: must not be negative");
    if (cfg.service_code.empty()) bad("service_code: required");
    if (!problems.empty()) throw Error(ErrorCode::BadRequest, "invalid configuration: " + problems);
}

PlatformOptions platform_options(const ServiceConfig& cfg) {
    PlatformOptions o;
    o.currency = cfg.currency;
    o.registry.lock_threshold = cfg.lock_threshold;
    o.registry.web_session_ttl = std::chrono::seconds(cfg.web_session_ttl_seconds);
    o.registry.country_code = cfg.country_code;
    o.engine.fees = *FeeSchedule::preset(cfg.fee_preset);
    o.engine.access_code_ttl = std::chrono::seconds(cfg.access_code_ttl_seconds);
    o.engine.service_code = cfg.service_code;
    o.engine.auto_credit_parked = cfg.auto_credit_parked;
    o.journal_path = cfg.journal;
    o.fsync = cfg.fsync;
    return o;
}

UssdOptions ussd_options(const ServiceConfig& cfg) {
    UssdOptions o;
    o.service_code = cfg.service_code;
    o.session_ttl = std::chrono::seconds(cfg.ussd_session_ttl_seconds);
    o.confirm_threshold_minor = cfg.confirm_threshold_minor;
    return o;
}

}  // namespace ewallet
