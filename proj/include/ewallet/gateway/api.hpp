#pragma once

#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "ewallet/platform.hpp"
#include "ewallet/ussd/menu.hpp"

namespace ewallet {

struct ApiRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    // Header names are lower-cased.
    std::map<std::string, std::string> headers;
    std::string body;

    std::optional<std::string> header(const std::string& lower_name) const;
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

nlohmann::json to_json(const Transaction& txn);
nlohmann::json to_json(const AccessCode& code);
nlohmann::json to_json(const RedemptionReceipt& receipt);
nlohmann::json to_json(const SmsMessage& message);

// Request routing and JSON mapping, independent of the HTTP library so it
// can be driven in-process by tests.
class Api {
public:
    Api(Platform& platform, UssdMenu& ussd, std::optional<std::string> admin_token = std::nullopt);

    ApiResponse handle(const ApiRequest& request);

private:
    ApiResponse route(const ApiRequest& request);

    Platform& platform_;
    UssdMenu& ussd_;
    std::optional<std::string> admin_token_;
};

}  // namespace ewallet
