#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <thread>

#include "ewallet/gateway/api.hpp"

namespace httplib {
class Server;
}

namespace ewallet {

// Thin HTTP transport over Api, plus a housekeeping thread that expires
// access codes and idle USSD sessions.
class HttpServer {
public:
    HttpServer(Api& api, Platform& platform, UssdMenu& ussd,
               std::chrono::milliseconds housekeeping_interval = std::chrono::seconds(1));
    ~HttpServer();

    // Binds and returns the actual port (useful with port 0).
    int bind(const std::string& host, int port);
    // Blocks until stop().
    void serve();
    void stop();

private:
    Api& api_;
    Platform& platform_;
    UssdMenu& ussd_;
    std::chrono::milliseconds interval_;
    std::unique_ptr<httplib::Server> server_;
    std::atomic<bool> running_{false};
    std::thread housekeeping_;
};

}  // namespace ewallet
