#include "ewallet/gateway/server.hpp"

#include <cctype>
#include <httplib.h>

namespace ewallet {

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

HttpServer::HttpServer(Api& api, Platform& platform, UssdMenu& ussd, std::chrono::milliseconds interval)
    : api_(api), platform_(platform), ussd_(ussd), interval_(interval), server_(std::make_unique<httplib::Server>()) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        ApiRequest r;
        r.method = req.method;
        r.path = req.path;
        r.body = req.body;
        for (const auto& [k, v] : req.params) r.query[k] = v;
        for (const auto& [k, v] : req.headers) r.headers[lower(k)] = v;
        const auto out = api_.handle(r);
        res.status = out.status;
        res.set_content(out.body.dump(), "application/json");
    };
    server_->Get(".*", handler);
    server_->Post(".*", handler);
}

HttpServer::~HttpServer() {
    stop();
    if (housekeeping_.joinable()) housekeeping_.join();
}

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return server_->bind_to_any_port(host);
    return server_->bind_to_port(host, port) ? port : -1;
}

void HttpServer::serve() {
    running_ = true;
    housekeeping_ = std::thread([this] {
        while (running_) {
            auto next = std::chrono::steady_clock::now() + interval_;
            while (running_ && std::chrono::steady_clock::now() < next) {
                std::this_thread::sleep_for(std::chrono::milliseconds(20));
            }
            if (!running_) break;
            try {
                platform_.expire_due();
                ussd_.expire_sessions();
            } catch (const std::exception&) {
            }
        }
    });
    server_->listen_after_bind();
    running_ = false;
    if (housekeeping_.joinable()) housekeeping_.join();
}

// Only signals; serve() owns the housekeeping thread and joins it.
void HttpServer::stop() {
    running_ = false;
    if (server_) server_->stop();
}

}  // namespace ewallet
