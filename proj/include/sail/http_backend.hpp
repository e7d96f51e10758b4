#pragma once

#include <chrono>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

// cpp-httplib; header-only, vendored
#include <httplib.h>

#include "sail/backend.hpp"
#include "sail/common.hpp"

namespace sail {

/// OpenAI-style HTTP transport with bearer auth and exponential backoff.
/// Retries cover connect failures and 5xx responses only; 4xx and payload
/// problems surface immediately.
class HttpTransport final : public Transport {
public:
    HttpTransport(std::string base_url, std::string api_key, int retry_limit,
                  int retry_backoff_ms)
        : api_key_(std::move(api_key)),
          retry_limit_(retry_limit),
          backoff_ms_(retry_backoff_ms) {
        // split "http://host:port/v1" into client origin and path prefix
        const auto scheme_end = base_url.find("://");
        const auto path_start =
            base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
        if (path_start == std::string::npos) {
            base_url_ = base_url;
        } else {
            base_url_ = base_url.substr(0, path_start);
            prefix_ = base_url.substr(path_start);
            while (!prefix_.empty() && prefix_.back() == '/') {
                prefix_.pop_back();
            }
        }
    }

    nlohmann::json post(const std::string& path, const nlohmann::json& body) override {
        const std::string payload = body.dump();
        std::string last_error;
        for (int attempt = 0; attempt <= retry_limit_; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(backoff_ms_ << (attempt - 1)));
            }
            httplib::Client client(base_url_);
            client.set_connection_timeout(30);
            client.set_read_timeout(300);
            httplib::Headers headers;
            if (!api_key_.empty()) {
                headers.emplace("Authorization", "Bearer " + api_key_);
            }
            auto res = client.Post(prefix_ + path, headers, payload, "application/json");
            if (!res) {
                last_error = "connection failure: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_error = "server error " + std::to_string(res->status);
                continue;
            }
            if (res->status >= 400) {
                throw ProtocolError("backend rejected request (" + std::to_string(res->status) +
                                    "): " + res->body);
            }
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw ProtocolError(std::string("backend returned non-JSON body: ") + e.what());
            }
        }
        throw TransportError("POST " + path + " failed after " + std::to_string(retry_limit_ + 1) +
                             " attempts: " + last_error);
    }

private:
    std::string base_url_;
    std::string api_key_;
    std::string prefix_;
    int retry_limit_;
    int backoff_ms_;
};

}  // namespace sail
