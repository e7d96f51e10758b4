#pragma once

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "sail/common.hpp"

namespace sail {

enum class BackendKind { chat, embed, rerank };

inline std::string to_string(BackendKind k) {
    switch (k) {
        case BackendKind::chat: return "chat";
        case BackendKind::embed: return "embed";
        case BackendKind::rerank: return "rerank";
    }
    throw Error("unreachable backend kind");
}

struct BackendConfig {
    std::string base_url;   // empty selects the offline mock transport
    std::string api_key;
    BackendKind kind = BackendKind::chat;
    std::string model;
    int max_inflight = 4;
    int retry_limit = 3;
    int retry_backoff_ms = 250;
    std::filesystem::path cache_dir;

    void validate() const {
        if (max_inflight < 1) {
            throw ConfigError("max_inflight must be >= 1");
        }
        if (retry_limit < 0) {
            throw ConfigError("retry_limit must be >= 0");
        }
    }
};

inline std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return (v != nullptr && *v != '\0') ? std::string(v) : fallback;
}

/// One POST to an OpenAI-style endpoint. Implementations: HttpTransport,
/// MockTransport, and test doubles.
class Transport {
public:
    virtual ~Transport() = default;
    virtual nlohmann::json post(const std::string& path, const nlohmann::json& body) = 0;
};

using TransportPtr = std::shared_ptr<Transport>;

}  // namespace sail
