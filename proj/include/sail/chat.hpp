#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sail/common.hpp"

namespace sail {

using json = nlohmann::json;

enum class Role { system, user, assistant };

inline std::string to_string(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    throw Error("unreachable role");
}

inline Role role_from_string(const std::string& s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    throw ValidationError("unknown message role: " + s);
}

struct ChatMessage {
    Role role = Role::user;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

inline ChatMessage system_message(std::string content) { return {Role::system, std::move(content)}; }
inline ChatMessage user_message(std::string content) { return {Role::user, std::move(content)}; }
inline ChatMessage assistant_message(std::string content) { return {Role::assistant, std::move(content)}; }

inline json messages_to_json(const std::vector<ChatMessage>& messages) {
    json arr = json::array();
    for (const auto& m : messages) {
        arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    return arr;
}

inline std::vector<ChatMessage> messages_from_json(const json& arr) {
    std::vector<ChatMessage> out;
    for (const auto& m : arr) {
        out.push_back({role_from_string(m.at("role").get<std::string>()),
                       m.at("content").get<std::string>()});
    }
    return out;
}

/// Wire-level response_format entry ({type:"json_schema", json_schema:{...}}).
struct ResponseFormatSpec {
    std::string name;
    bool strict = true;
    json schema;

    json to_json() const {
        return json{{"name", name}, {"strict", strict}, {"schema", schema}};
    }

    friend bool operator==(const ResponseFormatSpec&, const ResponseFormatSpec&) = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    std::optional<ResponseFormatSpec> response_format;
    int top_logprobs = 0;  // 0 disables logprob capture
    std::optional<int> max_tokens;

    void validate() const {
        if (messages.empty()) {
            throw PreconditionError("chat request has no messages");
        }
        if (temperature < 0.0) {
            throw PreconditionError("temperature must be >= 0");
        }
        if (top_logprobs < 0 || top_logprobs > 20) {
            throw PreconditionError("top_logprobs must be in [0, 20]");
        }
        for (const auto& m : messages) {
            if (m.role != Role::system) {
                if (m.role != Role::user) {
                    throw PreconditionError("first non-system message must have role user");
                }
                break;
            }
        }
        if (max_tokens && *max_tokens <= 0) {
            throw PreconditionError("max_tokens must be positive");
        }
    }
};

struct TopTokenProb {
    std::string token;
    double logprob = 0.0;

    friend bool operator==(const TopTokenProb&, const TopTokenProb&) = default;
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
    std::vector<TopTokenProb> top5;

    friend bool operator==(const TokenLogprob&, const TokenLogprob&) = default;
};

struct ChatResponse {
    std::string content;
    std::optional<json> parsed;
    std::vector<TokenLogprob> token_logprobs;
    std::size_t completion_tokens = 0;
    bool cached = false;
};

inline json token_logprobs_to_json(const std::vector<TokenLogprob>& lps) {
    json arr = json::array();
    for (const auto& t : lps) {
        json top = json::array();
        for (const auto& a : t.top5) {
            top.push_back({{"token", a.token}, {"logprob", a.logprob}});
        }
        arr.push_back({{"token", t.token}, {"logprob", t.logprob}, {"top5", top}});
    }
    return arr;
}

// ---------------------------------------------------------------------------
// Canonical request form & cache key
// ---------------------------------------------------------------------------

/// Builds the wire body for a chat request. nlohmann::json keeps object keys
/// sorted, so dumping this body yields the canonical byte form.
inline json build_chat_body(const ChatRequest& req) {
    json body{
        {"model", req.model},
        {"messages", messages_to_json(req.messages)},
        {"temperature", req.temperature},
    };
    if (req.response_format) {
        body["response_format"] = {{"type", "json_schema"},
                                   {"json_schema", req.response_format->to_json()}};
    }
    if (req.top_logprobs > 0) {
        body["logprobs"] = true;
        body["top_logprobs"] = req.top_logprobs;
    }
    if (req.max_tokens) {
        body["max_tokens"] = *req.max_tokens;
    }
    return body;
}

/// Canonical bytes: endpoint path + sorted-key compact JSON; whitespace and
/// caller-side field order cannot leak into the digest.
inline std::string canonical_request_bytes(const std::string& path, const json& body) {
    return path + "\n" + body.dump();
}

/// 64-hex-char content address for a canonical request.
inline std::string cache_key(const std::string& canonical_bytes) {
    return sha256_hex(canonical_bytes);
}

}  // namespace sail
