#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sail/backend.hpp"
#include "sail/cache.hpp"
#include "sail/chat.hpp"
#include "sail/common.hpp"
#include "sail/http_backend.hpp"
#include "sail/mock_backend.hpp"

namespace sail {

// ---------------------------------------------------------------------------
// Minimal JSON-schema check for the strict response formats this project
// uses: object/string/array types, properties, required, additionalProperties,
// enum, $defs/$ref, minItems/maxItems.
// ---------------------------------------------------------------------------

namespace detail {

inline const json& resolve_ref(const json& schema, const json& root) {
    if (!schema.contains("$ref")) {
        return schema;
    }
    const std::string ref = schema.at("$ref").get<std::string>();
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0) {
        throw SchemaViolationError("unsupported $ref: " + ref);
    }
    return root.at("$defs").at(ref.substr(prefix.size()));
}

inline void validate_value(const json& value, const json& schema_in, const json& root,
                           const std::string& where) {
    const json& schema = resolve_ref(schema_in, root);
    if (schema.contains("enum")) {
        for (const auto& allowed : schema.at("enum")) {
            if (value == allowed) {
                return;
            }
        }
        throw SchemaViolationError(where + ": value not in enum");
    }
    const std::string type = schema.value("type", "");
    if (type == "string") {
        if (!value.is_string()) {
            throw SchemaViolationError(where + ": expected string");
        }
    } else if (type == "array") {
        if (!value.is_array()) {
            throw SchemaViolationError(where + ": expected array");
        }
        if (schema.contains("minItems") && value.size() < schema.at("minItems").get<std::size_t>()) {
            throw SchemaViolationError(where + ": too few items");
        }
        if (schema.contains("maxItems") && value.size() > schema.at("maxItems").get<std::size_t>()) {
            throw SchemaViolationError(where + ": too many items");
        }
        if (schema.contains("items")) {
            std::size_t i = 0;
            for (const auto& item : value) {
                validate_value(item, schema.at("items"), root, where + "[" + std::to_string(i++) + "]");
            }
        }
    } else if (type == "object") {
        if (!value.is_object()) {
            throw SchemaViolationError(where + ": expected object");
        }
        if (schema.contains("required")) {
            for (const auto& key : schema.at("required")) {
                if (!value.contains(key.get<std::string>())) {
                    throw SchemaViolationError(where + ": missing required key " +
                                               key.get<std::string>());
                }
            }
        }
        const json props = schema.value("properties", json::object());
        if (!schema.value("additionalProperties", true)) {
            for (const auto& [key, unused] : value.items()) {
                if (!props.contains(key)) {
                    throw SchemaViolationError(where + ": unexpected key " + key);
                }
            }
        }
        for (const auto& [key, sub] : props.items()) {
            if (value.contains(key)) {
                validate_value(value.at(key), sub, root, where + "." + key);
            }
        }
    }
}

}  // namespace detail

/// Throws SchemaViolationError when `value` does not satisfy the json_schema
/// body of a strict response format.
inline void validate_against_schema(const json& value, const json& schema) {
    detail::validate_value(value, schema, schema, "$");
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

struct RerankHit {
    std::size_t index = 0;
    double relevance = 0.0;
};

struct GatewayConfig {
    BackendConfig chat;
    BackendConfig embed;
    BackendConfig rerank;
    std::filesystem::path cache_dir;
    bool mock = false;
    std::uint64_t seed = 0;

    static GatewayConfig offline(std::uint64_t seed, std::filesystem::path cache_dir = {}) {
        GatewayConfig cfg;
        cfg.mock = true;
        cfg.seed = seed;
        cfg.cache_dir = std::move(cache_dir);
        cfg.chat = {.kind = BackendKind::chat, .model = "mock-chat"};
        cfg.embed = {.kind = BackendKind::embed, .model = "mock-embed"};
        cfg.rerank = {.kind = BackendKind::rerank, .model = "mock-rerank"};
        return cfg;
    }

    static GatewayConfig from_env() {
        GatewayConfig cfg;
        cfg.chat = {.base_url = env_or("SAIL_CHAT_BASE", ""),
                    .api_key = env_or("SAIL_CHAT_KEY", ""),
                    .kind = BackendKind::chat,
                    .model = env_or("SAIL_CHAT_MODEL", "gpt-4o-mini")};
        cfg.embed = {.base_url = env_or("SAIL_EMBED_BASE", ""),
                     .api_key = env_or("SAIL_EMBED_KEY", ""),
                     .kind = BackendKind::embed,
                     .model = env_or("SAIL_EMBED_MODEL", "text-embedding-3-small")};
        cfg.rerank = {.base_url = env_or("SAIL_RERANK_BASE", ""),
                      .api_key = env_or("SAIL_RERANK_KEY", ""),
                      .kind = BackendKind::rerank,
                      .model = env_or("SAIL_RERANK_MODEL", "rerank-v3.5")};
        cfg.cache_dir = env_or("SAIL_CACHE_DIR", "");
        return cfg;
    }
};

/// Uniform chat / embedding / rerank access with a content-addressed response
/// cache. Thread-safe; at most max_inflight requests are outstanding per
/// backend at any instant.
class Gateway {
public:
    explicit Gateway(GatewayConfig cfg)
        : cfg_(std::move(cfg)), cache_(cfg_.cache_dir) {
        cfg_.chat.validate();
        cfg_.embed.validate();
        cfg_.rerank.validate();
        if (cfg_.chat.kind != BackendKind::chat || cfg_.embed.kind != BackendKind::embed ||
            cfg_.rerank.kind != BackendKind::rerank) {
            throw ConfigError("backend config bound to the wrong gateway slot");
        }
        chat_transport_ = make_transport(cfg_.chat);
        embed_transport_ = make_transport(cfg_.embed);
        rerank_transport_ = make_transport(cfg_.rerank);
        chat_gate_ = std::make_unique<std::counting_semaphore<>>(cfg_.chat.max_inflight);
        embed_gate_ = std::make_unique<std::counting_semaphore<>>(cfg_.embed.max_inflight);
        rerank_gate_ = std::make_unique<std::counting_semaphore<>>(cfg_.rerank.max_inflight);
    }

    // test seam: replace a transport while keeping cache/limits
    void set_transport(BackendKind kind, TransportPtr t) {
        switch (kind) {
            case BackendKind::chat: chat_transport_ = std::move(t); break;
            case BackendKind::embed: embed_transport_ = std::move(t); break;
            case BackendKind::rerank: rerank_transport_ = std::move(t); break;
        }
    }

    void set_warning_sink(std::function<void(const std::string&)> sink) {
        std::lock_guard lock(warn_mutex_);
        warn_sink_ = std::move(sink);
    }

    std::vector<std::string> warnings() const {
        std::lock_guard lock(warn_mutex_);
        return warnings_;
    }

    const GatewayConfig& config() const { return cfg_; }

    std::string chat_model() const { return cfg_.chat.model; }

    ChatResponse chat_complete(const ChatRequest& req) {
        req.validate();
        const json body = build_chat_body(req);
        auto [payload, cached] = exchange("/chat/completions", body, *chat_transport_,
                                          *chat_gate_, cfg_.chat);
        ChatResponse resp = parse_chat_response(payload, req);
        resp.cached = cached;
        return resp;
    }

    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) {
        if (texts.empty()) {
            throw PreconditionError("embed: texts must be nonempty");
        }
        // one request per text keeps the cache keyed by text, not by batch
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& text : texts) {
            const json body{{"model", cfg_.embed.model}, {"input", json::array({text})}};
            auto [payload, cached] =
                exchange("/embeddings", body, *embed_transport_, *embed_gate_, cfg_.embed);
            const auto& data = payload.at("data");
            if (!data.is_array() || data.size() != 1) {
                throw ProtocolError("embeddings: expected exactly one vector per input");
            }
            out.push_back(data.at(0).at("embedding").get<std::vector<double>>());
        }
        for (const auto& v : out) {
            if (v.size() != out.front().size()) {
                throw ProtocolError("embeddings: dimension mismatch across batch");
            }
        }
        return out;
    }

    /// One score per document, sorted by descending relevance; ties broken by
    /// ascending index. Out-of-range scores are clamped with a warning.
    std::vector<RerankHit> rerank(const std::string& query, const std::vector<std::string>& documents) {
        if (documents.empty()) {
            throw PreconditionError("rerank: documents must be nonempty");
        }
        const json body{{"query", query}, {"documents", documents}};
        auto [payload, cached] =
            exchange("/rerank", body, *rerank_transport_, *rerank_gate_, cfg_.rerank);
        std::vector<RerankHit> hits(documents.size());
        std::vector<bool> seen(documents.size(), false);
        for (const auto& r : payload.at("results")) {
            const auto index = r.at("index").get<std::size_t>();
            if (index >= documents.size() || seen[index]) {
                throw ProtocolError("rerank: bad or duplicate document index in results");
            }
            double score = r.at("relevance_score").get<double>();
            if (score < 0.0 || score > 1.0) {
                warn("rerank relevance " + format_double(score) + " outside [0,1]; clamped");
                score = std::clamp(score, 0.0, 1.0);
            }
            hits[index] = {index, score};
            seen[index] = true;
        }
        if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
            throw ProtocolError("rerank: backend returned fewer scores than documents");
        }
        std::stable_sort(hits.begin(), hits.end(), [](const RerankHit& a, const RerankHit& b) {
            if (a.relevance != b.relevance) return a.relevance > b.relevance;
            return a.index < b.index;
        });
        return hits;
    }

private:
    TransportPtr make_transport(const BackendConfig& be) const {
        if (cfg_.mock || be.base_url.empty()) {
            return std::make_shared<MockTransport>(cfg_.seed);
        }
        return std::make_shared<HttpTransport>(be.base_url, be.api_key, be.retry_limit,
                                               be.retry_backoff_ms);
    }

    std::pair<json, bool> exchange(const std::string& path, const json& body, Transport& transport,
                                   std::counting_semaphore<>& gate, const BackendConfig&) {
        const std::string digest = cache_key(canonical_request_bytes(path, body));
        if (auto hit = cache_.lookup(digest)) {
            return {*hit, true};
        }
        gate.acquire();
        json payload;
        try {
            payload = transport.post(path, body);
        } catch (...) {
            gate.release();
            throw;
        }
        gate.release();
        cache_.store(digest, path, body, payload);
        return {payload, false};
    }

    ChatResponse parse_chat_response(const json& payload, const ChatRequest& req) {
        if (!payload.contains("choices") || payload.at("choices").empty()) {
            throw ProtocolError("chat: response has no choices");
        }
        const json& choice = payload.at("choices").at(0);
        ChatResponse resp;
        resp.content = choice.at("message").at("content").get<std::string>();

        if (choice.contains("logprobs") && choice.at("logprobs").is_object() &&
            choice.at("logprobs").contains("content")) {
            for (const auto& entry : choice.at("logprobs").at("content")) {
                TokenLogprob t;
                t.token = entry.at("token").get<std::string>();
                t.logprob = entry.at("logprob").get<double>();
                if (t.logprob > 0.0) {
                    warn("token logprob " + format_double(t.logprob) + " > 0; clamped");
                    t.logprob = 0.0;
                }
                if (entry.contains("top_logprobs")) {
                    for (const auto& alt : entry.at("top_logprobs")) {
                        t.top5.push_back({alt.at("token").get<std::string>(),
                                          std::min(alt.at("logprob").get<double>(), 0.0)});
                    }
                }
                std::stable_sort(t.top5.begin(), t.top5.end(),
                                 [](const TopTokenProb& a, const TopTokenProb& b) {
                                     return a.logprob > b.logprob;
                                 });
                if (t.top5.size() > 5) {
                    t.top5.resize(5);
                }
                resp.token_logprobs.push_back(std::move(t));
            }
        }

        std::size_t usage_tokens = 0;
        if (payload.contains("usage") && payload.at("usage").contains("completion_tokens")) {
            usage_tokens = payload.at("usage").at("completion_tokens").get<std::size_t>();
        }
        resp.completion_tokens = std::max(usage_tokens, resp.token_logprobs.size());

        if (req.response_format) {
            json parsed;
            try {
                parsed = json::parse(resp.content);
            } catch (const json::exception&) {
                if (req.response_format->strict) {
                    throw SchemaViolationError("structured output is not valid JSON (format " +
                                               req.response_format->name + ")");
                }
            }
            if (!parsed.is_null()) {
                if (req.response_format->strict) {
                    validate_against_schema(parsed, req.response_format->schema);
                }
                resp.parsed = std::move(parsed);
            }
        }
        return resp;
    }

    void warn(const std::string& message) {
        std::lock_guard lock(warn_mutex_);
        warnings_.push_back(message);
        if (warn_sink_) {
            warn_sink_(message);
        }
    }

    GatewayConfig cfg_;
    ResponseCache cache_;
    TransportPtr chat_transport_;
    TransportPtr embed_transport_;
    TransportPtr rerank_transport_;
    std::unique_ptr<std::counting_semaphore<>> chat_gate_;
    std::unique_ptr<std::counting_semaphore<>> embed_gate_;
    std::unique_ptr<std::counting_semaphore<>> rerank_gate_;
    mutable std::mutex warn_mutex_;
    std::vector<std::string> warnings_;
    std::function<void(const std::string&)> warn_sink_;
};

}  // namespace sail
