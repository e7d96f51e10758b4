#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sail/backend.hpp"
#include "sail/chat.hpp"
#include "sail/common.hpp"
#include "sail/templates.hpp"

namespace sail {

/// Deterministic offline backend. Every reply is a pure function of the
/// canonical request bytes and the seed, so runs replay byte-identically
/// across processes. Contract:
///   - schema-formation requests (response format "ProblemSchema") get a
///     valid Appendix-E-shaped object,
///   - activation conversations get a schema block completion,
///   - strict "DynamicResponse" answer requests select the option whose text
///     hashes lowest under the seed,
///   - "SyntheticMcq" requests get a valid four-option variant.
class MockTransport final : public Transport {
public:
    explicit MockTransport(std::uint64_t seed) : seed_(seed) {}

    static constexpr std::size_t kEmbeddingDim = 64;

    nlohmann::json post(const std::string& path, const nlohmann::json& body) override {
        const std::string digest =
            sha256_hex(canonical_request_bytes(path, body) + "\n" + std::to_string(seed_));
        if (path == "/chat/completions") {
            return chat_completion(body, digest);
        }
        if (path == "/embeddings") {
            return embeddings(body);
        }
        if (path == "/rerank") {
            return rerank(body);
        }
        throw ProtocolError("mock backend: unknown endpoint " + path);
    }

    std::uint64_t seed() const { return seed_; }

    /// The option the strict answer path will pick for a given enum.
    std::string pick_answer(const std::vector<std::string>& options) const {
        std::size_t best = 0;
        std::uint64_t best_h = UINT64_MAX;
        for (std::size_t i = 0; i < options.size(); ++i) {
            const std::uint64_t h = hash64("answer:" + std::to_string(seed_) + ":" + options[i]);
            if (h < best_h) {
                best_h = h;
                best = i;
            }
        }
        return options[best];
    }

    std::vector<double> embedding_for(const std::string& text) const {
        std::vector<double> v(kEmbeddingDim);
        double norm2 = 0.0;
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
            const double u =
                uniform01("emb:" + std::to_string(seed_) + ":" + text + ":" + std::to_string(i));
            v[i] = 2.0 * u - 1.0;
            norm2 += v[i] * v[i];
        }
        const double norm = std::sqrt(norm2);
        for (auto& x : v) {
            x /= norm;
        }
        return v;
    }

    double rerank_score(const std::string& query, const std::string& doc) const {
        if (doc == query) {
            return 1.0;
        }
        return uniform01("rr:" + std::to_string(seed_) + ":" + query + "\x1f" + doc) * 0.999;
    }

private:
    nlohmann::json chat_completion(const nlohmann::json& body, const std::string& digest) const {
        std::string format_name;
        nlohmann::json format_schema;
        if (body.contains("response_format")) {
            const auto& js = body.at("response_format").at("json_schema");
            format_name = js.at("name").get<std::string>();
            format_schema = js.at("schema");
        }

        std::string content;
        if (format_name == "ProblemSchema") {
            content = schema_object(digest).dump();
        } else if (format_name == "DynamicResponse") {
            std::vector<std::string> options;
            for (const auto& o : format_schema.at("$defs").at("AnswerEnum").at("enum")) {
                options.push_back(o.get<std::string>());
            }
            content = nlohmann::json{
                {"reasoning",
                 "Mock reasoning " + digest.substr(0, 8) + " applies the schema and selects the option."},
                {"final_answer", pick_answer(options)},
            }.dump();
        } else if (format_name == "SyntheticMcq") {
            content = synthetic_object(digest).dump();
        } else if (is_activation_conversation(body)) {
            content = activation_block(digest);
        } else {
            content = "Mock completion " + digest.substr(0, 12);
        }

        nlohmann::json message{{"role", "assistant"}, {"content", content}};
        nlohmann::json choice{{"index", 0}, {"message", message}};

        std::size_t completion_tokens = 0;
        const bool want_logprobs =
            body.value("logprobs", false) && body.value("top_logprobs", 0) > 0;
        if (want_logprobs) {
            const int k = body.at("top_logprobs").get<int>();
            choice["logprobs"] = fabricate_logprobs(content, digest, k, completion_tokens);
        } else {
            completion_tokens = std::max<std::size_t>(1, tokenize(content).size());
        }

        return nlohmann::json{
            {"choices", nlohmann::json::array({choice})},
            {"model", body.value("model", "mock-chat")},
            {"usage", {{"completion_tokens", completion_tokens}}},
        };
    }

    nlohmann::json embeddings(const nlohmann::json& body) const {
        nlohmann::json data = nlohmann::json::array();
        std::size_t index = 0;
        for (const auto& item : body.at("input")) {
            data.push_back({{"index", index++},
                            {"embedding", embedding_for(item.get<std::string>())}});
        }
        return nlohmann::json{{"data", data}};
    }

    nlohmann::json rerank(const nlohmann::json& body) const {
        const std::string query = body.at("query").get<std::string>();
        std::vector<std::pair<std::size_t, double>> scored;
        std::size_t index = 0;
        for (const auto& doc : body.at("documents")) {
            scored.emplace_back(index++, rerank_score(query, doc.get<std::string>()));
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        nlohmann::json results = nlohmann::json::array();
        for (const auto& [i, s] : scored) {
            results.push_back({{"index", i}, {"relevance_score", s}});
        }
        return nlohmann::json{{"results", results}};
    }

    static bool is_activation_conversation(const nlohmann::json& body) {
        for (const auto& m : body.at("messages")) {
            if (m.at("role") == "user" &&
                contains(m.at("content").get<std::string>(),
                         "### Below is the schema and summary of this question:")) {
                return true;
            }
        }
        return false;
    }

    nlohmann::json schema_object(const std::string& h) const {
        return nlohmann::json{
            {"schema",
             {{"broad_category", "Mock Domain " + h.substr(0, 4)},
              {"refinement", "Deterministic refinement " + h.substr(4, 4)},
              {"specific_scope", "Scope anchored at case " + h.substr(8, 4)},
              {"goal", "Select the correct option for case " + h.substr(12, 4)}}},
            {"summary", "Mock schema summary for case " + h.substr(0, 12) + "."},
        };
    }

    std::string activation_block(const std::string& h) const {
        return templates::substitute(
            templates::kSchemaBlock,
            {{"broad_category", "Activated Domain " + h.substr(0, 4)},
             {"refinement", "Activated refinement " + h.substr(4, 4)},
             {"specific_scope", "Activated scope for case " + h.substr(8, 4)},
             {"goal", "Answer the target question for case " + h.substr(12, 4)},
             {"summary", "Activated mock schema summary for case " + h.substr(0, 12) + "."}});
    }

    nlohmann::json synthetic_object(const std::string& h) const {
        const std::vector<std::string> options{
            "Choice A-" + h.substr(0, 4),
            "Choice B-" + h.substr(4, 4),
            "Choice C-" + h.substr(8, 4),
            "Choice D-" + h.substr(12, 4),
        };
        const std::size_t pick = static_cast<std::size_t>(hash64("synthpick:" + h) % 4);
        return nlohmann::json{
            {"question", "Mock synthetic question " + h.substr(0, 10) + "?"},
            {"options", options},
            {"answer", options[pick]},
            {"explanation", "Mock explanation " + h.substr(16, 8) + "."},
        };
    }

    /// Whitespace-preserving chunks: concatenating them reproduces the text.
    static std::vector<std::string> tokenize(const std::string& text) {
        std::vector<std::string> tokens;
        std::size_t start = 0;
        while (start < text.size()) {
            std::size_t space = text.find(' ', start);
            if (space == std::string::npos) {
                tokens.push_back(text.substr(start));
                break;
            }
            // keep the trailing space with the token
            tokens.push_back(text.substr(start, space - start + 1));
            start = space + 1;
        }
        return tokens;
    }

    nlohmann::json fabricate_logprobs(const std::string& content, const std::string& h, int k,
                                      std::size_t& completion_tokens) const {
        const auto tokens = tokenize(content);
        completion_tokens = tokens.size();
        nlohmann::json entries = nlohmann::json::array();
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const std::string key = "lp:" + h + ":" + std::to_string(i);
            const double lp = -uniform01(key) * 2.3;
            nlohmann::json top = nlohmann::json::array();
            const int alts = std::min(k, 5);
            for (int j = 0; j < alts; ++j) {
                if (j == 0) {
                    top.push_back({{"token", tokens[i]}, {"logprob", lp}});
                } else {
                    const double alt_lp =
                        lp - 0.4 * j - uniform01(key + ":" + std::to_string(j)) * 0.3;
                    top.push_back({{"token", "alt" + h.substr(static_cast<std::size_t>(j), 2)},
                                   {"logprob", alt_lp}});
                }
            }
            entries.push_back({{"token", tokens[i]}, {"logprob", lp}, {"top_logprobs", top}});
        }
        return nlohmann::json{{"content", entries}};
    }

    std::uint64_t seed_;
};

}  // namespace sail
