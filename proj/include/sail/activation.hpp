#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "sail/chat.hpp"
#include "sail/common.hpp"
#include "sail/gateway.hpp"
#include "sail/memory.hpp"
#include "sail/retrieval.hpp"
#include "sail/schema.hpp"
#include "sail/templates.hpp"

namespace sail {

enum class Integration { assimilation, accommodation, unclassified };

inline std::string to_string(Integration i) {
    switch (i) {
        case Integration::assimilation: return "assimilation";
        case Integration::accommodation: return "accommodation";
        case Integration::unclassified: return "unclassified";
    }
    throw Error("unreachable integration kind");
}

/// S_new plus provenance: where the prior came from, which episodes were in
/// context, the raw completion, and the retained conversation the solver
/// extends with the closing turn.
struct ActivatedSchema {
    ProblemSchema schema;
    Integration integration = Integration::unclassified;
    std::string source_schema_id;
    std::vector<std::string> source_trace_ids;
    std::string raw_text;
    std::vector<ChatMessage> conversation;  // [system, user, assistant]

    json to_json() const {
        return json{{"schema", schema.to_json()},
                    {"integration", to_string(integration)},
                    {"source_schema_id", source_schema_id},
                    {"source_trace_ids", source_trace_ids},
                    {"raw_text", raw_text}};
    }
};

inline std::string render_episode_block(const EpisodicTrace& episode) {
    std::map<std::string, std::string> values{{"question", episode.question},
                                              {"answer", episode.answer}};
    for (std::size_t i = 0; i < episode.options.size(); ++i) {
        values["option_" + std::to_string(i + 1)] = episode.options[i];
    }
    return templates::substitute(templates::kActivationEpisode, values);
}

/// Conversation that activates a schema for `target`: the system turn is the
/// schema-formation prompt for the target itself, the user turn shows the
/// retrieved episodes (strongest memory first) and the prior schema block.
inline std::vector<ChatMessage> build_activation_conversation(
    const McqProblem& target, const SchemaEntry& prior, const std::vector<WeightedTrace>& episodes) {
    if (episodes.empty()) {
        throw PreconditionError("activation requires at least one episodic example");
    }
    std::vector<WeightedTrace> ordered = episodes;
    std::stable_sort(ordered.begin(), ordered.end(), [](const WeightedTrace& a, const WeightedTrace& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        return a.trace.trace_id < b.trace.trace_id;
    });

    std::string user;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        if (i > 0) {
            user += "\n\n";
        }
        user += render_episode_block(ordered[i].trace);
    }
    user += "\n\n";
    user += templates::kSchemaSectionHeading;
    user += render_schema_block(prior.schema);

    return {system_message(build_schema_prompt(target).front().content), user_message(user)};
}

/// Cosine over the two summaries' embeddings against threshold theta_a, with
/// negative cosine floored at 0 (anti-aligned summaries fit no better than
/// unrelated ones). Telemetry only; never steers control flow.
inline Integration classify_integration(const ProblemSchema& target_schema,
                                        const ProblemSchema& activated, Gateway& gateway,
                                        double theta_a) {
    try {
        const auto vectors = gateway.embed({target_schema.summary, activated.summary});
        const double fit = std::max(cosine_similarity(vectors[0], vectors[1]), 0.0);
        return fit >= theta_a ? Integration::assimilation : Integration::accommodation;
    } catch (const Error&) {
        return Integration::unclassified;
    }
}

/// S_new = f(S_x, S_hat, E_tau): send the activation conversation, parse the
/// assistant's refined schema, keep the conversation for the answer turn.
inline ActivatedSchema activate(const McqProblem& target, const SchemaEntry& prior,
                                const std::vector<WeightedTrace>& episodes, Gateway& gateway,
                                const std::optional<ProblemSchema>& target_schema = std::nullopt,
                                double theta_a = 0.85) {
    ChatRequest req;
    req.model = gateway.chat_model();
    req.messages = build_activation_conversation(target, prior, episodes);
    const ChatResponse resp = gateway.chat_complete(req);

    ActivatedSchema out;
    out.raw_text = resp.content;
    out.schema = parse_schema_block(resp.content);  // throws ActivationError when unusable
    out.source_schema_id = prior.schema_id;
    for (const auto& wt : episodes) {
        out.source_trace_ids.push_back(wt.trace.trace_id);
    }
    std::sort(out.source_trace_ids.begin(), out.source_trace_ids.end());
    out.conversation = req.messages;
    out.conversation.push_back(assistant_message(resp.content));
    if (target_schema) {
        out.integration = classify_integration(*target_schema, out.schema, gateway, theta_a);
    }
    return out;
}

}  // namespace sail
