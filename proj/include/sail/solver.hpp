#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sail/activation.hpp"
#include "sail/chat.hpp"
#include "sail/common.hpp"
#include "sail/dataset.hpp"
#include "sail/gateway.hpp"
#include "sail/memory.hpp"
#include "sail/retrieval.hpp"
#include "sail/schema.hpp"

namespace sail {

enum class Mode { sa_icl, zero_shot, one_shot, one_shot_cot, schema_only, example_schema_only };

inline std::string to_string(Mode m) {
    switch (m) {
        case Mode::sa_icl: return "sa_icl";
        case Mode::zero_shot: return "zero_shot";
        case Mode::one_shot: return "one_shot";
        case Mode::one_shot_cot: return "one_shot_cot";
        case Mode::schema_only: return "schema_only";
        case Mode::example_schema_only: return "example_schema_only";
    }
    throw Error("unreachable mode");
}

inline Mode mode_from_string(const std::string& s) {
    if (s == "sa_icl") return Mode::sa_icl;
    if (s == "zero_shot") return Mode::zero_shot;
    if (s == "one_shot") return Mode::one_shot;
    if (s == "one_shot_cot") return Mode::one_shot_cot;
    if (s == "schema_only") return Mode::schema_only;
    if (s == "example_schema_only") return Mode::example_schema_only;
    throw ConfigError("unknown mode: " + s);
}

/// The strict DynamicResponse format: reasoning plus a final answer drawn
/// from the four option texts, order preserved.
inline ResponseFormatSpec build_response_format(const McqProblem& problem) {
    if (problem.options.size() != 4) {
        throw ValidationError("response format requires exactly 4 options");
    }
    std::set<std::string> distinct(problem.options.begin(), problem.options.end());
    if (distinct.size() != problem.options.size()) {
        throw ValidationError("response format requires pairwise-distinct options (enum ambiguity)");
    }
    json schema{
        {"$defs",
         {{"AnswerEnum", {{"enum", problem.options}, {"title", "AnswerEnum"}, {"type", "string"}}}}},
        {"properties",
         {{"reasoning", {{"title", "Reasoning"}, {"type", "string"}}},
          {"final_answer", {{"$ref", "#/$defs/AnswerEnum"}}}}},
        {"required", {"reasoning", "final_answer"}},
        {"title", "DynamicResponse"},
        {"type", "object"},
        {"additionalProperties", false},
    };
    return {"DynamicResponse", true, std::move(schema)};
}

struct SolveRecord {
    std::string question_id;
    Mode mode = Mode::zero_shot;
    std::size_t trial = 0;
    std::string final_answer;
    std::string reasoning;
    bool correct = false;
    std::size_t completion_tokens = 0;
    std::vector<TokenLogprob> token_logprobs;
    std::vector<ChatMessage> conversation;  // includes the assistant reply
    bool cached = false;       // in-memory only: transcripts must not depend on cache state
    std::string failed_stage;  // empty on clean records
    std::string fallback;      // mode actually used when the pipeline degraded

    json to_json() const {
        json j{
            {"question_id", question_id},
            {"mode", to_string(mode)},
            {"trial", trial},
            {"final_answer", final_answer},
            {"reasoning", reasoning},
            {"correct", correct},
            {"completion_tokens", completion_tokens},
            {"token_logprobs", token_logprobs_to_json(token_logprobs)},
            {"conversation", messages_to_json(conversation)},
        };
        if (!failed_stage.empty()) j["failed_stage"] = failed_stage;
        if (!fallback.empty()) j["fallback"] = fallback;
        return j;
    }
};

namespace detail {

/// Final answer turn: strict DynamicResponse with top-5 logprobs recorded.
inline SolveRecord complete_answer(const McqProblem& problem, Mode mode,
                                   std::vector<ChatMessage> conversation, Gateway& gateway) {
    SolveRecord record;
    record.question_id = problem.question_id;
    record.mode = mode;

    ChatRequest req;
    req.model = gateway.chat_model();
    req.messages = conversation;
    req.response_format = build_response_format(problem);
    req.top_logprobs = 5;

    ChatResponse resp;
    try {
        resp = gateway.chat_complete(req);
    } catch (const SchemaViolationError& e) {
        // unanswered: counted incorrect, never silently retried
        record.failed_stage = "solve";
        record.reasoning = e.what();
        record.conversation = std::move(conversation);
        return record;
    }
    record.final_answer = resp.parsed->at("final_answer").get<std::string>();
    record.reasoning = resp.parsed->at("reasoning").get<std::string>();
    record.correct = record.final_answer == problem.answer;
    record.completion_tokens = resp.completion_tokens;
    record.token_logprobs = resp.token_logprobs;
    record.cached = resp.cached;
    record.conversation = std::move(conversation);
    record.conversation.push_back(assistant_message(resp.content));
    return record;
}

inline std::string render_example_block(const EpisodicTrace& example) {
    return "Example Question:\n" +
           templates::render_question_block(example.question, example.options) +
           "\nAnswer: " + example.answer;
}

inline std::string render_target_block(const McqProblem& target) {
    return "Now try a similar question:\n" + render_problem(target);
}

}  // namespace detail

/// Baseline and ablation conversations. `example` is required for the
/// one-shot variants and example_schema_only.
inline std::vector<ChatMessage> build_baseline_conversation(
    const McqProblem& problem, Mode mode, const std::optional<EpisodicTrace>& example,
    Gateway& gateway) {
    switch (mode) {
        case Mode::zero_shot:
            return {system_message(std::string(templates::kZeroShotSystem)),
                    user_message(render_problem(problem))};
        case Mode::one_shot:
        case Mode::one_shot_cot: {
            if (!example) {
                throw ConfigError(to_string(mode) + " requires an example");
            }
            std::string target = detail::render_target_block(problem);
            if (mode == Mode::one_shot_cot) {
                target += "\n";
                target += templates::kCotSuffix;
            }
            return {system_message(std::string(templates::kOneShotSystem)),
                    user_message(detail::render_example_block(*example)), user_message(target)};
        }
        case Mode::schema_only: {
            const ProblemSchema own = form_representation(problem, gateway);
            return {system_message(std::string(templates::kZeroShotSystem)),
                    user_message(render_problem(problem) + "\n\n" +
                                 std::string(templates::kSchemaSectionHeading) +
                                 render_schema_block(own))};
        }
        case Mode::example_schema_only: {
            if (!example) {
                throw ConfigError("example_schema_only requires an example");
            }
            McqProblem as_problem;
            as_problem.question_id = example->trace_id;
            as_problem.domain_tag =
                example->domain_tag.empty() ? std::string("other") : example->domain_tag;
            as_problem.question = example->question;
            as_problem.options = example->options;
            as_problem.answer = example->answer;
            as_problem.explanation = example->explanation;
            const ProblemSchema example_schema = form_representation(as_problem, gateway);
            return {system_message(std::string(templates::kZeroShotSystem)),
                    user_message(std::string(templates::kSchemaSectionHeading) +
                                 render_schema_block(example_schema)),
                    user_message(detail::render_target_block(problem))};
        }
        case Mode::sa_icl:
            throw ConfigError("sa_icl is not a baseline; use run_sa_icl");
    }
    throw Error("unreachable mode");
}

inline SolveRecord run_baseline(const McqProblem& problem, Mode mode,
                                const std::optional<EpisodicTrace>& example, Gateway& gateway) {
    return detail::complete_answer(problem, mode,
                                   build_baseline_conversation(problem, mode, example, gateway),
                                   gateway);
}

/// Closes the retained activation conversation with the refined-schema answer
/// turn.
inline SolveRecord solve_with_schema(const McqProblem& problem,
                                     const std::vector<ChatMessage>& activation_conversation,
                                     Gateway& gateway) {
    if (activation_conversation.empty() ||
        activation_conversation.back().role != Role::assistant) {
        throw PreconditionError("solve_with_schema expects the retained activation conversation");
    }
    std::vector<ChatMessage> conversation = activation_conversation;
    conversation.push_back(user_message(templates::kActivationClosing));
    return detail::complete_answer(problem, Mode::sa_icl, std::move(conversation), gateway);
}

struct SaIclOptions {
    double tau = 1.0;
    RetrievalMethod method = RetrievalMethod::cosine;
    KeyMode key_mode = KeyMode::summary;
    std::size_t rank = 1;  // 1 = argmax; latent bins select deeper ranks
    double theta_a = 0.85;
};

struct SaIclOutcome {
    SolveRecord record;
    std::optional<ActivatedSchema> activated;
    std::optional<RetrievalResult> retrieval;
};

/// Algorithm composition: representation -> prior retrieval -> thresholded
/// episode selection -> activation -> schema-conditioned answer. Stage
/// failures degrade to one-shot / zero-shot and are recorded, never thrown.
inline SaIclOutcome run_sa_icl(const McqProblem& problem, const MemoryStore& store,
                               const SaIclOptions& opts, Gateway& gateway) {
    SaIclOutcome outcome;
    if (store.empty()) {
        outcome.record = run_baseline(problem, Mode::zero_shot, std::nullopt, gateway);
        outcome.record.mode = Mode::sa_icl;
        outcome.record.fallback = "zero_shot";
        outcome.record.failed_stage = "retrieval: empty store";
        return outcome;
    }

    std::string stage = "representation";
    std::optional<EpisodicTrace> fallback_example;
    try {
        const ProblemSchema target_schema = form_representation(problem, gateway);
        const std::string query_key = schema_key_text(target_schema, opts.key_mode);

        stage = "retrieval";
        RetrievalResult retrieved =
            retrieve_prior_schema(query_key, store, gateway, opts.method, opts.key_mode);
        if (opts.rank > retrieved.rank_table.size()) {
            throw PreconditionError("requested rank " + std::to_string(opts.rank) +
                                    " exceeds the rank table (" +
                                    std::to_string(retrieved.rank_table.size()) + " schemas)");
        }
        const std::string chosen_id = retrieved.rank_table[opts.rank - 1].schema_id;
        outcome.retrieval = retrieved;

        stage = "episodic_selection";
        const SchemaEntry& prior = store.schema(chosen_id);
        const std::vector<WeightedTrace> episodes =
            store.select_episodic(chosen_id, store.clock(), opts.tau);
        if (!episodes.empty()) {
            const auto strongest = std::max_element(
                episodes.begin(), episodes.end(),
                [](const WeightedTrace& a, const WeightedTrace& b) {
                    if (a.weight != b.weight) return a.weight < b.weight;
                    return a.trace.trace_id > b.trace.trace_id;
                });
            fallback_example = strongest->trace;
        }

        stage = "activation";
        ActivatedSchema activated =
            activate(problem, prior, episodes, gateway, target_schema, opts.theta_a);

        stage = "solve";
        outcome.record = solve_with_schema(problem, activated.conversation, gateway);
        outcome.activated = std::move(activated);
        return outcome;
    } catch (const Error& e) {
        // degrade to one-shot when an episode is at hand, else zero-shot
        if (fallback_example) {
            outcome.record = run_baseline(problem, Mode::one_shot, fallback_example, gateway);
            outcome.record.fallback = "one_shot";
        } else {
            outcome.record = run_baseline(problem, Mode::zero_shot, std::nullopt, gateway);
            outcome.record.fallback = "zero_shot";
        }
        outcome.record.mode = Mode::sa_icl;
        outcome.record.failed_stage = stage + ": " + e.what();
        return outcome;
    }
}

}  // namespace sail
