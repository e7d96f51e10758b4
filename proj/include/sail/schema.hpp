#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sail/common.hpp"
#include "sail/dataset.hpp"
#include "sail/gateway.hpp"
#include "sail/templates.hpp"

namespace sail {

/// The structured abstraction of a problem: four template attributes plus the
/// digest summary used as the default retrieval key.
struct ProblemSchema {
    std::string broad_category;
    std::string refinement;
    std::string specific_scope;
    std::string goal;
    std::string summary;

    friend bool operator==(const ProblemSchema&, const ProblemSchema&) = default;

    void validate() const {
        if (broad_category.empty()) throw ValidationError("schema field broad_category is empty");
        if (refinement.empty()) throw ValidationError("schema field refinement is empty");
        if (specific_scope.empty()) throw ValidationError("schema field specific_scope is empty");
        if (goal.empty()) throw ValidationError("schema field goal is empty");
        if (summary.empty()) throw ValidationError("schema field summary is empty");
    }

    json to_json() const {
        return json{{"broad_category", broad_category},
                    {"refinement", refinement},
                    {"specific_scope", specific_scope},
                    {"goal", goal},
                    {"summary", summary}};
    }

    static ProblemSchema from_json(const json& j) {
        ProblemSchema s;
        s.broad_category = j.at("broad_category").get<std::string>();
        s.refinement = j.at("refinement").get<std::string>();
        s.specific_scope = j.at("specific_scope").get<std::string>();
        s.goal = j.at("goal").get<std::string>();
        s.summary = j.at("summary").get<std::string>();
        return s;
    }
};

enum class KeyMode { summary, full };

inline std::string to_string(KeyMode m) {
    return m == KeyMode::summary ? "summary" : "full";
}

inline KeyMode key_mode_from_string(const std::string& s) {
    if (s == "summary") return KeyMode::summary;
    if (s == "full") return KeyMode::full;
    throw ConfigError("unknown key mode: " + s);
}

// ---------------------------------------------------------------------------
// Prompt construction and parsing
// ---------------------------------------------------------------------------

inline std::vector<ChatMessage> build_schema_prompt(const McqProblem& problem) {
    problem.validate();
    return {user_message(
        templates::substitute(templates::kSchemaPrompt, {{"problem", render_problem(problem)}}))};
}

/// Wire shape of the model's schema reply: {"schema":{...4 fields...},"summary":...}.
inline json schema_wire_json(const ProblemSchema& s) {
    return json{{"schema",
                 {{"broad_category", s.broad_category},
                  {"refinement", s.refinement},
                  {"specific_scope", s.specific_scope},
                  {"goal", s.goal}}},
                {"summary", s.summary}};
}

inline ResponseFormatSpec schema_response_format() {
    json schema{
        {"type", "object"},
        {"title", "ProblemSchema"},
        {"properties",
         {{"schema",
           {{"type", "object"},
            {"properties",
             {{"broad_category", {{"type", "string"}}},
              {"refinement", {{"type", "string"}}},
              {"specific_scope", {{"type", "string"}}},
              {"goal", {{"type", "string"}}}}},
            {"required", {"broad_category", "refinement", "specific_scope", "goal"}},
            {"additionalProperties", false}}},
          {"summary", {{"type", "string"}}}}},
        {"required", {"schema", "summary"}},
        {"additionalProperties", false},
    };
    return {"ProblemSchema", true, std::move(schema)};
}

/// Strict parse of a schema completion. Unknown keys are rejected; missing
/// keys and empty fields are reported by name.
inline ProblemSchema parse_schema(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("schema reply is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ParseError("schema reply is not a JSON object");
    }
    for (const auto& [key, unused] : j.items()) {
        if (key != "schema" && key != "summary") {
            throw ParseError("unexpected key \"" + key + "\" in schema reply");
        }
    }
    if (!j.contains("schema")) throw ParseError("missing key \"schema\"");
    if (!j.contains("summary")) throw ParseError("missing key \"summary\"");
    const json& inner = j.at("schema");
    if (!inner.is_object()) {
        throw ParseError("\"schema\" is not an object");
    }
    static const std::vector<std::string> kFields{"broad_category", "refinement", "specific_scope",
                                                  "goal"};
    for (const auto& [key, unused] : inner.items()) {
        if (std::find(kFields.begin(), kFields.end(), key) == kFields.end()) {
            throw ParseError("unexpected key \"" + key + "\" in schema object");
        }
    }
    ProblemSchema s;
    for (const auto& field : kFields) {
        if (!inner.contains(field)) {
            throw ParseError("missing key \"" + field + "\"");
        }
    }
    s.broad_category = inner.at("broad_category").get<std::string>();
    s.refinement = inner.at("refinement").get<std::string>();
    s.specific_scope = inner.at("specific_scope").get<std::string>();
    s.goal = inner.at("goal").get<std::string>();
    s.summary = j.at("summary").get<std::string>();
    s.validate();
    return s;
}

/// S_x = R(x): build the template prompt, request a strict completion, parse.
inline ProblemSchema form_representation(const McqProblem& problem, Gateway& gateway) {
    ChatRequest req;
    req.model = gateway.chat_model();
    req.messages = build_schema_prompt(problem);
    req.response_format = schema_response_format();
    const ChatResponse resp = gateway.chat_complete(req);
    return parse_schema(resp.content);
}

/// Retrieval key text. summary mode returns the digest sentence; full mode
/// joins all five fields in template order.
inline std::string schema_key_text(const ProblemSchema& schema, KeyMode mode) {
    schema.validate();
    if (mode == KeyMode::summary) {
        return schema.summary;
    }
    return schema.broad_category + "\n" + schema.refinement + "\n" + schema.specific_scope + "\n" +
           schema.goal + "\n" + schema.summary;
}

// ---------------------------------------------------------------------------
// "#### Schema:" block rendering (conversation form of a schema)
// ---------------------------------------------------------------------------

inline std::string render_schema_block(const ProblemSchema& s) {
    return templates::substitute(templates::kSchemaBlock, {
                                                              {"broad_category", s.broad_category},
                                                              {"refinement", s.refinement},
                                                              {"specific_scope", s.specific_scope},
                                                              {"goal", s.goal},
                                                              {"summary", s.summary},
                                                          });
}

inline ProblemSchema parse_schema_block(const std::string& text) {
    static const std::vector<std::pair<std::string, std::string>> kHeadings{
        {"broad_category", "##### broad_category:"},
        {"refinement", "##### refinement:"},
        {"specific_scope", "##### specific_scope:"},
        {"goal", "##### goal:"},
        {"summary", "##### Summary:"},
    };
    std::vector<std::size_t> starts;
    for (const auto& [field, heading] : kHeadings) {
        const std::size_t pos = text.find(heading);
        if (pos == std::string::npos) {
            throw ActivationError("schema block is missing section \"" + heading + "\"");
        }
        starts.push_back(pos);
    }
    ProblemSchema s;
    std::vector<std::string> values;
    for (std::size_t i = 0; i < kHeadings.size(); ++i) {
        const std::size_t body_start = starts[i] + kHeadings[i].second.size();
        std::size_t body_end = text.size();
        for (std::size_t j = 0; j < kHeadings.size(); ++j) {
            if (starts[j] > starts[i]) {
                body_end = std::min(body_end, starts[j]);
            }
        }
        values.push_back(trim(text.substr(body_start, body_end - body_start)));
    }
    s.broad_category = values[0];
    s.refinement = values[1];
    s.specific_scope = values[2];
    s.goal = values[3];
    s.summary = values[4];
    try {
        s.validate();
    } catch (const ValidationError& e) {
        throw ActivationError(std::string("schema block has an empty section: ") + e.what());
    }
    return s;
}

}  // namespace sail
