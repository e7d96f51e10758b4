#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sail/common.hpp"
#include "sail/gateway.hpp"
#include "sail/templates.hpp"

namespace sail {

enum class SimilarityLevel { essentially_same, similar, different };

inline std::string to_string(SimilarityLevel level) {
    switch (level) {
        case SimilarityLevel::essentially_same: return "essentially_same";
        case SimilarityLevel::similar: return "similar";
        case SimilarityLevel::different: return "different";
    }
    throw Error("unreachable similarity level");
}

inline SimilarityLevel similarity_level_from_string(const std::string& s) {
    if (s == "essentially_same") return SimilarityLevel::essentially_same;
    if (s == "similar") return SimilarityLevel::similar;
    if (s == "different") return SimilarityLevel::different;
    throw ConfigError("unknown similarity level: " + s);
}

struct McqProblem {
    std::string question_id;
    std::string domain_tag;  // chemistry | physics | other
    std::string question;
    std::vector<std::string> options;
    std::string answer;
    std::optional<std::string> explanation;
    // set on synthetic variants
    std::optional<std::string> source_id;
    std::optional<std::string> similarity_level;

    void validate() const {
        if (question_id.empty()) {
            throw ValidationError("question_id is empty");
        }
        if (domain_tag != "chemistry" && domain_tag != "physics" && domain_tag != "other") {
            throw ValidationError("question " + question_id + ": domain_tag must be chemistry, physics or other");
        }
        if (options.size() != 4) {
            throw ValidationError("question " + question_id + ": exactly 4 options required, got " +
                                  std::to_string(options.size()));
        }
        std::set<std::string> distinct(options.begin(), options.end());
        if (distinct.size() != options.size()) {
            throw ValidationError("question " + question_id + ": options must be pairwise distinct");
        }
        if (distinct.count(answer) == 0) {
            throw ValidationError("question " + question_id + ": answer is not among the options");
        }
    }

    json to_json() const {
        json j{
            {"question_id", question_id}, {"domain_tag", domain_tag},
            {"question", question},       {"options", options},
            {"answer", answer},
        };
        if (explanation) j["explanation"] = *explanation;
        if (source_id) j["source_id"] = *source_id;
        if (similarity_level) j["similarity_level"] = *similarity_level;
        return j;
    }

    static McqProblem from_json(const json& j) {
        McqProblem p;
        p.question_id = j.at("question_id").get<std::string>();
        p.domain_tag = j.at("domain_tag").get<std::string>();
        p.question = j.at("question").get<std::string>();
        p.options = j.at("options").get<std::vector<std::string>>();
        p.answer = j.at("answer").get<std::string>();
        if (j.contains("explanation") && !j.at("explanation").is_null()) {
            p.explanation = j.at("explanation").get<std::string>();
        }
        if (j.contains("source_id")) p.source_id = j.at("source_id").get<std::string>();
        if (j.contains("similarity_level")) p.similarity_level = j.at("similarity_level").get<std::string>();
        return p;
    }
};

inline std::string render_problem(const McqProblem& p) {
    return templates::render_question_block(p.question, p.options);
}

// ---------------------------------------------------------------------------
// JSONL ingestion
// ---------------------------------------------------------------------------

inline std::vector<McqProblem> load_mcq(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::vector<McqProblem> problems;
    std::set<std::string> ids;
    std::size_t line_no = 0;
    for (const auto& line : split_lines(text)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": invalid JSON record: " + e.what());
        }
        McqProblem p;
        try {
            p = McqProblem::from_json(record);
            p.validate();
        } catch (const std::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!ids.insert(p.question_id).second) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": duplicate question_id " + p.question_id);
        }
        problems.push_back(std::move(p));
    }
    return problems;
}

inline void save_mcq(const std::vector<McqProblem>& problems, const std::filesystem::path& path) {
    std::string out;
    for (const auto& p : problems) {
        out += p.to_json().dump() + "\n";
    }
    write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Synthetic variant generation (three similarity levels)
// ---------------------------------------------------------------------------

inline std::string_view synthetic_template(SimilarityLevel level) {
    switch (level) {
        case SimilarityLevel::essentially_same: return templates::kSyntheticEssentiallySame;
        case SimilarityLevel::similar: return templates::kSyntheticSimilar;
        case SimilarityLevel::different: return templates::kSyntheticDifferent;
    }
    throw Error("unreachable similarity level");
}

inline std::vector<ChatMessage> build_synthetic_prompt(const McqProblem& source,
                                                       SimilarityLevel level) {
    if (!source.explanation || source.explanation->empty()) {
        throw PreconditionError("question " + source.question_id +
                                " has no explanation; synthetic templates interpolate it");
    }
    const std::string prompt = templates::substitute(
        synthetic_template(level), {
                                       {"question", source.question},
                                       {"answer", source.answer},
                                       {"explanation", *source.explanation},
                                       {"question_format", std::string(templates::kQuestionFormat)},
                                   });
    return {user_message(prompt)};
}

inline ResponseFormatSpec synthetic_response_format() {
    json schema{
        {"type", "object"},
        {"title", "SyntheticMcq"},
        {"properties",
         {{"question", {{"type", "string"}}},
          {"options",
           {{"type", "array"}, {"items", {{"type", "string"}}}, {"minItems", 4}, {"maxItems", 4}}},
          {"answer", {{"type", "string"}}},
          {"explanation", {{"type", "string"}}}}},
        {"required", {"question", "options", "answer", "explanation"}},
        {"additionalProperties", false},
    };
    return {"SyntheticMcq", true, std::move(schema)};
}

inline McqProblem generate_synthetic(const McqProblem& source, SimilarityLevel level,
                                     Gateway& gateway) {
    ChatRequest req;
    req.model = gateway.chat_model();
    req.messages = build_synthetic_prompt(source, level);
    req.response_format = synthetic_response_format();
    ChatResponse resp;
    try {
        resp = gateway.chat_complete(req);
    } catch (const SchemaViolationError& e) {
        throw GenerationError("synthetic generation for " + source.question_id + "." +
                              to_string(level) + " failed: " + e.what());
    }
    const json& v = *resp.parsed;
    McqProblem variant;
    variant.question_id = source.question_id + "." + to_string(level);
    variant.domain_tag = source.domain_tag;
    variant.question = v.at("question").get<std::string>();
    variant.options = v.at("options").get<std::vector<std::string>>();
    variant.answer = v.at("answer").get<std::string>();
    variant.explanation = v.at("explanation").get<std::string>();
    variant.source_id = source.question_id;
    variant.similarity_level = to_string(level);
    try {
        variant.validate();
    } catch (const ValidationError& e) {
        throw GenerationError(std::string("generated variant rejected: ") + e.what());
    }
    return variant;
}

}  // namespace sail
