#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sail/common.hpp"

namespace sail::templates {

// The prompt texts below are load-bearing protocol constants: the test suite
// byte-compares rendered prompts against the files under templates/, so any
// edit here must be mirrored there.

inline constexpr std::string_view kSchemaPrompt =
    R"TPL(Drawing on schema theory from cognitive psychology, think about a high-level abstraction (schema) of the problem to guide your reasoning. Your ultimate goal is to select the most appropriate answer.:

Below is the template for the schema you need to fill out:

Broad Category:
Identify the overarching subject and general category to which the problem belongs.

Refinement:
Describe further details or specific aspects that narrow down the broad category.

Specific Scope:
Define the precise focus or context of the problem within the refined category.

Goal:
Clearly state the objective or intended outcome of solving the problem.

Finally, summarize the schema in a few sentences to help students grasp the key points. The problem you need to abstract is as follows:
{problem})TPL";

// kept out of raw-string form: the "Candidates: " line ends in a significant
// trailing space
inline constexpr std::string_view kActivationEpisode =
    "Example Question:\n"
    "Question: {question}\n"
    "Candidates: \n"
    "1. {option_1}\n"
    "2. {option_2}\n"
    "3. {option_3}\n"
    "4. {option_4}\n"
    "Answer: The correct answer to this question is: {answer}";

inline constexpr std::string_view kSchemaBlock =
    R"TPL(#### Schema:
##### broad_category:
{broad_category}

##### refinement:
{refinement}

##### specific_scope:
{specific_scope}

##### goal:
{goal}

##### Summary:
{summary})TPL";

inline constexpr std::string_view kSchemaSectionHeading =
    "### Below is the schema and summary of this question: \n";

inline const char* kActivationClosing =
    "Now that you’ve refined your schema for the current question, select the most "
    "appropriate answer. ";

inline constexpr std::string_view kOneShotSystem =
    "Select the most appropriate answer. You will be shown a sample question with its correct answer.\n"
    "Then, answer a new question of the same type.";

inline constexpr std::string_view kZeroShotSystem = "Select the most appropriate answer.";

inline constexpr std::string_view kCotSuffix = "Please think step by step.";

inline constexpr std::string_view kSyntheticEssentiallySame =
    R"TPL(Consider answer({answer}) and the explanation of solving it({explanation}). this
question: {question}, along with its

Please generate a new question that is distinct from the previous question.

You should follow the following criteria:
- New question requires more knowledge than the provided explanation to be used to
answer it.
- New question should differ from the given question with a lot of distinctiveness.
- Generate a set of new options with only one of them being the correct option to
  the new question.
- Provide three incorrect options, which should be similar to the correct answer
- Provide a short explanation on how to solve the new question, and the additional
  knowledge required to answer the new question.
- Difficulty:
  The new question should be the similar difficulty to the previous question.
  If a student has the knowledge to answer the previous question, they should
  have partial knowledge to answer the new question.
  However, the new question should require additional knowledge than the given
  question's scope to be answered.
- Distinctiveness:
  The new question should be distinctive enough to the previous question, that
  the student require additional knowledge to solve the problem.
  New question should be unique in its context, and is related to the previous
  question in a minimal level.
- Output Format:
  {question_format})TPL";

inline constexpr std::string_view kSyntheticSimilar =
    R"TPL(Consider this question: {question}, along with its answer({answer}) and the
  explanation of solving it({explanation}).

Please give me a slightly different question from this example that test the
  student's ability to transform their knowledge.

You should follow the following criteria:
- The new question only requires the knowledge provided in the explanation to be
  used to answer it.
- New question should still differ with a lot of distinctiveness to test student's
  use of the same knowledge.
- Generate a set of new options with only one of them being the correct option to
  the new question
- Provide three incorrect options, which should be similar to the correct answer
- Provide a short explanation on how to solve the new question
- Difficulty:
  The new question should be the similar difficulty to the previous question.
  If a student has the knowledge to answer the previous question, they should
  have enough knowledge to answer the new question.
- Distinctiveness:
  The new question should be distinctive enough to the previous question, that
  the student cannot use the same answer.
  New question should be unique in its context, but still related to the previous
  question.
- Output Format:
  {question_format})TPL";

inline constexpr std::string_view kSyntheticDifferent =
    R"TPL(Consider this question: {question}, along with its answer({answer}) and the
  explanation of solving it({explanation}).

Please generate a new question that is distinct from the previous question.

You should follow the following criteria:

- New question requires more knowledge than the provided explanation to be used to answer it.
 - New question should differ from the given question with a lot of distinctiveness.
 - Generate a set of new options with only one of them being the correct option to the new question.
 - Provide three incorrect options, which should be similar to the correct answer
 - Provide a short explanation on how to solve the new question, and the additional knowledge required to answer the new question.
 - Difficulty:
 - The new question should be the similar difficulty to the previous question.
 - If a student has the knowledge to answer the previous question, they should have partial knowledge to answer the new question.
 - However, the new question should require additional knowledge than the given question's scope to be answered.
 - Distinctiveness:
 - The new question should be distinctive enough to the previous question, that the student require additional knowledge to solve the problem.
 - New question should be unique in its context, and is related to the previous question in a minimal level.
 - Output Format:
{question_format})TPL";

/// Output-format instruction interpolated at {question_format}.
inline constexpr std::string_view kQuestionFormat =
    "Return a JSON object with exactly these keys:\n"
    "{\"question\": str, \"options\": [str, str, str, str], \"answer\": str, \"explanation\": str}\n"
    "The value of \"answer\" must be exactly one of \"options\".";

/// Single left-to-right pass: each {name} found in `tpl` is replaced from the
/// map; substituted values are never rescanned, so placeholder-looking text
/// inside question bodies cannot trigger a second substitution.
inline std::string substitute(std::string_view tpl,
                              const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tpl.size());
    std::size_t pos = 0;
    while (pos < tpl.size()) {
        std::size_t open = tpl.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(tpl.substr(pos));
            break;
        }
        std::size_t close = tpl.find('}', open + 1);
        if (close == std::string_view::npos) {
            out.append(tpl.substr(pos));
            break;
        }
        const std::string name(tpl.substr(open + 1, close - open - 1));
        auto it = values.find(name);
        if (it == values.end()) {
            out.append(tpl.substr(pos, close + 1 - pos));
            pos = close + 1;
            continue;
        }
        out.append(tpl.substr(pos, open - pos));
        out.append(it->second);
        pos = close + 1;
    }
    return out;
}

/// "Question: ...\nCandidates: \n1. ..." rendering shared by every prompt
/// that shows a problem.
inline std::string render_question_block(const std::string& question,
                                         const std::vector<std::string>& options) {
    std::string out = "Question: " + question + "\nCandidates: ";
    for (std::size_t i = 0; i < options.size(); ++i) {
        out += "\n" + std::to_string(i + 1) + ". " + options[i];
    }
    return out;
}

/// Loads a golden template file: drops leading "%%" metadata lines and one
/// trailing newline, yielding the exact template bytes.
inline std::string load_golden(const std::filesystem::path& path) {
    std::string raw = read_file(path);
    std::size_t content_start = 0;
    while (content_start < raw.size() && raw.compare(content_start, 2, "%%") == 0) {
        std::size_t nl = raw.find('\n', content_start);
        if (nl == std::string::npos) {
            content_start = raw.size();
            break;
        }
        content_start = nl + 1;
    }
    std::string body = raw.substr(content_start);
    if (!body.empty() && body.back() == '\n') {
        body.pop_back();
    }
    return body;
}

}  // namespace sail::templates
