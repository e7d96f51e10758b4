#include <catch2/catch_amalgamated.hpp>

#include "testutil.hpp"

using namespace sail;
using testutil::TempDir;

TEST_CASE("load_mcq validates records and reports line numbers") {
    TempDir dir("mcq");
    const McqProblem good = testutil::dummy_problem("ok1");

    json bad_answer = testutil::dummy_problem("bad1").to_json();
    bad_answer["answer"] = "not an option";
    write_file(dir.path() / "bad_answer.jsonl",
               good.to_json().dump() + "\n" + bad_answer.dump() + "\n");
    CHECK_THROWS_WITH(load_mcq(dir.path() / "bad_answer.jsonl"),
                      Catch::Matchers::ContainsSubstring(":2:"));

    json three = testutil::dummy_problem("bad2").to_json();
    three["options"] = {"a", "b", "c"};
    three["answer"] = "a";
    write_file(dir.path() / "three.jsonl", three.dump() + "\n");
    CHECK_THROWS_WITH(load_mcq(dir.path() / "three.jsonl"),
                      Catch::Matchers::ContainsSubstring("4 options"));

    write_file(dir.path() / "dup.jsonl", good.to_json().dump() + "\n" + good.to_json().dump() + "\n");
    CHECK_THROWS_WITH(load_mcq(dir.path() / "dup.jsonl"),
                      Catch::Matchers::ContainsSubstring("duplicate question_id"));

    write_file(dir.path() / "garbled.jsonl", "{oops\n");
    CHECK_THROWS_AS(load_mcq(dir.path() / "garbled.jsonl"), ParseError);

    std::string ok;
    for (int i = 0; i < 5; ++i) {
        ok += testutil::dummy_problem("q" + std::to_string(i)).to_json().dump() + "\n";
    }
    write_file(dir.path() / "ok.jsonl", ok);
    const auto problems = load_mcq(dir.path() / "ok.jsonl");
    CHECK(problems.size() == 5);
}

TEST_CASE("dataset save/load round-trips") {
    TempDir dir("mcq_rt");
    std::vector<McqProblem> problems;
    for (int i = 0; i < 7; ++i) {
        McqProblem p = testutil::dummy_problem("rt" + std::to_string(i));
        if (i % 2 == 0) {
            p.source_id = "origin" + std::to_string(i);
            p.similarity_level = "similar";
        }
        problems.push_back(p);
    }
    save_mcq(problems, dir.path() / "set.jsonl");
    const auto loaded = load_mcq(dir.path() / "set.jsonl");
    REQUIRE(loaded.size() == problems.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].to_json() == problems[i].to_json());
    }
}

TEST_CASE("synthetic prompts match the golden templates per level") {
    const McqProblem source = testutil::fixture_example_problem();
    const std::map<SimilarityLevel, std::string> files{
        {SimilarityLevel::essentially_same, "synthetic_essentially_same.txt"},
        {SimilarityLevel::similar, "synthetic_similar.txt"},
        {SimilarityLevel::different, "synthetic_different.txt"},
    };
    for (const auto& [level, file] : files) {
        const auto messages = build_synthetic_prompt(source, level);
        REQUIRE(messages.size() == 1);
        CHECK(messages[0].role == Role::user);
        const std::string expected = templates::substitute(
            templates::load_golden(testutil::templates_dir() / file),
            {{"question", source.question},
             {"answer", source.answer},
             {"explanation", *source.explanation},
             {"question_format", std::string(templates::kQuestionFormat)}});
        CHECK(messages[0].content == expected);
        CHECK(contains(messages[0].content, "Output Format:"));
    }

    CHECK(contains(build_synthetic_prompt(source, SimilarityLevel::similar)[0].content,
                   "slightly different question from this example"));
    CHECK(contains(build_synthetic_prompt(source, SimilarityLevel::essentially_same)[0].content,
                   "generate a new question that is distinct"));

    McqProblem no_explanation = source;
    no_explanation.explanation.reset();
    CHECK_THROWS_AS(build_synthetic_prompt(no_explanation, SimilarityLevel::similar),
                    PreconditionError);
}

TEST_CASE("generate_synthetic produces validated, deterministic variants") {
    TempDir dir("synth");
    auto gw = testutil::mock_gateway(19, dir.path());
    const McqProblem source = testutil::fixture_example_problem();

    std::set<std::string> ids;
    for (const auto level :
         {SimilarityLevel::essentially_same, SimilarityLevel::similar, SimilarityLevel::different}) {
        const McqProblem variant = generate_synthetic(source, level, *gw);
        CHECK(variant.question_id == source.question_id + "." + to_string(level));
        CHECK(variant.source_id == source.question_id);
        CHECK(variant.similarity_level == to_string(level));
        CHECK(variant.domain_tag == source.domain_tag);
        CHECK_NOTHROW(variant.validate());  // answer in options, 4 distinct
        ids.insert(variant.question_id);

        // fixed per (source, level): regeneration is byte-identical
        const McqProblem again = generate_synthetic(source, level, *gw);
        CHECK(again.to_json() == variant.to_json());
    }
    CHECK(ids.size() == 3);  // injective over (source, level)

    // a different source yields a different variant id and content
    const McqProblem other =
        generate_synthetic(testutil::dummy_problem("other"), SimilarityLevel::similar, *gw);
    CHECK(ids.count(other.question_id) == 0);
}

TEST_CASE("unusable generation replies are reported as generation errors") {
    auto gw = testutil::mock_gateway(4);
    class JunkTransport final : public Transport {
    public:
        json post(const std::string&, const json&) override {
            return json{{"choices",
                         json::array({{{"message",
                                        {{"role", "assistant"}, {"content", "no json here"}}}}})},
                        {"usage", {{"completion_tokens", 2}}}};
        }
    };
    gw->set_transport(BackendKind::chat, std::make_shared<JunkTransport>());
    CHECK_THROWS_AS(
        generate_synthetic(testutil::fixture_example_problem(), SimilarityLevel::similar, *gw),
        GenerationError);
}
