#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "testutil.hpp"

using namespace sail;
using testutil::TempDir;

TEST_CASE("schema prompt is the golden template with the problem substituted") {
    const McqProblem problem = testutil::fixture_target_problem();
    const auto messages = build_schema_prompt(problem);
    REQUIRE(messages.size() == 1);
    CHECK(messages[0].role == Role::user);

    const std::string golden = templates::load_golden(testutil::templates_dir() / "schema_prompt.txt");
    const std::string expected =
        templates::substitute(golden, {{"problem", render_problem(problem)}});
    CHECK(messages[0].content == expected);

    CHECK(contains(messages[0].content, "Broad Category:"));
    CHECK(contains(messages[0].content, "Refinement:"));
    CHECK(contains(messages[0].content, "Specific Scope:"));
    CHECK(contains(messages[0].content, "Goal:"));

    // deterministic and verbatim: problem text appears exactly once
    CHECK(build_schema_prompt(problem)[0].content == messages[0].content);
    CHECK(count_occurrences(messages[0].content, problem.question) == 1);
}

TEST_CASE("parse_schema accepts the documented wire shape") {
    const json wire{
        {"schema",
         {{"broad_category", "Chemistry"},
          {"refinement", "Organic reaction sequences"},
          {"specific_scope", "Carbon counting"},
          {"goal", "Count the carbons"}}},
        {"summary", "A carbon accounting problem."},
    };
    const ProblemSchema s = parse_schema(wire.dump());
    CHECK(s.broad_category == "Chemistry");
    CHECK(s.refinement == "Organic reaction sequences");
    CHECK(s.specific_scope == "Carbon counting");
    CHECK(s.goal == "Count the carbons");
    CHECK(s.summary == "A carbon accounting problem.");
}

TEST_CASE("parse_schema is strict") {
    json missing_goal{
        {"schema",
         {{"broad_category", "a"}, {"refinement", "b"}, {"specific_scope", "c"}}},
        {"summary", "s"},
    };
    CHECK_THROWS_WITH(parse_schema(missing_goal.dump()),
                      Catch::Matchers::ContainsSubstring("goal"));

    json extra_key{
        {"schema",
         {{"broad_category", "a"},
          {"refinement", "b"},
          {"specific_scope", "c"},
          {"goal", "d"},
          {"difficulty", "hard"}}},
        {"summary", "s"},
    };
    CHECK_THROWS_AS(parse_schema(extra_key.dump()), ParseError);

    json extra_top{
        {"schema",
         {{"broad_category", "a"}, {"refinement", "b"}, {"specific_scope", "c"}, {"goal", "d"}}},
        {"summary", "s"},
        {"difficulty", "hard"},
    };
    CHECK_THROWS_AS(parse_schema(extra_top.dump()), ParseError);

    json empty_field{
        {"schema",
         {{"broad_category", ""}, {"refinement", "b"}, {"specific_scope", "c"}, {"goal", "d"}}},
        {"summary", "s"},
    };
    CHECK_THROWS_AS(parse_schema(empty_field.dump()), ValidationError);

    CHECK_THROWS_AS(parse_schema("not json at all"), ParseError);
}

TEST_CASE("parse_schema inverts the wire rendering") {
    std::mt19937_64 rng(404);
    for (int i = 0; i < 100; ++i) {
        const ProblemSchema s = testutil::dummy_schema("rt" + std::to_string(rng() % 10000));
        CHECK(parse_schema(schema_wire_json(s).dump()) == s);
    }
}

TEST_CASE("form_representation obeys the mock contract and the cache") {
    TempDir dir("rep");
    auto gw = testutil::mock_gateway(42, dir.path());
    const McqProblem problem = testutil::dummy_problem("rep1");

    const ProblemSchema first = form_representation(problem, *gw);
    first.validate();

    // oracle: replay the mock transport by hand and parse its fixed object
    MockTransport mock(42);
    ChatRequest req;
    req.model = "mock-chat";
    req.messages = build_schema_prompt(problem);
    req.response_format = schema_response_format();
    const json raw = mock.post("/chat/completions", build_chat_body(req));
    const ProblemSchema oracle =
        parse_schema(raw.at("choices").at(0).at("message").at("content").get<std::string>());
    CHECK(first == oracle);

    CHECK(form_representation(problem, *gw) == first);  // cached, identical

    // a different problem yields a different mock schema
    CHECK_FALSE(form_representation(testutil::dummy_problem("rep2"), *gw) == first);
}

TEST_CASE("non-JSON schema completions surface as schema violations") {
    auto gw = testutil::mock_gateway(5);
    class BadTransport final : public Transport {
    public:
        json post(const std::string&, const json&) override {
            return json{{"choices",
                         json::array({{{"message",
                                        {{"role", "assistant"}, {"content", "{ not json"}}}}})},
                        {"usage", {{"completion_tokens", 1}}}};
        }
    };
    gw->set_transport(BackendKind::chat, std::make_shared<BadTransport>());
    CHECK_THROWS_AS(form_representation(testutil::dummy_problem("bad"), *gw), SchemaViolationError);
}

TEST_CASE("schema_key_text selects summary or the full template order") {
    const ProblemSchema s = testutil::fixture_prior_schema();
    CHECK(schema_key_text(s, KeyMode::summary) == s.summary);

    const std::string full = schema_key_text(s, KeyMode::full);
    const std::vector<std::string> fields{s.broad_category, s.refinement, s.specific_scope, s.goal,
                                          s.summary};
    std::size_t last = 0;
    for (const auto& f : fields) {
        const auto pos = full.find(f);
        REQUIRE(pos != std::string::npos);
        CHECK(pos >= last);
        last = pos;
    }
    CHECK(schema_key_text(s, KeyMode::full) == full);  // deterministic
}

TEST_CASE("schema block rendering round-trips") {
    const ProblemSchema s = testutil::fixture_prior_schema();
    const std::string block = render_schema_block(s);
    CHECK(contains(block, "##### broad_category:"));
    CHECK(parse_schema_block(block) == s);

    CHECK_THROWS_AS(parse_schema_block("#### Schema:\nno sections here"), ActivationError);
}
