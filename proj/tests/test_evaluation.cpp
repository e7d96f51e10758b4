#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "testutil.hpp"

using namespace sail;
using testutil::TempDir;

namespace {

SolveRecord record_with(bool correct, std::size_t tokens = 100) {
    SolveRecord r;
    r.question_id = "q";
    r.correct = correct;
    r.completion_tokens = tokens;
    return r;
}

}  // namespace

TEST_CASE("accuracy is correct over total") {
    std::vector<SolveRecord> records;
    for (int i = 0; i < 10; ++i) {
        records.push_back(record_with(i < 6));
    }
    CHECK(accuracy(records) == 0.6);

    CHECK(accuracy({record_with(true), record_with(true)}) == 1.0);
    CHECK(accuracy({record_with(false), record_with(false)}) == 0.0);
    CHECK_THROWS_AS(accuracy({}), PreconditionError);
}

TEST_CASE("majority correctness over odd trial counts") {
    CHECK(majority_correctness({true, true, false}));
    CHECK_FALSE(majority_correctness({false, false, true}));
    CHECK(majority_correctness({true}));
    CHECK_THROWS_AS(majority_correctness({true, false}), ConfigError);
    CHECK_THROWS_AS(majority_correctness({}), ConfigError);
}

TEST_CASE("the published trial pattern collapses to 10/10 vs 6/10") {
    // per-question majorities for the ten-question token-count table
    const std::vector<std::vector<bool>> sa_icl(10, {true, true, true});
    const std::vector<std::vector<bool>> one_shot{
        {false, false, false}, {true, true, true}, {true, true, true}, {false, false, false},
        {true, true, true},    {true, true, true}, {true, true, true}, {false, false, false},
        {false, false, false}, {true, true, true},
    };
    std::size_t sa_total = 0;
    std::size_t os_total = 0;
    for (int i = 0; i < 10; ++i) {
        if (majority_correctness(sa_icl[i])) ++sa_total;
        if (majority_correctness(one_shot[i])) ++os_total;
    }
    CHECK(sa_total == 10);
    CHECK(os_total == 6);
}

TEST_CASE("win rate counts strict wins; ties are reported separately") {
    // transcribed accuracy grid, Essentially Same column (six models)
    const std::vector<WinRateCell> essentially_same{
        {0.763, 0.581}, {0.892, 0.495}, {0.946, 0.688},
        {0.925, 0.656}, {0.882, 0.731}, {0.796, 0.538},
    };
    CHECK(win_rate(essentially_same).rate == 1.0);

    // latent Low column: three wins, three losses
    const std::vector<WinRateCell> latent_low{
        {0.516, 0.624}, {0.376, 0.473}, {0.441, 0.613},
        {0.828, 0.699}, {0.860, 0.656}, {0.484, 0.409},
    };
    CHECK(win_rate(latent_low).rate == 0.5);

    const std::vector<WinRateCell> all_ties{{0.5, 0.5}, {0.7, 0.7}};
    const WinRateSummary ties = win_rate(all_ties);
    CHECK(ties.rate == 0.0);
    CHECK(ties.ties == 2);
    CHECK(ties.cells == 2);

    CHECK_THROWS_AS(win_rate({}), PreconditionError);
}

TEST_CASE("win rate equals an exhaustive cell scan for random tables") {
    std::mt19937_64 rng(4242);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<WinRateCell> cells;
        const std::size_t n = 1 + rng() % 20;
        for (std::size_t i = 0; i < n; ++i) {
            cells.push_back({static_cast<double>(rng() % 11) / 10.0,
                             static_cast<double>(rng() % 11) / 10.0});
        }
        const WinRateSummary s = win_rate(cells);
        std::size_t wins = 0;
        std::size_t ties = 0;
        for (const auto& c : cells) {
            if (c.sa_icl > c.baseline) ++wins;
            if (c.sa_icl == c.baseline) ++ties;
        }
        REQUIRE(s.wins == wins);
        REQUIRE(s.ties == ties);
        REQUIRE(s.rate == static_cast<double>(wins) / static_cast<double>(n));
        CHECK(s.rate >= 0.0);
        CHECK(s.rate <= 1.0);
    }
}

TEST_CASE("probability buckets honor the >= boundaries") {
    CHECK(prob_bucket(std::exp(0.0)) == ProbBucket::green);        // logprob 0 -> p = 1.0
    CHECK(prob_bucket(std::exp(-0.693147)) == ProbBucket::yellow); // p just above 0.5
    CHECK(prob_bucket(0.9) == ProbBucket::green);
    CHECK(prob_bucket(0.5) == ProbBucket::yellow);
    CHECK(prob_bucket(0.49) == ProbBucket::red);
}

TEST_CASE("logprob reports render tokens, alternatives and the unavailable marker") {
    SolveRecord r;
    r.question_id = "q1";
    r.mode = Mode::sa_icl;
    r.final_answer = "11";
    r.correct = true;
    r.completion_tokens = 2;
    r.token_logprobs = {
        {"Hello ", 0.0, {{"Hello ", 0.0}, {"Hi ", -1.2}}},
        {"world", -0.693147, {{"world", -0.693147}, {"earth", -1.4}}},
        {"!", -0.8, {{"!", -0.8}, {"?", -1.6}}},
    };
    SolveRecord bare;
    bare.question_id = "q2";
    bare.mode = Mode::one_shot;
    bare.final_answer = "12";

    const std::string ansi = logprob_report_ansi({r, bare});
    CHECK(contains(ansi, "\x1b[32mHello "));  // p = 1.0 -> green
    CHECK(contains(ansi, "\x1b[33mworld"));   // p = exp(-0.693147) ~ 0.5000001 -> yellow
    CHECK(contains(ansi, "\x1b[31m!"));       // p = exp(-0.8) ~ 0.449 -> red
    CHECK(contains(ansi, "logprobs unavailable"));

    const std::string html = logprob_report_html({r, bare});
    CHECK(contains(html, "<!DOCTYPE html>"));
    CHECK(contains(html, "Hello "));
    CHECK(contains(html, "logprobs unavailable"));
    // alternatives appear in descending probability order inside the tooltip
    const auto hi = html.find("Hi ");
    const auto hello = html.find("Hello ");
    CHECK(hello < hi);
}

TEST_CASE("token count table gives trial means in the published shape") {
    std::vector<SolveRecord> records;
    for (const std::size_t tokens : {100, 110, 120}) {
        SolveRecord r = record_with(true, tokens);
        r.question_id = "q1";
        r.mode = Mode::sa_icl;
        records.push_back(r);
    }
    SolveRecord single = record_with(false, 55);
    single.question_id = "q1";
    single.mode = Mode::one_shot;
    records.push_back(single);

    const auto rows = token_count_table(records);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].question_id == "q1");
    CHECK(rows[0].by_mode.at("sa_icl").mean_tokens == 110.0);
    CHECK(rows[0].by_mode.at("sa_icl").majority_correct);
    CHECK(rows[0].by_mode.at("one_shot").mean_tokens == 55.0);
    CHECK_FALSE(rows[0].by_mode.at("one_shot").majority_correct);

    const std::string csv = token_count_csv(rows, {"sa_icl", "one_shot"});
    CHECK(split_lines(csv)[0] == "question_id,sa_icl_tokens,sa_icl_correct,one_shot_tokens,one_shot_correct");
    CHECK(contains(csv, "q1,110,1,55,0"));
}

namespace {

/// Writes a four-question dataset plus essentially-same variants to disk.
std::pair<std::filesystem::path, std::filesystem::path> write_fixture_dataset(
    const std::filesystem::path& dir) {
    std::vector<McqProblem> targets;
    std::vector<McqProblem> variants;
    for (int i = 0; i < 4; ++i) {
        McqProblem p = testutil::dummy_problem("exp_q" + std::to_string(i));
        targets.push_back(p);
        McqProblem v = testutil::dummy_problem("exp_q" + std::to_string(i) + ".essentially_same");
        v.source_id = p.question_id;
        v.similarity_level = "essentially_same";
        variants.push_back(v);
    }
    const auto dataset = dir / "targets.jsonl";
    const auto examples = dir / "examples.jsonl";
    save_mcq(targets, dataset);
    save_mcq(variants, examples);
    return {dataset, examples};
}

ExperimentConfig fixture_config(const std::filesystem::path& dataset,
                                const std::filesystem::path& examples) {
    ExperimentConfig cfg;
    cfg.dataset = dataset.string();
    cfg.examples = examples.string();
    cfg.modes = {Mode::sa_icl, Mode::one_shot};
    cfg.condition = ConditionSpec::parse("synthetic:essentially_same");
    cfg.trials_per_question = 3;
    cfg.seed = 7;
    cfg.mock = true;
    return cfg;
}

}  // namespace

TEST_CASE("run_experiment is deterministic and fully populated") {
    TempDir dir("exp");
    const auto [dataset, examples] = write_fixture_dataset(dir.path());
    const ExperimentConfig cfg = fixture_config(dataset, examples);

    auto gw1 = make_gateway(cfg, dir.path() / "cache1");
    const RunReport a = run_experiment(cfg, *gw1);
    auto gw2 = make_gateway(cfg, dir.path() / "cache2");
    const RunReport b = run_experiment(cfg, *gw2);

    CHECK(a.to_json().dump() == b.to_json().dump());
    CHECK(a.run_id == b.run_id);

    // two modes -> two accuracy rows; 4 questions x 2 modes x 3 trials records
    CHECK(a.per_mode.size() == 2);
    CHECK(a.records.size() == 4 * 2 * 3);
    std::map<std::pair<std::string, std::string>, std::size_t> cell_counts;
    std::set<std::tuple<std::string, std::string, std::size_t>> triples;
    for (const auto& r : a.records) {
        cell_counts[{r.question_id, to_string(r.mode)}]++;
        CHECK(triples.insert({r.question_id, to_string(r.mode), r.trial}).second);
    }
    for (const auto& [key, n] : cell_counts) {
        CHECK(n == 3);  // three records per (question, mode)
    }

    // the report carries one win row per baseline
    REQUIRE(a.win_rows.size() == 1);
    CHECK(a.win_rows[0].baseline == Mode::one_shot);

    for (const auto& m : a.per_mode) {
        CHECK(m.accuracy >= 0.0);
        CHECK(m.accuracy <= 1.0);
        CHECK(m.questions == 4);
    }
}

TEST_CASE("run_experiment records per-question failures without aborting") {
    TempDir dir("expfail");
    const auto [dataset, examples] = write_fixture_dataset(dir.path());

    // drop one variant so that target has no example at the requested level
    auto variants = load_mcq(examples);
    variants.pop_back();
    save_mcq(variants, examples);

    ExperimentConfig cfg = fixture_config(dataset, examples);
    cfg.trials_per_question = 1;
    auto gw = make_gateway(cfg, dir.path() / "cache");
    const RunReport report = run_experiment(cfg, *gw);

    CHECK(report.records.size() == 4 * 2);
    std::size_t failures = 0;
    for (const auto& r : report.records) {
        if (!r.failed_stage.empty()) {
            ++failures;
            CHECK_FALSE(r.correct);
        }
    }
    CHECK(failures >= 1);       // the one_shot cell without an example
    CHECK_FALSE(report.log.empty());
}

TEST_CASE("experiment config snapshot round-trips and validates") {
    ExperimentConfig cfg;
    cfg.dataset = "d.jsonl";
    cfg.examples = "e.jsonl";
    cfg.modes = {Mode::sa_icl, Mode::one_shot_cot};
    cfg.condition = ConditionSpec::parse("latent:medium");
    cfg.trials_per_question = 3;
    cfg.tau = 0.75;
    cfg.lambda = 0.1;
    cfg.retrieval = RetrievalMethod::rerank;
    cfg.key_mode = KeyMode::full;
    cfg.seed = 42;
    cfg.mock = true;
    cfg.shuffle_options = 9;

    const ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());

    ExperimentConfig even = cfg;
    even.trials_per_question = 2;
    CHECK_THROWS_AS(even.validate(), ConfigError);

    ExperimentConfig missing_examples = cfg;
    missing_examples.examples.clear();
    CHECK_THROWS_AS(missing_examples.validate(), ConfigError);

    ExperimentConfig bad_condition;
    bad_condition.dataset = "d.jsonl";
    bad_condition.modes = {Mode::one_shot};
    CHECK_THROWS_AS(bad_condition.validate(), ConfigError);

    CHECK_THROWS_AS(ConditionSpec::parse("sideways:high"), ConfigError);
}

TEST_CASE("option shuffling is deterministic per (seed, question)") {
    const std::vector<std::string> options{"a", "b", "c", "d"};
    const auto s1 = shuffled_options(options, 5, "q1");
    CHECK(s1 == shuffled_options(options, 5, "q1"));
    CHECK(std::set<std::string>(s1.begin(), s1.end()) ==
          std::set<std::string>(options.begin(), options.end()));
    // different seeds disagree somewhere across a handful of questions
    bool any_diff = false;
    for (int i = 0; i < 8; ++i) {
        const std::string id = "q" + std::to_string(i);
        any_diff = any_diff || shuffled_options(options, 5, id) != shuffled_options(options, 6, id);
    }
    CHECK(any_diff);
}
