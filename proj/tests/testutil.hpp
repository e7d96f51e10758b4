#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include <unistd.h>

#include "sail/sail.hpp"

namespace testutil {

inline std::filesystem::path templates_dir() { return SAIL_TEMPLATES_DIR; }
inline std::filesystem::path golden_dir() { return SAIL_GOLDEN_DIR; }
inline std::filesystem::path data_dir() { return SAIL_DATA_DIR; }

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("sail_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Offline gateway with an isolated cache.
inline std::unique_ptr<sail::Gateway> mock_gateway(std::uint64_t seed,
                                                   const std::filesystem::path& cache_dir = {}) {
    return std::make_unique<sail::Gateway>(sail::GatewayConfig::offline(seed, cache_dir));
}

/// The Appendix-F fixture pair: the worked example and its close variant.
inline sail::McqProblem fixture_example_problem() {
    sail::McqProblem p;
    p.question_id = "fixture.cinnamaldehyde.example";
    p.domain_tag = "chemistry";
    p.question =
        "Trans-cinnamaldehyde undergoes a reaction with methylmagnesium bromide to yield "
        "compound 1. Compound 1 is then oxidized using pyridinium chlorochromate to form "
        "compound 2. Subsequently, compound 2 reacts with (dimethyl(oxo)-λ6-"
        "sulfaneylidene)methane in DMSO at high temperature to produce compound 3. How many "
        "carbon atoms are present in compound 3?";
    p.options = {"12", "10", "9", "11"};
    p.answer = "11";
    p.explanation =
        "Grignard addition adds one carbon, PCC oxidation changes none, and the sulfur ylide "
        "methylene transfer adds one more, giving 11 carbons.";
    return p;
}

inline sail::McqProblem fixture_target_problem() {
    sail::McqProblem p;
    p.question_id = "fixture.cinnamaldehyde.target";
    p.domain_tag = "chemistry";
    p.question =
        "trans-cinnamaldehyde was treated with methylmagnesium bromide, forming product 1.\n\n"
        "1 was treated with pyridinium chlorochromate, forming product 2.\n\n"
        "3 was treated with (dimethyl(oxo)-l6-sulfaneylidene)methane in DMSO at elevated "
        "temperature, forming product 3.\n\nhow many carbon atoms are there in product 3?";
    p.options = {"14", "12", "10", "11"};
    p.answer = "11";
    return p;
}

/// The prior schema shown in the published activation conversation.
inline sail::ProblemSchema fixture_prior_schema() {
    sail::ProblemSchema s;
    s.broad_category = "Chemistry → Organic Chemistry → Reaction Mechanisms";
    s.refinement =
        "This problem involves a series of organic reactions including Grignard reactions, "
        "oxidation, and a reaction with a sulfonyl compound.";
    s.specific_scope =
        "The focus is on determining the number of carbon atoms in the final product (compound "
        "3) after a sequence of reactions starting from trans-cinnamaldehyde.";
    s.goal =
        "Calculate the total number of carbon atoms in compound 3 after all specified reactions "
        "have been completed.";
    s.summary =
        "This problem involves a series of organic reactions that transform trans-cinnamaldehyde "
        "through various steps, including a Grignard reaction, oxidation, and a reaction with a "
        "sulfonyl compound. The objective is to determine the number of carbon atoms in the "
        "final product, compound 3. By analyzing the reactions and counting the carbon atoms at "
        "each stage, we find that compound 3 contains 11 carbon atoms.";
    return s;
}

inline sail::ProblemSchema dummy_schema(const std::string& tag) {
    return {"Category " + tag, "Refinement " + tag, "Scope " + tag, "Goal " + tag,
            "Summary " + tag + "."};
}

inline sail::EpisodicTrace dummy_trace(const std::string& id) {
    sail::EpisodicTrace t;
    t.trace_id = id;
    t.question = "Question body for " + id + "?";
    t.options = {"alpha " + id, "beta " + id, "gamma " + id, "delta " + id};
    t.answer = t.options[1];
    t.explanation = "Because " + id + ".";
    t.domain_tag = "other";
    return t;
}

inline sail::McqProblem dummy_problem(const std::string& id) {
    sail::McqProblem p;
    p.question_id = id;
    p.domain_tag = "other";
    p.question = "Question body for " + id + "?";
    p.options = {"alpha " + id, "beta " + id, "gamma " + id, "delta " + id};
    p.answer = p.options[1];
    p.explanation = "Because " + id + ".";
    return p;
}

}  // namespace testutil
