#pragma once

#include <algorithm>
#include <ctime>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sail/common.hpp"
#include "sail/dataset.hpp"
#include "sail/density.hpp"
#include "sail/evaluation.hpp"
#include "sail/gateway.hpp"
#include "sail/memory.hpp"
#include "sail/retrieval.hpp"
#include "sail/solver.hpp"

namespace sail {

struct ConditionSpec {
    enum class Type { none, synthetic, latent };
    Type type = Type::none;
    SimilarityLevel level = SimilarityLevel::essentially_same;
    LatentBin bin = LatentBin::high;

    std::string to_string() const {
        switch (type) {
            case Type::none: return "none";
            case Type::synthetic: return "synthetic:" + sail::to_string(level);
            case Type::latent: return "latent:" + sail::to_string(bin);
        }
        throw Error("unreachable condition type");
    }

    static ConditionSpec parse(const std::string& text) {
        ConditionSpec c;
        if (text.empty() || text == "none") {
            return c;
        }
        const auto colon = text.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("condition must be synthetic:<level> or latent:<bin>, got " + text);
        }
        const std::string kind = text.substr(0, colon);
        const std::string value = text.substr(colon + 1);
        if (kind == "synthetic") {
            c.type = Type::synthetic;
            c.level = similarity_level_from_string(value);
        } else if (kind == "latent") {
            c.type = Type::latent;
            c.bin = latent_bin_from_string(value);
        } else {
            throw ConfigError("unknown condition kind: " + kind);
        }
        return c;
    }
};

struct ExperimentConfig {
    std::string dataset;
    std::string examples;  // knowledge pool jsonl; empty when a store is given
    std::string store;     // prebuilt store json
    std::vector<Mode> modes;
    ConditionSpec condition;
    int trials_per_question = 1;
    double tau = 1.0;
    double lambda = 0.0;
    RetrievalMethod retrieval = RetrievalMethod::cosine;
    KeyMode key_mode = KeyMode::summary;
    std::uint64_t seed = 0;
    bool mock = false;
    double theta_a = 0.85;
    std::optional<std::uint64_t> shuffle_options;
    bool allow_self_match = false;
    std::size_t k_max = kDefaultKMax;
    bool accumulate = false;
    std::string chat_model;
    std::string embed_model;
    std::string rerank_model;

    void validate() const {
        if (dataset.empty()) {
            throw ConfigError("a dataset path is required");
        }
        if (modes.empty()) {
            throw ConfigError("at least one mode is required");
        }
        if (trials_per_question < 1 || trials_per_question % 2 == 0) {
            throw ConfigError("trials_per_question must be a positive odd number");
        }
        if (tau < 0.0 || tau > 1.0) {
            throw ConfigError("tau must be in [0, 1]");
        }
        if (lambda < 0.0) {
            throw ConfigError("lambda must be >= 0");
        }
        const bool needs_example =
            std::any_of(modes.begin(), modes.end(), [](Mode m) {
                return m == Mode::one_shot || m == Mode::one_shot_cot ||
                       m == Mode::example_schema_only;
            });
        if (needs_example && condition.type == ConditionSpec::Type::none) {
            throw ConfigError("the requested modes need an example; set --condition");
        }
        const bool needs_store =
            std::any_of(modes.begin(), modes.end(), [](Mode m) { return m == Mode::sa_icl; }) ||
            condition.type != ConditionSpec::Type::none;
        if (needs_store && examples.empty() && store.empty()) {
            throw ConfigError("provide --examples or --store for the requested modes/condition");
        }
    }

    json to_json() const {
        json modes_json = json::array();
        for (const auto m : modes) {
            modes_json.push_back(sail::to_string(m));
        }
        json j{
            {"dataset", dataset},
            {"examples", examples},
            {"store", store},
            {"modes", modes_json},
            {"condition", condition.to_string()},
            {"trials_per_question", trials_per_question},
            {"tau", tau},
            {"lambda", lambda},
            {"retrieval", sail::to_string(retrieval)},
            {"key_mode", sail::to_string(key_mode)},
            {"seed", seed},
            {"mock", mock},
            {"theta_a", theta_a},
            {"allow_self_match", allow_self_match},
            {"k_max", k_max},
            {"accumulate", accumulate},
            {"chat_model", chat_model},
            {"embed_model", embed_model},
            {"rerank_model", rerank_model},
        };
        j["shuffle_options"] = shuffle_options ? json(*shuffle_options) : json(nullptr);
        return j;
    }

    static ExperimentConfig from_json(const json& j) {
        ExperimentConfig c;
        c.dataset = j.at("dataset").get<std::string>();
        c.examples = j.value("examples", "");
        c.store = j.value("store", "");
        for (const auto& m : j.at("modes")) {
            c.modes.push_back(mode_from_string(m.get<std::string>()));
        }
        c.condition = ConditionSpec::parse(j.value("condition", "none"));
        c.trials_per_question = j.value("trials_per_question", 1);
        c.tau = j.value("tau", 1.0);
        c.lambda = j.value("lambda", 0.0);
        c.retrieval = retrieval_method_from_string(j.value("retrieval", "cosine"));
        c.key_mode = key_mode_from_string(j.value("key_mode", "summary"));
        c.seed = j.value("seed", 0ULL);
        c.mock = j.value("mock", false);
        c.theta_a = j.value("theta_a", 0.85);
        if (j.contains("shuffle_options") && !j.at("shuffle_options").is_null()) {
            c.shuffle_options = j.at("shuffle_options").get<std::uint64_t>();
        }
        c.allow_self_match = j.value("allow_self_match", false);
        c.k_max = j.value("k_max", kDefaultKMax);
        c.accumulate = j.value("accumulate", false);
        c.chat_model = j.value("chat_model", "");
        c.embed_model = j.value("embed_model", "");
        c.rerank_model = j.value("rerank_model", "");
        return c;
    }
};

inline std::unique_ptr<Gateway> make_gateway(const ExperimentConfig& cfg,
                                             const std::filesystem::path& cache_dir) {
    GatewayConfig g = cfg.mock ? GatewayConfig::offline(cfg.seed) : GatewayConfig::from_env();
    g.cache_dir = cache_dir;
    if (!cfg.chat_model.empty()) g.chat.model = cfg.chat_model;
    if (!cfg.embed_model.empty()) g.embed.model = cfg.embed_model;
    if (!cfg.rerank_model.empty()) g.rerank.model = cfg.rerank_model;
    return std::make_unique<Gateway>(std::move(g));
}

/// Deterministic run identifier. Mock runs are addressed purely by their
/// config so replays land on identical artifacts; live runs get a timestamp.
inline std::string derive_run_id(const ExperimentConfig& cfg) {
    const std::string digest = sha256_hex(cfg.to_json().dump());
    if (cfg.mock) {
        return "mock-" + digest.substr(0, 12);
    }
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", std::gmtime(&now));
    return std::string(stamp) + "-" + digest.substr(0, 8);
}

/// Forms a schema per problem, ingests it with its trace, and stores the
/// summary-key embedding.
inline MemoryStore build_store(const std::vector<McqProblem>& problems, double lambda,
                               Gateway& gateway) {
    MemoryStore store(lambda);
    for (const auto& p : problems) {
        const ProblemSchema schema = form_representation(p, gateway);
        const auto [schema_id, trace_id] = store.ingest_example(EpisodicTrace::from_problem(p), schema);
        store.set_embedding(schema_id,
                            gateway.embed({schema_key_text(schema, KeyMode::summary)}).front());
    }
    return store;
}

/// Fisher-Yates over a hash-derived index stream; stable given (seed, id).
inline std::vector<std::string> shuffled_options(const std::vector<std::string>& options,
                                                 std::uint64_t seed, const std::string& id) {
    std::vector<std::string> out = options;
    for (std::size_t i = out.size() - 1; i > 0; --i) {
        const std::uint64_t h =
            hash64("shuffle:" + std::to_string(seed) + ":" + id + ":" + std::to_string(i));
        std::swap(out[i], out[h % (i + 1)]);
    }
    return out;
}

struct ModeSummary {
    Mode mode = Mode::zero_shot;
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0.0;
    std::size_t majority_correct = 0;
    std::size_t questions = 0;
};

struct WinRow {
    Mode baseline = Mode::one_shot;
    double sa_icl_accuracy = 0.0;
    double baseline_accuracy = 0.0;
    std::string outcome;  // win | tie | loss
};

struct RunReport {
    std::string run_id;
    json config_snapshot;
    std::vector<SolveRecord> records;
    std::vector<ModeSummary> per_mode;
    std::vector<WinRow> win_rows;
    std::vector<TokenCountRow> token_rows;
    std::vector<std::string> log;

    json to_json() const {
        json per_mode_json = json::array();
        for (const auto& m : per_mode) {
            per_mode_json.push_back({{"mode", to_string(m.mode)},
                                     {"correct", m.correct},
                                     {"total", m.total},
                                     {"accuracy", m.accuracy},
                                     {"majority_correct", m.majority_correct},
                                     {"questions", m.questions}});
        }
        json wins = json::array();
        for (const auto& w : win_rows) {
            wins.push_back({{"baseline", to_string(w.baseline)},
                            {"sa_icl_accuracy", w.sa_icl_accuracy},
                            {"baseline_accuracy", w.baseline_accuracy},
                            {"outcome", w.outcome}});
        }
        return json{{"run_id", run_id},
                    {"config", config_snapshot},
                    {"per_mode", per_mode_json},
                    {"win_rate", wins},
                    {"record_count", records.size()},
                    {"log", log}};
    }
};

namespace detail {

inline SolveRecord failure_record(const McqProblem& problem, Mode mode, std::size_t trial,
                                  const std::string& stage, const std::string& what) {
    SolveRecord r;
    r.question_id = problem.question_id;
    r.mode = mode;
    r.trial = trial;
    r.correct = false;
    r.failed_stage = stage + ": " + what;
    return r;
}

}  // namespace detail

/// Runs every (question, mode, trial) cell, degrading per-question failures
/// into recorded incorrect answers; aggregation is sorted and deterministic.
inline RunReport run_experiment(const ExperimentConfig& cfg, Gateway& gateway) {
    cfg.validate();
    RunReport report;
    report.run_id = derive_run_id(cfg);
    report.config_snapshot = cfg.to_json();

    gateway.set_warning_sink([&report](const std::string& w) { report.log.push_back("[warn] " + w); });

    std::vector<McqProblem> problems = load_mcq(cfg.dataset);
    std::sort(problems.begin(), problems.end(),
              [](const McqProblem& a, const McqProblem& b) { return a.question_id < b.question_id; });
    if (cfg.shuffle_options) {
        for (auto& p : problems) {
            p.options = shuffled_options(p.options, *cfg.shuffle_options, p.question_id);
        }
    }

    // knowledge base
    MemoryStore store;
    std::map<std::string, McqProblem> synthetic_example_by_target;
    if (!cfg.store.empty()) {
        store = load_store(cfg.store);
        store.set_lambda(cfg.lambda);
    } else if (!cfg.examples.empty()) {
        std::vector<McqProblem> pool = load_mcq(cfg.examples);
        if (cfg.condition.type == ConditionSpec::Type::synthetic) {
            const std::string level = to_string(cfg.condition.level);
            std::vector<McqProblem> filtered;
            for (const auto& e : pool) {
                if (e.similarity_level && *e.similarity_level == level) {
                    filtered.push_back(e);
                }
            }
            pool = std::move(filtered);
            if (pool.empty()) {
                throw ConfigError("no examples at similarity level " + level + " in " + cfg.examples);
            }
        }
        store = build_store(pool, cfg.lambda, gateway);
        if (cfg.condition.type == ConditionSpec::Type::synthetic) {
            for (const auto& e : pool) {
                if (e.source_id) {
                    synthetic_example_by_target.emplace(*e.source_id, e);
                }
            }
        }
    }

    const bool latent = cfg.condition.type == ConditionSpec::Type::latent;
    SaIclOptions sa_opts{cfg.tau, cfg.retrieval, cfg.key_mode, 1, cfg.theta_a};

    for (const auto& problem : problems) {
        // resolve the per-question example (and rank under latent conditions)
        std::optional<EpisodicTrace> example;
        std::size_t rank = 1;
        std::string resolve_error;
        try {
            if (cfg.condition.type == ConditionSpec::Type::synthetic) {
                auto it = synthetic_example_by_target.find(problem.question_id);
                if (it == synthetic_example_by_target.end()) {
                    throw ConfigError("no synthetic variant of " + problem.question_id + " at level " +
                                      to_string(cfg.condition.level));
                }
                example = EpisodicTrace::from_problem(it->second);
            } else if (latent) {
                const ProblemSchema target_schema = form_representation(problem, gateway);
                const RetrievalResult rr =
                    retrieve_prior_schema(schema_key_text(target_schema, cfg.key_mode), store,
                                          gateway, cfg.retrieval, cfg.key_mode);
                bin_by_rank(rr.rank_table, cfg.k_max);  // enforces >= k_max entries
                rank = bin_rank(cfg.condition.bin, cfg.k_max);
                const SchemaEntry& chosen = store.schema(rr.rank_table[rank - 1].schema_id);
                if (!chosen.source_trace) {
                    throw ConfigError("schema " + chosen.schema_id + " has no source trace");
                }
                example = store.trace(*chosen.source_trace);
            }
        } catch (const Error& e) {
            resolve_error = e.what();
        }
        sa_opts.rank = rank;

        bool accumulated = false;
        for (const Mode mode : cfg.modes) {
            for (int trial = 0; trial < cfg.trials_per_question; ++trial) {
                SolveRecord record;
                try {
                    if (!resolve_error.empty() && mode != Mode::zero_shot &&
                        mode != Mode::schema_only) {
                        throw ConfigError(resolve_error);
                    }
                    if (mode == Mode::sa_icl) {
                        SaIclOutcome outcome = run_sa_icl(problem, store, sa_opts, gateway);
                        record = std::move(outcome.record);
                        if (cfg.accumulate && !accumulated && outcome.activated) {
                            try {
                                auto trace = EpisodicTrace::from_problem(problem);
                                const auto [sid, tid] =
                                    store.ingest_example(trace, outcome.activated->schema);
                                store.set_embedding(
                                    sid, gateway
                                             .embed({schema_key_text(outcome.activated->schema,
                                                                     KeyMode::summary)})
                                             .front());
                                accumulated = true;
                            } catch (const Error& e) {
                                report.log.push_back("[warn] accumulate skipped for " +
                                                     problem.question_id + ": " + e.what());
                            }
                        }
                    } else {
                        record = run_baseline(problem, mode, example, gateway);
                    }
                    record.trial = static_cast<std::size_t>(trial);
                } catch (const Error& e) {
                    record = detail::failure_record(problem, mode, static_cast<std::size_t>(trial),
                                                    "setup", e.what());
                }
                if (!record.failed_stage.empty()) {
                    report.log.push_back("[fail] " + problem.question_id + " " + to_string(mode) +
                                         " trial " + std::to_string(trial) + ": " +
                                         record.failed_stage);
                }
                report.records.push_back(std::move(record));
            }
        }
    }

    std::sort(report.records.begin(), report.records.end(),
              [](const SolveRecord& a, const SolveRecord& b) {
                  if (a.question_id != b.question_id) return a.question_id < b.question_id;
                  if (a.mode != b.mode) return to_string(a.mode) < to_string(b.mode);
                  return a.trial < b.trial;
              });

    // per-mode aggregates
    for (const Mode mode : cfg.modes) {
        ModeSummary summary;
        summary.mode = mode;
        std::map<std::string, std::vector<bool>> by_question;
        for (const auto& r : report.records) {
            if (r.mode != mode) {
                continue;
            }
            ++summary.total;
            if (r.correct) {
                ++summary.correct;
            }
            by_question[r.question_id].push_back(r.correct);
        }
        summary.accuracy = summary.total == 0
                               ? 0.0
                               : static_cast<double>(summary.correct) /
                                     static_cast<double>(summary.total);
        summary.questions = by_question.size();
        for (const auto& [qid, trials] : by_question) {
            if (majority_correctness(trials)) {
                ++summary.majority_correct;
            }
        }
        report.per_mode.push_back(summary);
    }

    const auto mode_accuracy = [&report](Mode m) -> std::optional<double> {
        for (const auto& s : report.per_mode) {
            if (s.mode == m) {
                return s.accuracy;
            }
        }
        return std::nullopt;
    };
    if (const auto sa = mode_accuracy(Mode::sa_icl)) {
        for (const auto& s : report.per_mode) {
            if (s.mode == Mode::sa_icl) {
                continue;
            }
            WinRow row;
            row.baseline = s.mode;
            row.sa_icl_accuracy = *sa;
            row.baseline_accuracy = s.accuracy;
            row.outcome = *sa > s.accuracy ? "win" : (*sa == s.accuracy ? "tie" : "loss");
            report.win_rows.push_back(row);
        }
    }

    report.token_rows = token_count_table(report.records);
    return report;
}

// ---------------------------------------------------------------------------
// Artifact writers
// ---------------------------------------------------------------------------

inline std::string render_report_md(const RunReport& report) {
    const auto& cfg = report.config_snapshot;
    std::string md = "# SA-ICL run " + report.run_id + "\n\n";
    md += "- dataset: `" + cfg.value("dataset", "") + "`\n";
    md += "- condition: " + cfg.value("condition", "none") + "\n";
    md += "- trials per question: " + std::to_string(cfg.value("trials_per_question", 1)) + "\n";
    md += "- tau: " + format_double(cfg.value("tau", 1.0)) +
          ", lambda: " + format_double(cfg.value("lambda", 0.0)) + "\n";
    md += "- retrieval: " + cfg.value("retrieval", "cosine") +
          " over " + cfg.value("key_mode", "summary") + " keys\n";
    md += "- seed: " + std::to_string(cfg.value("seed", 0ULL)) +
          ", mock: " + (cfg.value("mock", false) ? std::string("yes") : std::string("no")) + "\n\n";

    md += "## Accuracy (per trial)\n\n| mode | correct | total | accuracy |\n|---|---|---|---|\n";
    for (const auto& m : report.per_mode) {
        md += "| " + to_string(m.mode) + " | " + std::to_string(m.correct) + " | " +
              std::to_string(m.total) + " | " + format_double(m.accuracy) + " |\n";
    }

    md += "\n## Majority correctness\n\n| mode | majority correct | questions |\n|---|---|---|\n";
    for (const auto& m : report.per_mode) {
        md += "| " + to_string(m.mode) + " | " + std::to_string(m.majority_correct) + " | " +
              std::to_string(m.questions) + " |\n";
    }

    if (!report.win_rows.empty()) {
        md += "\n## SA-ICL vs baselines\n\n"
              "Cells are weighted equally when aggregated across runs (`sail report`); "
              "ties count as non-wins and are reported separately.\n\n"
              "| baseline | sa_icl | baseline accuracy | outcome |\n|---|---|---|---|\n";
        for (const auto& w : report.win_rows) {
            md += "| " + to_string(w.baseline) + " | " + format_double(w.sa_icl_accuracy) + " | " +
                  format_double(w.baseline_accuracy) + " | " + w.outcome + " |\n";
        }
    }

    if (!report.log.empty()) {
        md += "\n## Log\n\n";
        for (const auto& line : report.log) {
            md += "- " + line + "\n";
        }
    }
    return md;
}

inline std::string winrate_csv(const RunReport& report) {
    std::string csv = "baseline,sa_icl_accuracy,baseline_accuracy,outcome\n";
    for (const auto& w : report.win_rows) {
        csv += to_string(w.baseline) + "," + format_double(w.sa_icl_accuracy) + "," +
               format_double(w.baseline_accuracy) + "," + w.outcome + "\n";
    }
    return csv;
}

inline void write_run_artifacts(const RunReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    std::string transcripts;
    for (const auto& r : report.records) {
        transcripts += r.to_json().dump() + "\n";
    }
    write_file_atomic(dir / "transcripts.jsonl", transcripts);
    write_file_atomic(dir / "report.json", report.to_json().dump(2) + "\n");
    write_file_atomic(dir / "report.md", render_report_md(report));
    write_file_atomic(dir / "logprobs.html", logprob_report_html(report.records));
    write_file_atomic(dir / "logprobs.txt", logprob_report_ansi(report.records));

    std::vector<std::string> mode_order;
    for (const auto& m : report.per_mode) {
        mode_order.push_back(to_string(m.mode));
    }
    write_file_atomic(dir / "tokens.csv", token_count_csv(report.token_rows, mode_order));
    write_file_atomic(dir / "winrate.csv", winrate_csv(report));

    std::string log;
    for (const auto& line : report.log) {
        log += line + "\n";
    }
    write_file_atomic(dir / "run.log", log);
}

}  // namespace sail
