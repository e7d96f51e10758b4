// sail — batch CLI for schema-activated in-context learning runs.
//
// Subcommands: ingest, synth, density, run, ablate, report.
// Exit codes: 0 success, 1 run-level failure, 2 usage error.

#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sail/sail.hpp"

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string cache_dir;
    std::string runs_root = "runs";
    bool mock = false;
    std::uint64_t seed = 0;
    double tau = 1.0;
    double lambda = 0.0;
    std::string retrieval = "cosine";
    std::string key_mode = "summary";
    double theta_a = 0.85;
    bool allow_self_match = false;
    std::string shuffle_options;  // empty = off, else a seed
    std::string chat_model;
    std::string embed_model;
    std::string rerank_model;
};

void add_global_flags(CLI::App* cmd, GlobalOpts& g) {
    cmd->add_option("--config", g.config_path, "JSON config file; explicit flags override it");
    cmd->add_option("--cache-dir", g.cache_dir, "response cache directory (default $SAIL_CACHE_DIR or .sail_cache)");
    cmd->add_option("--runs-root", g.runs_root, "directory that receives runs/<run_id>/");
    cmd->add_flag("--mock", g.mock, "force the deterministic offline backends");
    cmd->add_option("--seed", g.seed, "seed for the mock backends and shuffles");
    cmd->add_option("--tau", g.tau, "episodic selection threshold in [0,1]")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--lambda", g.lambda, "forgetting rate (>= 0)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--retrieval", g.retrieval, "cosine | rerank")
        ->check(CLI::IsMember({"cosine", "rerank"}));
    cmd->add_option("--key-mode", g.key_mode, "summary | full")
        ->check(CLI::IsMember({"summary", "full"}));
    cmd->add_option("--theta-a", g.theta_a, "assimilation/accommodation cosine threshold");
    cmd->add_flag("--allow-self-match", g.allow_self_match, "keep exact-id matches in density analysis");
    cmd->add_option("--shuffle-options", g.shuffle_options, "shuffle option order with this seed");
    cmd->add_option("--chat-model", g.chat_model, "chat model identifier");
    cmd->add_option("--embed-model", g.embed_model, "embedding model identifier");
    cmd->add_option("--rerank-model", g.rerank_model, "rerank model identifier");
}

std::filesystem::path resolve_cache_dir(const GlobalOpts& g) {
    if (!g.cache_dir.empty()) {
        return g.cache_dir;
    }
    return sail::env_or("SAIL_CACHE_DIR", ".sail_cache");
}

/// Applies a JSON config file underneath flags the user did not pass.
void overlay_config_file(const CLI::App* cmd, GlobalOpts& g) {
    if (g.config_path.empty()) {
        return;
    }
    const sail::json cfg = sail::json::parse(sail::read_file(g.config_path));
    const auto not_set = [cmd](const std::string& flag) {
        const CLI::Option* opt = cmd->get_option_no_throw(flag);
        return opt == nullptr || opt->count() == 0;
    };
    if (cfg.contains("mock") && not_set("--mock")) g.mock = cfg.at("mock").get<bool>();
    if (cfg.contains("seed") && not_set("--seed")) g.seed = cfg.at("seed").get<std::uint64_t>();
    if (cfg.contains("tau") && not_set("--tau")) g.tau = cfg.at("tau").get<double>();
    if (cfg.contains("lambda") && not_set("--lambda")) g.lambda = cfg.at("lambda").get<double>();
    if (cfg.contains("retrieval") && not_set("--retrieval")) g.retrieval = cfg.at("retrieval");
    if (cfg.contains("key_mode") && not_set("--key-mode")) g.key_mode = cfg.at("key_mode");
    if (cfg.contains("theta_a") && not_set("--theta-a")) g.theta_a = cfg.at("theta_a").get<double>();
    if (cfg.contains("chat_model") && not_set("--chat-model")) g.chat_model = cfg.at("chat_model");
    if (cfg.contains("embed_model") && not_set("--embed-model")) g.embed_model = cfg.at("embed_model");
    if (cfg.contains("rerank_model") && not_set("--rerank-model")) g.rerank_model = cfg.at("rerank_model");
}

std::unique_ptr<sail::Gateway> gateway_from(const GlobalOpts& g) {
    sail::GatewayConfig cfg =
        g.mock ? sail::GatewayConfig::offline(g.seed) : sail::GatewayConfig::from_env();
    cfg.cache_dir = resolve_cache_dir(g);
    if (!g.chat_model.empty()) cfg.chat.model = g.chat_model;
    if (!g.embed_model.empty()) cfg.embed.model = g.embed_model;
    if (!g.rerank_model.empty()) cfg.rerank.model = g.rerank_model;
    return std::make_unique<sail::Gateway>(std::move(cfg));
}

sail::ExperimentConfig experiment_config(const GlobalOpts& g, const std::string& dataset,
                                         const std::string& examples, const std::string& store,
                                         const std::vector<std::string>& modes,
                                         const std::string& condition, int trials) {
    sail::ExperimentConfig cfg;
    cfg.dataset = dataset;
    cfg.examples = examples;
    cfg.store = store;
    for (const auto& m : modes) {
        cfg.modes.push_back(sail::mode_from_string(m));
    }
    cfg.condition = sail::ConditionSpec::parse(condition);
    cfg.trials_per_question = trials;
    cfg.tau = g.tau;
    cfg.lambda = g.lambda;
    cfg.retrieval = sail::retrieval_method_from_string(g.retrieval);
    cfg.key_mode = sail::key_mode_from_string(g.key_mode);
    cfg.seed = g.seed;
    cfg.mock = g.mock;
    cfg.theta_a = g.theta_a;
    if (!g.shuffle_options.empty()) {
        cfg.shuffle_options = std::stoull(g.shuffle_options);
    }
    cfg.allow_self_match = g.allow_self_match;
    cfg.chat_model = g.chat_model;
    cfg.embed_model = g.embed_model;
    cfg.rerank_model = g.rerank_model;
    return cfg;
}

int execute_run(const sail::ExperimentConfig& cfg, const GlobalOpts& g) {
    const std::string run_id = sail::derive_run_id(cfg);
    // never overwrite an existing run; replays of the same config get a
    // numbered sibling with byte-identical artifacts
    std::filesystem::path run_dir = std::filesystem::path(g.runs_root) / run_id;
    for (int replay = 2; std::filesystem::exists(run_dir); ++replay) {
        run_dir = std::filesystem::path(g.runs_root) / (run_id + "-r" + std::to_string(replay));
    }
    std::filesystem::create_directories(run_dir);
    // snapshot first so a crashed run is still reproducible
    sail::write_file_atomic(run_dir / "config.json", cfg.to_json().dump(2) + "\n");

    auto gateway = sail::make_gateway(cfg, resolve_cache_dir(g));
    const sail::RunReport report = sail::run_experiment(cfg, *gateway);
    sail::write_run_artifacts(report, run_dir);

    std::cout << "run " << report.run_id << " -> " << run_dir.string() << "\n";
    for (const auto& m : report.per_mode) {
        std::cout << "  " << sail::to_string(m.mode) << ": " << m.correct << "/" << m.total
                  << " (" << sail::format_double(m.accuracy) << ")\n";
    }
    return 0;
}

int cmd_ingest(const GlobalOpts& g, const std::string& dataset, const std::string& store_path) {
    auto gateway = gateway_from(g);
    const auto problems = sail::load_mcq(dataset);
    sail::MemoryStore store = sail::build_store(problems, g.lambda, *gateway);
    sail::save_store(store, store_path);
    std::cout << "ingested " << store.traces().size() << " examples into " << store_path << "\n";
    return 0;
}

int cmd_synth(const GlobalOpts& g, const std::string& dataset, const std::string& levels_csv,
              std::string out_path) {
    auto gateway = gateway_from(g);
    const auto problems = sail::load_mcq(dataset);
    std::vector<sail::SimilarityLevel> levels;
    std::size_t start = 0;
    while (start <= levels_csv.size()) {
        const auto comma = levels_csv.find(',', start);
        const std::string piece = levels_csv.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!piece.empty()) {
            levels.push_back(sail::similarity_level_from_string(sail::trim(piece)));
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (levels.empty()) {
        std::cerr << "no similarity levels given\n";
        return 2;
    }
    if (out_path.empty()) {
        out_path = dataset;
        const auto dot = out_path.rfind(".jsonl");
        if (dot != std::string::npos) {
            out_path = out_path.substr(0, dot);
        }
        out_path += ".synthetic.jsonl";
    }
    std::vector<sail::McqProblem> variants;
    std::size_t failures = 0;
    for (const auto& p : problems) {
        for (const auto level : levels) {
            try {
                variants.push_back(sail::generate_synthetic(p, level, *gateway));
            } catch (const sail::Error& e) {
                ++failures;
                std::cerr << "[skip] " << p.question_id << "." << sail::to_string(level) << ": "
                          << e.what() << "\n";
            }
        }
    }
    sail::save_mcq(variants, out_path);
    std::cout << "wrote " << variants.size() << " variants to " << out_path;
    if (failures > 0) {
        std::cout << " (" << failures << " skipped)";
    }
    std::cout << "\n";
    return failures == 0 ? 0 : 1;
}

int cmd_density(const GlobalOpts& g, const std::string& dataset, const std::string& knowledge_path,
                std::size_t k_max, double sigma) {
    auto gateway = gateway_from(g);
    const auto questions = sail::load_mcq(dataset);
    const auto knowledge = sail::load_mcq(knowledge_path);
    const auto key_mode = sail::key_mode_from_string(g.key_mode);

    // density is computed over mental representations, so both sides are
    // abstracted before reranking
    std::vector<sail::KnowledgeDoc> query_docs;
    for (const auto& q : questions) {
        query_docs.push_back(
            {q.question_id, sail::schema_key_text(sail::form_representation(q, *gateway), key_mode)});
    }
    std::vector<sail::KnowledgeDoc> knowledge_docs;
    for (const auto& k : knowledge) {
        knowledge_docs.push_back(
            {k.question_id, sail::schema_key_text(sail::form_representation(k, *gateway), key_mode)});
    }

    const sail::DensityMatrix m = sail::relevance_matrix(query_docs, knowledge_docs, *gateway,
                                                         k_max, sigma, g.allow_self_match);

    // reuse the run-id scheme so density outputs land in their own directory
    sail::json stamp{{"command", "density"}, {"dataset", dataset}, {"knowledge", knowledge_path},
                     {"k_max", k_max},       {"sigma", sigma},     {"seed", g.seed},
                     {"mock", g.mock},       {"key_mode", g.key_mode}};
    const std::string run_id =
        (g.mock ? "mock-" : "") + sail::sha256_hex(stamp.dump()).substr(0, 12);
    const std::filesystem::path run_dir = std::filesystem::path(g.runs_root) / run_id;
    std::filesystem::create_directories(run_dir);
    sail::write_file_atomic(run_dir / "config.json", stamp.dump(2) + "\n");
    sail::export_heatmap_csv(m, run_dir / "density.csv", run_dir / "density_summary.csv");

    // per-domain decay means, reported (not asserted) against the paper's
    // chemistry/physics reference points
    std::map<std::string, std::vector<std::string>> by_domain;
    for (const auto& q : questions) {
        by_domain[q.domain_tag].push_back(q.question_id);
    }
    std::cout << "density matrix " << m.question_ids.size() << " x " << m.k_max << " -> "
              << run_dir.string() << "\n";
    for (const auto& [domain, ids] : by_domain) {
        sail::DensityMatrix sub;
        sub.k_max = m.k_max;
        sub.sigma = m.sigma;
        for (const auto& id : ids) {
            sub.question_ids.push_back(id);
            sub.rho.push_back(m.rho[m.row_of(id)]);
        }
        try {
            std::cout << "  theta_bar(" << domain << ", k=" << m.k_max
                      << ") = " << sail::format_double(sail::domain_mean_decay(sub, m.k_max)) << "\n";
        } catch (const sail::Error& e) {
            std::cout << "  theta_bar(" << domain << ") undefined: " << e.what() << "\n";
        }
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    std::vector<sail::json> reports;
    for (const auto& dir : run_dirs) {
        const auto path = std::filesystem::path(dir) / "report.json";
        if (!std::filesystem::exists(path)) {
            std::cerr << "[skip] " << dir << ": no report.json\n";
            continue;
        }
        reports.push_back(sail::json::parse(sail::read_file(path)));
    }
    // one win-rate cell per (run, baseline); cells weighted equally
    std::map<std::string, std::vector<sail::WinRateCell>> cells_by_baseline;
    for (const auto& r : reports) {
        for (const auto& w : r.at("win_rate")) {
            cells_by_baseline[w.at("baseline").get<std::string>()].push_back(
                {w.at("sa_icl_accuracy").get<double>(), w.at("baseline_accuracy").get<double>()});
        }
    }
    std::string csv = "baseline,win_rate,wins,ties,cells\n";
    std::string md = "# Aggregate win rates\n\nCells are weighted equally; ties are non-wins.\n\n"
                     "| baseline | win rate | wins | ties | cells |\n|---|---|---|---|---|\n";
    for (const auto& [baseline, cells] : cells_by_baseline) {
        const sail::WinRateSummary s = sail::win_rate(cells);
        csv += baseline + "," + sail::format_double(s.rate) + "," + std::to_string(s.wins) + "," +
               std::to_string(s.ties) + "," + std::to_string(s.cells) + "\n";
        md += "| " + baseline + " | " + sail::format_double(s.rate) + " | " +
              std::to_string(s.wins) + " | " + std::to_string(s.ties) + " | " +
              std::to_string(s.cells) + " |\n";
    }
    if (cells_by_baseline.empty()) {
        std::cout << "no sa_icl win-rate rows found in the given runs\n";
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        sail::write_file_atomic(std::filesystem::path(out_dir) / "winrate.csv", csv);
        sail::write_file_atomic(std::filesystem::path(out_dir) / "report.md", md);
        std::cout << "wrote aggregate report to " << out_dir << "\n";
    } else {
        std::cout << md;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Schema-activated in-context learning harness"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    GlobalOpts g;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "build a memory store from a JSONL dataset");
    std::string ingest_dataset;
    std::string ingest_store = "store.json";
    ingest->add_option("--dataset", ingest_dataset, "input JSONL")->required();
    ingest->add_option("--store", ingest_store, "output store path");
    add_global_flags(ingest, g);

    // synth
    auto* synth = app.add_subcommand("synth", "generate synthetic variants at similarity levels");
    std::string synth_dataset;
    std::string synth_levels = "essentially_same,similar,different";
    std::string synth_out;
    synth->add_option("--dataset", synth_dataset, "source JSONL")->required();
    synth->add_option("--levels", synth_levels, "comma-separated levels");
    synth->add_option("--out", synth_out, "output JSONL (default <dataset>.synthetic.jsonl)");
    add_global_flags(synth, g);

    // density
    auto* density = app.add_subcommand("density", "latent knowledge-density analysis");
    std::string density_dataset;
    std::string density_knowledge;
    std::size_t density_kmax = sail::kDefaultKMax;
    double density_sigma = sail::kDefaultSigma;
    density->add_option("--dataset", density_dataset, "questions JSONL")->required();
    density->add_option("--knowledge", density_knowledge, "knowledge-base JSONL")->required();
    density->add_option("--k-max", density_kmax, "retrieval rank depth");
    density->add_option("--sigma", density_sigma, "quality threshold (diagnostic)");
    add_global_flags(density, g);

    // run
    auto* run = app.add_subcommand("run", "execute an experiment grid");
    std::string run_dataset;
    std::string run_examples;
    std::string run_store;
    std::vector<std::string> run_modes;
    std::string run_condition = "none";
    int run_trials = 1;
    std::string run_from;
    run->add_option("--dataset", run_dataset, "target questions JSONL");
    run->add_option("--examples", run_examples, "knowledge pool JSONL");
    run->add_option("--store", run_store, "prebuilt memory store");
    run->add_option("--mode", run_modes, "mode (repeatable)");
    run->add_option("--condition", run_condition, "synthetic:<level> | latent:<bin>");
    run->add_option("--trials", run_trials, "trials per question (odd)");
    run->add_option("--from", run_from, "re-run from a runs/<id>/config.json snapshot");
    run->add_flag("--accumulate", "write activated schemas back into the store");
    add_global_flags(run, g);

    // ablate
    auto* ablate = app.add_subcommand("ablate", "activation ablation grid");
    std::string ablate_dataset;
    std::string ablate_examples;
    std::string ablate_store;
    std::string ablate_modes = "sa_icl,one_shot,schema_only,example_schema_only";
    std::string ablate_condition = "synthetic:essentially_same";
    int ablate_trials = 1;
    ablate->add_option("--dataset", ablate_dataset, "target questions JSONL")->required();
    ablate->add_option("--examples", ablate_examples, "knowledge pool JSONL");
    ablate->add_option("--store", ablate_store, "prebuilt memory store");
    ablate->add_option("--modes", ablate_modes, "comma-separated modes");
    ablate->add_option("--condition", ablate_condition, "synthetic:<level> | latent:<bin>");
    ablate->add_option("--trials", ablate_trials, "trials per question (odd)");
    add_global_flags(ablate, g);

    // report
    auto* report = app.add_subcommand("report", "aggregate win rates across run directories");
    std::vector<std::string> report_runs;
    std::string report_out;
    report->add_option("runs", report_runs, "run directories")->required();
    report->add_option("--out", report_out, "output directory (default: print)");
    add_global_flags(report, g);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        const CLI::App* active = app.get_subcommands().front();
        overlay_config_file(active, g);

        if (ingest->parsed()) {
            return cmd_ingest(g, ingest_dataset, ingest_store);
        }
        if (synth->parsed()) {
            return cmd_synth(g, synth_dataset, synth_levels, synth_out);
        }
        if (density->parsed()) {
            return cmd_density(g, density_dataset, density_knowledge, density_kmax, density_sigma);
        }
        if (run->parsed()) {
            sail::ExperimentConfig cfg;
            if (!run_from.empty()) {
                cfg = sail::ExperimentConfig::from_json(sail::json::parse(sail::read_file(run_from)));
            } else {
                if (run_modes.empty()) {
                    std::cerr << "at least one --mode is required\n";
                    return 2;
                }
                cfg = experiment_config(g, run_dataset, run_examples, run_store, run_modes,
                                        run_condition, run_trials);
                cfg.accumulate = run->count("--accumulate") > 0;
            }
            return execute_run(cfg, g);
        }
        if (ablate->parsed()) {
            std::vector<std::string> modes;
            std::size_t start = 0;
            while (start <= ablate_modes.size()) {
                const auto comma = ablate_modes.find(',', start);
                modes.push_back(sail::trim(ablate_modes.substr(
                    start, comma == std::string::npos ? std::string::npos : comma - start)));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
            return execute_run(experiment_config(g, ablate_dataset, ablate_examples, ablate_store,
                                                 modes, ablate_condition, ablate_trials),
                               g);
        }
        if (report->parsed()) {
            return cmd_report(report_runs, report_out);
        }
        std::cerr << "unknown command\n";
        return 2;
    } catch (const sail::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
